//! Small dense helpers and the monomial (permutation times phase) matrices
//! that every group action in this crate reduces to.

use nalgebra::DMatrix;

use crate::C64;

pub type CMat = DMatrix<C64>;

pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `exp(2πi·k/n)`, exact at multiples of a quarter turn.
pub fn root_of_unity(k: usize, n: usize) -> C64 {
    let k = k % n;
    if (4 * k).is_multiple_of(n) {
        return [ONE, C64 { re: 0.0, im: 1.0 }, -ONE, C64 { re: 0.0, im: -1.0 }][4 * k / n];
    }
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = x * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn unitarity_residual(a: &CMat) -> f64 {
    let n = a.nrows();
    max_abs_diff(&(a * a.adjoint()), &CMat::identity(n, n))
}

/// Numerical rank from singular values.
pub fn rank(a: &CMat, tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    a.clone().singular_values().iter().filter(|s| **s > tol).count()
}

/// A matrix with exactly one nonzero entry per column: column `j` is
/// `phase[j] * e_{target[j]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub target: Vec<usize>,
    pub phase: Vec<C64>,
}

impl Monomial {
    pub fn identity(n: usize) -> Self {
        Monomial { target: (0..n).collect(), phase: vec![ONE; n] }
    }

    pub fn permutation(target: Vec<usize>) -> Self {
        let n = target.len();
        Monomial { target, phase: vec![ONE; n] }
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Monomial) -> Monomial {
        assert_eq!(self.dim(), other.dim());
        let target = other.target.iter().map(|&t| self.target[t]).collect();
        let phase = other
            .target
            .iter()
            .zip(&other.phase)
            .map(|(&t, &p)| p * self.phase[t])
            .collect();
        Monomial { target, phase }
    }

    pub fn adjoint(&self) -> Monomial {
        let n = self.dim();
        let mut target = vec![0; n];
        let mut phase = vec![ONE; n];
        for j in 0..n {
            target[self.target[j]] = j;
            phase[self.target[j]] = self.phase[j].conj();
        }
        Monomial { target, phase }
    }

    pub fn conj(&self) -> Monomial {
        Monomial { target: self.target.clone(), phase: self.phase.iter().map(|p| p.conj()).collect() }
    }

    pub fn kron(&self, other: &Monomial) -> Monomial {
        let nb = other.dim();
        let mut target = Vec::with_capacity(self.dim() * nb);
        let mut phase = Vec::with_capacity(self.dim() * nb);
        for i in 0..self.dim() {
            for j in 0..nb {
                target.push(self.target[i] * nb + other.target[j]);
                phase.push(self.phase[i] * other.phase[j]);
            }
        }
        Monomial { target, phase }
    }

    pub fn to_matrix(&self) -> CMat {
        let n = self.dim();
        let mut m = CMat::zeros(n, n);
        for j in 0..n {
            m[(self.target[j], j)] = self.phase[j];
        }
        m
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.dim()];
        for &t in &self.target {
            if t >= seen.len() || seen[t] {
                return false;
            }
            seen[t] = true;
        }
        true
    }
}

pub fn kron_all(ms: &[Monomial]) -> Monomial {
    ms.iter().fold(Monomial::identity(1), |acc, m| acc.kron(m))
}
