//! Frobenius algebras as dense structure constants, with axiom checks.
//!
//! Tensors use the Kronecker convention of [`crate::linalg::kron`]: the pair
//! index of `|i⟩⊗|j⟩` is `i·n + j`.

use serde::Serialize;

use crate::groups::{cosets, FiniteGroup, ProjectiveRep, SubgroupEmbedding, TwoCocycle};
use crate::linalg::{kron, max_abs, max_abs_diff, CMat, ONE, ZERO};
use crate::{Error, Result, C64};

pub const AXIOM_TOL: f64 = 1e-10;

/// Extra structure used to decide haploidness.
#[derive(Clone, Debug)]
pub enum Equivariance {
    /// Object of `Rep G`: a group action on the carrier.
    Action(Vec<CMat>),
    /// Object of `Vect^G`: the degree of every basis vector.
    Grading { group: FiniteGroup, degrees: Vec<usize> },
    None,
}

/// Carrier realized as a subspace of `End(V)`-valued functions on a group.
#[derive(Clone, Debug)]
pub struct FunctionRealization {
    pub group: FiniteGroup,
    pub vdim: usize,
    /// Orthonormal columns spanning the carrier inside `C^{|G|} ⊗ End V`.
    pub basis: CMat,
}

#[derive(Clone, Debug)]
pub struct FrobeniusAlgebra {
    pub label: String,
    /// `n × n²`.
    pub mu: CMat,
    /// `n² × n`.
    pub delta: CMat,
    /// `n × 1`.
    pub eta: CMat,
    /// `1 × n`.
    pub epsilon: CMat,
    pub equivariance: Equivariance,
    pub realization: Option<FunctionRealization>,
}

impl FrobeniusAlgebra {
    pub fn dim(&self) -> usize {
        self.mu.nrows()
    }

    pub fn multiply(&self, x: &CMat, y: &CMat) -> CMat {
        &self.mu * kron(x, y)
    }
}

fn basis_vec(n: usize, i: usize) -> CMat {
    let mut v = CMat::zeros(n, 1);
    v[(i, 0)] = ONE;
    v
}

/// `C^αK` with `μ|k⟩|h⟩ = α(k,h)|kh⟩`, `η = |e⟩`,
/// `Δ|k⟩ = (1/|K|) Σ_h α(kh⁻¹,h)⁻¹ |kh⁻¹⟩|h⟩` and `ε|k⟩ = |K|δ_{k,e}`.
/// Basis vectors are graded by the parent elements of `k`.
pub fn twisted_group_algebra(k: &SubgroupEmbedding, alpha: &TwoCocycle) -> Result<FrobeniusAlgebra> {
    let kg = k.group();
    if alpha.group() != kg {
        return Err(Error::InvalidCocycle { group: kg.name().into(), residual: f64::NAN });
    }
    alpha.validate()?;
    let n = kg.order();
    let mut mu = CMat::zeros(n, n * n);
    let mut delta = CMat::zeros(n * n, n);
    for a in kg.elements() {
        for b in kg.elements() {
            mu[(kg.mul(a, b), a * n + b)] = alpha.value(a, b);
        }
    }
    for x in kg.elements() {
        for h in kg.elements() {
            let a = kg.mul(x, kg.inv(h));
            delta[(a * n + h, x)] = C64::new(1.0 / n as f64, 0.0) / alpha.value(a, h);
        }
    }
    let mut epsilon = CMat::zeros(1, n);
    epsilon[(0, kg.identity())] = C64::new(n as f64, 0.0);
    Ok(FrobeniusAlgebra {
        label: format!("C^{}{}", alpha.label(), kg.name()),
        mu,
        delta,
        eta: basis_vec(n, kg.identity()),
        epsilon,
        equivariance: Equivariance::Grading { group: k.parent().clone(), degrees: kg.elements().map(|i| k.to_parent(i)).collect() },
        realization: None,
    })
}

/// The alternative comultiplication-like map `Δ′|h⟩ = (1/|K|) Σ_k |k⟩ ⊗ τL(k)|h⟩`.
pub fn twisted_coproduct_prime(kg: &FiniteGroup, tau: &TwoCocycle) -> CMat {
    let n = kg.order();
    let mut d = CMat::zeros(n * n, n);
    for h in kg.elements() {
        for k in kg.elements() {
            d[(k * n + kg.mul(k, h), h)] = tau.value(k, h) / n as f64;
        }
    }
    d
}

/// Relation between `Δ′` and `Δ` as a change of basis on the two tensor
/// factors: `Δ′ = D ∘ (S ⊗ id) ∘ Δ` with `S` the inversion map and `D`
/// diagonal. `D` is recovered entrywise and the identity re-checked.
#[derive(Clone, Debug, Serialize)]
pub struct CoproductRelation {
    pub residual: f64,
    pub min_abs_diagonal: f64,
}

pub fn coproduct_prime_relation(alg: &FrobeniusAlgebra, kg: &FiniteGroup, tau: &TwoCocycle) -> CoproductRelation {
    let n = kg.order();
    let prime = twisted_coproduct_prime(kg, tau);
    let mut s = CMat::zeros(n, n);
    for a in kg.elements() {
        s[(kg.inv(a), a)] = ONE;
    }
    let moved = kron(&s, &CMat::identity(n, n)) * &alg.delta;
    let mut diag = vec![None::<C64>; n * n];
    let mut consistent = true;
    for r in 0..n * n {
        for c in 0..n {
            let (p, m) = (prime[(r, c)], moved[(r, c)]);
            if m.norm() > 1e-14 {
                let ratio = p / m;
                match diag[r] {
                    None => diag[r] = Some(ratio),
                    Some(d) => consistent &= (d - ratio).norm() < 1e-12,
                }
            } else if p.norm() > 1e-14 {
                consistent = false;
            }
        }
    }
    let dvals: Vec<C64> = diag.iter().map(|d| d.unwrap_or(ONE)).collect();
    let dmat = CMat::from_diagonal(&nalgebra::DVector::from_vec(dvals.clone()));
    let residual = if consistent { max_abs_diff(&(dmat * moved), &prime) } else { f64::INFINITY };
    CoproductRelation { residual, min_abs_diagonal: dvals.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min) }
}

/// Functions on `G` with pointwise product; the left regular object of
/// `Rep G`.
pub fn regular_function_algebra(g: &FiniteGroup) -> FrobeniusAlgebra {
    let n = g.order();
    let mut mu = CMat::zeros(n, n * n);
    let mut delta = CMat::zeros(n * n, n);
    for x in g.elements() {
        mu[(x, x * n + x)] = ONE;
        delta[(x * n + x, x)] = ONE;
    }
    FrobeniusAlgebra {
        label: format!("Fun({})", g.name()),
        mu,
        delta,
        eta: CMat::from_element(n, 1, ONE),
        epsilon: CMat::from_element(1, n, ONE),
        equivariance: Equivariance::Action(g.elements().map(|x| g.left_mono(x).to_matrix()).collect()),
        realization: Some(FunctionRealization { group: g.clone(), vdim: 1, basis: CMat::identity(n, n) }),
    }
}

/// `End(V)`-valued functions on `G` with `f(gk) = ρ(k)⁻¹ f(g) ρ(k)`, pointwise
/// product, trace `Σ_g tr f(g)`, and left translation as the `G` action.
/// `Δ` is the dual of `μ` under the trace pairing.
pub fn induced_endomorphism_algebra(g: &FiniteGroup, k: &SubgroupEmbedding, v: &ProjectiveRep) -> Result<FrobeniusAlgebra> {
    if k.parent() != g || v.group() != k.group() {
        return Err(Error::Representation("representation is not on the given subgroup".into()));
    }
    if v.projective_residual() > 1e-10 {
        return Err(Error::Representation(format!("not {}-projective", v.cocycle().label())));
    }
    let d = v.dim();
    let d2 = d * d;
    let amb = g.order() * d2;
    let reps = cosets(g, k)?.representatives;
    let n = reps.len() * d2;
    let mut basis = CMat::zeros(amb, n);
    let norm = 1.0 / (k.order() as f64).sqrt();
    for (ri, &r) in reps.iter().enumerate() {
        for a in 0..d {
            for b in 0..d {
                let mut e = CMat::zeros(d, d);
                e[(a, b)] = ONE;
                for kk in k.group().elements() {
                    let rho = v.matrix(kk);
                    let val = rho.adjoint() * &e * rho;
                    let x = g.mul(r, k.to_parent(kk));
                    for i in 0..d {
                        for j in 0..d {
                            basis[(x * d2 + i * d + j, ri * d2 + a * d + b)] = val[(i, j)] * norm;
                        }
                    }
                }
            }
        }
    }
    let function = |col: usize| basis.column(col).into_owned();
    let pointwise = |f: &nalgebra::DVector<C64>, h: &nalgebra::DVector<C64>| {
        let mut out = nalgebra::DVector::zeros(amb);
        for x in g.elements() {
            let fm = CMat::from_fn(d, d, |i, j| f[x * d2 + i * d + j]);
            let hm = CMat::from_fn(d, d, |i, j| h[x * d2 + i * d + j]);
            let p = fm * hm;
            for i in 0..d {
                for j in 0..d {
                    out[x * d2 + i * d + j] = p[(i, j)];
                }
            }
        }
        out
    };
    let qa = basis.adjoint();
    let mut mu = CMat::zeros(n, n * n);
    for i in 0..n {
        for j in 0..n {
            let c = &qa * pointwise(&function(i), &function(j));
            mu.column_mut(i * n + j).copy_from(&c);
        }
    }
    let mut unit = nalgebra::DVector::zeros(amb);
    for x in g.elements() {
        for i in 0..d {
            unit[x * d2 + i * d + i] = ONE;
        }
    }
    let eta = CMat::from_column_slice(n, 1, (&qa * unit).as_slice());
    let mut epsilon = CMat::zeros(1, n);
    for c in 0..n {
        let f = function(c);
        epsilon[(0, c)] = g.elements().map(|x| (0..d).map(|i| f[x * d2 + i * d + i]).sum::<C64>()).sum();
    }
    // Pairing κ(x, y) = ε(μ(x ⊗ y)); Δ(x) = Σ_ij κ⁻¹_ij μ(x ⊗ b_i) ⊗ b_j.
    let gram = &epsilon * &mu;
    let gram = CMat::from_fn(n, n, |i, j| gram[(0, i * n + j)]);
    let ginv = gram.clone().try_inverse().ok_or_else(|| Error::Internal("degenerate trace pairing".into()))?;
    let mut delta = CMat::zeros(n * n, n);
    for x in 0..n {
        for i in 0..n {
            for j in 0..n {
                if ginv[(i, j)] == ZERO {
                    continue;
                }
                for r in 0..n {
                    delta[(r * n + j, x)] += ginv[(i, j)] * mu[(r, x * n + i)];
                }
            }
        }
    }
    let action = g
        .elements()
        .map(|h| {
            // (l_h f)(x) = f(h⁻¹x): ambient block x takes block h⁻¹x.
            let mut l = CMat::zeros(amb, amb);
            for x in g.elements() {
                let src = g.mul(g.inv(h), x);
                for t in 0..d2 {
                    l[(x * d2 + t, src * d2 + t)] = ONE;
                }
            }
            &qa * l * &basis
        })
        .collect();
    Ok(FrobeniusAlgebra {
        label: format!("Ind_{}^{} End(V{})", k.group().name(), g.name(), d),
        mu,
        delta,
        eta,
        epsilon,
        equivariance: Equivariance::Action(action),
        realization: Some(FunctionRealization { group: g.clone(), vdim: d, basis }),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub label: String,
    pub associativity: f64,
    pub unit: f64,
    pub coassociativity: f64,
    pub counit: f64,
    pub frobenius_left: f64,
    pub frobenius_right: f64,
    pub pass: bool,
}

impl AxiomReport {
    pub fn worst(&self) -> f64 {
        [self.associativity, self.unit, self.coassociativity, self.counit, self.frobenius_left, self.frobenius_right]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn check_frobenius_axioms(f: &FrobeniusAlgebra) -> AxiomReport {
    let n = f.dim();
    let id = CMat::identity(n, n);
    let associativity = max_abs_diff(&(&f.mu * kron(&f.mu, &id)), &(&f.mu * kron(&id, &f.mu)));
    let unit = max_abs_diff(&(&f.mu * kron(&f.eta, &id)), &id).max(max_abs_diff(&(&f.mu * kron(&id, &f.eta)), &id));
    let coassociativity = max_abs_diff(&(kron(&f.delta, &id) * &f.delta), &(kron(&id, &f.delta) * &f.delta));
    let counit = max_abs_diff(&(kron(&f.epsilon, &id) * &f.delta), &id).max(max_abs_diff(&(kron(&id, &f.epsilon) * &f.delta), &id));
    let dm = &f.delta * &f.mu;
    let frobenius_left = max_abs_diff(&(kron(&f.mu, &id) * kron(&id, &f.delta)), &dm);
    let frobenius_right = max_abs_diff(&(kron(&id, &f.mu) * kron(&f.delta, &id)), &dm);
    let mut r = AxiomReport {
        label: f.label.clone(),
        associativity,
        unit,
        coassociativity,
        counit,
        frobenius_left,
        frobenius_right,
        pass: false,
    };
    r.pass = r.worst() < AXIOM_TOL;
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub label: String,
    pub haploid_rank: Option<usize>,
    pub haploid: Verdict,
    pub symmetric_residual: f64,
    pub special_residual: f64,
    pub beta_f: (f64, f64),
    pub beta_unit: (f64, f64),
    pub pass: bool,
}

/// Factor-exchange map on `C^n ⊗ C^n`.
pub fn swap_matrix(n: usize) -> CMat {
    let mut s = CMat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            s[(j * n + i, i * n + j)] = ONE;
        }
    }
    s
}

pub fn check_haploid_symmetric_special(f: &FrobeniusAlgebra, swap: &CMat) -> PropertyReport {
    let n = f.dim();
    let (rank, haploid) = match &f.equivariance {
        Equivariance::Action(mats) => {
            let avg = mats.iter().fold(CMat::zeros(n, n), |acc, m| acc + m) / C64::new(mats.len() as f64, 0.0);
            let herm = (&avg + avg.adjoint()) * C64::new(0.5, 0.0);
            let eig = herm.symmetric_eigenvalues();
            if eig.iter().any(|e| (e - 0.5).abs() < 1e-6) {
                (None, Verdict::Indeterminate)
            } else {
                let r = eig.iter().filter(|&&e| e > 0.5).count();
                (Some(r), if r == 1 { Verdict::Pass } else { Verdict::Fail })
            }
        }
        Equivariance::Grading { group, degrees } => {
            let r = degrees.iter().filter(|&&d| d == group.identity()).count();
            (Some(r), if r == 1 { Verdict::Pass } else { Verdict::Fail })
        }
        Equivariance::None => (None, Verdict::Indeterminate),
    };
    let em = &f.epsilon * &f.mu;
    let symmetric_residual = max_abs_diff(&(&em * swap), &em);
    let md = &f.mu * &f.delta;
    let beta = md.trace() / n as f64;
    let special_residual = max_abs_diff(&md, &(CMat::identity(n, n) * beta));
    let beta_unit = (&f.epsilon * &f.eta)[(0, 0)];
    let pass = haploid == Verdict::Pass
        && symmetric_residual < AXIOM_TOL
        && special_residual < AXIOM_TOL
        && beta.norm() > AXIOM_TOL
        && beta_unit.norm() > AXIOM_TOL;
    PropertyReport {
        label: f.label.clone(),
        haploid_rank: rank,
        haploid,
        symmetric_residual,
        special_residual,
        beta_f: (beta.re, beta.im),
        beta_unit: (beta_unit.re, beta_unit.im),
        pass,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivarianceReport {
    pub coproduct: f64,
    pub product: f64,
    pub subspace_invariance: f64,
}

/// Residuals of `Δ∘r_g = (r_g⊗r_g)∘Δ` and `μ∘(r_g⊗r_g) = r_g∘μ` for
/// right translation `(r_g f)(x) = f(xg)`, maximized over `g`.
pub fn right_translation_equivariance(f: &FrobeniusAlgebra, g: &FiniteGroup) -> Result<EquivarianceReport> {
    let real = f.realization.as_ref().ok_or_else(|| Error::Representation("algebra is not realized on functions".into()))?;
    if real.group != *g {
        return Err(Error::Representation("realization is over a different group".into()));
    }
    let d2 = real.vdim * real.vdim;
    let amb = g.order() * d2;
    let qa = real.basis.adjoint();
    let mut rep = EquivarianceReport { coproduct: 0.0, product: 0.0, subspace_invariance: 0.0 };
    for h in g.elements() {
        let mut r = CMat::zeros(amb, amb);
        for x in g.elements() {
            let src = g.mul(x, h);
            for t in 0..d2 {
                r[(x * d2 + t, src * d2 + t)] = ONE;
            }
        }
        let moved = &r * &real.basis;
        let rg = &qa * &moved;
        rep.subspace_invariance = rep.subspace_invariance.max(max_abs(&(&real.basis * &rg - moved)));
        rep.coproduct = rep.coproduct.max(max_abs_diff(&(&f.delta * &rg), &(kron(&rg, &rg) * &f.delta)));
        rep.product = rep.product.max(max_abs_diff(&(&f.mu * kron(&rg, &rg)), &(&rg * &f.mu)));
    }
    Ok(rep)
}

/// Report entries for the Frobenius axioms and the haploid, symmetric and
/// special properties of `f`.
pub fn algebra_entries(f: &FrobeniusAlgebra) -> Vec<crate::report::CheckEntry> {
    use crate::report::CheckEntry;
    let ax = check_frobenius_axioms(f);
    let props = check_haploid_symmetric_special(f, &swap_matrix(f.dim()));
    let at = f.label.clone();
    let mut out: Vec<CheckEntry> = [
        ("associativity", ax.associativity),
        ("unit", ax.unit),
        ("coassociativity", ax.coassociativity),
        ("counit", ax.counit),
        ("frobenius compatibility", ax.frobenius_left.max(ax.frobenius_right)),
        ("symmetric", props.symmetric_residual),
        ("special", props.special_residual),
    ]
    .into_iter()
    .map(|(check, r)| CheckEntry::new("frobenius", check, at.clone(), format!("dim {}", f.dim()), r, AXIOM_TOL))
    .collect();
    // Rank distance from one; an undecided rank never passes.
    let haploid = match (props.haploid, props.haploid_rank) {
        (Verdict::Indeterminate, _) | (_, None) => f64::NAN,
        (_, Some(r)) => (r as f64 - 1.0).abs(),
    };
    out.push(CheckEntry::new("frobenius", "haploid", at, "invariant rank − 1", haploid, 0.0));
    out
}
