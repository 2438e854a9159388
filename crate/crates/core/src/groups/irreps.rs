use std::f64::consts::PI;

use super::{permutation_parity, permutations, FiniteGroup, GroupKind, TwoCocycle};
use crate::linalg::{kron, root_of_unity, max_abs_diff, unitarity_residual, CMat, ONE, ZERO};
use crate::{Error, Result, C64};

pub const REP_TOL: f64 = 1e-10;

/// A unitary irreducible representation given by explicit matrices.
#[derive(Clone, Debug)]
pub struct Irrep {
    group: FiniteGroup,
    label: String,
    matrices: Vec<CMat>,
}

impl Irrep {
    pub fn new(group: &FiniteGroup, label: &str, matrices: Vec<CMat>) -> Self {
        Irrep { group: group.clone(), label: label.into(), matrices }
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn matrix(&self, g: usize) -> &CMat {
        &self.matrices[g]
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.matrices
    }

    pub fn character(&self, g: usize) -> C64 {
        self.matrices[g].trace()
    }

    pub fn is_trivial(&self) -> bool {
        self.dim() == 1 && self.group.elements().all(|g| (self.character(g) - ONE).norm() < REP_TOL)
    }

    /// `max ‖ρ(g)ρ(h) − ρ(gh)‖`.
    pub fn homomorphism_residual(&self) -> f64 {
        let g = &self.group;
        let mut worst: f64 = 0.0;
        for a in g.elements() {
            for b in g.elements() {
                worst = worst.max(max_abs_diff(&(&self.matrices[a] * &self.matrices[b]), &self.matrices[g.mul(a, b)]));
            }
        }
        worst
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.matrices.iter().map(unitarity_residual).fold(0.0, f64::max)
    }
}

fn scalar(z: C64) -> CMat {
    CMat::from_element(1, 1, z)
}

fn one_dim(g: &FiniteGroup, label: &str, f: impl Fn(usize) -> C64) -> Irrep {
    Irrep::new(g, label, g.elements().map(|x| scalar(f(x))).collect())
}

fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_slice(rows, cols, &data.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>())
}

/// Orthonormal basis of the sum-zero subspace of `C^n`, as columns.
fn sum_zero_basis(n: usize) -> CMat {
    let mut b = CMat::zeros(n, n - 1);
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            b[(i, k - 1)] = C64::new(1.0 / norm, 0.0);
        }
        b[(k, k - 1)] = C64::new(-(k as f64) / norm, 0.0);
    }
    b
}

fn standard_rep(g: &FiniteGroup, n: usize) -> Vec<CMat> {
    let basis = sum_zero_basis(n);
    permutations(n)
        .iter()
        .map(|p| {
            let mut m = CMat::zeros(n, n);
            for (i, &pi) in p.iter().enumerate() {
                m[(pi, i)] = ONE;
            }
            basis.adjoint() * m * &basis
        })
        .take(g.order())
        .collect()
}

fn symmetric_irreps(g: &FiniteGroup, n: usize) -> Vec<Irrep> {
    let perms = permutations(n);
    let sign = |x: usize| if permutation_parity(&perms[x]) == 0 { ONE } else { -ONE };
    let mut out = vec![one_dim(g, "trivial", |_| ONE)];
    if n >= 2 {
        out.push(one_dim(g, "sign", sign));
    }
    if n >= 3 {
        let std = standard_rep(g, n);
        if n == 4 {
            // S4 → S3 through its action on the three pair partitions.
            let s3 = FiniteGroup::symmetric(3).expect("S3");
            let s3_std = standard_rep(&s3, 3);
            let s3_perms = permutations(3);
            let pairs = [[[0, 1], [2, 3]], [[0, 2], [1, 3]], [[0, 3], [1, 2]]];
            let which = |a: usize, b: usize| pairs.iter().position(|p| p.iter().any(|q| (q[0] == a && q[1] == b) || (q[0] == b && q[1] == a))).unwrap();
            let two: Vec<CMat> = perms
                .iter()
                .map(|p| {
                    let image: Vec<usize> = pairs.iter().map(|pp| which(p[pp[0][0]], p[pp[0][1]])).collect();
                    s3_std[s3_perms.iter().position(|q| *q == image).unwrap()].clone()
                })
                .collect();
            out.push(Irrep::new(g, "two", two));
        }
        let std_sign: Vec<CMat> = std.iter().enumerate().map(|(x, m)| m * sign(x)).collect();
        out.push(Irrep::new(g, "standard", std));
        if n == 4 {
            out.push(Irrep::new(g, "standard*sign", std_sign));
        }
    }
    out
}

fn dihedral_irreps(g: &FiniteGroup, n: usize) -> Vec<Irrep> {
    let parity = |x: usize| x / n;
    let rot = |x: usize| x % n;
    let pm = |b: bool| if b { -ONE } else { ONE };
    let mut out = vec![one_dim(g, "trivial", |_| ONE), one_dim(g, "reflection-sign", |x| pm(parity(x) == 1))];
    if n.is_multiple_of(2) {
        out.push(one_dim(g, "rotation-sign", |x| pm(rot(x) % 2 == 1)));
        out.push(one_dim(g, "both-signs", |x| pm((rot(x) + parity(x)) % 2 == 1)));
    }
    for j in 1..=(n - 1) / 2 {
        let mats = g
            .elements()
            .map(|x| {
                let th = 2.0 * PI * (j * rot(x)) as f64 / n as f64;
                let (c, s) = (th.cos(), th.sin());
                let r = real_matrix(2, 2, &[c, -s, s, c]);
                if parity(x) == 1 {
                    r * real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0])
                } else {
                    r
                }
            })
            .collect();
        out.push(Irrep::new(g, &format!("rotation-{j}"), mats));
    }
    out
}

fn quaternion_irreps(g: &FiniteGroup) -> Vec<Irrep> {
    let i = C64::new(0.0, 1.0);
    // Signs of the images of i and j for the three nontrivial 1-dim irreps.
    let basis_index = |x: usize| x / 2;
    let mut out = vec![one_dim(g, "trivial", |_| ONE)];
    for (label, si, sj) in [("i-even", 1.0, -1.0), ("j-even", -1.0, 1.0), ("k-even", -1.0, -1.0)] {
        out.push(one_dim(g, label, move |x| {
            let v = match basis_index(x) {
                0 => 1.0,
                1 => si,
                2 => sj,
                _ => si * sj,
            };
            C64::new(v, 0.0)
        }));
    }
    let unit = CMat::identity(2, 2);
    let qi = CMat::from_row_slice(2, 2, &[i, ZERO, ZERO, -i]);
    let qj = CMat::from_row_slice(2, 2, &[ZERO, ONE, -ONE, ZERO]);
    let qk = &qi * &qj;
    let mats = [unit, qi, qj, qk];
    let two = g.elements().map(|x| if x % 2 == 0 { mats[x / 2].clone() } else { -mats[x / 2].clone() }).collect();
    out.push(Irrep::new(g, "spinor", two));
    out
}

/// Characters of a tabulated group that happens to be cyclic, via a
/// generator of maximal order.
fn cyclic_table_irreps(g: &FiniteGroup) -> Option<Vec<Irrep>> {
    let n = g.order();
    let generator = g.elements().find(|&x| {
        let mut y = x;
        let mut ord = 1;
        while y != g.identity() {
            y = g.mul(y, x);
            ord += 1;
        }
        ord == n
    })?;
    let mut power = vec![0; n];
    let mut y = g.identity();
    for p in 0..n {
        power[y] = p;
        y = g.mul(y, generator);
    }
    Some((0..n).map(|j| one_dim(g, &format!("chi{j}"), |a| root_of_unity(j * power[a], n))).collect())
}

/// The complete list of irreducible representations for the supported
/// groups (built-in tables; products via tensor products of factors).
pub fn irreps(g: &FiniteGroup) -> Result<Vec<Irrep>> {
    Ok(match g.kind() {
        GroupKind::Cyclic(n) => (0..*n)
            .map(|j| one_dim(g, &format!("chi{j}"), |a| root_of_unity(j * a, *n)))
            .collect(),
        GroupKind::Symmetric(n) => symmetric_irreps(g, *n),
        GroupKind::Dihedral(n) => dihedral_irreps(g, *n),
        GroupKind::Quaternion => quaternion_irreps(g),
        GroupKind::Product(a, b) => {
            let (ia, ib) = (irreps(a)?, irreps(b)?);
            let nb = b.order();
            let mut out = Vec::new();
            for ra in &ia {
                for rb in &ib {
                    let mats = g.elements().map(|x| kron(ra.matrix(x / nb), rb.matrix(x % nb))).collect();
                    out.push(Irrep::new(g, &format!("{}x{}", ra.label(), rb.label()), mats));
                }
            }
            out
        }
        GroupKind::Table => cyclic_table_irreps(g).ok_or_else(|| Error::NoIrreps(g.name().into()))?,
    })
}

/// `N^σ_{ab}` for every irrep `σ` in the order returned by [`irreps`].
pub fn fusion_multiplicities(a: &Irrep, b: &Irrep) -> Result<Vec<usize>> {
    if a.group() != b.group() {
        return Err(Error::Representation("irreps of different groups".into()));
    }
    let g = a.group();
    irreps(g)?
        .iter()
        .map(|s| {
            let n: C64 = g.elements().map(|x| a.character(x) * b.character(x) * s.character(x).conj()).sum::<C64>()
                / g.order() as f64;
            let rounded = n.re.round();
            if (n - C64::new(rounded, 0.0)).norm() > 1e-8 || rounded < 0.0 {
                Err(Error::Internal(format!("non-integer multiplicity {n} of {} in {}⊗{}", s.label(), a.label(), b.label())))
            } else {
                Ok(rounded as usize)
            }
        })
        .collect()
}

/// An `α`-projective representation: `ρ(g)ρ(h) = α(g,h)ρ(gh)`.
#[derive(Clone, Debug)]
pub struct ProjectiveRep {
    cocycle: TwoCocycle,
    matrices: Vec<CMat>,
}

impl ProjectiveRep {
    pub fn new(cocycle: &TwoCocycle, matrices: Vec<CMat>) -> Result<Self> {
        let rep = ProjectiveRep { cocycle: cocycle.clone(), matrices };
        let g = cocycle.group();
        if rep.matrices.len() != g.order() {
            return Err(Error::Representation("one matrix per element required".into()));
        }
        let residual = rep.projective_residual().max(rep.matrices.iter().map(unitarity_residual).fold(0.0, f64::max));
        if residual > REP_TOL {
            return Err(Error::Representation(format!("not a unitary {}-projective representation (residual {residual:.3e})", cocycle.label())));
        }
        Ok(rep)
    }

    pub fn trivial(k: &FiniteGroup) -> Self {
        ProjectiveRep { cocycle: TwoCocycle::trivial(k), matrices: vec![CMat::identity(1, 1); k.order()] }
    }

    pub fn from_irrep(rho: &Irrep) -> Self {
        ProjectiveRep { cocycle: TwoCocycle::trivial(rho.group()), matrices: rho.matrices().to_vec() }
    }

    pub fn cocycle(&self) -> &TwoCocycle {
        &self.cocycle
    }

    pub fn group(&self) -> &FiniteGroup {
        self.cocycle.group()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn matrix(&self, g: usize) -> &CMat {
        &self.matrices[g]
    }

    pub fn projective_residual(&self) -> f64 {
        let g = self.cocycle.group();
        let mut worst: f64 = 0.0;
        for a in g.elements() {
            for b in g.elements() {
                let rhs = &self.matrices[g.mul(a, b)] * self.cocycle.value(a, b);
                worst = worst.max(max_abs_diff(&(&self.matrices[a] * &self.matrices[b]), &rhs));
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::build_group;

    /// Independent check: row orthogonality of characters and Σd² = |G|.
    fn orthogonality_residual(g: &FiniteGroup, reps: &[Irrep]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in reps.iter().enumerate() {
            for (j, b) in reps.iter().enumerate() {
                let ip: C64 = g.elements().map(|x| a.character(x) * b.character(x).conj()).sum::<C64>() / g.order() as f64;
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - C64::new(expected, 0.0)).norm());
            }
        }
        worst
    }

    #[test]
    fn complete_and_orthogonal_for_supported_family() {
        for d in ["Z1", "Z2", "Z3", "Z5", "S2", "S3", "S4", "D1", "D3", "D4", "D5", "D6", "Q8", "Z2xZ2", "S3xZ2", "Z4xZ2"] {
            let g = build_group(d).unwrap();
            let reps = irreps(&g).unwrap();
            let total: usize = reps.iter().map(|r| r.dim() * r.dim()).sum();
            assert_eq!(total, g.order(), "{d}");
            assert!(orthogonality_residual(&g, &reps) < REP_TOL, "{d}");
            for r in &reps {
                assert!(r.homomorphism_residual() < REP_TOL, "{d} {}", r.label());
                assert!(r.unitarity_residual() < REP_TOL, "{d} {}", r.label());
            }
        }
    }

    #[test]
    fn dimension_patterns() {
        let dims = |d: &str| irreps(&build_group(d).unwrap()).unwrap().iter().map(Irrep::dim).collect::<Vec<_>>();
        assert_eq!(dims("S3"), vec![1, 1, 2]);
        assert_eq!(dims("Q8"), vec![1, 1, 1, 1, 2]);
        assert_eq!(dims("D4"), vec![1, 1, 1, 1, 2]);
        let mut s4 = dims("S4");
        s4.sort_unstable();
        assert_eq!(s4, vec![1, 1, 2, 3, 3]);
    }

    #[test]
    fn cyclic_subgroups_get_characters() {
        let s3 = build_group("S3").unwrap();
        let a3 = crate::groups::SubgroupEmbedding::parse(&s3, "A3").unwrap();
        let reps = irreps(a3.group()).unwrap();
        assert_eq!(reps.len(), 3);
        assert!(orthogonality_residual(a3.group(), &reps) < REP_TOL);
        assert!(reps.iter().all(|r| r.homomorphism_residual() < REP_TOL));
    }

    #[test]
    fn z2_characters() {
        let g = build_group("Z2").unwrap();
        let reps = irreps(&g).unwrap();
        assert_eq!(reps[0].character(1), ONE);
        assert_eq!(reps[1].character(1), -ONE);
    }

    #[test]
    fn fusion_rules() {
        let s3 = build_group("S3").unwrap();
        let r = irreps(&s3).unwrap();
        assert_eq!(fusion_multiplicities(&r[2], &r[2]).unwrap(), vec![1, 1, 1]);
        for b in &r {
            let n = fusion_multiplicities(&r[0], b).unwrap();
            let expected: Vec<usize> = r.iter().map(|s| usize::from(s.label() == b.label())).collect();
            assert_eq!(n, expected);
        }
        let z2 = build_group("Z2").unwrap();
        let r = irreps(&z2).unwrap();
        assert_eq!(fusion_multiplicities(&r[1], &r[1]).unwrap(), vec![1, 0]);
    }

    #[test]
    fn pauli_projective_rep() {
        let g = build_group("Z2xZ2").unwrap();
        let c = TwoCocycle::named(&g, "z2z2_nontrivial").unwrap();
        let x = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let z = real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let id = CMat::identity(2, 2);
        let mats = vec![id, z.clone(), x.clone(), &x * &z];
        assert!(ProjectiveRep::new(&c, mats.clone()).is_ok());
        assert!(ProjectiveRep::new(&TwoCocycle::trivial(&g), mats).is_err());
    }
}
