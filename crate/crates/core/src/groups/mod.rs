//! Finite groups as Cayley tables, subgroups and cosets, regular and
//! projective regular representations.
//!
//! Elements are dense indices `0..order` with the identity at index 0. The
//! canonical enumerations are:
//! - `Zn`: residues `0..n`.
//! - `Sn`: permutations in lexicographic order of their one-line notation,
//!   composed as `(στ)(i) = σ(τ(i))`.
//! - `Dn`: `r^a s^b` at index `a + n*b`.
//! - `Q8`: `1, -1, i, -i, j, -j, k, -k`.
//! - `AxB`: `(a, b)` at index `a*|B| + b`.

mod cocycle;
mod irreps;

use std::fmt;
use std::sync::Arc;

pub use cocycle::TwoCocycle;
pub use irreps::{fusion_multiplicities, irreps, Irrep, ProjectiveRep};

use crate::linalg::{CMat, Monomial};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Cyclic(usize),
    Symmetric(usize),
    Dihedral(usize),
    Quaternion,
    Product(FiniteGroup, FiniteGroup),
    /// A group known only by its table, e.g. a subgroup.
    Table,
}

#[derive(Debug, PartialEq, Eq)]
struct GroupData {
    name: String,
    order: usize,
    mult: Vec<usize>,
    inv: Vec<usize>,
    kind: GroupKind,
    labels: Vec<String>,
}

#[derive(Clone, PartialEq, Eq)]
pub struct FiniteGroup(Arc<GroupData>);

impl fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteGroup({}, order {})", self.0.name, self.0.order)
    }
}

impl FiniteGroup {
    /// Builds a group from a multiplication table, checking the axioms.
    pub fn from_table(name: &str, order: usize, mult: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        Self::assemble(name, order, mult, labels, GroupKind::Table)
    }

    fn assemble(name: &str, order: usize, mult: Vec<usize>, labels: Vec<String>, kind: GroupKind) -> Result<Self> {
        let bad = |reason: &str| Error::NotSubgroup { group: name.to_string(), reason: reason.to_string() };
        if order == 0 || mult.len() != order * order || labels.len() != order {
            return Err(bad("table has the wrong shape"));
        }
        if mult.iter().any(|&m| m >= order) {
            return Err(bad("table entry out of range"));
        }
        for g in 0..order {
            if mult[g] != g || mult[g * order] != g {
                return Err(bad("index 0 is not a two-sided identity"));
            }
        }
        let mut inv = vec![usize::MAX; order];
        for g in 0..order {
            for h in 0..order {
                if mult[g * order + h] == 0 {
                    inv[g] = h;
                    break;
                }
            }
            if inv[g] == usize::MAX || mult[inv[g] * order + g] != 0 {
                return Err(bad("missing inverse"));
            }
        }
        for a in 0..order {
            for b in 0..order {
                let ab = mult[a * order + b];
                for c in 0..order {
                    if mult[ab * order + c] != mult[a * order + mult[b * order + c]] {
                        return Err(bad("multiplication is not associative"));
                    }
                }
            }
        }
        Ok(FiniteGroup(Arc::new(GroupData { name: name.to_string(), order, mult, inv, kind, labels })))
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::UnsupportedGroup(format!("Z{n}")));
        }
        let mult = (0..n * n).map(|i| (i / n + i % n) % n).collect();
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::assemble(&format!("Z{n}"), n, mult, labels, GroupKind::Cyclic(n))
    }

    pub fn symmetric(n: usize) -> Result<Self> {
        if n == 0 || n > 4 {
            return Err(Error::UnsupportedGroup(format!("S{n}")));
        }
        let perms = permutations(n);
        let order = perms.len();
        let index = |p: &Vec<usize>| perms.iter().position(|q| q == p).unwrap();
        let mut mult = vec![0; order * order];
        for (a, pa) in perms.iter().enumerate() {
            for (b, pb) in perms.iter().enumerate() {
                let ab: Vec<usize> = (0..n).map(|i| pa[pb[i]]).collect();
                mult[a * order + b] = index(&ab);
            }
        }
        let labels = perms
            .iter()
            .map(|p| format!("[{}]", p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")))
            .collect();
        Self::assemble(&format!("S{n}"), order, mult, labels, GroupKind::Symmetric(n))
    }

    pub fn dihedral(n: usize) -> Result<Self> {
        if n == 0 || n > 6 {
            return Err(Error::UnsupportedGroup(format!("D{n}")));
        }
        let order = 2 * n;
        let mut mult = vec![0; order * order];
        for x in 0..order {
            let (a, b) = (x % n, x / n);
            for y in 0..order {
                let (c, d) = (y % n, y / n);
                let rot = if b == 0 { (a + c) % n } else { (a + n - c) % n };
                mult[x * order + y] = rot + n * ((b + d) % 2);
            }
        }
        let labels = (0..order).map(|x| format!("r^{} s^{}", x % n, x / n)).collect();
        Self::assemble(&format!("D{n}"), order, mult, labels, GroupKind::Dihedral(n))
    }

    pub fn quaternion() -> Result<Self> {
        // Unit quaternions as (sign, basis) with basis 0..4 = 1, i, j, k.
        let decode = |x: usize| (if x.is_multiple_of(2) { 1i8 } else { -1 }, x / 2);
        let basis_mult = |p: usize, q: usize| -> (i8, usize) {
            match (p, q) {
                (0, q) => (1, q),
                (p, 0) => (1, p),
                (p, q) if p == q => (-1, 0),
                (1, 2) => (1, 3),
                (2, 3) => (1, 1),
                (3, 1) => (1, 2),
                (2, 1) => (-1, 3),
                (3, 2) => (-1, 1),
                (1, 3) => (-1, 2),
                _ => unreachable!(),
            }
        };
        let mut mult = vec![0; 64];
        for x in 0..8 {
            let (sx, bx) = decode(x);
            for y in 0..8 {
                let (sy, by) = decode(y);
                let (s, b) = basis_mult(bx, by);
                let sign = sx * sy * s;
                mult[x * 8 + y] = 2 * b + usize::from(sign < 0);
            }
        }
        let labels = ["1", "-1", "i", "-i", "j", "-j", "k", "-k"].iter().map(|s| s.to_string()).collect();
        Self::assemble("Q8", 8, mult, labels, GroupKind::Quaternion)
    }

    pub fn product(a: &FiniteGroup, b: &FiniteGroup) -> Result<Self> {
        let (na, nb) = (a.order(), b.order());
        let order = na * nb;
        let mut mult = vec![0; order * order];
        for x in 0..order {
            for y in 0..order {
                mult[x * order + y] = a.mul(x / nb, y / nb) * nb + b.mul(x % nb, y % nb);
            }
        }
        let labels = (0..order).map(|x| format!("({},{})", a.label(x / nb), b.label(x % nb))).collect();
        let name = format!("{}x{}", a.name(), b.name());
        Self::assemble(&name, order, mult, labels, GroupKind::Product(a.clone(), b.clone()))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn order(&self) -> usize {
        self.0.order
    }

    pub fn kind(&self) -> &GroupKind {
        &self.0.kind
    }

    pub fn identity(&self) -> usize {
        0
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.0.mult[a * self.0.order + b]
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.0.inv[a]
    }

    pub fn label(&self, a: usize) -> &str {
        &self.0.labels[a]
    }

    pub fn mult_table(&self) -> &[usize] {
        &self.0.mult
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.0.order
    }

    /// Product of a sequence of elements, left to right.
    pub fn product_of(&self, xs: impl IntoIterator<Item = usize>) -> usize {
        xs.into_iter().fold(0, |acc, x| self.mul(acc, x))
    }

    pub fn is_abelian(&self) -> bool {
        self.elements().all(|a| self.elements().all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    /// Left translation `L(g)|h⟩ = |gh⟩` as a permutation.
    pub fn left_mono(&self, g: usize) -> Monomial {
        Monomial::permutation(self.elements().map(|h| self.mul(g, h)).collect())
    }

    /// Right translation `R(g)|h⟩ = |hg⁻¹⟩` as a permutation.
    pub fn right_mono(&self, g: usize) -> Monomial {
        let gi = self.inv(g);
        Monomial::permutation(self.elements().map(|h| self.mul(h, gi)).collect())
    }
}

pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Parses a descriptor such as `Z2`, `S3`, `D4`, `Q8` or `Z2xZ2`.
pub fn build_group(spec: &str) -> Result<FiniteGroup> {
    let spec = spec.trim();
    let factors: Vec<&str> = spec.split(['x', '×']).map(str::trim).collect();
    if factors.iter().any(|f| f.is_empty()) {
        return Err(Error::UnsupportedGroup(spec.to_string()));
    }
    let mut groups = factors.iter().map(|f| build_factor(f, spec));
    let first = groups.next().unwrap()?;
    groups.try_fold(first, |acc, g| FiniteGroup::product(&acc, &g?))
}

fn build_factor(f: &str, whole: &str) -> Result<FiniteGroup> {
    let unsupported = || Error::UnsupportedGroup(whole.to_string());
    if f == "Q8" {
        return FiniteGroup::quaternion();
    }
    let (head, num) = f.split_at(1);
    let n: usize = num.parse().map_err(|_| unsupported())?;
    match head {
        "Z" => FiniteGroup::cyclic(n),
        "S" => FiniteGroup::symmetric(n),
        "D" => FiniteGroup::dihedral(n),
        _ => Err(unsupported()),
    }
    .map_err(|_| unsupported())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

pub fn regular_rep(g: &FiniteGroup, side: Side) -> Vec<CMat> {
    g.elements()
        .map(|x| match side {
            Side::Left => g.left_mono(x).to_matrix(),
            Side::Right => g.right_mono(x).to_matrix(),
        })
        .collect()
}

pub fn projective_regular_rep(k: &FiniteGroup, tau: &TwoCocycle, side: Side) -> Result<Vec<CMat>> {
    if tau.group() != k {
        return Err(Error::InvalidCocycle { group: k.name().to_string(), residual: f64::INFINITY });
    }
    tau.validate()?;
    Ok(k.elements()
        .map(|x| match side {
            Side::Left => tau.left_mono(x).to_matrix(),
            Side::Right => tau.right_mono(x).to_matrix(),
        })
        .collect())
}

/// `K ≤ G` given by an ordered list of parent indices. The subgroup is also
/// available as a standalone group whose index `i` is `elements[i]`.
#[derive(Clone, Debug)]
pub struct SubgroupEmbedding {
    parent: FiniteGroup,
    elements: Vec<usize>,
    is_normal: bool,
    group: FiniteGroup,
}

impl SubgroupEmbedding {
    pub fn new(parent: &FiniteGroup, elements: &[usize], name: &str) -> Result<Self> {
        let not_sub = |reason: &str| Error::NotSubgroup { group: parent.name().to_string(), reason: reason.to_string() };
        let mut els = elements.to_vec();
        els.sort_unstable();
        els.dedup();
        if els.first() != Some(&0) {
            return Err(not_sub("identity missing"));
        }
        if els.iter().any(|&x| x >= parent.order()) {
            return Err(not_sub("element out of range"));
        }
        let pos = |x: usize| els.binary_search(&x).ok();
        let n = els.len();
        let mut mult = vec![0; n * n];
        for (i, &a) in els.iter().enumerate() {
            if pos(parent.inv(a)).is_none() {
                return Err(not_sub("not closed under inverse"));
            }
            for (j, &b) in els.iter().enumerate() {
                mult[i * n + j] = pos(parent.mul(a, b)).ok_or_else(|| not_sub("not closed under product"))?;
            }
        }
        let is_normal = parent
            .elements()
            .all(|g| els.iter().all(|&k| pos(parent.mul(parent.mul(g, k), parent.inv(g))).is_some()));
        let group = if n == parent.order() {
            parent.clone()
        } else {
            let labels = els.iter().map(|&x| parent.label(x).to_string()).collect();
            FiniteGroup::from_table(name, n, mult, labels)?
        };
        Ok(SubgroupEmbedding { parent: parent.clone(), elements: els, is_normal, group })
    }

    pub fn whole(g: &FiniteGroup) -> Self {
        Self::new(g, &g.elements().collect::<Vec<_>>(), g.name()).expect("whole group is a subgroup")
    }

    pub fn trivial(g: &FiniteGroup) -> Self {
        Self::new(g, &[0], "{e}").expect("trivial subgroup")
    }

    /// Smallest subgroup containing `gens`.
    pub fn generated(g: &FiniteGroup, gens: &[usize], name: &str) -> Result<Self> {
        let mut set = vec![0usize];
        let mut frontier = vec![0usize];
        while let Some(x) = frontier.pop() {
            for &s in gens {
                if s >= g.order() {
                    return Err(Error::NotSubgroup { group: g.name().into(), reason: format!("no element {s}") });
                }
                let y = g.mul(x, s);
                if !set.contains(&y) {
                    set.push(y);
                    frontier.push(y);
                }
            }
        }
        Self::new(g, &set, name)
    }

    /// Parses `G`'s own name, `e`/`{e}`/`trivial`, `A<n>` inside `S<n>`,
    /// `rotations` inside `D<n>`, or a comma-separated element list.
    pub fn parse(g: &FiniteGroup, descr: &str) -> Result<Self> {
        let d = descr.trim();
        if d == g.name() {
            return Ok(Self::whole(g));
        }
        if matches!(d, "e" | "{e}" | "1" | "trivial") {
            return Ok(Self::trivial(g));
        }
        if let GroupKind::Symmetric(n) = g.kind() {
            if d == format!("A{n}") {
                let perms = permutations(*n);
                let even: Vec<usize> = (0..perms.len()).filter(|&i| permutation_parity(&perms[i]) == 0).collect();
                return Self::new(g, &even, d);
            }
        }
        if let GroupKind::Dihedral(n) = g.kind() {
            if d == "rotations" || d == format!("Z{n}") {
                return Self::new(g, &(0..*n).collect::<Vec<_>>(), d);
            }
        }
        let list: std::result::Result<Vec<usize>, _> =
            d.trim_matches(['[', ']', '{', '}']).split(',').map(|s| s.trim().parse::<usize>()).collect();
        match list {
            Ok(els) if !els.is_empty() => Self::new(g, &els, d),
            _ => Err(Error::NotSubgroup { group: g.name().into(), reason: format!("unknown subgroup `{d}`") }),
        }
    }

    pub fn parent(&self) -> &FiniteGroup {
        &self.parent
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn is_normal(&self) -> bool {
        self.is_normal
    }

    pub fn is_whole(&self) -> bool {
        self.order() == self.parent.order()
    }

    /// The subgroup as a group in its own indexing.
    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn to_parent(&self, i: usize) -> usize {
        self.elements[i]
    }

    pub fn from_parent(&self, x: usize) -> Option<usize> {
        self.elements.binary_search(&x).ok()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.from_parent(x).is_some()
    }
}

pub(crate) fn permutation_parity(p: &[usize]) -> usize {
    let mut inversions = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2
}

/// Left cosets `g_i K`.
#[derive(Clone, Debug)]
pub struct Cosets {
    /// Representatives, smallest index in each coset; the first is the identity.
    pub representatives: Vec<usize>,
    /// `classes[i]` lists `g_i k` for `k` in subgroup order.
    pub classes: Vec<Vec<usize>>,
}

pub fn cosets(g: &FiniteGroup, k: &SubgroupEmbedding) -> Result<Cosets> {
    if k.parent() != g {
        return Err(Error::NotSubgroup { group: g.name().into(), reason: "subgroup of a different group".into() });
    }
    let mut covered = vec![false; g.order()];
    let mut representatives = Vec::new();
    let mut classes = Vec::new();
    for x in g.elements() {
        if covered[x] {
            continue;
        }
        let class: Vec<usize> = k.elements().iter().map(|&kk| g.mul(x, kk)).collect();
        for &y in &class {
            covered[y] = true;
        }
        representatives.push(x);
        classes.push(class);
    }
    Ok(Cosets { representatives, classes })
}

/// Table, representation and cocycle residuals for `g` and the given
/// cocycles (each on its own group).
pub fn group_checks(g: &FiniteGroup, cocycles: &[&TwoCocycle]) -> Result<Vec<crate::report::CheckEntry>> {
    use crate::report::CheckEntry;
    const TOL: f64 = 1e-10;
    let name = g.name();
    let mut out = Vec::new();
    let mut bad_assoc = 0usize;
    for a in g.elements() {
        for b in g.elements() {
            for c in g.elements() {
                if g.mul(g.mul(a, b), c) != g.mul(a, g.mul(b, c)) {
                    bad_assoc += 1;
                }
            }
        }
    }
    out.push(CheckEntry::new("groups", "associativity", name, "violating triples", bad_assoc as f64, 0.0));
    let bad_inv = g.elements().filter(|&a| g.mul(a, g.inv(a)) != 0 || g.mul(g.inv(a), a) != 0).count();
    out.push(CheckEntry::new("groups", "inverses", name, "violating elements", bad_inv as f64, 0.0));
    let reps = irreps(g)?;
    let hom = reps.iter().map(Irrep::homomorphism_residual).fold(0.0, f64::max);
    out.push(CheckEntry::new("groups", "irrep homomorphism", name, format!("{} irreps", reps.len()), hom, TOL));
    let uni = reps.iter().map(Irrep::unitarity_residual).fold(0.0, f64::max);
    out.push(CheckEntry::new("groups", "irrep unitarity", name, "", uni, TOL));
    let dims: usize = reps.iter().map(|r| r.dim() * r.dim()).sum();
    out.push(CheckEntry::new("groups", "dimension sum", name, "Σd² − |G|", (dims as f64 - g.order() as f64).abs(), 0.0));
    let mut ortho: f64 = 0.0;
    for (i, a) in reps.iter().enumerate() {
        for (j, b) in reps.iter().enumerate() {
            let ip: crate::C64 = g.elements().map(|x| a.character(x).conj() * b.character(x)).sum::<crate::C64>() / g.order() as f64;
            let want = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((ip - want).norm());
        }
    }
    out.push(CheckEntry::new("groups", "character orthonormality", name, "", ortho, TOL));
    for c in cocycles {
        let at = format!("{} on {}", c.label(), c.group().name());
        out.push(CheckEntry::new("groups", "cocycle condition", at.clone(), "", c.cocycle_residual(), TOL));
        out.push(CheckEntry::new("groups", "cocycle normalization", at, "", c.normalization_residual(), TOL));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn z2_table() {
        let g = build_group("Z2").unwrap();
        assert_eq!(g.order(), 2);
        assert_eq!(g.mult_table(), &[0, 1, 1, 0]);
    }

    #[test]
    fn s3_is_nonabelian() {
        let g = build_group("S3").unwrap();
        assert_eq!(g.order(), 6);
        let noncommuting = g.elements().flat_map(|a| g.elements().map(move |b| (a, b))).filter(|&(a, b)| g.mul(a, b) != g.mul(b, a)).count();
        assert!(noncommuting > 0);
        assert!(!g.is_abelian());
    }

    #[test]
    fn klein_four_elements_are_involutions() {
        let g = build_group("Z2xZ2").unwrap();
        assert_eq!(g.order(), 4);
        assert!(g.elements().all(|x| g.inv(x) == x));
    }

    #[test]
    fn supported_family_builds() {
        for d in ["Z1", "Z5", "S1", "S2", "S4", "D1", "D3", "D6", "Q8", "Z4xZ2", "S3xZ2", "Z2xZ2xZ2"] {
            let g = build_group(d).unwrap();
            assert_eq!(g.name(), d);
        }
        assert_eq!(build_group("S4").unwrap().order(), 24);
        assert_eq!(build_group("D6").unwrap().order(), 12);
        for bad in ["E8", "S5", "D7", "Q9", "", "Z2x", "Zx"] {
            assert!(build_group(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn dihedral_relations() {
        let g = build_group("D4").unwrap();
        let (r, s) = (1, 4);
        assert_eq!(g.mul(s, s), 0);
        assert_eq!(g.product_of([r, r, r, r]), 0);
        assert_eq!(g.product_of([s, r, s]), g.inv(r));
    }

    #[test]
    fn quaternion_relations() {
        let q = build_group("Q8").unwrap();
        let (m1, i, j, k) = (1, 2, 4, 6);
        assert_eq!(q.mul(i, i), m1);
        assert_eq!(q.mul(i, j), k);
        assert_eq!(q.mul(j, i), 7);
        assert_eq!(q.product_of([i, j, k]), m1);
    }

    #[test]
    fn cosets_examples() {
        let s3 = build_group("S3").unwrap();
        let a3 = SubgroupEmbedding::parse(&s3, "A3").unwrap();
        assert!(a3.is_normal());
        let c = cosets(&s3, &a3).unwrap();
        assert_eq!(c.representatives.len(), 2);
        assert_eq!(c.representatives[0], 0);
        assert!(!a3.contains(c.representatives[1]));

        let whole = SubgroupEmbedding::whole(&s3);
        assert_eq!(cosets(&s3, &whole).unwrap().representatives, vec![0]);

        let z4 = build_group("Z4").unwrap();
        let sub = SubgroupEmbedding::parse(&z4, "0,2").unwrap();
        assert_eq!(cosets(&z4, &sub).unwrap().representatives, vec![0, 1]);
    }

    #[test]
    fn non_subgroups_rejected() {
        let s3 = build_group("S3").unwrap();
        assert!(SubgroupEmbedding::new(&s3, &[0, 1, 2], "bad").is_err());
        assert!(SubgroupEmbedding::new(&s3, &[1], "bad").is_err());
        let z2 = SubgroupEmbedding::new(&s3, &[0, 1], "Z2").unwrap();
        assert!(!z2.is_normal());
    }

    #[test]
    fn regular_reps_commute() {
        let g = build_group("S3").unwrap();
        let l = regular_rep(&g, Side::Left);
        let r = regular_rep(&g, Side::Right);
        assert_eq!(l[1][(1, 0)].re, 1.0);
        for a in g.elements() {
            for b in g.elements() {
                assert_eq!(max_abs_diff(&(&l[a] * &r[b]), &(&r[b] * &l[a])), 0.0);
            }
        }
        let z2 = build_group("Z2").unwrap();
        let swap = &regular_rep(&z2, Side::Left)[1];
        assert_eq!(swap[(0, 1)].re, 1.0);
        assert_eq!(swap[(1, 0)].re, 1.0);
        assert_eq!(swap[(0, 0)].re, 0.0);
    }

    #[test]
    fn regular_reps_are_homomorphisms() {
        let g = build_group("D3").unwrap();
        for side in [Side::Left, Side::Right] {
            let m = regular_rep(&g, side);
            for a in g.elements() {
                for b in g.elements() {
                    assert_eq!(max_abs_diff(&(&m[a] * &m[b]), &m[g.mul(a, b)]), 0.0);
                }
            }
        }
    }
}
