use super::{FiniteGroup, GroupKind, SubgroupEmbedding};
use crate::linalg::{root_of_unity, Monomial, ONE};
use crate::{Error, Result, C64};

pub const COCYCLE_TOL: f64 = 1e-12;

/// A normalized U(1)-valued 2-cocycle, stored as a full `|K|×|K|` table.
#[derive(Clone, Debug)]
pub struct TwoCocycle {
    group: FiniteGroup,
    phases: Vec<C64>,
    label: String,
}

impl TwoCocycle {
    pub fn trivial(g: &FiniteGroup) -> Self {
        TwoCocycle { group: g.clone(), phases: vec![ONE; g.order() * g.order()], label: "trivial".into() }
    }

    /// Builds a cocycle from a function, rescaling by `α(e,e)⁻¹` so that it is
    /// normalized, then validates it.
    pub fn from_fn(g: &FiniteGroup, label: &str, f: impl Fn(usize, usize) -> C64) -> Result<Self> {
        let n = g.order();
        let scale = f(0, 0);
        if (scale.norm() - 1.0).abs() > COCYCLE_TOL {
            return Err(Error::InvalidCocycle { group: g.name().into(), residual: (scale.norm() - 1.0).abs() });
        }
        let phases = (0..n * n).map(|i| f(i / n, i % n) / scale).collect();
        let c = TwoCocycle { group: g.clone(), phases, label: label.into() };
        c.validate()?;
        Ok(c)
    }

    /// `(−1)^{a₂·b₁}`-type bilinear cocycle on `Z_m × Z_n`, valued in the
    /// `gcd(m, n)`-th roots of unity.
    pub fn bilinear(g: &FiniteGroup) -> Result<Self> {
        let GroupKind::Product(a, b) = g.kind() else {
            return Err(Error::UnknownCocycle { name: "bilinear".into(), group: g.name().into() });
        };
        let (GroupKind::Cyclic(m), GroupKind::Cyclic(n)) = (a.kind(), b.kind()) else {
            return Err(Error::UnknownCocycle { name: "bilinear".into(), group: g.name().into() });
        };
        let (m, n) = (*m, *n);
        let d = gcd(m, n);
        Self::from_fn(g, "bilinear", |x, y| {
            let (a2, b1) = (x % n, y / n);
            root_of_unity(a2 * b1, d)
        })
    }

    /// `trivial`, `z2z2_nontrivial` on `Z2xZ2`, `z4z2_nontrivial` on `Z4xZ2`,
    /// or `bilinear` on any product of two cyclic groups.
    pub fn named(g: &FiniteGroup, name: &str) -> Result<Self> {
        let unknown = || Error::UnknownCocycle { name: name.into(), group: g.name().into() };
        match name {
            "trivial" | "1" => Ok(Self::trivial(g)),
            "z2z2_nontrivial" if g.name() == "Z2xZ2" => Self::bilinear(g).map(|c| c.with_label(name)),
            "z4z2_nontrivial" if g.name() == "Z4xZ2" => Self::bilinear(g).map(|c| c.with_label(name)),
            "bilinear" => Self::bilinear(g),
            _ => Err(unknown()),
        }
    }

    fn with_label(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn value(&self, g: usize, h: usize) -> C64 {
        self.phases[g * self.group.order() + h]
    }

    pub fn is_trivial(&self) -> bool {
        self.phases.iter().all(|p| (p - ONE).norm() < COCYCLE_TOL)
    }

    pub fn conj(&self) -> Self {
        TwoCocycle {
            group: self.group.clone(),
            phases: self.phases.iter().map(|p| p.conj()).collect(),
            label: format!("conj({})", self.label),
        }
    }

    /// Max of `|α(g,h)α(gh,k) − α(g,hk)α(h,k)|` over all triples.
    pub fn cocycle_residual(&self) -> f64 {
        let g = &self.group;
        let mut worst: f64 = 0.0;
        for a in g.elements() {
            for b in g.elements() {
                let ab = g.mul(a, b);
                for c in g.elements() {
                    let lhs = self.value(a, b) * self.value(ab, c);
                    let rhs = self.value(a, g.mul(b, c)) * self.value(b, c);
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
        worst
    }

    pub fn normalization_residual(&self) -> f64 {
        self.group
            .elements()
            .map(|x| (self.value(0, x) - ONE).norm().max((self.value(x, 0) - ONE).norm()))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = self.phases.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max);
        let residual = self.cocycle_residual().max(self.normalization_residual()).max(unit);
        if residual > COCYCLE_TOL {
            return Err(Error::InvalidCocycle { group: self.group.name().into(), residual });
        }
        Ok(())
    }

    /// Restriction to a subgroup, in the subgroup's own indexing.
    pub fn restrict(&self, k: &SubgroupEmbedding) -> Result<Self> {
        if k.parent() != &self.group {
            return Err(Error::NotSubgroup { group: self.group.name().into(), reason: "foreign subgroup".into() });
        }
        let n = k.order();
        let phases = (0..n * n).map(|i| self.value(k.to_parent(i / n), k.to_parent(i % n))).collect();
        Ok(TwoCocycle { group: k.group().clone(), phases, label: format!("{}|{}", self.label, k.group().name()) })
    }

    /// `τL(g)|h⟩ = τ(g,h)|gh⟩`.
    pub fn left_mono(&self, g: usize) -> Monomial {
        let grp = &self.group;
        Monomial {
            target: grp.elements().map(|h| grp.mul(g, h)).collect(),
            phase: grp.elements().map(|h| self.value(g, h)).collect(),
        }
    }

    /// `τR(g)|x⟩ = τ(xg⁻¹, g)|xg⁻¹⟩`, i.e. `⟨h|τR(g)|hg⟩ = τ(h,g)`.
    pub fn right_mono(&self, g: usize) -> Monomial {
        let grp = &self.group;
        let gi = grp.inv(g);
        Monomial {
            target: grp.elements().map(|x| grp.mul(x, gi)).collect(),
            phase: grp.elements().map(|x| self.value(grp.mul(x, gi), g)).collect(),
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{build_group, projective_regular_rep, regular_rep, Side};
    use crate::linalg::{max_abs_diff, CMat};

    #[test]
    fn shipped_cocycles_validate() {
        for (g, name) in [("Z2xZ2", "z2z2_nontrivial"), ("Z4xZ2", "z4z2_nontrivial"), ("Z3xZ3", "bilinear")] {
            let grp = build_group(g).unwrap();
            let c = TwoCocycle::named(&grp, name).unwrap();
            assert!(c.cocycle_residual() < COCYCLE_TOL);
            assert!(!c.is_trivial());
        }
        let s3 = build_group("S3").unwrap();
        assert!(TwoCocycle::named(&s3, "z2z2_nontrivial").is_err());
    }

    #[test]
    fn z2z2_table_lookup() {
        let g = build_group("Z2xZ2").unwrap();
        let c = TwoCocycle::named(&g, "z2z2_nontrivial").unwrap();
        // (0,1)·(1,0): a2·b1 = 1.
        assert_eq!(c.value(1, 2), -ONE);
        assert_eq!(c.value(2, 1), ONE);
    }

    #[test]
    fn broken_cocycle_is_rejected() {
        let g = build_group("Z3").unwrap();
        let r = TwoCocycle::from_fn(&g, "broken", |a, b| if a == 1 && b == 1 { -ONE } else { ONE });
        assert!(r.is_err());
    }

    #[test]
    fn trivial_projective_equals_regular() {
        let g = build_group("S3").unwrap();
        let t = TwoCocycle::trivial(&g);
        for side in [Side::Left, Side::Right] {
            let p = projective_regular_rep(&g, &t, side).unwrap();
            let r = regular_rep(&g, side);
            for x in g.elements() {
                assert_eq!(max_abs_diff(&p[x], &r[x]), 0.0);
            }
        }
    }

    #[test]
    fn projective_composition_law() {
        let g = build_group("Z2xZ2").unwrap();
        let t = TwoCocycle::named(&g, "z2z2_nontrivial").unwrap();
        for side in [Side::Left, Side::Right] {
            let m = projective_regular_rep(&g, &t, side).unwrap();
            for a in g.elements() {
                for b in g.elements() {
                    let lhs = &m[a] * &m[b];
                    let rhs = &m[g.mul(a, b)] * t.value(a, b);
                    assert!(max_abs_diff(&lhs, &rhs) < 1e-14);
                }
            }
            assert!(max_abs_diff(&m[0], &CMat::identity(4, 4)) < 1e-15);
        }
    }

    #[test]
    fn pauli_type_group_commutators() {
        let g = build_group("Z2xZ2").unwrap();
        let t = TwoCocycle::named(&g, "z2z2_nontrivial").unwrap();
        let m = projective_regular_rep(&g, &t, Side::Left).unwrap();
        let mut anticommuting = 0;
        for a in g.elements() {
            for b in g.elements() {
                let c = &m[a] * &m[b] * m[a].adjoint() * m[b].adjoint();
                let id = CMat::identity(4, 4);
                if max_abs_diff(&c, &(-id.clone())) < 1e-14 {
                    anticommuting += 1;
                } else {
                    assert!(max_abs_diff(&c, &id) < 1e-14);
                }
            }
        }
        // The three nontrivial elements pairwise anticommute.
        assert_eq!(anticommuting, 6);
    }

    #[test]
    fn left_and_conjugate_left_commute_with_twisted_right() {
        let g = build_group("Z4xZ2").unwrap();
        let t = TwoCocycle::named(&g, "z4z2_nontrivial").unwrap();
        let tc = t.conj();
        for a in g.elements() {
            for b in g.elements() {
                let r = t.right_mono(a).to_matrix();
                for l in [t.left_mono(b).to_matrix(), tc.left_mono(b).to_matrix()] {
                    assert!(max_abs_diff(&(&r * &l), &(&l * &r)) < 1e-14);
                }
            }
        }
    }
}
