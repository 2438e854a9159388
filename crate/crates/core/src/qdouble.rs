//! Quantum double stabilizers on square lattices with a smooth bottom
//! boundary, the commuting-projector Hamiltonian, ground-state checks, and
//! the PEPS assembled from the gauging layers.
//!
//! Edge values multiply along a path in reverse walk order, so for a walk
//! `e_1, …, e_n` with signs `s_i` the holonomy is `g_n^{s_n} ⋯ g_1^{s_1}`.
//! With edges pointing `o → t` and stars acting by `R` on outgoing and `L`
//! on incoming legs, this is the product that transforms covariantly.

use std::collections::HashMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gauge1d::{boundary_input_state, invariance_residual, iterate_gauging, iterated_dimension, local_group_symmetry, GaugeOptions, LayerLayout, MatterRep, RoundKind};
use crate::groups::{irreps, FiniteGroup, Irrep, SubgroupEmbedding, TwoCocycle};
use crate::hilbert::{commutator_residual, operator_distance, DenseState, LocalFactor, LocalMatrix, SiteOperator, TensorFactorSpace};
use crate::lattice::{build_square_lattice, path_signs, Axis, Boundary, Lattice, Path};
use crate::linalg::{max_abs_diff, CMat, Monomial, ONE, ZERO};
use crate::report::CheckEntry;
use crate::{Error, Result, C64};

pub const STATE_TOL: f64 = 1e-8;
pub const COMMUTATOR_TOL: f64 = 1e-10;
pub const TENSOR_TOL: f64 = 1e-10;

/// Weights of `B_f = Σ_ρ w_ρ P_f(ρ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BfWeights {
    /// `w_ρ = d_ρ²/|G|`: the trivial-flux projector.
    #[default]
    Projector,
    /// `w_ρ = 1/|Irr G|`, not idempotent for non-abelian groups.
    Paper,
}

impl FromStr for BfWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projector" => Ok(BfWeights::Projector),
            "paper" => Ok(BfWeights::Paper),
            other => Err(Error::Config { field: "bf-weights".into(), message: format!("expected `paper` or `projector`, got `{other}`") }),
        }
    }
}

impl std::fmt::Display for BfWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BfWeights::Projector => "projector",
            BfWeights::Paper => "paper",
        })
    }
}

impl BfWeights {
    pub fn weight(self, group: &FiniteGroup, n_irreps: usize, rho: &Irrep) -> f64 {
        match self {
            BfWeights::Projector => (rho.dim() * rho.dim()) as f64 / group.order() as f64,
            BfWeights::Paper => 1.0 / n_irreps as f64,
        }
    }
}

/// Diagonal operator `f(hol_γ)` on the distinct edges of the closed `path`.
pub fn loop_operator(
    path: &Path,
    site: impl Fn(usize) -> String,
    dim: impl Fn(usize) -> usize,
    elem: impl Fn(usize, usize) -> usize,
    group: &FiniteGroup,
    f: impl Fn(usize) -> C64,
) -> Result<SiteOperator> {
    if !path.is_closed() {
        return Err(Error::InvalidPath("holonomy needs a closed path".into()));
    }
    holonomy_operator(path, site, dim, elem, group, f)
}

/// As [`loop_operator`] but for any path; an open path contributes the
/// product along its edges only.
pub fn holonomy_operator(
    path: &Path,
    site: impl Fn(usize) -> String,
    dim: impl Fn(usize) -> usize,
    elem: impl Fn(usize, usize) -> usize,
    group: &FiniteGroup,
    f: impl Fn(usize) -> C64,
) -> Result<SiteOperator> {
    let mut distinct: Vec<usize> = Vec::new();
    for &e in path.edges() {
        if !distinct.contains(&e) {
            distinct.push(e);
        }
    }
    let dims: Vec<usize> = distinct.iter().map(|&e| dim(e)).collect();
    let slot: Vec<usize> = path.edges().iter().map(|e| distinct.iter().position(|d| d == e).unwrap()).collect();
    let size: usize = dims.iter().product();
    let mut vals = vec![0usize; dims.len()];
    let mut diag = Vec::with_capacity(size);
    for mut idx in 0..size {
        for (v, &d) in vals.iter_mut().zip(&dims).rev() {
            *v = idx % d;
            idx /= d;
        }
        let mut hol = group.identity();
        for (step, &s) in slot.iter().zip(path_signs(path)) {
            let g = elem(distinct[*step], vals[*step]);
            let g = if s > 0 { g } else { group.inv(g) };
            hol = group.mul(g, hol);
        }
        diag.push(f(hol));
    }
    Ok(SiteOperator::local(LocalFactor::new(distinct.iter().map(|&e| site(e)), LocalMatrix::Diagonal(diag))))
}

/// Stars and plaquettes of a (twisted) quantum double on a square lattice.
/// On a smooth-bottom lattice the bottom row of horizontal edges carries
/// `C K` and the bottom stars represent `K` twisted by `α`.
#[derive(Clone, Debug)]
pub struct StabilizerSet {
    lattice: Lattice,
    group: FiniteGroup,
    k: SubgroupEmbedding,
    alpha: TwoCocycle,
    tau: TwoCocycle,
    irreps: Vec<Irrep>,
    boundary: bool,
}

impl StabilizerSet {
    pub fn new(lattice: Lattice, group: &FiniteGroup, k: SubgroupEmbedding, alpha: TwoCocycle, tau: TwoCocycle) -> Result<Self> {
        if lattice.dimension() != 2 {
            return Err(Error::InvalidLattice("square-lattice stabilizers need a 2D lattice".into()));
        }
        if k.parent() != group {
            return Err(Error::NotSubgroup { group: group.name().into(), reason: "boundary subgroup of another group".into() });
        }
        if alpha.group() != k.group() || tau.group() != group {
            return Err(Error::InvalidCocycle { group: group.name().into(), residual: f64::NAN });
        }
        alpha.validate()?;
        tau.validate()?;
        let boundary = !lattice.periodic[1];
        Ok(StabilizerSet { irreps: irreps(group)?, lattice, group: group.clone(), k, alpha, tau, boundary })
    }

    /// Untwisted model on a `w × h` torus.
    pub fn torus(group: &FiniteGroup, w: usize, h: usize) -> Result<Self> {
        let lat = build_square_lattice(w, h, Boundary::Periodic)?;
        let whole = SubgroupEmbedding::whole(group);
        StabilizerSet::new(lat, group, whole, TwoCocycle::trivial(group), TwoCocycle::trivial(group))
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn subgroup(&self) -> &SubgroupEmbedding {
        &self.k
    }

    pub fn irreps(&self) -> &[Irrep] {
        &self.irreps
    }

    /// Whether the twist data is one of the combinations covered by the
    /// shipped checks: `τ` trivial, or `α` the restriction of `τ`.
    pub fn twist_validated(&self) -> bool {
        if self.tau.is_trivial() || !self.boundary {
            return true;
        }
        match self.tau.restrict(&self.k) {
            Ok(r) => self.k.group().elements().all(|a| self.k.group().elements().all(|b| (r.value(a, b) - self.alpha.value(a, b)).norm() < 1e-12)),
            Err(_) => false,
        }
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        let edge = &self.lattice.graph().edges()[e];
        self.boundary && edge.axis == Axis::X && self.lattice.graph().vertices()[edge.origin].0[1] == 0
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary && self.lattice.graph().vertices()[v].0[1] == 0
    }

    pub fn edge_dim(&self, e: usize) -> usize {
        if self.is_boundary_edge(e) {
            self.k.order()
        } else {
            self.group.order()
        }
    }

    /// Group element held by basis state `value` of edge `e`.
    pub fn edge_element(&self, e: usize, value: usize) -> usize {
        if self.is_boundary_edge(e) {
            self.k.to_parent(value)
        } else {
            value
        }
    }

    pub fn space(&self) -> TensorFactorSpace {
        let g = self.lattice.graph();
        TensorFactorSpace::new(g.edges().iter().enumerate().map(|(i, e)| (e.id.clone(), self.edge_dim(i)))).expect("edge ids are unique")
    }

    /// Elements a star at `v` ranges over (parent indices).
    pub fn star_elements(&self, v: usize) -> Vec<usize> {
        if self.is_boundary_vertex(v) {
            self.k.elements().to_vec()
        } else {
            self.group.elements().collect()
        }
    }

    /// `S_v(g)`: outgoing legs act by right translation, incoming by left;
    /// horizontal legs carry the `τ` (bulk) or `α` (boundary) twist.
    pub fn star_operator(&self, v: usize, g: usize) -> Result<SiteOperator> {
        if !self.lattice.stars().contains(&v) {
            return Err(Error::InvalidLattice(format!("vertex {} carries no star", self.lattice.graph().vertices()[v])));
        }
        let graph = self.lattice.graph();
        let boundary_x = if self.is_boundary_vertex(v) { Some(self.k.from_parent(g).ok_or(Error::NotInSubgroup { element: g })?) } else { None };
        let mut fs = Vec::new();
        for &e in graph.outgoing(v) {
            let m = match (self.is_boundary_edge(e), graph.edges()[e].axis) {
                (true, _) => self.alpha.right_mono(boundary_x.unwrap()),
                (false, Axis::X) => self.tau.right_mono(g),
                _ => self.group.right_mono(g),
            };
            fs.push(LocalFactor::single(&graph.edges()[e].id, LocalMatrix::Monomial(m)));
        }
        for &e in graph.incoming(v) {
            let m = match (self.is_boundary_edge(e), graph.edges()[e].axis) {
                (true, _) => self.alpha.left_mono(boundary_x.unwrap()).conj(),
                (false, Axis::X) => self.tau.left_mono(g).conj(),
                _ => self.group.left_mono(g),
            };
            fs.push(LocalFactor::single(&graph.edges()[e].id, LocalMatrix::Monomial(m)));
        }
        Ok(SiteOperator::product(fs))
    }

    /// `P_f(ρ)`: diagonal with entries `χ_ρ(hol_f)/d_ρ`.
    pub fn plaquette_operator(&self, f: usize, rho: &Irrep) -> Result<SiteOperator> {
        let face = self.lattice.faces().get(f).ok_or_else(|| Error::InvalidLattice(format!("no face {f}")))?;
        if rho.group() != &self.group {
            return Err(Error::Representation(format!("{} is not an irrep of {}", rho.label(), self.group.name())));
        }
        let d = rho.dim() as f64;
        self.face_diagonal(face, |h| rho.character(h) / d)
    }

    fn face_diagonal(&self, face: &crate::lattice::Face, f: impl Fn(usize) -> C64) -> Result<SiteOperator> {
        let path = self.lattice.face_loop(face);
        let graph = self.lattice.graph();
        loop_operator(&path, |e| graph.edges()[e].id.clone(), |e| self.edge_dim(e), |e, x| self.edge_element(e, x), &self.group, f)
    }

    /// `A_v`: the average of `S_v` over `G`, or over `K` on the boundary.
    pub fn vertex_term(&self, v: usize) -> Result<SiteOperator> {
        let els = self.star_elements(v);
        let n = els.len() as f64;
        Ok(SiteOperator::sum(els.into_iter().map(|g| self.star_operator(v, g)).collect::<Result<Vec<_>>>()?).scale_re(1.0 / n))
    }

    pub fn face_term(&self, f: usize, weights: BfWeights) -> Result<SiteOperator> {
        let n = self.irreps.len();
        let terms = self
            .irreps
            .iter()
            .map(|rho| Ok(self.plaquette_operator(f, rho)?.scale_re(weights.weight(&self.group, n, rho))))
            .collect::<Result<Vec<_>>>()?;
        Ok(SiteOperator::sum(terms))
    }

    /// `H = −Σ_v A_v − Σ_f B_f`.
    pub fn hamiltonian(&self, weights: BfWeights) -> Result<SiteOperator> {
        let mut terms = Vec::new();
        for &v in self.lattice.stars() {
            terms.push(self.vertex_term(v)?);
        }
        for f in 0..self.lattice.faces().len() {
            terms.push(self.face_term(f, weights)?);
        }
        Ok(SiteOperator::sum(terms).scale_re(-1.0))
    }

    /// `−(#stars + #faces)`.
    pub fn frustration_free_energy(&self) -> f64 {
        -((self.lattice.stars().len() + self.lattice.faces().len()) as f64)
    }

    fn vertex_label(&self, v: usize) -> String {
        self.lattice.graph().vertices()[v].to_string()
    }

    /// Every star operator `(v, g)` and plaquette `(f, ρ)`.
    fn all_operators(&self) -> Result<Vec<(String, String, String, SiteOperator)>> {
        let mut ops = Vec::new();
        for &v in self.lattice.stars() {
            for g in self.star_elements(v) {
                ops.push(("star".to_string(), self.vertex_label(v), self.group.label(g).to_string(), self.star_operator(v, g)?));
            }
        }
        for (f, face) in self.lattice.faces().iter().enumerate() {
            for rho in &self.irreps {
                ops.push(("plaquette".to_string(), face.id.clone(), rho.label().to_string(), self.plaquette_operator(f, rho)?));
            }
        }
        Ok(ops)
    }
}

/// `S_v(g) s = s` and `P_f(ρ) s = s` for every star and plaquette, with
/// scale-free residuals.
pub fn verify_ground_state(s: &DenseState, stab: &StabilizerSet) -> Result<Vec<CheckEntry>> {
    let ops = stab.all_operators()?;
    ops.par_iter()
        .map(|(kind, loc, param, op)| Ok(CheckEntry::new("qdouble", kind, loc.clone(), param.clone(), invariance_residual(op, s)?, STATE_TOL)))
        .collect()
}

/// `⟨H⟩` on `s` together with the frustration-free value.
pub fn ground_energy(s: &DenseState, stab: &StabilizerSet, weights: BfWeights) -> Result<(f64, f64)> {
    let h = stab.hamiltonian(weights)?;
    let e = s.expectation(&h)?.re / s.inner(s)?.re;
    Ok((e, stab.frustration_free_energy()))
}

/// Maximal commutator norms over all operator pairs, one entry per family.
pub fn stabilizer_commutators(stab: &StabilizerSet) -> Result<Vec<CheckEntry>> {
    let ops = stab.all_operators()?;
    let space = stab.space();
    // Stars at one vertex only commute for abelian groups; the relation is
    // between distinct vertices.
    let pairs: Vec<(usize, usize)> = (0..ops.len())
        .flat_map(|i| (i + 1..ops.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| !(ops[i].0 == "star" && ops[j].0 == "star" && ops[i].1 == ops[j].1))
        .collect();
    let res: Vec<(String, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let fam = format!("commutator {}-{}", ops[i].0, ops[j].0);
            Ok((fam, commutator_residual(&space, &ops[i].3, &ops[j].3)?))
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<CheckEntry> = Vec::new();
    for fam in ["commutator star-star", "commutator star-plaquette", "commutator plaquette-plaquette"] {
        let rs: Vec<f64> = res.iter().filter(|(f, _)| f == fam).map(|(_, r)| *r).collect();
        let max = rs.iter().copied().fold(0.0, f64::max);
        out.push(CheckEntry::new("qdouble", fam, "all pairs", format!("{} pairs", rs.len()), max, COMMUTATOR_TOL));
    }
    Ok(out)
}

/// Smooth-bottom lattice holding the state after an even number of rounds
/// on a ring of `n` cells.
pub fn emergence_lattice(n: usize, rounds: usize) -> Result<Lattice> {
    if !rounds.is_multiple_of(2) {
        return Err(Error::InvalidLattice(format!("{rounds} rounds do not fill whole rows; use an even count")));
    }
    build_square_lattice(n, rounds / 2 + 1, Boundary::SmoothBottom)
}

/// Edge ids for the iterated boundary state: whites are the verticals
/// above row 0, grays the bottom row, group round `2m+1` fills row `m+1`
/// and Rep round `2m+2` the verticals above it.
pub fn lattice_site_map(layout: &LayerLayout, n: usize, lat: &Lattice) -> Result<HashMap<String, String>> {
    let edge = |c: [usize; 2], axis: Axis| -> Result<String> {
        let e = lat.edge_from(&c, axis).ok_or_else(|| Error::InvalidLattice(format!("no {axis:?} edge from ({},{})", c[0], c[1])))?;
        Ok(lat.graph().edges()[e].id.clone())
    };
    let mut map = HashMap::new();
    for j in 0..n {
        map.insert(format!("w:{j}"), edge([j, 1], Axis::Y)?);
        map.insert(format!("k:{j}"), edge([(j + 1) % n, 0], Axis::X)?);
    }
    for round in &layout.rounds {
        let m = (round.index - 1) / 2;
        for (j, site) in round.new_sites.iter().enumerate() {
            let id = match round.kind {
                RoundKind::Group => edge([(j + 1) % n, m + 1], Axis::X)?,
                RoundKind::RepG => edge([j, m + 2], Axis::Y)?,
            };
            map.insert(site.clone(), id);
        }
    }
    Ok(map)
}

/// Renames the iterated state onto lattice edges in edge order.
pub fn embed_on_lattice(s: &DenseState, layout: &LayerLayout, n: usize, stab: &StabilizerSet) -> Result<DenseState> {
    let map = lattice_site_map(layout, n, stab.lattice())?;
    let relabeled = s.relabel(|id| map.get(id).cloned())?;
    let space = stab.space();
    if space.len() != relabeled.space().len() {
        return Err(Error::SiteMismatch(format!("{} state sites for {} lattice edges", relabeled.space().len(), space.len())));
    }
    let order: Vec<&str> = space.sites().iter().map(|s| s.id.as_str()).collect();
    let out = relabeled.reorder(&order)?;
    for (a, b) in out.space().sites().iter().zip(space.sites()) {
        if a.dim != b.dim {
            return Err(Error::SiteMismatch(format!("edge {} has dim {} but the state site has {}", b.id, b.dim, a.dim)));
        }
    }
    Ok(out)
}

/// Dense tensor with named legs, row-major in leg order.
#[derive(Clone, Debug)]
pub struct Tensor {
    legs: Vec<String>,
    dims: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn from_fn(legs: Vec<(String, usize)>, f: impl Fn(&[usize]) -> C64) -> Self {
        let (legs, dims): (Vec<String>, Vec<usize>) = legs.into_iter().unzip();
        let size = dims.iter().product();
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(size);
        for mut k in 0..size {
            for (i, &d) in idx.iter_mut().zip(&dims).rev() {
                *i = k % d;
                k /= d;
            }
            data.push(f(&idx));
        }
        Tensor { legs, dims, data }
    }

    pub fn legs(&self) -> &[String] {
        &self.legs
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    fn position(&self, leg: &str) -> Result<usize> {
        self.legs.iter().position(|l| l == leg).ok_or_else(|| Error::SiteMismatch(format!("tensor has no leg `{leg}`")))
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    /// Same tensor with legs renamed through `map`.
    pub fn relabeled(mut self, map: &[(&str, String)]) -> Self {
        for l in self.legs.iter_mut() {
            if let Some((_, to)) = map.iter().find(|(from, _)| from == l) {
                *l = to.clone();
            }
        }
        self
    }

    pub fn permuted(&self, order: &[&str]) -> Result<Tensor> {
        if order.len() != self.legs.len() {
            return Err(Error::SiteMismatch(format!("permutation lists {} of {} legs", order.len(), self.legs.len())));
        }
        let pos = order.iter().map(|l| self.position(l)).collect::<Result<Vec<_>>>()?;
        let old_strides = self.strides();
        let dims: Vec<usize> = pos.iter().map(|&p| self.dims[p]).collect();
        let data: Vec<C64> = (0..self.data.len())
            .into_par_iter()
            .map(|mut k| {
                let mut off = 0;
                for (i, &p) in pos.iter().enumerate().rev() {
                    off += (k % dims[i]) * old_strides[p];
                    k /= dims[i];
                }
                self.data[off]
            })
            .collect();
        Ok(Tensor { legs: order.iter().map(|s| s.to_string()).collect(), dims, data })
    }

    /// Sums over every leg name the two tensors share.
    pub fn contract(&self, other: &Tensor, limit: u128) -> Result<Tensor> {
        let shared: Vec<&str> = self.legs.iter().filter(|l| other.legs.contains(l)).map(String::as_str).collect();
        for s in &shared {
            if self.dims[self.position(s)?] != other.dims[other.position(s)?] {
                return Err(Error::Dimension(format!("leg `{s}` has mismatched dimensions")));
            }
        }
        let fa: Vec<&str> = self.legs.iter().map(String::as_str).filter(|l| !shared.contains(l)).collect();
        let fb: Vec<&str> = other.legs.iter().map(String::as_str).filter(|l| !shared.contains(l)).collect();
        let dim_of = |t: &Tensor, ls: &[&str]| -> usize { ls.iter().map(|l| t.dims[t.position(l).unwrap()]).product() };
        let (m, s, n) = (dim_of(self, &fa), dim_of(self, &shared), dim_of(other, &fb));
        let required = (m as u128) * (n as u128);
        if required > limit {
            return Err(Error::Envelope { required, limit });
        }
        let a = self.permuted(&[fa.clone(), shared.clone()].concat())?;
        let b = other.permuted(&[shared.clone(), fb.clone()].concat())?;
        let am = CMat::from_row_slice(m, s, &a.data);
        let bm = CMat::from_row_slice(s, n, &b.data);
        let c = (am * bm).transpose();
        let legs: Vec<String> = fa.iter().chain(&fb).map(|s| s.to_string()).collect();
        let dims: Vec<usize> = fa.iter().map(|l| self.dims[self.position(l).unwrap()]).chain(fb.iter().map(|l| other.dims[other.position(l).unwrap()])).collect();
        Ok(Tensor { legs, dims, data: c.as_slice().to_vec() })
    }

    /// `T'[…, i, …] = Σ_j M[i, j] T[…, j, …]` on leg `leg`.
    pub fn apply_leg(&self, leg: &str, m: &CMat) -> Result<Tensor> {
        let p = self.position(leg)?;
        let d = self.dims[p];
        if m.shape() != (d, d) {
            return Err(Error::Dimension(format!("{}×{} matrix on leg `{leg}` of dim {d}", m.nrows(), m.ncols())));
        }
        let stride = self.strides()[p];
        let mut data = vec![ZERO; self.data.len()];
        for (k, out) in data.iter_mut().enumerate() {
            let i = (k / stride) % d;
            let base = k - i * stride;
            *out = (0..d).map(|j| m[(i, j)] * self.data[base + j * stride]).sum();
        }
        Ok(Tensor { legs: self.legs.clone(), dims: self.dims.clone(), data })
    }

    /// Acts with `x` on a virtual leg as `T ∘ x`, i.e. `xᵀ` on the index.
    pub fn compose_leg(&self, leg: &str, x: &CMat) -> Result<Tensor> {
        self.apply_leg(leg, &x.transpose())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        let order: Vec<&str> = self.legs.iter().map(String::as_str).collect();
        let o = other.permuted(&order)?;
        if o.dims != self.dims {
            return Err(Error::Dimension("tensors with different leg dimensions".into()));
        }
        Ok(self.data.iter().zip(&o.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    fn multi(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for (i, &d) in idx.iter_mut().zip(&self.dims).rev() {
            *i = k % d;
            k /= d;
        }
        idx
    }
}

/// One cell of a group-gauging layer with legs `left`, `right` (bond values
/// `a`, `b`), `matter_in`, `matter_out` and `gauge`:
/// `U(a)` on the matter and `conj τ(a, b⁻¹) τ(b⁻¹, b) |a b⁻¹⟩` on the gauge.
pub fn group_layer_tensor(group: &FiniteGroup, tau: &TwoCocycle, rep: MatterRep) -> Tensor {
    let n = group.order();
    let u: Vec<Monomial> = group.elements().map(|a| rep.mono(group, a)).collect();
    Tensor::from_fn(
        ["left", "right", "matter_in", "matter_out", "gauge"].iter().map(|s| (s.to_string(), n)).collect(),
        |i| {
            let (a, b, mi, mo, c) = (i[0], i[1], i[2], i[3], i[4]);
            let bi = group.inv(b);
            if u[a].target[mi] != mo || c != group.mul(a, bi) {
                return ZERO;
            }
            u[a].phase[mi] * tau.value(a, bi).conj() * tau.value(bi, b)
        },
    )
}

/// One cell of a Rep-gauging layer with legs `left`, `right` (bond values
/// `a`, `b`), `new`, `old_in` and `old_out`: `|a⟩` on the new site and the
/// projector onto `|a b⁻¹⟩` on the old one.
pub fn rep_layer_tensor(group: &FiniteGroup) -> Tensor {
    let n = group.order();
    Tensor::from_fn(
        ["left", "right", "new", "old_in", "old_out"].iter().map(|s| (s.to_string(), n)).collect(),
        |i| {
            let (a, b, new, oi, oo) = (i[0], i[1], i[2], i[3], i[4]);
            let c = group.mul(a, group.inv(b));
            if new == a && oi == c && oo == c {
                ONE
            } else {
                ZERO
            }
        },
    )
}

/// Boundary cell with legs `left`, `right` (bond values in `K`), `white`
/// (`C G`) and `gray` (`C K`): `[white = a] [a = k b] β(k, b)`.
pub fn boundary_tensor(k: &SubgroupEmbedding, beta: &TwoCocycle) -> Tensor {
    let kg = k.group();
    let (nk, ng) = (kg.order(), k.parent().order());
    Tensor::from_fn(vec![("left".into(), nk), ("right".into(), nk), ("white".into(), ng), ("gray".into(), nk)], |i| {
        let (a, b, w, x) = (i[0], i[1], i[2], i[3]);
        if w == k.to_parent(a) && a == kg.mul(x, b) {
            beta.value(x, b)
        } else {
            ZERO
        }
    })
}

/// Boundary data and per-round twists of the layered network.
#[derive(Clone, Debug)]
pub struct PepsNetwork {
    pub group: FiniteGroup,
    pub k: SubgroupEmbedding,
    pub beta: TwoCocycle,
    pub taus: Vec<TwoCocycle>,
    pub cols: usize,
}

/// Contracts the boundary ring and `rows` alternating layers (group layers
/// first). Sites are named as in [`iterate_gauging`] on the boundary state.
pub fn build_peps_state(net: &PepsNetwork, rows: usize, limit: u128) -> Result<DenseState> {
    let n = net.cols;
    if n < 2 {
        return Err(Error::Dimension("the network needs at least two columns".into()));
    }
    let g = &net.group;
    let ring = |cells: Vec<Tensor>| -> Result<Tensor> {
        let mut it = cells.into_iter();
        let first = it.next().unwrap();
        it.try_fold(first, |acc, t| acc.contract(&t, limit))
    };
    let leg = |id: &str, v: usize| format!("{id}#{v}");
    let mut version: HashMap<String, usize> = HashMap::new();
    let bt = boundary_tensor(&net.k, &net.beta);
    let mut state = ring(
        (0..n)
            .map(|j| {
                bt.clone().relabeled(&[
                    ("left", format!("bd:{j}")),
                    ("right", format!("bd:{}", (j + 1) % n)),
                    ("white", leg(&format!("w:{j}"), 0)),
                    ("gray", leg(&format!("k:{j}"), 0)),
                ])
            })
            .collect(),
    )?;
    let mut matter: Vec<String> = (0..n).map(|j| format!("w:{j}")).collect();
    for j in 0..n {
        version.insert(matter[j].clone(), 0);
        version.insert(format!("k:{j}"), 0);
    }
    let mut old: Vec<String> = Vec::new();
    for r in 1..=rows {
        let layer = if r % 2 == 1 {
            let tau = net.taus.get((r - 1) / 2).or(net.taus.last()).cloned().unwrap_or_else(|| TwoCocycle::trivial(g));
            let t = group_layer_tensor(g, &tau, MatterRep::Right);
            let gauge: Vec<String> = (0..n).map(|j| format!("g{r}:{j},{}", (j + 1) % n)).collect();
            let cells = (0..n)
                .map(|j| {
                    let v = version[&matter[j]];
                    t.clone().relabeled(&[
                        ("left", format!("x{r}:{j}")),
                        ("right", format!("x{r}:{}", (j + 1) % n)),
                        ("matter_in", leg(&matter[j], v)),
                        ("matter_out", leg(&matter[j], v + 1)),
                        ("gauge", leg(&gauge[j], 0)),
                    ])
                })
                .collect();
            for j in 0..n {
                *version.get_mut(&matter[j]).unwrap() += 1;
                version.insert(gauge[j].clone(), 0);
            }
            old = gauge;
            ring(cells)?
        } else {
            let t = rep_layer_tensor(g);
            let new: Vec<String> = (0..n).map(|j| format!("v{r}:{j}")).collect();
            let cells = (0..n)
                .map(|j| {
                    let v = version[&old[j]];
                    t.clone().relabeled(&[
                        ("left", format!("x{r}:{j}")),
                        ("right", format!("x{r}:{}", (j + 1) % n)),
                        ("new", leg(&new[j], 0)),
                        ("old_in", leg(&old[j], v)),
                        ("old_out", leg(&old[j], v + 1)),
                    ])
                })
                .collect();
            for j in 0..n {
                *version.get_mut(&old[j]).unwrap() += 1;
                version.insert(new[j].clone(), 0);
            }
            matter = new;
            ring(cells)?
        };
        state = state.contract(&layer, limit)?;
    }
    let ids: Vec<(String, usize)> = state.legs.iter().zip(&state.dims).map(|(l, &d)| (l.split('#').next().unwrap().to_string(), d)).collect();
    DenseState::from_amplitudes(TensorFactorSpace::new(ids)?, state.data)
}

fn mono_mat(m: &Monomial) -> CMat {
    m.to_matrix()
}

/// Symmetry pull-through identities of the layer and boundary tensors and
/// the flux pull-through of an irrep matrix product state through them.
/// `tau` twists the group layers and `alpha` the boundary cells.
pub fn pullthrough_checks(group: &FiniteGroup, k: &SubgroupEmbedding, tau: &TwoCocycle, alpha: &TwoCocycle) -> Result<Vec<CheckEntry>> {
    let mut out = Vec::new();
    let mut push = |name: &str, param: String, r: f64| out.push(CheckEntry::new("pullthrough", name, "single tensor", param, r, TENSOR_TOL));

    for rep in [MatterRep::Left, MatterRep::Right] {
        let e = group_layer_tensor(group, tau, rep);
        let tag = match rep {
            MatterRep::Left => "L",
            MatterRep::Right => "R",
        };
        let (mut r1, mut r2) = (0.0f64, 0.0f64);
        for g in group.elements() {
            let tbar = mono_mat(&tau.left_mono(g).conj());
            // U(g) ⊗ τ̄L(g) on matter and gauge moves onto the left bond.
            let lhs = e.apply_leg("matter_out", &mono_mat(&rep.mono(group, g)))?.apply_leg("gauge", &tbar)?;
            r1 = r1.max(lhs.max_abs_diff(&e.compose_leg("left", &tbar)?)?);
            // τR(g) on the gauge equals τL(g) on the right bond.
            let lhs = e.apply_leg("gauge", &mono_mat(&tau.right_mono(g)))?;
            r2 = r2.max(lhs.max_abs_diff(&e.compose_leg("right", &mono_mat(&tau.left_mono(g)))?)?);
        }
        push("group layer: left gauge", format!("matter {tag}"), r1);
        push("group layer: right gauge", format!("matter {tag}"), r2);
    }

    let o = rep_layer_tensor(group);
    let (mut r3, mut r4) = (0.0f64, 0.0f64);
    for g in group.elements() {
        let l = mono_mat(&group.left_mono(g));
        let lhs = o.apply_leg("new", &l)?.apply_leg("old_out", &l)?.apply_leg("old_in", &l.map(|z| z.conj()))?;
        r3 = r3.max(lhs.max_abs_diff(&o.compose_leg("left", &l)?)?);
        let r = mono_mat(&group.right_mono(g));
        let lhs = o.apply_leg("new", &r)?;
        r4 = r4.max(lhs.max_abs_diff(&o.compose_leg("left", &r)?.compose_leg("right", &r)?)?);
    }
    push("rep layer: left translation", String::new(), r3);
    push("rep layer: right translation", String::new(), r4);

    let b = boundary_tensor(k, alpha);
    let (mut r5, mut r6) = (0.0f64, 0.0f64);
    for x in k.group().elements() {
        let abar = mono_mat(&alpha.left_mono(x).conj());
        let lhs = b.apply_leg("white", &mono_mat(&group.left_mono(k.to_parent(x))))?.apply_leg("gray", &abar)?;
        r5 = r5.max(lhs.max_abs_diff(&b.compose_leg("left", &abar)?)?);
        let lhs = b.apply_leg("gray", &mono_mat(&alpha.right_mono(x)))?;
        r6 = r6.max(lhs.max_abs_diff(&b.compose_leg("right", &mono_mat(&alpha.left_mono(x)))?)?);
    }
    push("boundary: left", String::new(), r5);
    push("boundary: right", String::new(), r6);

    // Flux pull-through: ρ evaluated on a physical leg equals a product of ρ
    // on the bonds, entry by entry.
    let e = group_layer_tensor(group, tau, MatterRep::Right);
    let kp = |x: usize| k.to_parent(x);
    let identities: Vec<(&str, &Tensor, Box<dyn Fn(&[usize], &Irrep) -> (CMat, CMat)>)> = vec![
        ("flux: group layer gauge", &e, Box::new(|i: &[usize], rho: &Irrep| (rho.matrix(i[4]).clone(), rho.matrix(i[0]) * rho.matrix(i[1]).adjoint()))),
        ("flux: rep layer old", &o, Box::new(|i: &[usize], rho: &Irrep| (rho.matrix(i[4]).clone(), rho.matrix(i[0]) * rho.matrix(i[1]).adjoint()))),
        ("flux: rep layer new", &o, Box::new(|i: &[usize], rho: &Irrep| (rho.matrix(i[2]).clone(), rho.matrix(i[0]).clone()))),
        ("flux: boundary", &b, Box::new(move |i: &[usize], rho: &Irrep| (rho.matrix(i[2]).clone(), rho.matrix(kp(i[3])) * rho.matrix(kp(i[1]))))),
    ];
    let reps = irreps(group)?;
    for (name, t, f) in identities {
        for rho in &reps {
            let mut worst = 0.0f64;
            for (idx, amp) in t.data().iter().enumerate() {
                if amp.norm() == 0.0 {
                    continue;
                }
                let (lhs, rhs) = f(&t.multi(idx), rho);
                worst = worst.max(amp.norm() * max_abs_diff(&lhs, &rhs));
            }
            push(name, rho.label().to_string(), worst);
        }
    }
    Ok(out)
}

/// Term-by-term comparison of the `Z2` stabilizers with Pauli `X` stars and
/// `Z` plaquettes built directly from 2×2 matrices.
pub fn toric_code_comparison(stab: &StabilizerSet) -> Result<Vec<CheckEntry>> {
    if stab.group().order() != 2 || stab.boundary || !stab.tau.is_trivial() {
        return Err(Error::UnsupportedGroup(format!("{} (toric-code comparison needs untwisted Z2 on a torus)", stab.group().name())));
    }
    let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let z = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    let half = |op: SiteOperator| SiteOperator::identity().plus(op).scale_re(0.5);
    let string = |edges: &[usize], m: &CMat| {
        SiteOperator::product(edges.iter().map(|&e| LocalFactor::single(&stab.lattice.graph().edges()[e].id, LocalMatrix::Dense(m.clone()))).collect())
    };
    let space = stab.space();
    let sign = stab.irreps.iter().find(|r| !r.is_trivial()).ok_or_else(|| Error::Internal("Z2 lacks a sign irrep".into()))?;
    let mut out = Vec::new();
    let g = stab.lattice.graph();
    for &v in stab.lattice.stars() {
        let edges: Vec<usize> = g.outgoing(v).iter().chain(g.incoming(v)).copied().collect();
        let star = stab.star_operator(v, 1)?;
        let hand = string(&edges, &x);
        out.push(CheckEntry::new("toric-code", "star vs X string", stab.vertex_label(v), "", operator_distance(&space, &star, &hand)?, 1e-14));
        out.push(CheckEntry::new("toric-code", "A_v vs (1+X⁴)/2", stab.vertex_label(v), "", operator_distance(&space, &stab.vertex_term(v)?, &half(hand))?, 1e-14));
    }
    for (f, face) in stab.lattice.faces().iter().enumerate() {
        let hand = string(&face.edges, &z);
        out.push(CheckEntry::new("toric-code", "plaquette vs Z string", face.id.clone(), "", operator_distance(&space, &stab.plaquette_operator(f, sign)?, &hand)?, 1e-14));
        out.push(CheckEntry::new(
            "toric-code",
            "B_f vs (1+Z⁴)/2",
            face.id.clone(),
            "",
            operator_distance(&space, &stab.face_term(f, BfWeights::Projector)?, &half(hand))?,
            1e-14,
        ));
    }
    Ok(out)
}

/// `‖B_f² ψ − B_f ψ‖` for the basis state whose only non-identity edge is
/// the top edge of face `f`, set to `flux`; its holonomy is `flux`.
pub fn bf_idempotence_on_flux(stab: &StabilizerSet, f: usize, flux: usize, weights: BfWeights) -> Result<f64> {
    let face = stab.lattice.faces().get(f).ok_or_else(|| Error::InvalidLattice(format!("no face {f}")))?;
    let top = face.edges[0];
    if stab.is_boundary_edge(top) {
        return Err(Error::InvalidLattice("top edge of a face lies on the boundary".into()));
    }
    let space = stab.space();
    let multi: Vec<usize> = (0..space.len()).map(|e| if e == top { flux } else { 0 }).collect();
    let psi = DenseState::basis(space, &multi)?;
    let b = stab.face_term(f, weights)?;
    let once = b.apply(&psi)?;
    let twice = b.apply(&once)?;
    twice.distance(&once)
}

/// Eigenvalue of `B_f` on a basis state with holonomy `h`.
pub fn bf_eigenvalue(group: &FiniteGroup, reps: &[Irrep], h: usize, weights: BfWeights) -> C64 {
    reps.iter().map(|rho| rho.character(h) / rho.dim() as f64 * weights.weight(group, reps.len(), rho)).sum()
}

/// Which route produced the emergence checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmergencePath {
    /// The full patch after the requested rounds.
    FullPatch,
    /// First round only, with local Gauss laws, the bottom-row fluxes and
    /// the tensor pull-through identities.
    Fallback,
}

#[derive(Clone, Debug)]
pub struct EmergenceSetup {
    pub group: FiniteGroup,
    pub k: SubgroupEmbedding,
    pub beta: TwoCocycle,
    pub tau: TwoCocycle,
    pub n: usize,
    pub rounds: usize,
}

#[derive(Clone, Debug)]
pub struct EmergenceOutcome {
    pub path: EmergencePath,
    pub entries: Vec<CheckEntry>,
    pub notes: Vec<String>,
    pub state_dim: u128,
}

/// Iterated gauging of the boundary state, then every stabilizer, all
/// commutators and the energy on the resulting patch; falls back to the
/// local checks when the patch exceeds `envelope`.
pub fn emergence_checks(setup: &EmergenceSetup, envelope: u128, weights: BfWeights) -> Result<EmergenceOutcome> {
    let EmergenceSetup { group, k, beta, tau, n, rounds } = setup;
    let b = boundary_input_state(k, beta, group, *n)?;
    let base = b.state.space().total_dim() as u128;
    let required = iterated_dimension(base, group.order(), *n, *rounds);
    let opts = GaugeOptions { strict: true, envelope };
    let mut notes = Vec::new();
    let stab_for = |lat: Lattice| StabilizerSet::new(lat, group, k.clone(), beta.clone(), tau.clone());
    if required <= envelope {
        let it = iterate_gauging(&b.state, &b.chain(), std::slice::from_ref(tau), *rounds, &opts)?;
        let stab = stab_for(emergence_lattice(*n, *rounds)?)?;
        if !stab.twist_validated() {
            notes.push("twist combination unvalidated: α is not the restriction of a nontrivial τ".into());
        }
        let s = embed_on_lattice(&it.state, &it.layout, *n, &stab)?;
        let mut entries = verify_ground_state(&s, &stab)?;
        entries.extend(stabilizer_commutators(&stab)?);
        let (e, expected) = ground_energy(&s, &stab, weights)?;
        entries.push(CheckEntry::new("qdouble", "ground energy", "patch", format!("{e:.12} vs {expected}"), (e - expected).abs(), STATE_TOL));
        return Ok(EmergenceOutcome { path: EmergencePath::FullPatch, entries, notes, state_dim: required });
    }
    notes.push(format!("patch dimension {required} exceeds {envelope}; running the first round with local checks"));
    let it = iterate_gauging(&b.state, &b.chain(), std::slice::from_ref(tau), 1, &opts)?;
    let s = &it.state;
    let mut entries = Vec::new();
    let chain = b.chain();
    let whole = SubgroupEmbedding::whole(group);
    for j in 0..*n {
        for x in group.elements() {
            let op = local_group_symmetry(&chain, j, &whole, tau, x);
            entries.push(CheckEntry::new("qdouble", "bulk Gauss law", format!("cell {j}"), group.label(x), invariance_residual(&op, s)?, STATE_TOL));
        }
        for x in k.group().elements() {
            entries.push(CheckEntry::new("qdouble", "star", format!("boundary {j}"), k.group().label(x), invariance_residual(&b.local_symmetry(j, x), s)?, STATE_TOL));
        }
    }
    let lat = build_square_lattice(*n, 1, Boundary::SmoothBottom)?;
    let map = {
        let mut m = lattice_site_map(&LayerLayout { initial: vec![], rounds: vec![] }, *n, &lat)?;
        for (j, site) in it.layout.rounds[0].new_sites.iter().enumerate() {
            m.insert(site.clone(), format!("top:{j}"));
        }
        m
    };
    let renamed = s.relabel(|id| map.get(id).cloned())?;
    for j in 0..*n {
        let edges = [format!("top:{j}"), map[&format!("w:{j}")].clone(), map[&format!("k:{j}")].clone(), map[&format!("w:{}", (j + 1) % n)].clone()];
        for rho in irreps(group)? {
            let d = rho.dim() as f64;
            let dims: Vec<usize> = edges.iter().map(|e| renamed.space().dim_of(e)).collect::<Result<_>>()?;
            let size: usize = dims.iter().product();
            let diag = (0..size)
                .map(|mut idx| {
                    let mut v = [0usize; 4];
                    for (slot, &dd) in v.iter_mut().zip(&dims).rev() {
                        *slot = idx % dd;
                        idx /= dd;
                    }
                    let (t, l, bo, r) = (v[0], v[1], k.to_parent(v[2]), v[3]);
                    let hol = group.product_of([group.inv(r), group.inv(bo), l, t]);
                    rho.character(hol) / d
                })
                .collect();
            let op = SiteOperator::local(LocalFactor::new(edges.clone(), LocalMatrix::Diagonal(diag)));
            entries.push(CheckEntry::new("qdouble", "plaquette", format!("bottom face {j}"), rho.label(), invariance_residual(&op, &renamed)?, STATE_TOL));
        }
    }
    entries.extend(pullthrough_checks(group, k, tau, beta)?);
    Ok(EmergenceOutcome { path: EmergencePath::Fallback, entries, notes, state_dim: required })
}
