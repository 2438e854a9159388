//! Gauging in two spatial dimensions: the 0-form group symmetry onto edges,
//! the 1-form Rep G symmetry back onto vertices, and the alternation that
//! stacks layers into a three-dimensional patch.

use rayon::prelude::*;
use serde::Serialize;

use crate::gauge1d::{finish, invariance_residual, precondition, GaugeOptions, Gauged};
use crate::groups::{irreps, FiniteGroup, Irrep, SubgroupEmbedding};
use crate::hilbert::{commutator_residual, check_envelope, DenseState, LocalFactor, LocalMatrix, SiteOperator, TensorFactorSpace};
use crate::lattice::{build_cubic_lattice, build_square_lattice, Axis, Boundary, Lattice, OrientedGraph, Path};
use crate::linalg::{ONE, ZERO};
use crate::qdouble::{holonomy_operator, loop_operator, COMMUTATOR_TOL, STATE_TOL};
use crate::report::CheckEntry;
use crate::{Error, Result, C64};

/// Tolerance for the operator identities checked on gauged states.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Site assignment on an oriented graph: one gauge site per edge, and per
/// vertex a matter site and a site for the next layer. Matter carries the
/// right-regular action.
#[derive(Clone, Debug)]
pub struct EdgeStateLayout {
    pub group: FiniteGroup,
    graph: OrientedGraph,
    extents: Vec<usize>,
    loops: Vec<Path>,
    pub edge_sites: Vec<String>,
    pub matter_sites: Vec<String>,
    pub vertex_sites: Vec<String>,
    /// Position of the edge layer in a stack (1 for a single layer).
    pub layer: usize,
}

impl EdgeStateLayout {
    /// Periodic `w × h` lattice with sites `m:(x,y)`, the lattice edge ids
    /// and `v:(x,y)`. Flux checks use the face loops and both
    /// non-contractible loops.
    pub fn torus(group: &FiniteGroup, w: usize, h: usize) -> Result<Self> {
        let lat = build_square_lattice(w, h, Boundary::Periodic)?;
        let g = lat.graph();
        Ok(EdgeStateLayout {
            group: group.clone(),
            graph: g.clone(),
            extents: lat.extents.clone(),
            loops: torus_loops(&lat),
            edge_sites: g.edges().iter().map(|e| e.id.clone()).collect(),
            matter_sites: g.vertices().iter().map(|v| format!("m:{v}")).collect(),
            vertex_sites: g.vertices().iter().map(|v| format!("v:{v}")).collect(),
            layer: 1,
        })
    }

    /// Arbitrary graph with explicit site names and flux loops.
    pub fn from_graph(group: &FiniteGroup, graph: OrientedGraph, loops: Vec<Path>, matter_prefix: &str, vertex_prefix: &str) -> Self {
        EdgeStateLayout {
            group: group.clone(),
            extents: vec![],
            loops,
            edge_sites: graph.edges().iter().map(|e| e.id.clone()).collect(),
            matter_sites: graph.vertices().iter().map(|v| format!("{matter_prefix}:{v}")).collect(),
            vertex_sites: graph.vertices().iter().map(|v| format!("{vertex_prefix}:{v}")).collect(),
            graph,
            layer: 1,
        }
    }

    /// Layer `z` of a cubic stack over `base`: in-plane edges of the layer,
    /// matter on the rungs below it and new sites on the rungs above.
    pub fn layer_of(group: &FiniteGroup, base: &Lattice, cubic: &Lattice, z: usize) -> Result<Self> {
        let g = base.graph();
        let at = |c: &[usize], level: usize, axis: Axis| -> Result<String> {
            let full = [c[0], c[1], level];
            let e = cubic.edge_from(&full, axis).ok_or_else(|| Error::InvalidLattice(format!("no {axis:?} edge at {full:?} in the stack")))?;
            Ok(cubic.graph().edges()[e].id.clone())
        };
        Ok(EdgeStateLayout {
            group: group.clone(),
            graph: g.clone(),
            extents: base.extents.clone(),
            loops: torus_loops(base),
            edge_sites: g.edges().iter().map(|e| at(&g.vertices()[e.origin].0, z, e.axis)).collect::<Result<_>>()?,
            matter_sites: g.vertices().iter().map(|v| at(&v.0, z, Axis::Z)).collect::<Result<_>>()?,
            vertex_sites: g.vertices().iter().map(|v| at(&v.0, z + 1, Axis::Z)).collect::<Result<_>>()?,
            layer: z,
        })
    }

    pub fn graph(&self) -> &OrientedGraph {
        &self.graph
    }

    /// Generating set of closed loops used for flux preconditions.
    pub fn loops(&self) -> &[Path] {
        &self.loops
    }
}

fn torus_loops(lat: &Lattice) -> Vec<Path> {
    lat.faces().iter().map(|f| lat.face_loop(f)).chain(lat.noncontractible_loops()).collect()
}

fn mono_factor(site: &str, m: crate::linalg::Monomial) -> LocalFactor {
    LocalFactor::single(site, LocalMatrix::Monomial(m))
}

/// `U_v(g) ⊗_{out} R_e(g) ⊗_{in} L_e(g)` with `U = R` on the matter site.
pub fn vertex_gauge_transformation(lay: &EdgeStateLayout, v: usize, g: usize) -> SiteOperator {
    let gr = &lay.group;
    let mut fs = vec![mono_factor(&lay.matter_sites[v], gr.right_mono(g))];
    fs.extend(lay.graph.outgoing(v).iter().map(|&e| mono_factor(&lay.edge_sites[e], gr.right_mono(g))));
    fs.extend(lay.graph.incoming(v).iter().map(|&e| mono_factor(&lay.edge_sites[e], gr.left_mono(g))));
    SiteOperator::product(fs)
}

/// `P_v = (1/|G|) Σ_g U_v(g) ⊗_{out} R_e(g) ⊗_{in} L_e(g)`.
pub fn vertex_gauss_projector(lay: &EdgeStateLayout, v: usize) -> SiteOperator {
    let n = lay.group.order();
    SiteOperator::sum(lay.group.elements().map(|g| vertex_gauge_transformation(lay, v, g))).scale_re(1.0 / n as f64)
}

/// `⊗_v R_v(g)` on the matter sites.
pub fn global_matter_symmetry(lay: &EdgeStateLayout, g: usize) -> SiteOperator {
    SiteOperator::product(lay.matter_sites.iter().map(|s| mono_factor(s, lay.group.right_mono(g))).collect())
}

/// `⊗_v R_v(g)` on the new vertex sites.
pub fn dual_symmetry(lay: &EdgeStateLayout, g: usize) -> SiteOperator {
    SiteOperator::product(lay.vertex_sites.iter().map(|s| mono_factor(s, lay.group.right_mono(g))).collect())
}

fn dims_after(s: &DenseState, extra: usize, d: usize) -> impl Iterator<Item = usize> + '_ {
    s.space().sites().iter().map(|x| x.dim).chain(std::iter::repeat_n(d, extra))
}

fn grown(s: &DenseState, sites: &[String], v: &[C64]) -> Result<DenseState> {
    let mut order: Vec<&str> = s.space().sites().iter().map(|x| x.id.as_str()).collect();
    order.extend(sites.iter().map(String::as_str));
    s.grow_space(sites.iter().map(|x| (x.clone(), v.to_vec())), &order)
}

/// Edges start in `|e⟩` and every vertex Gauss projector is applied. The
/// input must be invariant under `⊗_v R_v(g)`.
pub fn gauge_0form(s: &DenseState, lay: &EdgeStateLayout, opts: &GaugeOptions) -> Result<Gauged> {
    let g = &lay.group;
    let mut warnings = Vec::new();
    for x in g.elements().skip(1) {
        let r = invariance_residual(&global_matter_symmetry(lay, x), s)?;
        precondition(&format!("global {} symmetry under {}", g.name(), g.label(x)), r, opts, &mut warnings)?;
    }
    check_envelope(dims_after(s, lay.edge_sites.len(), g.order()), opts.envelope)?;
    let mut omega = vec![ZERO; g.order()];
    omega[0] = ONE;
    let mut out = grown(s, &lay.edge_sites, &omega)?;
    for v in 0..lay.graph.vertices().len() {
        out = vertex_gauss_projector(lay, v).apply(&out)?;
    }
    finish(s, out, "0-form gauging", warnings)
}

/// Diagonal `χ_ρ(hol_γ)/d_ρ` on the edges of the closed path `gamma`.
pub fn flux_operator(lay: &EdgeStateLayout, gamma: &Path, rho: &Irrep) -> Result<SiteOperator> {
    let d = rho.dim() as f64;
    let n = lay.group.order();
    loop_operator(gamma, |e| lay.edge_sites[e].clone(), |_| n, |_, x| x, &lay.group, |h| rho.character(h) / d)
}

fn edge_constraint(lay: &EdgeStateLayout, e: usize, allowed: impl Fn(usize) -> bool) -> SiteOperator {
    let g = &lay.group;
    let n = g.order();
    let mut diag = vec![ZERO; n * n * n];
    for a in g.elements().filter(|&a| allowed(a)) {
        for b in g.elements().filter(|&b| allowed(b)) {
            diag[(a * n + g.mul(a, g.inv(b))) * n + b] = ONE;
        }
    }
    let edge = &lay.graph.edges()[e];
    SiteOperator::local(LocalFactor::new(
        [lay.vertex_sites[edge.terminus].clone(), lay.edge_sites[e].clone(), lay.vertex_sites[edge.origin].clone()],
        LocalMatrix::Diagonal(diag),
    ))
}

/// `P_e = Σ_{g,h} |g⟩⟨g|_{t(e)} ⊗ |gh⁻¹⟩⟨gh⁻¹|_e ⊗ |h⟩⟨h|_{o(e)}`.
pub fn edge_gauss_projector(lay: &EdgeStateLayout, e: usize) -> SiteOperator {
    edge_constraint(lay, e, |_| true)
}

/// [`edge_gauss_projector`] with both vertex sums restricted to `K`.
/// Partial 1-form gauging has no validated construction; this projector is
/// exposed for experimentation only.
pub fn edge_gauss_projector_restricted(lay: &EdgeStateLayout, e: usize, k: &SubgroupEmbedding) -> Result<SiteOperator> {
    if k.parent() != &lay.group {
        return Err(Error::NotSubgroup { group: lay.group.name().into(), reason: "subgroup of another group".into() });
    }
    let members = k.elements().to_vec();
    Ok(edge_constraint(lay, e, |a| members.contains(&a)))
}

/// Vertex sites start in `|+⟩` and every edge projector is applied. The
/// input must have trivial flux through every loop of the layout.
pub fn gauge_1form(s: &DenseState, lay: &EdgeStateLayout, opts: &GaugeOptions) -> Result<Gauged> {
    let g = &lay.group;
    let mut warnings = Vec::new();
    let reps = irreps(g)?;
    for (i, gamma) in lay.loops.iter().enumerate() {
        for rho in reps.iter().filter(|r| !r.is_trivial()) {
            let r = invariance_residual(&flux_operator(lay, gamma, rho)?, s)?;
            precondition(&format!("flux of {} through loop {i}", rho.label()), r, opts, &mut warnings)?;
        }
    }
    check_envelope(dims_after(s, lay.vertex_sites.len(), g.order()), opts.envelope)?;
    let plus = vec![ONE; g.order()];
    let mut out = grown(s, &lay.vertex_sites, &plus)?;
    for e in 0..lay.graph.edges().len() {
        out = edge_gauss_projector(lay, e).apply(&out)?;
    }
    finish(s, out, "1-form gauging", warnings)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteRole {
    Matter,
    Gauge,
    Vertex,
}

#[derive(Clone, Debug, Serialize)]
pub struct SiteTag {
    pub id: String,
    pub role: SiteRole,
    pub layer: usize,
    pub axis: Axis,
    /// Round that created the site (0 for the input).
    pub round: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Layout3d {
    pub extents: Vec<usize>,
    pub rounds: usize,
    pub sites: Vec<SiteTag>,
}

#[derive(Clone, Debug)]
pub struct Layered3d {
    pub state: DenseState,
    pub lattice: Lattice,
    pub layout: Layout3d,
    pub norm_ratios: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Number of star layers needed to hold `rounds` rounds.
pub fn stack_depth(rounds: usize) -> usize {
    rounds.div_ceil(2).max(1)
}

/// Alternates [`gauge_0form`] (odd rounds, onto the in-plane edges of layer
/// `(r+1)/2`) and [`gauge_1form`] (even rounds, onto the rungs above layer
/// `r/2`). `lay` must be a torus layout; its matter sites become the rungs
/// below layer 1.
pub fn iterate_3d(s: &DenseState, lay: &EdgeStateLayout, rounds: usize, opts: &GaugeOptions) -> Result<Layered3d> {
    let [w, h] = lay.extents[..] else {
        return Err(Error::InvalidLattice("stacking needs a periodic square base".into()));
    };
    let base = build_square_lattice(w, h, Boundary::Periodic)?;
    let cubic = build_cubic_lattice(w, h, stack_depth(rounds), true)?;
    let (nv, ne) = (base.graph().vertices().len(), base.graph().edges().len());
    let new_sites: usize = (1..=rounds).map(|r| if r % 2 == 1 { ne } else { nv }).sum();
    check_envelope(dims_after(s, new_sites, lay.group.order()), opts.envelope)?;

    let layer1 = EdgeStateLayout::layer_of(&lay.group, &base, &cubic, 1)?;
    let mut tags: Vec<SiteTag> = Vec::new();
    let rename: Vec<(String, String)> = lay.matter_sites.iter().cloned().zip(layer1.matter_sites.iter().cloned()).collect();
    let mut state = s.relabel(|id| rename.iter().find(|(a, _)| a == id).map(|(_, b)| b.clone()))?;
    tags.extend(layer1.matter_sites.iter().map(|id| SiteTag { id: id.clone(), role: SiteRole::Matter, layer: 0, axis: Axis::Z, round: 0 }));
    let mut ratios = Vec::new();
    let mut warnings = Vec::new();
    for r in 1..=rounds {
        let z = r.div_ceil(2);
        let layer = EdgeStateLayout::layer_of(&lay.group, &base, &cubic, z)?;
        let out = if r % 2 == 1 {
            tags.extend(layer.edge_sites.iter().zip(base.graph().edges()).map(|(id, e)| SiteTag { id: id.clone(), role: SiteRole::Gauge, layer: z, axis: e.axis, round: r }));
            gauge_0form(&state, &layer, opts)?
        } else {
            tags.extend(layer.vertex_sites.iter().map(|id| SiteTag { id: id.clone(), role: SiteRole::Vertex, layer: z, axis: Axis::Z, round: r }));
            gauge_1form(&state, &layer, opts)?
        };
        state = out.state;
        ratios.push(out.norm_ratio);
        warnings.extend(out.warnings.into_iter().map(|m| format!("round {r}: {m}")));
    }
    Ok(Layered3d { state, lattice: cubic, layout: Layout3d { extents: vec![w, h], rounds, sites: tags }, norm_ratios: ratios, warnings })
}

/// Stars and plaquettes of the stacked patch, restricted to the sites that
/// exist after the given number of rounds. Besides the cubic faces, each
/// in-plane edge of the top layer closes a three-edge face with the two
/// rungs above it once those rungs exist.
#[derive(Clone, Debug)]
pub struct Stabilizers3d {
    lattice: Lattice,
    group: FiniteGroup,
    irreps: Vec<Irrep>,
    present: Vec<bool>,
    loops: Vec<(String, Path)>,
}

impl Stabilizers3d {
    pub fn new(layered: &Layered3d, group: &FiniteGroup) -> Result<Self> {
        let lat = layered.lattice.clone();
        let g = lat.graph();
        let sites = layered.state.space();
        let present: Vec<bool> = g.edges().iter().map(|e| sites.contains(&e.id)).collect();
        let mut loops = Vec::new();
        for f in lat.faces() {
            if f.edges.iter().all(|&e| present[e]) {
                loops.push((f.id.clone(), lat.face_loop(f)));
            }
        }
        let top = stack_depth(layered.layout.rounds);
        for e in g.edges() {
            let (o, t) = (&g.vertices()[e.origin].0, &g.vertices()[e.terminus].0);
            if e.axis == Axis::Z || o[2] != top {
                continue;
            }
            let (Some(ro), Some(rt)) = (lat.edge_from(&[o[0], o[1], top + 1], Axis::Z), lat.edge_from(&[t[0], t[1], top + 1], Axis::Z)) else { continue };
            if present[ro] && present[rt] {
                let start = g.edges()[ro].origin;
                let ei = g.edge(&e.id).unwrap();
                loops.push((format!("cap:{}", e.id), Path::along(g, start, &[ro, ei, rt])?));
            }
        }
        Ok(Stabilizers3d { irreps: irreps(group)?, group: group.clone(), present, loops, lattice: lat })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n_stars(&self) -> usize {
        self.lattice.stars().len()
    }

    pub fn n_plaquettes(&self) -> usize {
        self.loops.len()
    }

    /// `⊗_{out} R_e(g) ⊗_{in} L_e(g)` over the existing edges at `v`.
    pub fn star_operator(&self, v: usize, g: usize) -> SiteOperator {
        let gr = &self.group;
        let graph = self.lattice.graph();
        let mut fs = Vec::new();
        fs.extend(graph.outgoing(v).iter().filter(|&&e| self.present[e]).map(|&e| mono_factor(&graph.edges()[e].id, gr.right_mono(g))));
        fs.extend(graph.incoming(v).iter().filter(|&&e| self.present[e]).map(|&e| mono_factor(&graph.edges()[e].id, gr.left_mono(g))));
        SiteOperator::product(fs)
    }

    /// `χ_ρ(hol)/d_ρ` around plaquette `i` (cubic face or top cap).
    pub fn plaquette_operator(&self, i: usize, rho: &Irrep) -> Result<SiteOperator> {
        let d = rho.dim() as f64;
        let n = self.group.order();
        let graph = self.lattice.graph();
        holonomy_operator(&self.loops[i].1, |e| graph.edges()[e].id.clone(), |_| n, |_, x| x, &self.group, |h| rho.character(h) / d)
    }

    /// `A_v = (1/|G|) Σ_g S_v(g)`.
    pub fn vertex_term(&self, v: usize) -> SiteOperator {
        SiteOperator::sum(self.group.elements().map(|g| self.star_operator(v, g))).scale_re(1.0 / self.group.order() as f64)
    }

    /// Projector onto trivial holonomy, `Σ_ρ (d_ρ²/|G|) χ_ρ(hol)/d_ρ`.
    pub fn face_term(&self, i: usize) -> Result<SiteOperator> {
        let n = self.group.order() as f64;
        Ok(SiteOperator::sum(
            self.irreps.iter().map(|r| self.plaquette_operator(i, r).map(|op| op.scale_re((r.dim() * r.dim()) as f64 / n))).collect::<Result<Vec<_>>>()?,
        ))
    }

    pub fn hamiltonian(&self) -> Result<SiteOperator> {
        let mut terms: Vec<SiteOperator> = self.lattice.stars().iter().map(|&v| self.vertex_term(v)).collect();
        for i in 0..self.loops.len() {
            terms.push(self.face_term(i)?);
        }
        Ok(SiteOperator::sum(terms).scale_re(-1.0))
    }

    pub fn frustration_free_energy(&self) -> f64 {
        -((self.n_stars() + self.n_plaquettes()) as f64)
    }

    fn all_operators(&self) -> Result<Vec<(&'static str, String, String, SiteOperator)>> {
        let graph = self.lattice.graph();
        let mut ops = Vec::new();
        for &v in self.lattice.stars() {
            for g in self.group.elements().skip(1) {
                ops.push(("star", graph.vertices()[v].to_string(), self.group.label(g).to_string(), self.star_operator(v, g)));
            }
        }
        for (i, (id, _)) in self.loops.iter().enumerate() {
            for rho in self.irreps.iter().filter(|r| !r.is_trivial()) {
                ops.push(("plaquette", id.clone(), rho.label().to_string(), self.plaquette_operator(i, rho)?));
            }
        }
        Ok(ops)
    }

    /// Invariance residuals of every star and plaquette on `s`.
    pub fn verify(&self, s: &DenseState) -> Result<Vec<CheckEntry>> {
        self.all_operators()?
            .par_iter()
            .map(|(kind, loc, param, op)| Ok(CheckEntry::new("gauge_higher", &format!("3d {kind}"), loc.clone(), param.clone(), invariance_residual(op, s)?, STATE_TOL)))
            .collect()
    }

    /// Largest commutator norm per family over all operator pairs; stars at
    /// one vertex are skipped as in the planar case.
    pub fn commutators(&self, space: &TensorFactorSpace) -> Result<Vec<CheckEntry>> {
        let ops = self.all_operators()?;
        let pairs: Vec<(usize, usize)> = (0..ops.len())
            .flat_map(|i| (i + 1..ops.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| !(ops[i].0 == "star" && ops[j].0 == "star" && ops[i].1 == ops[j].1))
            .collect();
        let res: Vec<(String, f64)> = pairs
            .par_iter()
            .map(|&(i, j)| Ok((format!("3d commutator {}-{}", ops[i].0, ops[j].0), commutator_residual(space, &ops[i].3, &ops[j].3)?)))
            .collect::<Result<_>>()?;
        Ok(["3d commutator star-star", "3d commutator star-plaquette", "3d commutator plaquette-plaquette"]
            .into_iter()
            .map(|fam| {
                let rs: Vec<f64> = res.iter().filter(|(f, _)| f == fam).map(|(_, r)| *r).collect();
                CheckEntry::new("gauge_higher", fam, "all pairs", format!("{} pairs", rs.len()), rs.iter().copied().fold(0.0, f64::max), COMMUTATOR_TOL)
            })
            .collect())
    }
}

/// Residuals of the planar identities on a `w × h` torus followed by the
/// stacked-patch checks after `rounds` rounds, starting from the uniform
/// matter state.
pub fn higher_checks(group: &FiniteGroup, w: usize, h: usize, rounds: usize, opts: &GaugeOptions) -> Result<Vec<CheckEntry>> {
    let lay = EdgeStateLayout::torus(group, w, h)?;
    let reps = irreps(group)?;
    let s = uniform_matter(&lay)?;
    let mut out = Vec::new();
    let entry = |check: &str, loc: String, param: String, r: f64| CheckEntry::new("gauge_higher", check, loc, param, r, IDENTITY_TOL);

    let space = TensorFactorSpace::new(
        lay.matter_sites.iter().chain(&lay.edge_sites).chain(&lay.vertex_sites).map(|x| (x.clone(), group.order())),
    )?;
    let nv = lay.graph.vertices().len();
    let ne = lay.graph.edges().len();
    let pv: Vec<SiteOperator> = (0..nv).map(|v| vertex_gauss_projector(&lay, v)).collect();
    let pe: Vec<SiteOperator> = (0..ne).map(|e| edge_gauss_projector(&lay, e)).collect();
    let worst = |ops: &[SiteOperator]| -> Result<f64> {
        let pairs: Vec<(usize, usize)> = (0..ops.len()).flat_map(|i| (i + 1..ops.len()).map(move |j| (i, j))).collect();
        Ok(pairs.par_iter().map(|&(i, j)| commutator_residual(&space, &ops[i], &ops[j])).collect::<Result<Vec<f64>>>()?.into_iter().fold(0.0, f64::max))
    };
    out.push(entry("vertex projectors commute", "all pairs".into(), String::new(), worst(&pv)?));
    out.push(entry("edge projectors commute", "all pairs".into(), String::new(), worst(&pe)?));
    let mut eq = 0.0f64;
    for (e, p) in pe.iter().enumerate() {
        let edge = &lay.graph.edges()[e];
        for g in group.elements().skip(1) {
            let rr = SiteOperator::product(vec![
                mono_factor(&lay.vertex_sites[edge.terminus], group.right_mono(g)),
                mono_factor(&lay.vertex_sites[edge.origin], group.right_mono(g)),
            ]);
            eq = eq.max(commutator_residual(&space, p, &rr)?);
        }
    }
    out.push(entry("edge projector commutes with R⊗R", "all edges".into(), String::new(), eq));

    let g0 = gauge_0form(&s, &lay, opts)?;
    for (i, gamma) in lay.loops.iter().enumerate() {
        for rho in reps.iter().filter(|r| !r.is_trivial()) {
            let r = invariance_residual(&flux_operator(&lay, gamma, rho)?, &g0.state)?;
            out.push(entry("flux after 0-form gauging", format!("loop {i}"), rho.label().into(), r));
        }
    }
    let g1 = gauge_1form(&g0.state, &lay, opts)?;
    for g in group.elements().skip(1) {
        out.push(entry("dual symmetry after 1-form gauging", "all vertices".into(), group.label(g).into(), invariance_residual(&dual_symmetry(&lay, g), &g1.state)?));
    }

    let stacked = iterate_3d(&s, &lay, rounds, opts)?;
    let stab = Stabilizers3d::new(&stacked, group)?;
    out.extend(stab.verify(&stacked.state)?);
    out.extend(stab.commutators(stacked.state.space())?);
    let st = &stacked.state;
    let e = st.expectation(&stab.hamiltonian()?)?.re / st.inner(st)?.re;
    out.push(CheckEntry::new("gauge_higher", "3d ground energy", "patch", format!("expected {}", stab.frustration_free_energy()), (e - stab.frustration_free_energy()).abs(), STATE_TOL));
    Ok(out)
}

/// `⊗_v |+⟩` on the matter sites, normalized.
pub fn uniform_matter(lay: &EdgeStateLayout) -> Result<DenseState> {
    let n = lay.group.order();
    let amp = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    DenseState::embed_product(lay.matter_sites.iter().map(|m| (m.clone(), vec![amp; n])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::operator_distance;
    use crate::lattice::Vertex;
    use crate::linalg::CMat;

    fn z2() -> FiniteGroup {
        FiniteGroup::cyclic(2).unwrap()
    }

    fn edge_space(lay: &EdgeStateLayout, edges: &[usize]) -> TensorFactorSpace {
        TensorFactorSpace::new(edges.iter().map(|&e| (lay.edge_sites[e].clone(), lay.group.order()))).unwrap()
    }

    fn full_space(lay: &EdgeStateLayout) -> TensorFactorSpace {
        let n = lay.group.order();
        TensorFactorSpace::new(lay.matter_sites.iter().chain(&lay.edge_sites).chain(&lay.vertex_sites).map(|x| (x.clone(), n))).unwrap()
    }

    #[test]
    fn vertex_projector_is_the_five_site_average() {
        let g = z2();
        let lay = EdgeStateLayout::torus(&g, 3, 3).unwrap();
        let space = full_space(&lay);
        let p = vertex_gauss_projector(&lay, 4);
        assert_eq!(p.support().len(), 5);
        assert!(operator_distance(&space, &p.compose(&p), &p).unwrap() < 1e-14);
        assert!(operator_distance(&space, &p.adjoint(), &p).unwrap() < 1e-14);
        // Z2: the average of identity and X on all five legs.
        let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let xs = SiteOperator::product(p.support().iter().map(|s| LocalFactor::single(s, LocalMatrix::Dense(x.clone()))).collect());
        let hand = SiteOperator::identity().plus(xs).scale_re(0.5);
        assert!(operator_distance(&space, &p, &hand).unwrap() < 1e-14);
    }

    #[test]
    fn trivial_group_operators_are_identity() {
        let g = FiniteGroup::cyclic(1).unwrap();
        let lay = EdgeStateLayout::torus(&g, 2, 2).unwrap();
        let space = full_space(&lay);
        assert!(operator_distance(&space, &vertex_gauss_projector(&lay, 0), &SiteOperator::identity()).unwrap() < 1e-14);
        assert!(operator_distance(&space, &edge_gauss_projector(&lay, 0), &SiteOperator::identity()).unwrap() < 1e-14);
        let s = uniform_matter(&lay).unwrap();
        let out = gauge_1form(&gauge_0form(&s, &lay, &GaugeOptions::default()).unwrap().state, &lay, &GaugeOptions::default()).unwrap();
        assert!((out.state.amplitudes()[0] - ONE).norm() < 1e-14);
        let stacked = iterate_3d(&s, &lay, 2, &GaugeOptions::default()).unwrap();
        assert!((stacked.state.amplitudes()[0] - ONE).norm() < 1e-14);
    }

    #[test]
    fn flipping_an_edge_swaps_right_for_left() {
        let g = FiniteGroup::symmetric(3).unwrap();
        let verts = vec![Vertex(vec![0]), Vertex(vec![1])];
        let mut a = OrientedGraph::new(verts.clone()).unwrap();
        a.add_edge(0, 1, Axis::X).unwrap();
        let mut b = OrientedGraph::new(verts).unwrap();
        b.add_edge(1, 0, Axis::X).unwrap();
        let (la, lb) = (EdgeStateLayout::from_graph(&g, a, vec![], "m", "v"), EdgeStateLayout::from_graph(&g, b, vec![], "m", "v"));
        let edge_a = la.edge_sites[0].clone();
        let edge_b = lb.edge_sites[0].clone();
        let lb = EdgeStateLayout { edge_sites: vec![edge_a.clone()], ..lb };
        assert_ne!(edge_a, edge_b);
        let space = full_space(&la);
        let avg = |leg: fn(&FiniteGroup, usize) -> crate::linalg::Monomial| {
            SiteOperator::sum(g.elements().map(|x| SiteOperator::product(vec![mono_factor("m:(0)", g.right_mono(x)), mono_factor(&edge_a, leg(&g, x))])))
                .scale_re(1.0 / 6.0)
        };
        // Vertex 0 is the origin in `a` and the terminus in `b`.
        assert!(operator_distance(&space, &vertex_gauss_projector(&la, 0), &avg(FiniteGroup::right_mono)).unwrap() < 1e-14);
        assert!(operator_distance(&space, &vertex_gauss_projector(&lb, 0), &avg(FiniteGroup::left_mono)).unwrap() < 1e-14);
        assert!(operator_distance(&space, &vertex_gauss_projector(&la, 0), &vertex_gauss_projector(&lb, 0)).unwrap() > 0.1);
    }

    #[test]
    fn flux_of_a_single_flipped_edge() {
        let g = z2();
        let lat = build_square_lattice(2, 2, Boundary::Periodic).unwrap();
        let lay = EdgeStateLayout::torus(&g, 2, 2).unwrap();
        let sign = irreps(&g).unwrap().into_iter().find(|r| !r.is_trivial()).unwrap();
        let face = &lat.faces()[0];
        let op = flux_operator(&lay, &lat.face_loop(face), &sign).unwrap();
        let space = TensorFactorSpace::new(face.edges.iter().map(|&e| (lay.edge_sites[e].clone(), 2))).unwrap();
        let s = DenseState::basis(space.clone(), &[1, 0, 0, 0]).unwrap();
        let out = op.apply(&s).unwrap();
        assert!((out.inner(&s).unwrap() + ONE).norm() < 1e-14);
    }

    #[test]
    fn backtracking_and_trivial_flux_are_identity() {
        let g = FiniteGroup::symmetric(3).unwrap();
        let lat = build_square_lattice(3, 3, Boundary::Periodic).unwrap();
        let lay = EdgeStateLayout::torus(&g, 3, 3).unwrap();
        let space = edge_space(&lay, &lat.faces()[0].edges);
        let e = lat.faces()[0].edges[0];
        let start = lat.graph().edges()[e].origin;
        let back = Path::along(lat.graph(), start, &[e, e]).unwrap();
        for rho in irreps(&g).unwrap() {
            assert!(operator_distance(&space, &flux_operator(&lay, &back, &rho).unwrap(), &SiteOperator::identity()).unwrap() < 1e-14);
        }
        let trivial = irreps(&g).unwrap().into_iter().find(|r| r.is_trivial()).unwrap();
        let face = lat.face_loop(&lat.faces()[0]);
        assert!(operator_distance(&space, &flux_operator(&lay, &face, &trivial).unwrap(), &SiteOperator::identity()).unwrap() < 1e-14);
        let open = Path::along(lat.graph(), start, &[e]).unwrap();
        assert!(matches!(flux_operator(&lay, &open, &trivial), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn flux_is_invariant_under_base_point_rotation() {
        let g = FiniteGroup::symmetric(3).unwrap();
        let lat = build_square_lattice(3, 3, Boundary::Periodic).unwrap();
        let lay = EdgeStateLayout::torus(&g, 3, 3).unwrap();
        for f in lat.faces().iter().take(2) {
            let space = edge_space(&lay, &f.edges);
            let p = lat.face_loop(f);
            for rho in irreps(&g).unwrap() {
                let base = flux_operator(&lay, &p, &rho).unwrap();
                for k in 1..4 {
                    let rot = flux_operator(&lay, &p.rotated(k).unwrap(), &rho).unwrap();
                    assert!(operator_distance(&space, &base, &rot).unwrap() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn planar_identities_on_z2_torus() {
        let g = z2();
        let lay = EdgeStateLayout::torus(&g, 2, 2).unwrap();
        let s = uniform_matter(&lay).unwrap();
        let opts = GaugeOptions::default();
        let g0 = gauge_0form(&s, &lay, &opts).unwrap();
        let sign = irreps(&g).unwrap().into_iter().find(|r| !r.is_trivial()).unwrap();
        assert_eq!(lay.loops().len(), 6);
        for gamma in lay.loops() {
            assert!(invariance_residual(&flux_operator(&lay, gamma, &sign).unwrap(), &g0.state).unwrap() < 1e-10);
        }
        let g1 = gauge_1form(&g0.state, &lay, &opts).unwrap();
        assert!(invariance_residual(&dual_symmetry(&lay, 1), &g1.state).unwrap() < 1e-10);
        let space = full_space(&lay);
        let mut pairs = 0;
        for a in 0..8 {
            for b in a + 1..8 {
                pairs += 1;
                assert!(commutator_residual(&space, &edge_gauss_projector(&lay, a), &edge_gauss_projector(&lay, b)).unwrap() < 1e-14);
            }
        }
        assert_eq!(pairs, 28);
    }

    #[test]
    fn zero_form_gauging_refuses_charged_input() {
        let g = z2();
        let lay = EdgeStateLayout::torus(&g, 2, 2).unwrap();
        let charged = DenseState::embed_product(lay.matter_sites.iter().map(|m| (m.clone(), vec![ONE, ZERO]))).unwrap();
        assert!(matches!(gauge_0form(&charged, &lay, &GaugeOptions::default()), Err(Error::NotSymmetric { .. })));
        // Fluxed edge input is refused by the 1-form map.
        let flux = DenseState::embed_product(lay.edge_sites.iter().enumerate().map(|(i, e)| (e.clone(), if i == 0 { vec![ZERO, ONE] } else { vec![ONE, ZERO] }))).unwrap();
        assert!(matches!(gauge_1form(&flux, &lay, &GaugeOptions::default()), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn z3_zero_form_gauging_has_trivial_flux() {
        let g = FiniteGroup::cyclic(3).unwrap();
        let lay = EdgeStateLayout::torus(&g, 2, 2).unwrap();
        let g0 = gauge_0form(&uniform_matter(&lay).unwrap(), &lay, &GaugeOptions::default()).unwrap();
        for rho in irreps(&g).unwrap() {
            for gamma in lay.loops() {
                assert!(invariance_residual(&flux_operator(&lay, gamma, &rho).unwrap(), &g0.state).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn stacked_patch_is_a_ground_state() {
        let g = z2();
        let checks = higher_checks(&g, 2, 2, 2, &GaugeOptions::default()).unwrap();
        let failing: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
        assert!(failing.is_empty(), "{failing:#?}");
        assert!(checks.iter().any(|c| c.check == "3d plaquette" && c.location.starts_with("cap:")));
    }

    #[test]
    fn stacked_sites_map_onto_cubic_edges() {
        let g = z2();
        let lay = EdgeStateLayout::torus(&g, 2, 2).unwrap();
        let out = iterate_3d(&uniform_matter(&lay).unwrap(), &lay, 2, &GaugeOptions::default()).unwrap();
        assert_eq!(out.state.space().len(), 16);
        assert_eq!(out.lattice.graph().edges().len(), 16);
        for e in out.lattice.graph().edges() {
            assert!(out.state.space().contains(&e.id));
        }
        let json = serde_json::to_value(&out.layout).unwrap();
        assert_eq!(json["sites"].as_array().unwrap().len(), 16);
        assert_eq!(json["sites"][4]["role"], "gauge");
    }

    #[test]
    fn zero_rounds_is_identity() {
        let g = z2();
        let lay = EdgeStateLayout::torus(&g, 2, 2).unwrap();
        let s = uniform_matter(&lay).unwrap();
        let out = iterate_3d(&s, &lay, 0, &GaugeOptions::default()).unwrap();
        assert_eq!(out.state.amplitudes(), s.amplitudes());
        assert!(out.norm_ratios.is_empty());
    }

    #[test]
    fn odd_round_stack_keeps_stars_without_caps() {
        let g = z2();
        let lay = EdgeStateLayout::torus(&g, 2, 2).unwrap();
        let out = iterate_3d(&uniform_matter(&lay).unwrap(), &lay, 1, &GaugeOptions::default()).unwrap();
        let stab = Stabilizers3d::new(&out, &g).unwrap();
        assert_eq!(stab.n_plaquettes(), 4);
        assert!(stab.verify(&out.state).unwrap().iter().all(|c| c.pass));
    }

    #[test]
    fn envelope_refuses_large_stacks() {
        let g = FiniteGroup::cyclic(3).unwrap();
        let lay = EdgeStateLayout::torus(&g, 2, 2).unwrap();
        let r = iterate_3d(&uniform_matter(&lay).unwrap(), &lay, 2, &GaugeOptions::default());
        assert!(matches!(r, Err(Error::Envelope { .. })));
    }

    #[test]
    fn restricted_edge_projector_with_whole_group_matches() {
        let g = FiniteGroup::symmetric(3).unwrap();
        let lay = EdgeStateLayout::torus(&g, 2, 2).unwrap();
        let space = full_space(&lay);
        let whole = SubgroupEmbedding::whole(&g);
        let r = edge_gauss_projector_restricted(&lay, 0, &whole).unwrap();
        assert!(operator_distance(&space, &r, &edge_gauss_projector(&lay, 0)).unwrap() < 1e-14);
    }
}
