//! Gauging on rings: finite-group symmetries (optionally twisted and
//! partial), the emergent Rep G symmetry and its gauging, boundary input
//! states, and the alternating iteration.

use serde::Serialize;

use crate::groups::{cosets, fusion_multiplicities, irreps, FiniteGroup, Irrep, SubgroupEmbedding, TwoCocycle};
use crate::hilbert::{check_envelope, DenseState, LocalFactor, LocalMatrix, SiteOperator, TensorFactorSpace};
use crate::linalg::{max_abs_diff, CMat, Monomial, ONE, ZERO};
use crate::report::CheckEntry;
use crate::C64;
use crate::{Error, Result};

/// Tolerance for symmetric-input preconditions.
pub const INPUT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MatterRep {
    Left,
    Right,
}

impl MatterRep {
    pub fn mono(self, g: &FiniteGroup, x: usize) -> Monomial {
        match self {
            MatterRep::Left => g.left_mono(x),
            MatterRep::Right => g.right_mono(x),
        }
    }
}

/// A chain of matter sites with a gauge site after each one; `gauge[i]`
/// joins `matter[i]` and `matter[i+1]`.
#[derive(Clone, Debug)]
pub struct ChainConfig {
    pub group: FiniteGroup,
    pub matter: Vec<String>,
    pub gauge: Vec<String>,
    pub periodic: bool,
    pub matter_rep: MatterRep,
}

impl ChainConfig {
    /// Periodic ring with sites `m:i` and `g:i,i+1` and left-regular matter.
    pub fn ring(group: &FiniteGroup, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(format!("periodic chain needs at least 2 sites, got {n}")));
        }
        Ok(ChainConfig {
            group: group.clone(),
            matter: (0..n).map(|i| format!("m:{i}")).collect(),
            gauge: (0..n).map(|i| format!("g:{i},{}", (i + 1) % n)).collect(),
            periodic: true,
            matter_rep: MatterRep::Left,
        })
    }

    pub fn open(group: &FiniteGroup, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Dimension("empty chain".into()));
        }
        Ok(ChainConfig {
            group: group.clone(),
            matter: (0..n).map(|i| format!("m:{i}")).collect(),
            gauge: (0..n - 1).map(|i| format!("g:{i},{}", i + 1)).collect(),
            periodic: false,
            matter_rep: MatterRep::Left,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.matter.len()
    }

    fn left_gauge(&self, i: usize) -> Option<&str> {
        let n = self.n_sites();
        if i > 0 {
            Some(&self.gauge[i - 1])
        } else if self.periodic {
            Some(&self.gauge[n - 1])
        } else {
            None
        }
    }

    fn right_gauge(&self, i: usize) -> Option<&str> {
        self.gauge.get(i).map(String::as_str)
    }
}

/// `⊗_i U(g)` on the matter sites.
pub fn global_group_symmetry(cfg: &ChainConfig, g: usize) -> SiteOperator {
    let m = cfg.matter_rep.mono(&cfg.group, g);
    SiteOperator::product(cfg.matter.iter().map(|s| LocalFactor::single(s, LocalMatrix::Monomial(m.clone()))).collect())
}

fn check_cocycle_on(k: &SubgroupEmbedding, tau: &TwoCocycle) -> Result<()> {
    if tau.group() != k.group() {
        return Err(Error::InvalidCocycle { group: k.group().name().into(), residual: f64::NAN });
    }
    tau.validate()
}

/// `Û_i(k) = τR(k) ⊗ U(k) ⊗ τ̄L(k)` on (left gauge, matter i, right gauge).
/// `k` indexes the subgroup; gauge sites carry `C K`.
pub fn local_group_symmetry(cfg: &ChainConfig, i: usize, k: &SubgroupEmbedding, tau: &TwoCocycle, x: usize) -> SiteOperator {
    let mut fs = Vec::with_capacity(3);
    if let Some(l) = cfg.left_gauge(i) {
        fs.push(LocalFactor::single(l, LocalMatrix::Monomial(tau.right_mono(x))));
    }
    fs.push(LocalFactor::single(&cfg.matter[i], LocalMatrix::Monomial(cfg.matter_rep.mono(&cfg.group, k.to_parent(x)))));
    if let Some(r) = cfg.right_gauge(i) {
        fs.push(LocalFactor::single(r, LocalMatrix::Monomial(tau.left_mono(x).conj())));
    }
    SiteOperator::product(fs)
}

/// `P_i = (1/|K|) Σ_k Û_i(k)`.
pub fn group_gauss_projector(cfg: &ChainConfig, i: usize, k: &SubgroupEmbedding, tau: &TwoCocycle) -> Result<SiteOperator> {
    if k.parent() != &cfg.group {
        return Err(Error::NotSubgroup { group: cfg.group.name().into(), reason: "subgroup of another group".into() });
    }
    check_cocycle_on(k, tau)?;
    Ok(SiteOperator::sum(k.group().elements().map(|x| local_group_symmetry(cfg, i, k, tau, x))).scale_re(1.0 / k.order() as f64))
}

/// Gauged state with its norm relative to the input.
#[derive(Clone, Debug)]
pub struct Gauged {
    pub state: DenseState,
    pub norm_ratio: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct GaugeOptions {
    /// Refuse non-symmetric inputs (otherwise they are reported as warnings).
    pub strict: bool,
    pub envelope: u128,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        GaugeOptions { strict: true, envelope: crate::hilbert::DEFAULT_ENVELOPE }
    }
}

/// `‖A s − s‖ / ‖s‖`.
pub fn invariance_residual(op: &SiteOperator, s: &DenseState) -> Result<f64> {
    let n = s.norm();
    if n == 0.0 {
        return Err(Error::ZeroState("invariance check".into()));
    }
    Ok(op.apply(s)?.distance(s)? / n)
}

pub(crate) fn precondition(check: &str, residual: f64, opts: &GaugeOptions, warnings: &mut Vec<String>) -> Result<()> {
    if residual > INPUT_TOL {
        if opts.strict {
            return Err(Error::NotSymmetric { check: check.into(), residual });
        }
        warnings.push(format!("{check}: residual {residual:.3e}"));
    }
    Ok(())
}

/// Site order with `extra[i]` inserted right after `after[i]`.
fn order_with(s: &DenseState, after: &[String], extra: &[String], before: bool) -> Vec<String> {
    let mut out = Vec::new();
    for site in s.space().sites() {
        let pos = after.iter().position(|a| *a == site.id);
        if let (Some(p), true) = (pos, before) {
            out.push(extra[p].clone());
        }
        out.push(site.id.clone());
        if let (Some(p), false) = (pos, before) {
            if p < extra.len() {
                out.push(extra[p].clone());
            }
        }
    }
    out
}

pub(crate) fn finish(input: &DenseState, state: DenseState, what: &str, warnings: Vec<String>) -> Result<Gauged> {
    let ratio = state.norm() / input.norm();
    if !(ratio > 1e-12) {
        return Err(Error::ZeroState(what.into()));
    }
    Ok(Gauged { state, norm_ratio: ratio, warnings })
}

/// `s ↦ Π_i P_i (s ⊗ |e…e⟩)` with gauge sites placed after each matter site.
pub fn gauge_group_symmetry(s: &DenseState, cfg: &ChainConfig, k: &SubgroupEmbedding, tau: &TwoCocycle, opts: &GaugeOptions) -> Result<Gauged> {
    check_cocycle_on(k, tau)?;
    let mut warnings = Vec::new();
    for x in k.group().elements().skip(1) {
        let r = invariance_residual(&global_group_symmetry(cfg, k.to_parent(x)), s)?;
        precondition(&format!("global {} symmetry under {}", k.group().name(), cfg.group.label(k.to_parent(x))), r, opts, &mut warnings)?;
    }
    let dk = k.order();
    check_envelope(s.space().sites().iter().map(|x| x.dim).chain(cfg.gauge.iter().map(|_| dk)), opts.envelope)?;
    let mut omega = vec![ZERO; dk];
    omega[0] = ONE;
    let order = order_with(s, &cfg.matter, &cfg.gauge, false);
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    let mut out = s.grow_space(cfg.gauge.iter().map(|g| (g.clone(), omega.clone())), &order)?;
    for i in 0..cfg.n_sites() {
        out = group_gauss_projector(cfg, i, k, tau)?.apply(&out)?;
    }
    finish(s, out, "group gauging", warnings)
}

/// Diagonal `|g_1…g_n⟩ ↦ χ_ρ(g_1⋯g_n)/d_ρ` on the ring `sites`.
pub fn rep_symmetry_mpo(group: &FiniteGroup, sites: &[String], rho: &Irrep) -> SiteOperator {
    let d = rho.dim() as f64;
    let n = sites.len();
    let size = group.order().pow(n as u32);
    let diag = (0..size)
        .map(|mut idx| {
            let mut labels = vec![0; n];
            for l in labels.iter_mut().rev() {
                *l = idx % group.order();
                idx /= group.order();
            }
            rho.character(group.product_of(labels)) / d
        })
        .collect();
    SiteOperator::local(LocalFactor::new(sites.iter().cloned(), LocalMatrix::Diagonal(diag)))
}

/// The closed MPO built from `Σ_g |g⟩⟨g| ⊗ ρ(g)` contracted over its virtual
/// bond, without normalization: diagonal entries `tr ρ(g_1)⋯ρ(g_n)`.
pub fn rep_mpo_raw(group: &FiniteGroup, sites: &[String], rho: &Irrep) -> SiteOperator {
    let n = sites.len();
    let size = group.order().pow(n as u32);
    let diag = (0..size)
        .map(|mut idx| {
            let mut labels = vec![0; n];
            for l in labels.iter_mut().rev() {
                *l = idx % group.order();
                idx /= group.order();
            }
            labels.iter().fold(crate::linalg::CMat::identity(rho.dim(), rho.dim()), |acc, &g| acc * rho.matrix(g)).trace()
        })
        .collect();
    SiteOperator::local(LocalFactor::new(sites.iter().cloned(), LocalMatrix::Diagonal(diag)))
}

/// Ring of old gauge sites with new sites in between; `old[j]` sits between
/// `new[j]` and `new[j+1]`.
#[derive(Clone, Debug)]
pub struct RepChain {
    pub group: FiniteGroup,
    pub old: Vec<String>,
    pub new: Vec<String>,
}

impl RepChain {
    pub fn after(cfg: &ChainConfig, prefix: &str) -> Result<Self> {
        if !cfg.periodic {
            return Err(Error::SiteMismatch("Rep G gauging needs a periodic chain".into()));
        }
        Ok(RepChain { group: cfg.group.clone(), old: cfg.gauge.clone(), new: (0..cfg.n_sites()).map(|j| format!("{prefix}:{j}")).collect() })
    }
}

/// Diagonal projector `Σ_{g,h} |g⟩⟨g| ⊗ |gh⁻¹⟩⟨gh⁻¹| ⊗ |h⟩⟨h|` on
/// (`new[j]`, `old[j]`, `new[j+1]`): the old value is fixed to
/// `new_j · new_{j+1}⁻¹`.
pub fn repg_gauss_projector(chain: &RepChain, j: usize) -> SiteOperator {
    let g = &chain.group;
    let n = g.order();
    let mut diag = vec![ZERO; n * n * n];
    for a in g.elements() {
        for b in g.elements() {
            diag[(a * n + g.mul(a, g.inv(b))) * n + b] = ONE;
        }
    }
    let m = chain.new.len();
    SiteOperator::local(LocalFactor::new(
        [chain.new[j].clone(), chain.old[j].clone(), chain.new[(j + 1) % m].clone()],
        LocalMatrix::Diagonal(diag),
    ))
}

/// `⊗_j R(g)` on the new sites.
pub fn emergent_group_symmetry(chain: &RepChain, g: usize) -> SiteOperator {
    let m = chain.group.right_mono(g);
    SiteOperator::product(chain.new.iter().map(|s| LocalFactor::single(s, LocalMatrix::Monomial(m.clone()))).collect())
}

/// Inserts `|+⟩ = Σ_g |g⟩` before each old gauge site and applies all
/// Rep G Gauss projectors.
pub fn gauge_repg_symmetry(s: &DenseState, chain: &RepChain, opts: &GaugeOptions) -> Result<Gauged> {
    let g = &chain.group;
    let mut warnings = Vec::new();
    for rho in irreps(g)?.iter().filter(|r| !r.is_trivial()) {
        let r = invariance_residual(&rep_symmetry_mpo(g, &chain.old, rho), s)?;
        precondition(&format!("Rep {} symmetry for {}", g.name(), rho.label()), r, opts, &mut warnings)?;
    }
    check_envelope(s.space().sites().iter().map(|x| x.dim).chain(chain.new.iter().map(|_| g.order())), opts.envelope)?;
    let plus = vec![ONE; g.order()];
    let order = order_with(s, &chain.old, &chain.new, true);
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    let mut out = s.grow_space(chain.new.iter().map(|x| (x.clone(), plus.clone())), &order)?;
    for j in 0..chain.old.len() {
        out = repg_gauss_projector(chain, j).apply(&out)?;
    }
    finish(s, out, "Rep G gauging", warnings)
}

/// Boundary input on `2n` sites `w:0, k:0, w:1, k:1, …`: whites carry `C G`,
/// grays carry `C K`.
#[derive(Clone, Debug)]
pub struct BoundaryState {
    pub group: FiniteGroup,
    pub k: SubgroupEmbedding,
    pub beta: TwoCocycle,
    /// `Σ_i R̂(g_i) ψ′` over left coset representatives.
    pub state: DenseState,
    /// The K-symmetric ring state before symmetrization.
    pub prime: DenseState,
    pub whites: Vec<String>,
    pub grays: Vec<String>,
}

impl BoundaryState {
    pub fn n(&self) -> usize {
        self.whites.len()
    }

    /// `R̂(x) = ⊗_j R(x)` on the whites.
    pub fn global_symmetry(&self, x: usize) -> SiteOperator {
        let m = self.group.right_mono(x);
        SiteOperator::product(self.whites.iter().map(|s| LocalFactor::single(s, LocalMatrix::Monomial(m.clone()))).collect())
    }

    /// `βR(k) ⊗ L(k) ⊗ β̄L(k)` on (`k:j−1`, `w:j`, `k:j`).
    pub fn local_symmetry(&self, j: usize, x: usize) -> SiteOperator {
        let n = self.n();
        SiteOperator::product(vec![
            LocalFactor::single(&self.grays[(j + n - 1) % n], LocalMatrix::Monomial(self.beta.right_mono(x))),
            LocalFactor::single(&self.whites[j], LocalMatrix::Monomial(self.group.left_mono(self.k.to_parent(x)))),
            LocalFactor::single(&self.grays[j], LocalMatrix::Monomial(self.beta.left_mono(x).conj())),
        ])
    }

    /// Matter chain for gauging the whites' `R` symmetry.
    pub fn chain(&self) -> ChainConfig {
        let n = self.n();
        ChainConfig {
            group: self.group.clone(),
            matter: self.whites.clone(),
            gauge: (0..n).map(|j| format!("g1:{j},{}", (j + 1) % n)).collect(),
            periodic: true,
            matter_rep: MatterRep::Right,
        }
    }
}

/// Ring state with amplitude `Π_j [w_j = k_j w_{j+1}] β(k_j, w_{j+1})` for
/// `n` unit cells, then symmetrized over `G/K`.
pub fn boundary_input_state(k: &SubgroupEmbedding, beta: &TwoCocycle, g: &FiniteGroup, n: usize) -> Result<BoundaryState> {
    if k.parent() != g {
        return Err(Error::NotSubgroup { group: g.name().into(), reason: "subgroup of another group".into() });
    }
    check_cocycle_on(k, beta)?;
    if n < 1 {
        return Err(Error::Dimension("boundary ring needs at least one unit cell".into()));
    }
    let kg = k.group();
    let whites: Vec<String> = (0..n).map(|j| format!("w:{j}")).collect();
    let grays: Vec<String> = (0..n).map(|j| format!("k:{j}")).collect();
    let mut sites = Vec::new();
    for j in 0..n {
        sites.push((whites[j].clone(), g.order()));
        sites.push((grays[j].clone(), kg.order()));
    }
    let space = TensorFactorSpace::new(sites)?;
    let mut prime = DenseState::zeros(space.clone());
    // Enumerate whites in K and grays freely; the constraint fixes the rest.
    let kn = kg.order();
    let mut ws = vec![0usize; n];
    let mut ks = vec![0usize; n];
    for idx in 0..kn.pow(n as u32) {
        let mut r = idx;
        for w in ws.iter_mut() {
            *w = r % kn;
            r /= kn;
        }
        let mut amp = ONE;
        for j in 0..n {
            let next = ws[(j + 1) % n];
            ks[j] = kg.mul(ws[j], kg.inv(next));
            amp *= beta.value(ks[j], next);
        }
        let mut multi = Vec::with_capacity(2 * n);
        for j in 0..n {
            multi.push(k.to_parent(ws[j]));
            multi.push(ks[j]);
        }
        let flat = space.flat_index(&multi);
        prime.amplitudes_mut()[flat] += amp;
    }
    let mut out = BoundaryState {
        group: g.clone(),
        k: k.clone(),
        beta: beta.clone(),
        state: prime.clone(),
        prime,
        whites,
        grays,
    };
    let reps = cosets(g, k)?.representatives;
    let mut acc = DenseState::zeros(space);
    for &r in &reps {
        let moved = out.global_symmetry(r).apply(&out.prime)?;
        for (a, b) in acc.amplitudes_mut().iter_mut().zip(moved.amplitudes()) {
            *a += b;
        }
    }
    if acc.norm() < 1e-12 {
        return Err(Error::ZeroState("boundary symmetrization".into()));
    }
    out.state = acc;
    for x in g.elements() {
        let r = invariance_residual(&out.global_symmetry(x), &out.state)?;
        if r > 1e-10 {
            return Err(Error::Internal(format!("symmetrized boundary state not invariant under {} ({r:.3e})", g.label(x))));
        }
    }
    for j in 0..n {
        for x in kg.elements() {
            let r = invariance_residual(&out.local_symmetry(j, x), &out.prime)?;
            if r > 1e-10 {
                return Err(Error::Internal(format!("local {} symmetry violated at cell {j} ({r:.3e})", kg.name())));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundKind {
    Group,
    RepG,
}

/// Sites introduced by one gauging round.
#[derive(Clone, Debug, Serialize)]
pub struct Round {
    pub index: usize,
    pub kind: RoundKind,
    /// Group rounds: the matter chain; Rep rounds: the old gauge ring.
    pub acted_on: Vec<String>,
    pub new_sites: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LayerLayout {
    pub initial: Vec<String>,
    pub rounds: Vec<Round>,
}

impl LayerLayout {
    pub fn sites_of_round(&self, r: usize) -> Option<&[String]> {
        self.rounds.get(r.checked_sub(1)?).map(|x| x.new_sites.as_slice())
    }
}

#[derive(Clone, Debug)]
pub struct Iterated {
    pub state: DenseState,
    pub layout: LayerLayout,
    pub norm_ratios: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Predicted total dimension after `rounds` rounds on a ring of `n` cells.
pub fn iterated_dimension(base: u128, group_order: usize, n: usize, rounds: usize) -> u128 {
    (0..rounds).fold(base, |acc, _| acc.saturating_mul((group_order as u128).saturating_pow(n as u32)))
}

/// Alternates full `τ`-twisted group gauging (odd rounds, sites
/// `g{r}:{j},{j+1}`) and Rep G gauging (even rounds, sites `v{r}:{j}`).
/// `taus[r]` is used for the r-th group round, the last one repeating.
pub fn iterate_gauging(s: &DenseState, first: &ChainConfig, taus: &[TwoCocycle], rounds: usize, opts: &GaugeOptions) -> Result<Iterated> {
    let g = &first.group;
    let n = first.n_sites();
    let base: u128 = s.space().total_dim() as u128;
    let required = iterated_dimension(base, g.order(), n, rounds);
    if required > opts.envelope {
        return Err(Error::Envelope { required, limit: opts.envelope });
    }
    let mut layout = LayerLayout { initial: s.space().sites().iter().map(|x| x.id.clone()).collect(), rounds: Vec::new() };
    let mut state = s.clone();
    let mut ratios = Vec::new();
    let mut warnings = Vec::new();
    let mut chain = first.clone();
    let whole = SubgroupEmbedding::whole(g);
    for r in 1..=rounds {
        if r % 2 == 1 {
            let tau = taus.get((r - 1) / 2).or(taus.last()).cloned().unwrap_or_else(|| TwoCocycle::trivial(g));
            if r > 1 {
                chain.gauge = (0..n).map(|j| format!("g{r}:{j},{}", (j + 1) % n)).collect();
            }
            let out = gauge_group_symmetry(&state, &chain, &whole, &tau, opts)?;
            layout.rounds.push(Round { index: r, kind: RoundKind::Group, acted_on: chain.matter.clone(), new_sites: chain.gauge.clone() });
            state = out.state;
            ratios.push(out.norm_ratio);
            warnings.extend(out.warnings);
        } else {
            let rep = RepChain::after(&chain, &format!("v{r}"))?;
            let out = gauge_repg_symmetry(&state, &rep, opts)?;
            layout.rounds.push(Round { index: r, kind: RoundKind::RepG, acted_on: rep.old.clone(), new_sites: rep.new.clone() });
            state = out.state;
            ratios.push(out.norm_ratio);
            warnings.extend(out.warnings);
            chain = ChainConfig { group: g.clone(), matter: rep.new, gauge: Vec::new(), periodic: true, matter_rep: MatterRep::Right };
        }
    }
    Ok(Iterated { state, layout, norm_ratios: ratios, warnings })
}

/// Seeded random matter state averaged over the global symmetry.
pub fn random_symmetric_state(cfg: &ChainConfig, seed: u64) -> Result<DenseState> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let space = TensorFactorSpace::new(cfg.matter.iter().map(|m| (m.clone(), cfg.group.order())))?;
    let amps = (0..space.total_dim()).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let raw = DenseState::from_amplitudes(space, amps)?;
    let mut acc = raw.clone().scaled(ZERO);
    for g in cfg.group.elements() {
        let moved = global_group_symmetry(cfg, g).apply(&raw)?;
        for (a, b) in acc.amplitudes_mut().iter_mut().zip(moved.amplitudes()) {
            *a += b;
        }
    }
    acc.normalized()
}

/// Residuals of the ring identities for `G` on `n` cells, starting from a
/// seeded symmetric state: local invariance after group gauging, the
/// emergent Rep G invariance, the fusion rules of the unnormalized MPOs and
/// the emergent `⊗R(g)` invariance after Rep G gauging.
pub fn chain_checks(group: &FiniteGroup, n: usize, seed: u64, envelope: u128) -> Result<Vec<CheckEntry>> {
    const TOL: f64 = 1e-10;
    let opts = GaugeOptions { strict: true, envelope };
    let cfg = ChainConfig::ring(group, n)?;
    let whole = SubgroupEmbedding::whole(group);
    let tau = TwoCocycle::trivial(group);
    let at = format!("{} n={n}", group.name());
    let s = random_symmetric_state(&cfg, seed)?;
    let gauged = gauge_group_symmetry(&s, &cfg, &whole, &tau, &opts)?;
    let mut out = Vec::new();
    for i in 0..n {
        let worst = group
            .elements()
            .map(|x| invariance_residual(&local_group_symmetry(&cfg, i, &whole, &tau, x), &gauged.state))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(CheckEntry::new("gauge1d", "local invariance", format!("{at} cell {i}"), "all g", worst, TOL));
    }
    let reps = irreps(group)?;
    for rho in &reps {
        let r = invariance_residual(&rep_symmetry_mpo(group, &cfg.gauge, rho), &gauged.state)?;
        out.push(CheckEntry::new("gauge1d", "emergent Rep G invariance", at.clone(), rho.label(), r, TOL));
    }
    let sites: Vec<String> = (0..n).map(|i| format!("f:{i}")).collect();
    let space = TensorFactorSpace::new(sites.iter().map(|x| (x.clone(), group.order())))?;
    let mats: Vec<CMat> = reps.iter().map(|r| rep_mpo_raw(group, &sites, r).matrix_on(&space)).collect::<Result<_>>()?;
    let dim = space.total_dim();
    for (i, a) in reps.iter().enumerate() {
        for (j, b) in reps.iter().enumerate().skip(i) {
            let mult = fusion_multiplicities(a, b)?;
            let rhs = mult.iter().zip(&mats).fold(CMat::zeros(dim, dim), |acc, (&c, m)| acc + m * C64::new(c as f64, 0.0));
            let r = max_abs_diff(&(&mats[i] * &mats[j]), &rhs);
            out.push(CheckEntry::new("gauge1d", "fusion", at.clone(), format!("{}⊗{}", a.label(), b.label()), r, TOL));
        }
    }
    let chain = RepChain::after(&cfg, "v")?;
    let rep = gauge_repg_symmetry(&gauged.state, &chain, &opts)?;
    for g in group.elements().skip(1) {
        let r = invariance_residual(&emergent_group_symmetry(&chain, g), &rep.state)?;
        out.push(CheckEntry::new("gauge1d", "emergent G invariance", at.clone(), group.label(g), r, TOL));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::build_group;
    use crate::hilbert::commutator_residual;
    use crate::linalg::kron;

    fn uniform(cfg: &ChainConfig) -> DenseState {
        let d = cfg.group.order();
        DenseState::embed_product(cfg.matter.iter().map(|m| (m.clone(), vec![ONE; d]))).unwrap()
    }

    fn trivial_tau(g: &FiniteGroup) -> TwoCocycle {
        TwoCocycle::trivial(g)
    }

    #[test]
    fn global_symmetry_examples() {
        let z2 = build_group("Z2").unwrap();
        let cfg = ChainConfig::ring(&z2, 2).unwrap();
        let s = DenseState::basis(TensorFactorSpace::new([("m:0", 2), ("m:1", 2)]).unwrap(), &[0, 1]).unwrap();
        let out = global_group_symmetry(&cfg, 1).apply(&s).unwrap();
        assert_eq!(out.amplitude(&[1, 0]), ONE);
        let id = global_group_symmetry(&cfg, 0).apply(&s).unwrap();
        assert_eq!(id.amplitudes(), s.amplitudes());
    }

    #[test]
    fn gauss_projector_spectra() {
        for (d, expected_trace) in [("Z2", 0.5), ("S3", 1.0 / 6.0)] {
            let g = build_group(d).unwrap();
            let cfg = ChainConfig::ring(&g, 3).unwrap();
            let whole = SubgroupEmbedding::whole(&g);
            let p = group_gauss_projector(&cfg, 1, &whole, &trivial_tau(&g)).unwrap();
            let space = TensorFactorSpace::new(p.support().into_iter().map(|s| (s, g.order()))).unwrap();
            let m = p.matrix_on(&space).unwrap();
            assert!(max_abs_diff(&(&m * &m), &m) < 1e-12);
            assert!(max_abs_diff(&m.adjoint(), &m) < 1e-12);
            let tr = m.trace().re / m.nrows() as f64;
            assert!((tr - expected_trace).abs() < 1e-12, "{d}");
        }
    }

    #[test]
    fn trivial_subgroup_projector_is_identity() {
        let g = build_group("S3").unwrap();
        let cfg = ChainConfig::ring(&g, 2).unwrap();
        let triv = SubgroupEmbedding::trivial(&g);
        let p = group_gauss_projector(&cfg, 0, &triv, &trivial_tau(triv.group())).unwrap();
        let s = uniform(&cfg);
        let gauged = gauge_group_symmetry(&s, &cfg, &triv, &trivial_tau(triv.group()), &GaugeOptions::default()).unwrap();
        assert_eq!(gauged.state.space().total_dim(), 36);
        assert!((gauged.norm_ratio - 1.0).abs() < 1e-12);
        let space = TensorFactorSpace::new([("g:1,0", 1), ("m:0", 6), ("g:0,1", 1)]).unwrap();
        assert!(max_abs_diff(&p.matrix_on(&space).unwrap(), &CMat::identity(6, 6)) < 1e-15);
    }

    #[test]
    fn twisted_projectors_commute_and_are_idempotent() {
        let g = build_group("Z2xZ2").unwrap();
        let whole = SubgroupEmbedding::whole(&g);
        let tau = TwoCocycle::named(&g, "z2z2_nontrivial").unwrap();
        let cfg = ChainConfig::ring(&g, 3).unwrap();
        let ps: Vec<SiteOperator> = (0..3).map(|i| group_gauss_projector(&cfg, i, &whole, &tau).unwrap()).collect();
        let space = TensorFactorSpace::new(cfg.matter.iter().chain(&cfg.gauge).map(|s| (s.clone(), 4))).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(commutator_residual(&space, &ps[i], &ps[j]).unwrap() < 1e-12);
            }
            let local = crate::hilbert::union_space(&space, &ps[i], &ps[i]).unwrap();
            let m = ps[i].matrix_on(&local).unwrap();
            assert!(max_abs_diff(&(&m * &m), &m) < 1e-12);
        }
    }

    #[test]
    fn z2_pair_gauging_has_local_invariance() {
        let z2 = build_group("Z2").unwrap();
        let cfg = ChainConfig::ring(&z2, 2).unwrap();
        let whole = SubgroupEmbedding::whole(&z2);
        let tau = trivial_tau(&z2);
        let out = gauge_group_symmetry(&uniform(&cfg), &cfg, &whole, &tau, &GaugeOptions::default()).unwrap();
        let ids: Vec<&str> = out.state.space().sites().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["m:0", "g:0,1", "m:1", "g:1,0"]);
        for i in 0..2 {
            assert!(invariance_residual(&local_group_symmetry(&cfg, i, &whole, &tau, 1), &out.state).unwrap() < 1e-12);
        }
    }

    #[test]
    fn non_symmetric_input_is_refused() {
        let z2 = build_group("Z2").unwrap();
        let cfg = ChainConfig::ring(&z2, 2).unwrap();
        let s = DenseState::basis(TensorFactorSpace::new([("m:0", 2), ("m:1", 2)]).unwrap(), &[0, 0]).unwrap();
        let whole = SubgroupEmbedding::whole(&z2);
        let err = gauge_group_symmetry(&s, &cfg, &whole, &trivial_tau(&z2), &GaugeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
        let lax = GaugeOptions { strict: false, ..GaugeOptions::default() };
        assert_eq!(gauge_group_symmetry(&s, &cfg, &whole, &trivial_tau(&z2), &lax).unwrap().warnings.len(), 1);
    }

    #[test]
    fn z2_sign_flux_operator() {
        let z2 = build_group("Z2").unwrap();
        let sign = &irreps(&z2).unwrap()[1];
        let sites = vec!["a".to_string(), "b".to_string()];
        let space = TensorFactorSpace::new([("a", 2), ("b", 2)]).unwrap();
        let m = rep_symmetry_mpo(&z2, &sites, sign).matrix_on(&space).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| m[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
        let triv = &irreps(&z2).unwrap()[0];
        assert_eq!(rep_symmetry_mpo(&z2, &sites, triv).matrix_on(&space).unwrap(), CMat::identity(4, 4));
    }

    #[test]
    fn raw_mpo_matches_character_formula() {
        for (d, n) in [("S3", 3), ("Z3", 4), ("Q8", 2)] {
            let g = build_group(d).unwrap();
            let sites: Vec<String> = (0..n).map(|i| i.to_string()).collect();
            let space = TensorFactorSpace::new(sites.iter().map(|s| (s.clone(), g.order()))).unwrap();
            for rho in irreps(&g).unwrap() {
                let raw = rep_mpo_raw(&g, &sites, &rho).matrix_on(&space).unwrap();
                let formula = rep_symmetry_mpo(&g, &sites, &rho).matrix_on(&space).unwrap() * C64::new(rho.dim() as f64, 0.0);
                assert!(max_abs_diff(&raw, &formula) < 1e-12);
            }
        }
    }

    #[test]
    fn raw_mpo_fusion_rules() {
        let g = build_group("S3").unwrap();
        let sites = vec!["a".to_string(), "b".to_string()];
        let space = TensorFactorSpace::new([("a", 6), ("b", 6)]).unwrap();
        let reps = irreps(&g).unwrap();
        let mats: Vec<CMat> = reps.iter().map(|r| rep_mpo_raw(&g, &sites, r).matrix_on(&space).unwrap()).collect();
        for (i, a) in reps.iter().enumerate() {
            for (j, b) in reps.iter().enumerate() {
                let n = fusion_multiplicities(a, b).unwrap();
                let rhs = n.iter().zip(&mats).fold(CMat::zeros(36, 36), |acc, (&c, m)| acc + m * C64::new(c as f64, 0.0));
                assert!(max_abs_diff(&(&mats[i] * &mats[j]), &rhs) < 1e-10);
            }
        }
    }

    #[test]
    fn repg_projector_on_z2() {
        let z2 = build_group("Z2").unwrap();
        let chain = RepChain { group: z2.clone(), old: vec!["o".into()], new: vec!["l".into(), "r".into()] };
        let p = repg_gauss_projector(&chain, 0);
        let space = TensorFactorSpace::new([("l", 2), ("o", 2), ("r", 2)]).unwrap();
        let m = p.matrix_on(&space).unwrap();
        assert_eq!(m.trace(), C64::new(4.0, 0.0));
        // middle = left·right⁻¹
        for l in 0..2 {
            for o in 0..2 {
                for r in 0..2 {
                    let k = (l * 2 + o) * 2 + r;
                    assert_eq!(m[(k, k)].re, if o == (l + r) % 2 { 1.0 } else { 0.0 });
                }
            }
        }
        let e = DenseState::basis(space, &[0, 0, 0]).unwrap();
        assert_eq!(p.apply(&e).unwrap().amplitudes(), e.amplitudes());
    }

    #[test]
    fn repg_projector_commutes_with_outer_right_translations() {
        let g = build_group("S3").unwrap();
        let chain = RepChain { group: g.clone(), old: vec!["o".into()], new: vec!["l".into(), "r".into()] };
        let p = repg_gauss_projector(&chain, 0);
        let space = TensorFactorSpace::new([("l", 6), ("o", 6), ("r", 6)]).unwrap();
        for x in g.elements() {
            let rr = SiteOperator::product(vec![
                LocalFactor::single("l", LocalMatrix::Monomial(g.right_mono(x))),
                LocalFactor::single("r", LocalMatrix::Monomial(g.right_mono(x))),
            ]);
            assert_eq!(commutator_residual(&space, &p, &rr).unwrap(), 0.0);
        }
    }

    #[test]
    fn rep_gauging_after_group_gauging_z2() {
        let z2 = build_group("Z2").unwrap();
        let cfg = ChainConfig::ring(&z2, 2).unwrap();
        let whole = SubgroupEmbedding::whole(&z2);
        let gauged = gauge_group_symmetry(&uniform(&cfg), &cfg, &whole, &trivial_tau(&z2), &GaugeOptions::default()).unwrap();
        let chain = RepChain::after(&cfg, "v").unwrap();
        let out = gauge_repg_symmetry(&gauged.state, &chain, &GaugeOptions::default()).unwrap();
        assert!(invariance_residual(&emergent_group_symmetry(&chain, 1), &out.state).unwrap() < 1e-10);
    }

    #[test]
    fn z3_rep_gauging_satisfies_all_gauss_laws() {
        let z3 = build_group("Z3").unwrap();
        let cfg = ChainConfig::ring(&z3, 3).unwrap();
        let whole = SubgroupEmbedding::whole(&z3);
        let gauged = gauge_group_symmetry(&uniform(&cfg), &cfg, &whole, &trivial_tau(&z3), &GaugeOptions::default()).unwrap();
        let chain = RepChain::after(&cfg, "v").unwrap();
        let out = gauge_repg_symmetry(&gauged.state, &chain, &GaugeOptions::default()).unwrap();
        for j in 0..3 {
            assert!(invariance_residual(&repg_gauss_projector(&chain, j), &out.state).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rep_gauging_of_trivial_group_is_identity() {
        let z1 = build_group("Z1").unwrap();
        let cfg = ChainConfig::ring(&z1, 2).unwrap();
        let s = uniform(&cfg);
        let gauged = gauge_group_symmetry(&s, &cfg, &SubgroupEmbedding::whole(&z1), &trivial_tau(&z1), &GaugeOptions::default()).unwrap();
        let out = gauge_repg_symmetry(&gauged.state, &RepChain::after(&cfg, "v").unwrap(), &GaugeOptions::default()).unwrap();
        assert_eq!(out.state.amplitudes(), s.amplitudes());
    }

    /// Ring contraction `tr[W(w_0) B(k_0) W(w_1) B(k_1) ⋯]` with
    /// `W(w) = |w⟩⟨w|` and `B(k) = βL(k)` on the virtual space `C K`.
    fn mps_oracle(b: &BoundaryState, multi: &[usize]) -> C64 {
        let kg = b.k.group();
        let n = b.n();
        let mut acc = CMat::identity(kg.order(), kg.order());
        for j in 0..n {
            let Some(w) = b.k.from_parent(multi[2 * j]) else { return ZERO };
            let mut proj = CMat::zeros(kg.order(), kg.order());
            proj[(w, w)] = ONE;
            acc = acc * proj * b.beta.left_mono(multi[2 * j + 1]).to_matrix();
        }
        acc.trace()
    }

    #[test]
    fn boundary_state_matches_mps_contraction() {
        for (gd, kd, beta) in [("Z2", "Z2", "trivial"), ("Z2xZ2", "Z2xZ2", "z2z2_nontrivial"), ("S3", "S3", "trivial"), ("S3", "A3", "trivial")] {
            let g = build_group(gd).unwrap();
            let k = SubgroupEmbedding::parse(&g, kd).unwrap();
            let beta = if beta == "trivial" { TwoCocycle::trivial(k.group()) } else { TwoCocycle::named(k.group(), beta).unwrap() };
            for n in [2, 3] {
                let b = boundary_input_state(&k, &beta, &g, n).unwrap();
                let space = b.prime.space().clone();
                for idx in 0..space.total_dim() {
                    let multi = space.multi_index(idx);
                    assert!((b.prime.amplitudes()[idx] - mps_oracle(&b, &multi)).norm() < 1e-12, "{gd}/{kd} n={n}");
                }
            }
        }
    }

    #[test]
    fn boundary_state_z2_uniform_pairs() {
        let g = build_group("Z2").unwrap();
        let k = SubgroupEmbedding::whole(&g);
        let b = boundary_input_state(&k, &TwoCocycle::trivial(k.group()), &g, 2).unwrap();
        // w_0 = k_0 w_1, w_1 = k_1 w_0: 4 configurations, each amplitude 1.
        let nonzero: Vec<usize> = (0..16).filter(|&i| b.prime.amplitudes()[i].norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 4);
        assert!(nonzero.iter().all(|&i| b.prime.amplitudes()[i] == ONE));
    }

    #[test]
    fn boundary_state_trivial_subgroup_sums_product_states() {
        let g = build_group("Z2").unwrap();
        let k = SubgroupEmbedding::trivial(&g);
        let b = boundary_input_state(&k, &TwoCocycle::trivial(k.group()), &g, 2).unwrap();
        let space = b.state.space().clone();
        let mut expected = DenseState::zeros(space.clone());
        expected.amplitudes_mut()[space.flat_index(&[0, 0, 0, 0])] = ONE;
        expected.amplitudes_mut()[space.flat_index(&[1, 0, 1, 0])] = ONE;
        assert!(b.state.distance(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn boundary_local_symmetry_with_projective_twist() {
        let g = build_group("Z2xZ2").unwrap();
        let k = SubgroupEmbedding::whole(&g);
        let beta = TwoCocycle::named(&g, "z2z2_nontrivial").unwrap();
        let b = boundary_input_state(&k, &beta, &g, 3).unwrap();
        for j in 0..3 {
            for x in g.elements() {
                assert!(invariance_residual(&b.local_symmetry(j, x), &b.prime).unwrap() < 1e-10);
                assert!(invariance_residual(&b.local_symmetry(j, x), &b.state).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn gauging_absorbs_symmetrization() {
        let g = build_group("S3").unwrap();
        let k = SubgroupEmbedding::parse(&g, "A3").unwrap();
        let b = boundary_input_state(&k, &TwoCocycle::trivial(k.group()), &g, 2).unwrap();
        let cfg = b.chain();
        let whole = SubgroupEmbedding::whole(&g);
        let tau = TwoCocycle::trivial(&g);
        let lax = GaugeOptions { strict: false, ..GaugeOptions::default() };
        let a = gauge_group_symmetry(&b.state, &cfg, &whole, &tau, &GaugeOptions::default()).unwrap();
        let p = gauge_group_symmetry(&b.prime, &cfg, &whole, &tau, &lax).unwrap();
        assert!(a.state.fidelity_up_to_scale(&p.state).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn iterate_zero_and_one_round() {
        let z2 = build_group("Z2").unwrap();
        let cfg = ChainConfig::ring(&z2, 2).unwrap();
        let s = uniform(&cfg);
        let tau = vec![trivial_tau(&z2)];
        let zero = iterate_gauging(&s, &cfg, &tau, 0, &GaugeOptions::default()).unwrap();
        assert_eq!(zero.state.amplitudes(), s.amplitudes());
        let one = iterate_gauging(&s, &cfg, &tau, 1, &GaugeOptions::default()).unwrap();
        let whole = SubgroupEmbedding::whole(&z2);
        for i in 0..2 {
            let p = group_gauss_projector(&cfg, i, &whole, &tau[0]).unwrap();
            assert!(invariance_residual(&p, &one.state).unwrap() < 1e-12);
        }
        assert_eq!(one.layout.rounds[0].new_sites, cfg.gauge);
    }

    #[test]
    fn iterate_refuses_oversized_runs() {
        let s3 = build_group("S3").unwrap();
        let cfg = ChainConfig::ring(&s3, 3).unwrap();
        let s = uniform(&cfg);
        let err = iterate_gauging(&s, &cfg, &[TwoCocycle::trivial(&s3)], 3, &GaugeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Envelope { .. }));
    }

    #[test]
    fn chain_checks_pass_for_z3_pair() {
        let g = build_group("Z3").unwrap();
        let out = chain_checks(&g, 2, 1, crate::hilbert::DEFAULT_ENVELOPE).unwrap();
        assert!(out.iter().all(|c| c.pass), "{out:#?}");
        assert_eq!(out.iter().filter(|c| c.check == "fusion").count(), 6);
    }

    #[test]
    fn random_symmetric_state_is_symmetric() {
        let g = build_group("S3").unwrap();
        let cfg = ChainConfig::ring(&g, 2).unwrap();
        let s = random_symmetric_state(&cfg, 3).unwrap();
        for x in g.elements() {
            assert!(invariance_residual(&global_group_symmetry(&cfg, x), &s).unwrap() < 1e-12);
        }
    }

    #[test]
    fn kron_convention_for_three_site_diagonal() {
        // Joint index of (l, o, r) is row-major in the listed order.
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, -ONE]));
        let id = CMat::identity(2, 2);
        let k = kron(&kron(&a, &id), &id);
        assert_eq!(k[(4, 4)], -ONE);
    }
}
