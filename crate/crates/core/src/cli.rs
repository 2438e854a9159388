//! Batch driver: campaign configs, suite execution and report files.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::frobenius::{algebra_entries, induced_endomorphism_algebra, regular_function_algebra, twisted_group_algebra};
use crate::gauge1d::{chain_checks, GaugeOptions};
use crate::gauge_higher::{gauge_0form, higher_checks, uniform_matter, EdgeStateLayout};
use crate::groups::{build_group, group_checks, FiniteGroup, ProjectiveRep, SubgroupEmbedding, TwoCocycle};
use crate::hilbert::DEFAULT_ENVELOPE;
use crate::qdouble::{
    bf_idempotence_on_flux, emergence_checks, ground_energy, stabilizer_commutators, toric_code_comparison, verify_ground_state, BfWeights, EmergenceSetup,
    StabilizerSet, STATE_TOL,
};
use crate::report::{CheckEntry, RunSummary, SuiteReport};
use crate::{Error, Result, C64};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ENVELOPE: i32 = 3;

/// Suites in the order they run.
pub const SUITES: [&str; 5] = ["groups", "frobenius", "gauge1d", "qdouble", "gauge_higher"];

const SHIPPED: [(&str, &str); 5] = [
    ("z2-toric", include_str!("../../../campaigns/z2-toric.json")),
    ("z3-qd", include_str!("../../../campaigns/z3-qd.json")),
    ("s3-qd", include_str!("../../../campaigns/s3-qd.json")),
    ("z2z2-twisted-boundary", include_str!("../../../campaigns/z2z2-twisted-boundary.json")),
    ("z2-3d", include_str!("../../../campaigns/z2-3d.json")),
];

fn trivial() -> String {
    "trivial".into()
}

fn two() -> usize {
    2
}

/// A verification campaign as read from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub group: String,
    /// Cocycle on `G` for the group-gauging rounds.
    #[serde(default = "trivial")]
    pub tau: String,
    /// Cocycle on `K` for the twisted group algebra.
    #[serde(default = "trivial")]
    pub alpha: String,
    /// Cocycle on `K` for the boundary input state.
    #[serde(default = "trivial")]
    pub beta: String,
    /// Boundary subgroups; empty means `K = G`.
    #[serde(default)]
    pub subgroups: Vec<String>,
    /// Ring sizes for the 1D suite.
    #[serde(default)]
    pub chain_sizes: Vec<usize>,
    /// Cells of the boundary ring for emergence.
    #[serde(default = "two")]
    pub cells: usize,
    /// Gauging rounds on the boundary ring.
    #[serde(default = "two")]
    pub rounds: usize,
    /// Periodic lattice `[w, h]` for the torus checks.
    #[serde(default)]
    pub torus: Option<[usize; 2]>,
    /// Rounds of planar gauging stacked into three dimensions.
    #[serde(default)]
    pub depth: Option<usize>,
    pub suites: Vec<String>,
    /// Record the uniform `B_f` weighting as an expected failure.
    #[serde(default)]
    pub negative_control: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
}

/// A campaign with all descriptors resolved.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub campaign: Campaign,
    pub group: FiniteGroup,
    pub tau: TwoCocycle,
    pub boundary: Vec<(SubgroupEmbedding, TwoCocycle, TwoCocycle)>,
}

fn config(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

impl Campaign {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config("config", e.to_string()))
    }

    pub fn shipped(name: &str) -> Option<Campaign> {
        SHIPPED.iter().find(|(n, _)| *n == name).map(|(_, t)| Campaign::from_json(t).expect("shipped campaign parses"))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let group = build_group(&self.group).map_err(|_| config("group", format!("unknown group \"{}\"", self.group)))?;
        let tau = TwoCocycle::named(&group, &self.tau).map_err(|e| config("tau", e.to_string()))?;
        let descrs: Vec<String> = if self.subgroups.is_empty() { vec![group.name().to_string()] } else { self.subgroups.clone() };
        let mut boundary = Vec::new();
        for d in &descrs {
            let k = SubgroupEmbedding::parse(&group, d).map_err(|e| config("subgroups", e.to_string()))?;
            let alpha = named_on(k.group(), &self.alpha, "alpha")?;
            let beta = named_on(k.group(), &self.beta, "beta")?;
            boundary.push((k, alpha, beta));
        }
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(config("suites", format!("unknown suite \"{s}\"; expected one of {}", SUITES.join(", "))));
            }
        }
        if self.cells < 2 {
            return Err(config("cells", "need at least 2 cells"));
        }
        if self.rounds % 2 == 1 {
            return Err(config("rounds", "the boundary patch needs an even number of rounds"));
        }
        if let Some(&n) = self.chain_sizes.iter().find(|&&n| n < 2) {
            return Err(config("chain_sizes", format!("ring of {n} cells")));
        }
        if let Some([w, h]) = self.torus {
            if w < 2 || h < 2 {
                return Err(config("torus", format!("{w}×{h} torus is degenerate")));
            }
        }
        Ok(Resolved { campaign: self.clone(), group, tau, boundary })
    }

    /// Multi-line description for `describe`.
    pub fn describe(&self) -> String {
        let mut s = format!("{}: {}\n", self.name, self.description);
        s += &format!("  group: {}\n", self.group);
        if !self.subgroups.is_empty() {
            s += &format!("  boundary subgroup K options {{{}}}\n", self.subgroups.join(", "));
        }
        s += &format!("  cocycles: tau={} alpha={} beta={}\n", self.tau, self.alpha, self.beta);
        s += &format!("  boundary ring: {} cells, {} rounds\n", self.cells, self.rounds);
        if !self.chain_sizes.is_empty() {
            s += &format!("  ring sizes: {:?}\n", self.chain_sizes);
        }
        if let Some([w, h]) = self.torus {
            s += &format!("  torus: {w}×{h}\n");
        }
        if let Some(d) = self.depth {
            s += &format!("  iteration depth {d} (alternating 0-form and 1-form gauging)\n");
        }
        s += &format!("  suites: {}\n", self.suites.join(", "));
        s
    }
}

fn named_on(k: &FiniteGroup, name: &str, field: &str) -> Result<TwoCocycle> {
    if k.order() == 1 {
        return Ok(TwoCocycle::trivial(k));
    }
    TwoCocycle::named(k, name).map_err(|e| config(field, e.to_string()))
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub envelope: u128,
    pub weights: BfWeights,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { envelope: DEFAULT_ENVELOPE, weights: BfWeights::Projector }
    }
}

fn with_prefix(mut es: Vec<CheckEntry>, prefix: &str) -> Vec<CheckEntry> {
    for e in &mut es {
        e.location = if e.location.is_empty() { prefix.to_string() } else { format!("{prefix} {}", e.location) };
    }
    es
}

fn suite_groups(r: &Resolved) -> Result<SuiteReport> {
    let mut entries = group_checks(&r.group, &[&r.tau])?;
    for (k, alpha, beta) in &r.boundary {
        if k.order() < r.group.order() {
            entries.extend(group_checks(k.group(), &[])?);
        }
        entries.extend(group_checks(k.group(), &[alpha, beta])?.into_iter().filter(|e| e.check.starts_with("cocycle")));
    }
    Ok(SuiteReport::new("groups", entries, vec![]))
}

fn suite_frobenius(r: &Resolved) -> Result<SuiteReport> {
    let mut entries = algebra_entries(&regular_function_algebra(&r.group));
    let mut notes = Vec::new();
    for (k, alpha, _) in &r.boundary {
        entries.extend(algebra_entries(&twisted_group_algebra(k, alpha)?));
        if !k.is_whole() && k.order() > 1 {
            if alpha.is_trivial() {
                entries.extend(with_prefix(algebra_entries(&induced_endomorphism_algebra(&r.group, k, &ProjectiveRep::trivial(k.group()))?), "induced"));
            } else {
                notes.push(format!("induced algebra on {} skipped: needs an α-projective representation", k.group().name()));
            }
        }
    }
    Ok(SuiteReport::new("frobenius", entries, notes))
}

fn suite_gauge1d(r: &Resolved, opts: &RunOptions) -> Result<SuiteReport> {
    let sizes = if r.campaign.chain_sizes.is_empty() { vec![2] } else { r.campaign.chain_sizes.clone() };
    let mut entries = Vec::new();
    for n in sizes {
        entries.extend(chain_checks(&r.group, n, r.campaign.seed, opts.envelope)?);
    }
    Ok(SuiteReport::new("gauge1d", entries, vec![]))
}

/// Torus ground state from 0-form gauging the uniform matter state, with
/// the matter factor removed.
pub fn torus_ground_state(group: &FiniteGroup, w: usize, h: usize, envelope: u128) -> Result<crate::hilbert::DenseState> {
    let lay = EdgeStateLayout::torus(group, w, h)?;
    let gauged = gauge_0form(&uniform_matter(&lay)?, &lay, &GaugeOptions { strict: true, envelope })?;
    let plus = vec![C64::new(1.0 / (group.order() as f64).sqrt(), 0.0); group.order()];
    let mut s = gauged.state;
    for m in &lay.matter_sites {
        s = s.project_out(m, &plus)?;
    }
    Ok(s)
}

fn suite_qdouble(r: &Resolved, opts: &RunOptions) -> Result<SuiteReport> {
    let g = &r.group;
    let c = &r.campaign;
    let mut entries = Vec::new();
    let mut notes = vec![format!("B_f weighting: {}", opts.weights)];
    for (k, _, beta) in &r.boundary {
        let setup = EmergenceSetup { group: g.clone(), k: k.clone(), beta: beta.clone(), tau: r.tau.clone(), n: c.cells, rounds: c.rounds };
        let out = emergence_checks(&setup, opts.envelope, opts.weights)?;
        let tag = format!("K={}", k.group().name());
        notes.push(format!("{tag}: {:?} path, patch dimension {}", out.path, out.state_dim));
        notes.extend(out.notes.into_iter().map(|n| format!("{tag}: {n}")));
        entries.extend(with_prefix(out.entries, &tag));
    }
    let [w, h] = c.torus.unwrap_or([2, 2]);
    let stab = StabilizerSet::torus(g, w, h)?;
    if stab.space().total_dim() as u128 > opts.envelope {
        return Err(Error::Envelope { required: stab.space().total_dim() as u128, limit: opts.envelope });
    }
    let worst_flux = |weights: BfWeights| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for flux in g.elements().skip(1) {
            worst = worst.max(bf_idempotence_on_flux(&stab, 0, flux, weights)?);
        }
        Ok(worst)
    };
    entries.push(CheckEntry::new("qdouble", "B_f idempotence", format!("torus {w}×{h} face 0"), format!("{} weights, all fluxes", opts.weights), worst_flux(opts.weights)?, 1e-10));
    if c.negative_control {
        entries.push(CheckEntry::expect_above("qdouble", "negative control: paper B_f idempotence", "torus face 0", "expected failure", worst_flux(BfWeights::Paper)?, 0.1));
        entries.push(CheckEntry::new("qdouble", "negative control: projector B_f idempotence", "torus face 0", "expected pass", worst_flux(BfWeights::Projector)?, 1e-10));
    }
    if c.torus.is_some() {
        let s = torus_ground_state(g, w, h, opts.envelope)?;
        entries.extend(with_prefix(verify_ground_state(&s, &stab)?, "torus"));
        entries.extend(with_prefix(stabilizer_commutators(&stab)?, "torus"));
        let (e, expected) = ground_energy(&s, &stab, opts.weights)?;
        entries.push(CheckEntry::new("qdouble", "ground energy", "torus", format!("{e:.12} vs {expected}"), (e - expected).abs(), STATE_TOL));
        if g.order() == 2 && r.tau.is_trivial() {
            entries.extend(toric_code_comparison(&stab)?);
        }
    }
    Ok(SuiteReport::new("qdouble", entries, notes))
}

fn suite_gauge_higher(r: &Resolved, opts: &RunOptions) -> Result<SuiteReport> {
    let [w, h] = r.campaign.torus.unwrap_or([2, 2]);
    let depth = r.campaign.depth.unwrap_or(2);
    let entries = higher_checks(&r.group, w, h, depth, &GaugeOptions { strict: true, envelope: opts.envelope })?;
    Ok(SuiteReport::new("gauge_higher", entries, vec![format!("iteration depth {depth} on a {w}×{h} base")]))
}

/// Runs the campaign's suites in dependency order.
pub fn run_campaign(r: &Resolved, opts: &RunOptions) -> Result<Vec<SuiteReport>> {
    let mut out = Vec::new();
    for suite in SUITES.iter().filter(|s| r.campaign.suites.iter().any(|x| x == *s)) {
        out.push(match *suite {
            "groups" => suite_groups(r)?,
            "frobenius" => suite_frobenius(r)?,
            "gauge1d" => suite_gauge1d(r, opts)?,
            "qdouble" => suite_qdouble(r, opts)?,
            _ => suite_gauge_higher(r, opts)?,
        });
    }
    Ok(out)
}

pub fn write_reports(dir: &FsPath, campaign: &str, reports: &[SuiteReport]) -> Result<RunSummary> {
    fs::create_dir_all(dir)?;
    for r in reports {
        fs::write(dir.join(format!("{}.json", r.suite)), serde_json::to_string_pretty(r)?)?;
    }
    let summary = RunSummary::new(campaign, reports);
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[derive(Parser, Debug)]
#[command(name = "itergauge", version, about = "Dense verification campaigns for iterated gauging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a campaign from a JSON file or a shipped campaign name.
    Run {
        config: String,
        /// Lift the dense-state size cap.
        #[arg(long)]
        override_envelope: bool,
        #[arg(long, value_name = "paper|projector", default_value = "projector")]
        bf_weights: String,
        /// Report directory (default: the campaign's `out`, else reports/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the shipped campaigns.
    ListCampaigns,
    /// Describe a shipped campaign.
    Describe { name: String },
}

fn load(config: &str) -> Result<Campaign> {
    let path = FsPath::new(config);
    if path.exists() {
        return Campaign::from_json(&fs::read_to_string(path)?);
    }
    Campaign::shipped(config).ok_or_else(|| config_err_missing(config))
}

fn config_err_missing(name: &str) -> Error {
    config("config", format!("no file or shipped campaign named \"{name}\""))
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Json(_) | Error::UnsupportedGroup(_) | Error::UnknownCocycle { .. } | Error::NotSubgroup { .. } => EXIT_CONFIG,
        Error::Envelope { .. } => EXIT_ENVELOPE,
        _ => EXIT_CHECK_FAILURE,
    }
}

fn run(config: &str, override_envelope: bool, weights: &str, out: Option<PathBuf>) -> Result<i32> {
    let campaign = load(config)?;
    let weights: BfWeights = weights.parse()?;
    let resolved = campaign.resolve()?;
    let opts = RunOptions { envelope: if override_envelope { u128::MAX } else { DEFAULT_ENVELOPE }, weights };
    let reports = run_campaign(&resolved, &opts)?;
    let dir = out.or_else(|| campaign.out.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("reports").join(&campaign.name));
    let summary = write_reports(&dir, &campaign.name, &reports)?;
    for r in &reports {
        println!("{:<13} {}  {} checks, max residual {:.3e}", r.suite, if r.pass { "PASS" } else { "FAIL" }, r.entries.len(), r.max_residual());
        for f in r.families.iter().filter(|f| !f.pass) {
            println!("    failing: {} ({} entries, max residual {:.3e})", f.check, f.count, f.max_residual);
        }
        for n in &r.notes {
            println!("    note: {n}");
        }
    }
    println!("{}: {} (max residual {:.3e}); reports in {}", campaign.name, if summary.pass { "PASS" } else { "FAIL" }, summary.max_residual, dir.display());
    Ok(if summary.pass { EXIT_PASS } else { EXIT_CHECK_FAILURE })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let result = match cli.command {
        Command::ListCampaigns => {
            for (name, _) in SHIPPED {
                println!("{name:<24} {}", Campaign::shipped(name).unwrap().description);
            }
            Ok(EXIT_PASS)
        }
        Command::Describe { name } => match Campaign::shipped(&name) {
            Some(c) => {
                print!("{}", c.describe());
                Ok(EXIT_PASS)
            }
            None => Err(config("name", format!("unknown campaign \"{name}\""))),
        },
        Command::Run { config, override_envelope, bf_weights, out } => run(&config, override_envelope, &bf_weights, out),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}
