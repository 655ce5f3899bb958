//! Command-line front end.
//!
//! Every command writes a JSON report and one or more CSV tables into the
//! output directory (`--out-dir`, else `$GIBBS_SPECTRAL_OUT`, else `.`).
//! Reports echo the tool version, the resolved configuration, seeds and
//! tolerances; CSV files carry the same header as `#` comment lines.
//!
//! Exit statuses: 0 success, 1 a checked inequality failed (or a numerical
//! routine did), 2 usage or validation error, 3 state cap exceeded.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{fit_power_law, permutations_for, rapid_mixing_transfer, verify_bounds, BoundReport, PowerLawFit};
use crate::counterexample::{reversibilization_gap_sweep, GapSweep, LadderFamily};
use crate::error::{Error, Result};
use crate::geometry::{
    check_sandwich, friedrichs_angle_bruteforce, friedrichs_angle_from_norm, inclination_lower_bound,
    inclination_seeded, AngleResult, InclinationResult, SandwichReport,
};
use crate::measure::{ModelSpec, TargetDistribution, TargetSpec};
use crate::operators::{
    dsg, ensure_within_cap, symmetrized_sweep, OperatorSummary, Permutation, ScanSpec, SpectralReport, Weights,
    DEFAULT_STATE_CAP,
};
use crate::sampler::{coordinate_indicator, diagnose, DiagnosticsConfig, DiagnosticsReport};
use crate::table::field;

pub const OUT_DIR_ENV: &str = "GIBBS_SPECTRAL_OUT";
const TOOL: &str = "gibbs-spectral";
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "gibbs-spectral", version, about = "Spectral analysis of Gibbs samplers on finite product spaces")]
pub struct Cli {
    /// Output directory for reports.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,

    /// Refuse targets with more states than this.
    #[arg(long, global = true, default_value_t = DEFAULT_STATE_CAP)]
    pub state_cap: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact norms, spectra, angles and bounds for a target.
    Analyze(AnalyzeArgs),
    /// Spectral gaps across dimensions and the rapid-mixing floor.
    Sweep(SweepArgs),
    /// Simulated chains with CLT and Hoeffding checks.
    Sample(SampleArgs),
    /// Ladder chain gap and conductance table.
    Counterexample(CounterexampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModelName {
    EquicorrelatedBinary,
    Uniform,
    RandomDirichlet,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["target", "model"])))]
pub struct TargetArgs {
    /// JSON target spec file.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Named model family.
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    /// Number of coordinates (with `--levels` values each).
    #[arg(long, conflicts_with = "dims")]
    pub d: Option<usize>,
    /// Values per coordinate used with `--d`.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// Explicit coordinate sizes, e.g. `2,3,2`.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    /// Seed of the random_dirichlet model.
    #[arg(long, default_value_t = 0)]
    pub target_seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub concentration: f64,
}

fn model_spec(model: ModelName, args_epsilon: f64, seed: u64, concentration: f64) -> ModelSpec {
    match model {
        ModelName::EquicorrelatedBinary => ModelSpec::EquicorrelatedBinary { epsilon: args_epsilon },
        ModelName::Uniform => ModelSpec::Uniform,
        ModelName::RandomDirichlet => ModelSpec::RandomDirichlet { seed, concentration },
    }
}

impl TargetArgs {
    fn resolve(&self) -> Result<TargetSpec> {
        if let Some(path) = &self.target {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::validation(path.display().to_string(), e.to_string()))?;
            return serde_json::from_str(&text).map_err(|e| {
                Error::validation(
                    format!("{} line {} column {}", path.display(), e.line(), e.column()),
                    e.to_string(),
                )
            });
        }
        let model = self.model.expect("clap enforces a target source");
        let dims = match (&self.dims, self.d) {
            (Some(dims), _) => dims.clone(),
            (None, Some(d)) => vec![self.levels; d],
            (None, None) => vec![self.levels; 2],
        };
        Ok(TargetSpec {
            dims,
            pmf: None,
            model: Some(model_spec(model, self.epsilon, self.target_seed, self.concentration)),
        })
    }
}

fn build_target(spec: &TargetSpec, cap: usize) -> Result<TargetDistribution> {
    let states = spec.dims.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).unwrap_or(usize::MAX);
    ensure_within_cap(states, cap)?;
    spec.build()
}

fn parse_scans(texts: &[String], d: usize) -> Result<Vec<ScanSpec>> {
    if texts.is_empty() {
        return Ok(vec![
            ScanSpec::Deterministic(Permutation::identity(d)),
            ScanSpec::Random(Weights::uniform(d)),
        ]);
    }
    texts.iter().map(|t| ScanSpec::parse(t, d)).collect()
}

// ---------------------------------------------------------------------------
// Report envelope

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, holds: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), holds, detail: detail.into() }
    }
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a C,
    seeds: &'a BTreeMap<&'static str, u64>,
    tolerances: &'a BTreeMap<&'static str, f64>,
    checks: &'a [Check],
    status: &'static str,
    result: &'a R,
}

struct Emitter<'a> {
    out_dir: &'a Path,
    header: String,
    written: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    fn new<C: Serialize>(
        out_dir: &'a Path,
        command: &str,
        config: &C,
        seeds: &BTreeMap<&'static str, u64>,
        tolerances: &BTreeMap<&'static str, f64>,
    ) -> Result<Self> {
        fs::create_dir_all(out_dir)?;
        let header = format!(
            "# tool={TOOL} version={VERSION} command={command}\n# config={}\n# seeds={}\n# tolerances={}\n",
            to_json(config)?,
            to_json(seeds)?,
            to_json(tolerances)?
        );
        Ok(Self { out_dir, header, written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, table: &str) -> Result<()> {
        let contents = format!("{}{table}", self.header);
        self.write(name, &contents)
    }
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Numeric(format!("serialization failed: {e}")))
}

fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Numeric(format!("serialization failed: {e}")))
}

/// Result of one command: the files written and the checks evaluated.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

#[allow(clippy::too_many_arguments)]
fn finish<C: Serialize, R: Serialize>(
    mut emitter: Emitter<'_>,
    command: &'static str,
    json_name: &str,
    config: &C,
    seeds: &BTreeMap<&'static str, u64>,
    tolerances: &BTreeMap<&'static str, f64>,
    checks: Vec<Check>,
    result: &R,
) -> Result<Outcome> {
    let status = if checks.iter().all(|c| c.holds) { "pass" } else { "fail" };
    let envelope = Envelope { tool: TOOL, version: VERSION, command, config, seeds, tolerances, checks: &checks, status, result };
    emitter.write(json_name, &to_json_pretty(&envelope)?)?;
    Ok(Outcome { files: emitter.written, checks })
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Scan to analyze (`dsg:1,2,…`, `rsg:uniform`, `rsg:w1,…`); repeatable.
    #[arg(long = "scan")]
    pub scans: Vec<String>,
    /// Inclination optimizer restarts.
    #[arg(long, default_value_t = crate::geometry::DEFAULT_RESTARTS)]
    pub restarts: usize,
    #[arg(long, default_value_t = crate::geometry::DEFAULT_INCLINATION_TOL)]
    pub inclination_tol: f64,
    /// Seed of the inclination restarts and of permutation sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random permutations checked when `d > 5`.
    #[arg(long, default_value_t = 24)]
    pub perm_samples: usize,
    #[arg(long, default_value_t = crate::bounds::SLACK_TOL)]
    pub bound_tol: f64,
    #[arg(long, default_value_t = crate::geometry::SANDWICH_TOL)]
    pub sandwich_tol: f64,
    /// Gaps at or below this count as zero.
    #[arg(long, default_value_t = 1e-9)]
    pub gap_threshold: f64,
    /// Also write each scan's kernel as CSV.
    #[arg(long)]
    pub export_kernels: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanAnalysis {
    pub scan: ScanSpec,
    pub summary: OperatorSummary,
    pub spectral: SpectralReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct PanelEntry {
    pub condition: String,
    pub scan: Option<String>,
    pub value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapPanel {
    pub entries: Vec<PanelEntry>,
    /// Every condition holds, or none does.
    pub all_or_none: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeResult {
    pub target: TargetSpec,
    pub states: usize,
    pub scans: Vec<ScanAnalysis>,
    pub angle_closed_form: AngleResult,
    pub angle_brute_force: AngleResult,
    pub inclination: InclinationResult,
    pub inclination_certified_lower: f64,
    pub sandwich: SandwichReport,
    pub bounds: BoundReport,
    pub gap_panel: GapPanel,
}

#[derive(Serialize)]
struct AnalyzeConfig<'a> {
    args: &'a AnalyzeArgs,
    target: &'a TargetSpec,
    scans: Vec<String>,
}

fn gap_panel(
    pi: &TargetDistribution,
    perms: &[Permutation],
    weights: &[Weights],
    c: f64,
    ell_lower: f64,
    threshold: f64,
) -> Result<GapPanel> {
    let mut entries = Vec::new();
    for w in weights {
        let norm = crate::operators::rsg(w, pi)?.l2_norm_centered()?;
        entries.push(PanelEntry {
            condition: "rsg_norm_below_one".into(),
            scan: Some(ScanSpec::Random(w.clone()).to_string()),
            value: norm,
            holds: norm < 1.0 - threshold,
        });
    }
    for s in perms {
        let op = dsg(s, pi)?;
        let label = ScanSpec::Deterministic(s.clone()).to_string();
        let norm = op.l2_norm_centered()?;
        entries.push(PanelEntry { condition: "dsg_norm_below_one".into(), scan: Some(label.clone()), value: norm, holds: norm < 1.0 - threshold });
        let gap = op.spectral_gap()?;
        entries.push(PanelEntry { condition: "dsg_gap_positive".into(), scan: Some(label.clone()), value: gap, holds: gap > threshold });
        let sym = symmetrized_sweep(s, pi)?.l2_norm_centered()?;
        entries.push(PanelEntry { condition: "symmetrized_norm_below_one".into(), scan: Some(label), value: sym, holds: sym < 1.0 - threshold });
    }
    entries.push(PanelEntry { condition: "angle_below_one".into(), scan: None, value: c, holds: c < 1.0 - threshold });
    entries.push(PanelEntry { condition: "inclination_positive".into(), scan: None, value: ell_lower, holds: ell_lower > threshold });
    let all = entries.iter().all(|e| e.holds);
    let none = entries.iter().all(|e| !e.holds);
    Ok(GapPanel { entries, all_or_none: all || none })
}

fn file_stem(scan: &ScanSpec) -> String {
    scan.to_string().replace([':', ','], "_")
}

pub fn cmd_analyze(args: &AnalyzeArgs, out_dir: &Path, cap: usize) -> Result<Outcome> {
    let spec = args.target.resolve()?;
    let pi = build_target(&spec, cap)?;
    let d = pi.num_coords();
    let scans = parse_scans(&args.scans, d)?;

    let mut analyses = Vec::new();
    for scan in &scans {
        let op = scan.build(&pi)?;
        analyses.push(ScanAnalysis { scan: scan.clone(), summary: op.summary(), spectral: op.spectral_report()? });
    }

    let closed = friedrichs_angle_from_norm(&pi)?;
    let brute = friedrichs_angle_bruteforce(&pi)?;
    let incl = inclination_seeded(&pi, args.restarts, args.inclination_tol, args.seed)?;
    let ell_lower = inclination_lower_bound(closed.value, d);
    let sandwich = check_sandwich(closed.value, incl.value, d);

    let mut perms: Vec<Permutation> = Vec::new();
    let mut weights: Vec<Weights> = vec![Weights::uniform(d)];
    for scan in &scans {
        match scan {
            ScanSpec::Deterministic(p) if !perms.contains(p) => perms.push(p.clone()),
            ScanSpec::Random(w) if !weights.contains(w) => weights.push(w.clone()),
            _ => {}
        }
    }
    let bounds = verify_bounds(&pi, &perms, &weights)?;
    for a in &mut analyses {
        let label = a.scan.to_string();
        a.spectral.bound_entries = bounds.entries.iter().filter(|e| e.scan == label).cloned().collect();
    }
    let mut panel_perms = permutations_for(d, args.perm_samples, args.seed);
    for p in &perms {
        if !panel_perms.contains(p) {
            panel_perms.push(p.clone());
        }
    }
    let panel = gap_panel(&pi, &panel_perms, &weights, closed.value, ell_lower, args.gap_threshold)?;

    let mut checks = Vec::new();
    for e in &bounds.entries {
        checks.push(Check::new(
            format!("{} {}", e.name, e.scan),
            e.slack >= -args.bound_tol,
            format!("bound {} exact {} slack {}", e.bound, e.exact, e.slack),
        ));
    }
    if let Some(sharp) = bounds.entries.iter().find(|e| e.name == "rsg_norm" && e.scan == "rsg:uniform") {
        checks.push(Check::new("rsg_uniform_sharpness", sharp.slack.abs() <= args.bound_tol, format!("slack {}", sharp.slack)));
    }
    checks.push(Check::new(
        "sandwich_left",
        sandwich.left_bound <= sandwich.c + args.sandwich_tol,
        format!("1 - 2d/(d-1)·ell_hat = {} vs c = {}", sandwich.left_bound, sandwich.c),
    ));
    checks.push(Check::new(
        "angle_oracle_agreement",
        (closed.value - brute.value).abs() <= 1e-8,
        format!("closed form {} brute force {}", closed.value, brute.value),
    ));

    let config = AnalyzeConfig { args, target: &spec, scans: scans.iter().map(ToString::to_string).collect() };
    let seeds = BTreeMap::from([("inclination", args.seed), ("permutations", args.seed)]);
    let tolerances = BTreeMap::from([
        ("bound", args.bound_tol),
        ("sandwich", args.sandwich_tol),
        ("gap_threshold", args.gap_threshold),
        ("inclination", args.inclination_tol),
        ("angle_oracle", 1e-8),
    ]);
    let mut emitter = Emitter::new(out_dir, "analyze", &config, &seeds, &tolerances)?;
    emitter.csv("analyze_bounds.csv", &bounds.to_csv())?;
    let mut table = String::from("scan,l2_norm_centered,spectral_radius_centered,spectral_gap,reversible\n");
    for a in &analyses {
        let s = &a.spectral;
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            field(&a.scan.to_string()),
            s.l2_norm_centered,
            s.spectral_radius_centered,
            s.spectral_gap,
            s.reversible
        ));
    }
    emitter.csv("analyze_scans.csv", &table)?;
    if args.export_kernels {
        for scan in &scans {
            let op = scan.build(&pi)?;
            emitter.csv(&format!("kernel_{}.csv", file_stem(scan)), &op.to_csv())?;
        }
    }
    let result = AnalyzeResult {
        states: pi.pmf().len(),
        target: spec.clone(),
        scans: analyses,
        angle_closed_form: closed,
        angle_brute_force: brute,
        inclination: incl,
        inclination_certified_lower: ell_lower,
        sandwich,
        bounds,
        gap_panel: panel,
    };
    finish(emitter, "analyze", "analyze.json", &config, &seeds, &tolerances, checks, &result)
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "equicorrelated_binary")]
    pub model: ModelName,
    /// Dimensions to evaluate.
    #[arg(long = "d-values", value_delimiter = ',', default_value = "2,3,4,5,6")]
    pub d_values: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub target_seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub concentration: f64,
    /// Random permutations per dimension when `d > 5`.
    #[arg(long, default_value_t = 24)]
    pub perm_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub floor_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub d: usize,
    pub states: usize,
    pub gap_rsg: f64,
    pub gap_dsg_worst: f64,
    pub gap_dsg_best: f64,
    pub worst_scan: String,
    pub permutations: usize,
    pub floor: f64,
    pub floor_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rsg_fit: PowerLawFit,
    pub dsg_fit: Option<PowerLawFit>,
    pub rows: Vec<SweepRow>,
}

pub fn cmd_sweep(args: &SweepArgs, out_dir: &Path, cap: usize) -> Result<Outcome> {
    if args.d_values.len() < 3 {
        return Err(Error::validation("d-values", format!("{} points given, fitting needs at least 3", args.d_values.len())));
    }
    if let Some(w) = args.d_values.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::validation("d-values", format!("must increase ({} then {})", w[0], w[1])));
    }
    struct Partial {
        d: usize,
        states: usize,
        gap_rsg: f64,
        worst: (f64, String),
        best: f64,
        permutations: usize,
    }
    let mut partial = Vec::new();
    for &d in &args.d_values {
        let spec = TargetSpec {
            dims: vec![args.levels; d],
            pmf: None,
            model: Some(model_spec(args.model, args.epsilon, args.target_seed, args.concentration)),
        };
        let pi = build_target(&spec, cap)?;
        let gap_rsg = crate::operators::rsg(&Weights::uniform(d), &pi)?.spectral_gap()?;
        let perms = permutations_for(d, args.perm_samples, args.seed.wrapping_add(d as u64));
        let mut worst = (f64::INFINITY, String::new());
        let mut best = f64::NEG_INFINITY;
        for p in &perms {
            let g = dsg(p, &pi)?.spectral_gap()?;
            if g < worst.0 {
                worst = (g, ScanSpec::Deterministic(p.clone()).to_string());
            }
            best = best.max(g);
        }
        partial.push(Partial { d, states: pi.pmf().len(), gap_rsg, worst, best, permutations: perms.len() });
    }
    let ds: Vec<usize> = partial.iter().map(|r| r.d).collect();
    let rsg_gaps: Vec<f64> = partial.iter().map(|r| r.gap_rsg).collect();
    let rsg_fit = fit_power_law(&ds, &rsg_gaps)?;
    let dsg_gaps: Vec<f64> = partial.iter().map(|r| r.worst.0).collect();
    let dsg_fit = fit_power_law(&ds, &dsg_gaps).ok();
    let rows = partial
        .into_iter()
        .map(|r| {
            let floor = rapid_mixing_transfer(rsg_fit.beta, rsg_fit.gamma, r.d)?;
            Ok(SweepRow {
                d: r.d,
                states: r.states,
                gap_rsg: r.gap_rsg,
                gap_dsg_worst: r.worst.0,
                gap_dsg_best: r.best,
                worst_scan: r.worst.1,
                permutations: r.permutations,
                floor,
                floor_holds: r.worst.0 >= floor - args.floor_tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let checks: Vec<Check> = rows
        .iter()
        .map(|r| Check::new(format!("rapid_mixing_floor d={}", r.d), r.floor_holds, format!("gap {} floor {}", r.gap_dsg_worst, r.floor)))
        .collect();
    let seeds = BTreeMap::from([("permutations", args.seed), ("target", args.target_seed)]);
    let tolerances = BTreeMap::from([("floor", args.floor_tol)]);
    let mut emitter = Emitter::new(out_dir, "sweep", args, &seeds, &tolerances)?;
    let mut table = String::from("d,states,gap_rsg,gap_dsg_worst,gap_dsg_best,worst_scan,permutations,floor,floor_holds\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.d,
            r.states,
            r.gap_rsg,
            r.gap_dsg_worst,
            r.gap_dsg_best,
            field(&r.worst_scan),
            r.permutations,
            r.floor,
            r.floor_holds
        ));
    }
    emitter.csv("sweep.csv", &table)?;
    let result = SweepResult { rsg_fit, dsg_fit, rows };
    finish(emitter, "sweep", "sweep.json", args, &seeds, &tolerances, checks, &result)
}

// ---------------------------------------------------------------------------
// sample

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long = "scan")]
    pub scans: Vec<String>,
    /// Test function: `indicator:COORD=VALUE` (1-based coordinate) or
    /// `values:v0,v1,…` over flat states; must lie in [0, 1].
    #[arg(long, default_value = "indicator:1=0")]
    pub f: String,
    #[arg(long, default_value_t = 100_000)]
    pub steps: usize,
    /// Batch count for batch means (default ⌊√steps⌋).
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: usize,
    #[arg(long = "n-values", value_delimiter = ',', default_value = "100,1000")]
    pub n_values: Vec<usize>,
    #[arg(long = "eps-values", value_delimiter = ',', default_value = "0.1,0.2,0.3")]
    pub eps_values: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard errors allowed above each bound.
    #[arg(long, default_value_t = crate::sampler::PASS_SIGMAS)]
    pub pass_sigmas: f64,
    /// Also write each chain trace as CSV.
    #[arg(long)]
    pub trace: bool,
}

fn parse_f(text: &str, pi: &TargetDistribution) -> Result<Vec<f64>> {
    let loc = format!("f '{text}'");
    if let Some(rest) = text.strip_prefix("indicator:") {
        let (c, v) = rest
            .split_once('=')
            .ok_or_else(|| Error::validation(&loc, "expected indicator:COORD=VALUE"))?;
        let c: usize = c.trim().parse().map_err(|_| Error::validation(&loc, "bad coordinate"))?;
        let v: usize = v.trim().parse().map_err(|_| Error::validation(&loc, "bad value"))?;
        if c == 0 {
            return Err(Error::validation(&loc, "coordinates are 1-based"));
        }
        return coordinate_indicator(pi, c - 1, v).map_err(|e| Error::validation(&loc, e.to_string()));
    }
    if let Some(rest) = text.strip_prefix("values:") {
        let vals = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::validation(&loc, format!("bad value '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != pi.pmf().len() {
            return Err(Error::validation(&loc, format!("{} values for {} states", vals.len(), pi.pmf().len())));
        }
        if let Some(i) = vals.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::validation(&loc, format!("value {} at state {i} is outside [0, 1]", vals[i])));
        }
        return Ok(vals);
    }
    Err(Error::validation(&loc, "expected `indicator:` or `values:`"))
}

#[derive(Serialize)]
struct SampleConfig<'a> {
    args: &'a SampleArgs,
    target: &'a TargetSpec,
    scans: Vec<String>,
}

pub fn cmd_sample(args: &SampleArgs, out_dir: &Path, cap: usize) -> Result<Outcome> {
    if args.replicas == 0 {
        return Err(Error::validation("replicas", "must be at least 1"));
    }
    let spec = args.target.resolve()?;
    let pi = build_target(&spec, cap)?;
    let scans = parse_scans(&args.scans, pi.num_coords())?;
    let f = parse_f(&args.f, &pi)?;
    let config = DiagnosticsConfig {
        steps: args.steps,
        batch_count: args.batches,
        replicas: args.replicas,
        tail_ns: args.n_values.clone(),
        tail_eps: args.eps_values.clone(),
        seed: args.seed,
        pass_sigmas: args.pass_sigmas,
    };
    let reports: Vec<DiagnosticsReport> = scans.iter().map(|s| diagnose(&pi, s, &f, &config)).collect::<Result<_>>()?;

    let mut checks = Vec::new();
    for r in &reports {
        checks.push(Check::new(
            format!("clt {}", r.scan),
            r.clt.pass,
            format!("estimate {} ± {} vs bound {}", r.clt.estimate.estimate, r.clt.estimate.std_error, r.clt.bound),
        ));
        for t in &r.tails {
            checks.push(Check::new(
                format!("hoeffding {} n={} eps={}", r.scan, t.n, t.eps),
                t.pass,
                format!("frequency {} vs bound {} + {}·{}", t.frequency, t.bound, args.pass_sigmas, t.std_error),
            ));
        }
    }
    let sample_config = SampleConfig { args, target: &spec, scans: scans.iter().map(ToString::to_string).collect() };
    let seeds = BTreeMap::from([("chains", args.seed)]);
    let tolerances = BTreeMap::from([("pass_sigmas", args.pass_sigmas)]);
    let mut emitter = Emitter::new(out_dir, "sample", &sample_config, &seeds, &tolerances)?;
    let mut clt = String::from("scan,rho,rho_source,variance,bound,estimate,std_error,batch_count,batch_size,pass\n");
    let mut tails = String::from("scan,n,eps,mu,rho,replicas,exceedances,frequency,bound,std_error,pass\n");
    for r in &reports {
        let c = &r.clt;
        clt.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            field(&r.scan.to_string()),
            c.rho,
            c.rho_source, c.variance, c.bound, c.estimate.estimate, c.estimate.std_error,
            c.estimate.batch_count, c.estimate.batch_size, c.pass
        ));
        for t in &r.tails {
            tails.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                field(&r.scan.to_string()),
                t.n,
                t.eps, t.mu, t.rho, t.replicas, t.exceedances, t.frequency, t.bound, t.std_error, t.pass
            ));
        }
    }
    emitter.csv("sample_clt.csv", &clt)?;
    emitter.csv("sample_tails.csv", &tails)?;
    if args.trace {
        for s in &scans {
            let trace = crate::sampler::run_chain(&pi, s, args.steps, args.seed, crate::sampler::ChainInit::Stationary)?;
            emitter.csv(&format!("trace_{}.csv", file_stem(s)), &trace.to_csv(&pi))?;
        }
    }
    finish(emitter, "sample", "sample.json", &sample_config, &seeds, &tolerances, checks, &reports)
}

// ---------------------------------------------------------------------------
// counterexample

#[derive(Debug, Clone, Args, Serialize)]
pub struct CounterexampleArgs {
    /// Ratio of the geometric rung distribution, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Increasing truncation levels.
    #[arg(long = "N", visible_alias = "truncations", value_delimiter = ',', default_value = "10,20,40,80")]
    pub truncations: Vec<usize>,
    /// Bases of the return-time moments `E[b^τ]`.
    #[arg(long = "b", value_delimiter = ',', default_value = "1.5,2")]
    pub bs: Vec<f64>,
    #[arg(long, default_value_t = crate::counterexample::CHEEGER_TOL)]
    pub cheeger_tol: f64,
    /// Allowed inflation of rung-cut conductance over `1/(n·π(0,0))`.
    #[arg(long, default_value_t = 1.05)]
    pub cut_factor: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub adjoint_gap_tol: f64,
}

pub fn cmd_counterexample(args: &CounterexampleArgs, out_dir: &Path, cap: usize) -> Result<Outcome> {
    let family = LadderFamily::Geometric { q: args.q };
    if args.bs.is_empty() {
        return Err(Error::validation("b", "at least one base is required"));
    }
    let sweep: GapSweep = reversibilization_gap_sweep(&family, &args.truncations, &args.bs, cap)?;

    let mut checks = vec![
        Check::new("gap_k_strictly_decreasing", sweep.gap_k_strictly_decreasing, {
            let gaps: Vec<String> = sweep.rows.iter().map(|r| r.gap_k.to_string()).collect();
            gaps.join(" > ")
        }),
    ];
    for r in &sweep.rows {
        checks.push(Check::new(
            format!("cheeger_upper N={}", r.truncation),
            r.gap_k <= 2.0 * r.kappa_upper + args.cheeger_tol,
            format!("gap_K {} vs 2κ {}", r.gap_k, 2.0 * r.kappa_upper),
        ));
        checks.push(Check::new(
            format!("rung_cut_bound N={}", r.truncation),
            r.max_cut_ratio <= args.cut_factor,
            format!("max value(A_n)·n·π(0,0) = {}", r.max_cut_ratio),
        ));
        checks.push(Check::new(
            format!("adjoint_gap_equal N={}", r.truncation),
            (r.gap_p - r.gap_pstar).abs() <= args.adjoint_gap_tol,
            format!("gap_P {} gap_P* {}", r.gap_p, r.gap_pstar),
        ));
    }
    let seeds = BTreeMap::new();
    let tolerances = BTreeMap::from([
        ("cheeger", args.cheeger_tol),
        ("cut_factor", args.cut_factor),
        ("adjoint_gap", args.adjoint_gap_tol),
    ]);
    let mut emitter = Emitter::new(out_dir, "counterexample", args, &seeds, &tolerances)?;
    emitter.csv("counterexample.csv", &sweep.to_csv())?;
    finish(emitter, "counterexample", "counterexample.json", args, &seeds, &tolerances, checks, &sweep)
}

// ---------------------------------------------------------------------------
// entry point

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation { .. } | Error::Dimension(_) => 2,
        Error::StateCapExceeded { .. } => 3,
        Error::Assertion(_) | Error::Numeric(_) | Error::Io(_) => 1,
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, &cli.out_dir, cli.state_cap),
        Command::Sweep(a) => cmd_sweep(a, &cli.out_dir, cli.state_cap),
        Command::Sample(a) => cmd_sample(a, &cli.out_dir, cli.state_cap),
        Command::Counterexample(a) => cmd_counterexample(a, &cli.out_dir, cli.state_cap),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            for c in outcome.checks.iter().filter(|c| !c.holds) {
                eprintln!("check failed: {} ({})", c.name, c.detail);
            }
            if outcome.passed() {
                println!("status: pass ({} checks)", outcome.checks.len());
                0
            } else {
                println!("status: fail");
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
