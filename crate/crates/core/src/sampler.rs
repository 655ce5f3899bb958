//! Seeded simulation of both scans, with batch-means variance estimates and
//! the CLT and Hoeffding bound checks.
//!
//! Streams: a run with root `seed` and stream `s` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` with `set_stream(s)`. Single chains use
//! stream 0 and tail-probability replica `r` uses stream `r`, so replicas
//! are reproducible no matter how they are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::TargetDistribution;
use crate::operators::ScanSpec;

/// Multiplier on the standard error in every statistical pass criterion.
pub const PASS_SIGMAS: f64 = 3.0;
pub const MIN_BATCHES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "state")]
pub enum ChainInit {
    /// Start from a fixed flat state.
    State(usize),
    /// Draw `X_0 ~ π`.
    Stationary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainTrace {
    pub scan: ScanSpec,
    pub seed: u64,
    pub stream: u64,
    pub init: ChainInit,
    /// `X_0`.
    pub initial: usize,
    /// `X_1, …, X_n`: one entry per full sweep (DSG) or per single update (RSG).
    pub states: Vec<usize>,
    /// Every intermediate state within each sweep (DSG only, on request).
    pub intra_sweep: Option<Vec<usize>>,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn values(&self, f: &[f64]) -> Vec<f64> {
        self.states.iter().map(|&s| f[s]).collect()
    }

    /// `step,state,x1,…,xd` with step 0 the initial state.
    pub fn to_csv(&self, pi: &TargetDistribution) -> String {
        let space = pi.space();
        let mut out = String::from("step,state");
        for c in 1..=space.num_coords() {
            out.push_str(&format!(",x{c}"));
        }
        out.push('\n');
        for (step, &s) in std::iter::once(&self.initial).chain(&self.states).enumerate() {
            out.push_str(&format!("{step},{s}"));
            for v in space.multi_index(s) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_index(rng: &mut ChaCha8Rng, probs: impl Iterator<Item = f64> + Clone, total: f64) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (j, p) in probs.enumerate() {
        acc += p;
        if p > 0.0 {
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    last
}

/// Single-site heat-bath update of coordinate `coord`.
fn update(pi: &TargetDistribution, x: usize, coord: usize, rng: &mut ChaCha8Rng) -> usize {
    let space = pi.space();
    let pmf = pi.pmf();
    let stride = space.stride(coord);
    let k = space.dims()[coord];
    let base = x - space.coordinate(x, coord) * stride;
    let probs = (0..k).map(move |j| pmf[base + j * stride]);
    let mass: f64 = probs.clone().sum();
    let j = if mass > 0.0 {
        sample_index(rng, probs, mass)
    } else {
        rng.random_range(0..k)
    };
    base + j * stride
}

struct Stepper<'a> {
    pi: &'a TargetDistribution,
    scan: &'a ScanSpec,
}

impl Stepper<'_> {
    fn initial(&self, init: ChainInit, rng: &mut ChaCha8Rng) -> usize {
        match init {
            ChainInit::State(s) => s,
            ChainInit::Stationary => sample_index(rng, self.pi.pmf().iter().copied(), 1.0),
        }
    }

    fn step(&self, x: usize, rng: &mut ChaCha8Rng, mut intra: Option<&mut Vec<usize>>) -> usize {
        match self.scan {
            ScanSpec::Deterministic(order) => order.as_slice().iter().fold(x, |y, &c| {
                let z = update(self.pi, y, c, rng);
                if let Some(buf) = intra.as_deref_mut() {
                    buf.push(z);
                }
                z
            }),
            ScanSpec::Random(w) => {
                let c = sample_index(rng, w.as_slice().iter().copied(), 1.0);
                update(self.pi, x, c, rng)
            }
        }
    }
}

fn check_scan(pi: &TargetDistribution, scan: &ScanSpec) -> Result<()> {
    if scan.num_coords() != pi.num_coords() {
        return Err(Error::validation(
            "scan",
            format!("{scan} has {} coordinates, target has {}", scan.num_coords(), pi.num_coords()),
        ));
    }
    Ok(())
}

fn check_init(pi: &TargetDistribution, init: ChainInit) -> Result<()> {
    if let ChainInit::State(s) = init {
        let n = pi.pmf().len();
        if s >= n {
            return Err(Error::validation("init", format!("state {s} out of range 0..{n}")));
        }
    }
    Ok(())
}

/// Runs `n` steps on stream `stream` of `seed`.
pub fn run_chain_stream(
    pi: &TargetDistribution,
    scan: &ScanSpec,
    n: usize,
    seed: u64,
    stream: u64,
    init: ChainInit,
    record_intra_sweep: bool,
) -> Result<ChainTrace> {
    if n == 0 {
        return Err(Error::validation("n", "must be at least 1"));
    }
    check_scan(pi, scan)?;
    check_init(pi, init)?;
    let stepper = Stepper { pi, scan };
    let mut rng = stream_rng(seed, stream);
    let initial = stepper.initial(init, &mut rng);
    let mut intra = (record_intra_sweep && matches!(scan, ScanSpec::Deterministic(_))).then(Vec::new);
    let mut states = Vec::with_capacity(n);
    let mut x = initial;
    for _ in 0..n {
        x = stepper.step(x, &mut rng, intra.as_mut());
        states.push(x);
    }
    Ok(ChainTrace { scan: scan.clone(), seed, stream, init, initial, states, intra_sweep: intra })
}

pub fn run_chain(pi: &TargetDistribution, scan: &ScanSpec, n: usize, seed: u64, init: ChainInit) -> Result<ChainTrace> {
    run_chain_stream(pi, scan, n, seed, 0, init, false)
}

/// `f(x) = 1` when coordinate `coord` of `x` equals `value`.
pub fn coordinate_indicator(pi: &TargetDistribution, coord: usize, value: usize) -> Result<Vec<f64>> {
    let space = pi.space();
    space.check_coord(coord)?;
    if value >= space.dims()[coord] {
        return Err(Error::validation("value", format!("{value} out of range for coordinate {}", coord + 1)));
    }
    Ok((0..space.total_states())
        .map(|s| (space.coordinate(s, coord) == value) as u8 as f64)
        .collect())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::validation("rho", format!("{rho} is outside [0, 1); no finite bound")));
    }
    Ok(())
}

/// `((1+ρ)/(1−ρ))·Var_π f`.
pub fn clt_variance_bound(rho: f64, f: &[f64], pi: &TargetDistribution) -> Result<f64> {
    check_rho(rho)?;
    if f.len() != pi.pmf().len() {
        return Err(Error::Dimension(format!("f has {} values, π has {}", f.len(), pi.pmf().len())));
    }
    Ok((1.0 + rho) / (1.0 - rho) * pi.variance(f))
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub batch_count: usize,
    pub batch_size: usize,
}

pub fn default_batch_count(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize
}

/// Non-overlapping batch means with a leave-one-batch-out jackknife error.
pub fn asymptotic_variance_estimate(values: &[f64], batch_count: usize) -> Result<VarianceEstimate> {
    if batch_count < MIN_BATCHES {
        return Err(Error::validation("batch_count", format!("{batch_count} < {MIN_BATCHES}")));
    }
    if values.len() < 10 * batch_count {
        return Err(Error::validation(
            "trace",
            format!("length {} < 10 × {batch_count} batches", values.len()),
        ));
    }
    let b = batch_count;
    let m = values.len() / b;
    let means: Vec<f64> = values.chunks_exact(m).take(b).map(|c| c.iter().sum::<f64>() / m as f64).collect();
    let center = means.iter().sum::<f64>() / b as f64;
    let y: Vec<f64> = means.iter().map(|v| v - center).collect();
    let s1: f64 = y.iter().sum();
    let s2: f64 = y.iter().map(|v| v * v).sum();
    let estimate_from = |s1: f64, s2: f64, k: usize| m as f64 * (s2 - s1 * s1 / k as f64).max(0.0) / (k - 1) as f64;
    let estimate = estimate_from(s1, s2, b);
    let leave_out: Vec<f64> = y.iter().map(|v| estimate_from(s1 - v, s2 - v * v, b - 1)).collect();
    let jbar = leave_out.iter().sum::<f64>() / b as f64;
    let ss: f64 = leave_out.iter().map(|t| (t - jbar).powi(2)).sum();
    let std_error = ((b - 1) as f64 / b as f64 * ss).sqrt();
    Ok(VarianceEstimate { estimate, std_error, batch_count: b, batch_size: m })
}

/// `‖dν/dπ‖·exp(−((1−ρ)/(1+ρ))·n·ε²)`.
pub fn hoeffding_bound(rho: f64, n: usize, eps: f64, nu_density_norm: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(eps > 0.0) {
        return Err(Error::validation("eps", format!("{eps} is not > 0")));
    }
    if !(nu_density_norm >= 1.0) {
        return Err(Error::validation("nu_density_norm", format!("{nu_density_norm} < 1")));
    }
    Ok(nu_density_norm * (-(1.0 - rho) / (1.0 + rho) * n as f64 * eps * eps).exp())
}

/// `‖dδ_x/dπ‖ = 1/√π(x)` in `L²(π)`.
pub fn point_mass_density_norm(pi: &TargetDistribution, x: usize) -> Result<f64> {
    let p = *pi
        .pmf()
        .get(x)
        .ok_or_else(|| Error::validation("x", format!("state {x} out of range")))?;
    if p <= 0.0 {
        return Err(Error::validation("x", format!("state {x} has π(x) = 0")));
    }
    Ok(1.0 / p.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct TailCheck {
    pub n: usize,
    pub eps: f64,
    pub mu: f64,
    pub rho: f64,
    pub replicas: usize,
    pub exceedances: usize,
    pub frequency: f64,
    pub bound: f64,
    /// `√(p(1−p)/R)` with `p = min(bound, 1)`.
    pub std_error: f64,
    pub pass: bool,
}

fn check_unit_interval(f: &[f64]) -> Result<()> {
    if let Some(i) = f.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::validation(format!("f[{i}]"), format!("{} is outside [0, 1]", f[i])));
    }
    Ok(())
}

/// `P(Σ_{i=1..n} f(X_i) ≥ n(μ+ε))` for every `(n, ε)` of the grid, started at
/// `ν = π`; replica `r` uses stream `r` and is reused across the grid.
#[allow(clippy::too_many_arguments)]
pub fn empirical_tails(
    pi: &TargetDistribution,
    scan: &ScanSpec,
    f: &[f64],
    rho: f64,
    ns: &[usize],
    epss: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<TailCheck>> {
    empirical_tails_from(pi, scan, f, rho, ns, epss, replicas, seed, ChainInit::Stationary)
}

/// As [`empirical_tails`] with initial law `ν` given by `init`; a point mass
/// at `x` enters the bound through `‖dν/dπ‖ = 1/√π(x)`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_tails_from(
    pi: &TargetDistribution,
    scan: &ScanSpec,
    f: &[f64],
    rho: f64,
    ns: &[usize],
    epss: &[f64],
    replicas: usize,
    seed: u64,
    init: ChainInit,
) -> Result<Vec<TailCheck>> {
    check_scan(pi, scan)?;
    let nu_norm = match init {
        ChainInit::Stationary => 1.0,
        ChainInit::State(x) => point_mass_density_norm(pi, x)?,
    };
    check_unit_interval(f)?;
    if f.len() != pi.pmf().len() {
        return Err(Error::Dimension(format!("f has {} values, π has {}", f.len(), pi.pmf().len())));
    }
    if replicas == 0 {
        return Err(Error::validation("replicas", "must be at least 1"));
    }
    if let Some(&n) = ns.iter().find(|&&n| n == 0) {
        return Err(Error::validation("n", format!("{n} is not ≥ 1")));
    }
    let mu = pi.expectation(f);
    for &eps in epss {
        if !(eps > 0.0) {
            return Err(Error::validation("eps", format!("{eps} is not > 0")));
        }
        if mu + eps > 1.0 + 1e-12 {
            return Err(Error::validation("eps", format!("μ + ε = {} exceeds 1", mu + eps)));
        }
    }
    let bounds = ns
        .iter()
        .flat_map(|&n| epss.iter().map(move |&e| (n, e)))
        .map(|(n, e)| hoeffding_bound(rho, n, e, nu_norm))
        .collect::<Result<Vec<_>>>()?;
    let n_max = *ns.iter().max().unwrap_or(&0);
    let stepper = Stepper { pi, scan };
    let counts = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let mut x = stepper.initial(init, &mut rng);
            let mut partial = vec![0.0; n_max + 1];
            for t in 1..=n_max {
                x = stepper.step(x, &mut rng, None);
                partial[t] = partial[t - 1] + f[x];
            }
            ns.iter()
                .flat_map(|&n| epss.iter().map(move |&e| (n, e)))
                .map(|(n, e)| (partial[n] >= n as f64 * (mu + e)) as usize)
                .collect::<Vec<usize>>()
        })
        .reduce(
            || vec![0; ns.len() * epss.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );
    let grid = ns.iter().flat_map(|&n| epss.iter().map(move |&e| (n, e)));
    Ok(grid
        .zip(bounds)
        .zip(counts)
        .map(|(((n, eps), bound), exceedances)| {
            let frequency = exceedances as f64 / replicas as f64;
            let p = bound.min(1.0);
            let std_error = (p * (1.0 - p) / replicas as f64).sqrt();
            TailCheck {
                n,
                eps,
                mu,
                rho,
                replicas,
                exceedances,
                frequency,
                bound,
                std_error,
                pass: frequency <= bound + PASS_SIGMAS * std_error,
            }
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn empirical_tail(
    pi: &TargetDistribution,
    scan: &ScanSpec,
    f: &[f64],
    rho: f64,
    n: usize,
    eps: f64,
    replicas: usize,
    seed: u64,
) -> Result<TailCheck> {
    Ok(empirical_tails(pi, scan, f, rho, &[n], &[eps], replicas, seed)?.remove(0))
}

#[derive(Debug, Clone, Serialize)]
pub struct CltCheck {
    pub rho: f64,
    /// `norm` or `spectral_radius`.
    pub rho_source: String,
    pub variance: f64,
    pub bound: f64,
    pub estimate: VarianceEstimate,
    pub pass: bool,
}

/// CLT check on a trace: `σ̂² ≤ bound + 3·SE`.
pub fn clt_check(
    trace: &ChainTrace,
    f: &[f64],
    pi: &TargetDistribution,
    rho: f64,
    rho_source: &str,
    batch_count: usize,
) -> Result<CltCheck> {
    let bound = clt_variance_bound(rho, f, pi)?;
    let estimate = asymptotic_variance_estimate(&trace.values(f), batch_count)?;
    let pass = estimate.estimate <= bound + PASS_SIGMAS * estimate.std_error;
    Ok(CltCheck { rho, rho_source: rho_source.to_string(), variance: pi.variance(f), bound, estimate, pass })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsConfig {
    pub steps: usize,
    pub batch_count: Option<usize>,
    pub replicas: usize,
    pub tail_ns: Vec<usize>,
    pub tail_eps: Vec<f64>,
    pub seed: u64,
    /// Standard errors of allowance above each bound.
    pub pass_sigmas: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            steps: 100_000,
            batch_count: None,
            replicas: 10_000,
            tail_ns: vec![100, 1000],
            tail_eps: vec![0.1, 0.2, 0.3],
            seed: 0,
            pass_sigmas: PASS_SIGMAS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub scan: ScanSpec,
    pub config: DiagnosticsConfig,
    pub clt: CltCheck,
    pub tails: Vec<TailCheck>,
    pub all_pass: bool,
}

/// CLT and Hoeffding panels for one scan.
///
/// The CLT bound uses `ρ = ‖P−Π‖` for random scans and the exact spectral
/// radius for deterministic scans; the Hoeffding bound uses `ρ = ‖P−Π‖`
/// for both.
pub fn diagnose(
    pi: &TargetDistribution,
    scan: &ScanSpec,
    f: &[f64],
    config: &DiagnosticsConfig,
) -> Result<DiagnosticsReport> {
    check_unit_interval(f)?;
    if !(config.pass_sigmas >= 0.0) {
        return Err(Error::validation("pass_sigmas", format!("{} is not ≥ 0", config.pass_sigmas)));
    }
    let op = scan.build(pi)?;
    let norm = op.l2_norm_centered()?;
    let (clt_rho, source) = match scan {
        ScanSpec::Random(_) => (norm, "norm"),
        ScanSpec::Deterministic(_) => (op.spectral_radius_centered()?, "spectral_radius"),
    };
    let trace = run_chain(pi, scan, config.steps, config.seed, ChainInit::Stationary)?;
    let batches = config.batch_count.unwrap_or_else(|| default_batch_count(config.steps));
    let mut clt = clt_check(&trace, f, pi, clt_rho, source, batches)?;
    clt.pass = clt.estimate.estimate <= clt.bound + config.pass_sigmas * clt.estimate.std_error;
    let mut tails = empirical_tails(pi, scan, f, norm, &config.tail_ns, &config.tail_eps, config.replicas, config.seed)?;
    for t in &mut tails {
        t.pass = t.frequency <= t.bound + config.pass_sigmas * t.std_error;
    }
    let all_pass = clt.pass && tails.iter().all(|t| t.pass);
    Ok(DiagnosticsReport { scan: scan.clone(), config: config.clone(), clt, tails, all_pass })
}
