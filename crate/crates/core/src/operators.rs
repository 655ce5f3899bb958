//! Markov operators on `L²(π)` stored as dense row-stochastic tables.
//!
//! # Order convention
//!
//! A kernel `K` acts on functions by `(K f)(x) = Σ_y K(x, y) f(y)`. Running
//! kernel `A` and then kernel `B` is the table product `A·B`, which acts on
//! functions as the operator product `A B`. Hence [`dsg`] with update order
//! `σ = (σ_1, …, σ_d)` (coordinate `σ_1` refreshed first) has the table
//! `K_{σ_1} ⋯ K_{σ_d}` and the function-space operator
//! `P_{σ_1} P_{σ_2} ⋯ P_{σ_d}`. Its adjoint is the sweep with the reversed
//! order, and `‖·−Π‖` is the same for both.
//!
//! Norms are exact: `‖P − Π‖` is the top singular value of
//! `D^{1/2}(P − Π)D^{-1/2}` restricted to the support of π, `D = diag(π)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Schur, SVD};
use serde::{Serialize, Serializer};

use crate::bounds::BoundEntry;
use crate::error::{Error, Result};
use crate::measure::{conditional_mean_into, weighted_dot, TargetDistribution};

pub const ROW_SUM_TOL: f64 = 1e-10;
pub const STATIONARITY_TOL: f64 = 1e-10;
pub const REVERSIBILITY_TOL: f64 = 1e-10;
/// Negative entries down to this magnitude are rounding dust and are zeroed.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-14;
pub const DEFAULT_STATE_CAP: usize = 20_000;

const SVD_MAX_ITER: usize = 10_000;
const SCHUR_MAX_ITER: usize = 100_000;

pub fn ensure_within_cap(states: usize, cap: usize) -> Result<()> {
    if states > cap {
        return Err(Error::StateCapExceeded { states, cap });
    }
    Ok(())
}

/// A Markov kernel together with a stationary law.
#[derive(Debug, Clone)]
pub struct MarkovOperator {
    kernel: DMatrix<f64>,
    pi: Vec<f64>,
    dims: Vec<usize>,
    label: String,
}

impl MarkovOperator {
    /// Validates row-stochasticity and stationarity of `kernel` w.r.t. `pi`.
    /// `dims` is descriptive shape metadata echoed in reports.
    pub fn new(mut kernel: DMatrix<f64>, pi: Vec<f64>, dims: Vec<usize>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        let n = pi.len();
        if kernel.nrows() != n || kernel.ncols() != n {
            return Err(Error::Dimension(format!(
                "kernel is {}x{}, law has {n} states",
                kernel.nrows(),
                kernel.ncols()
            )));
        }
        for v in kernel.iter_mut() {
            if *v < 0.0 {
                if *v < -NEGATIVE_CLAMP_TOL {
                    return Err(Error::Numeric(format!("{label}: negative kernel entry {v}")));
                }
                *v = 0.0;
            }
        }
        let op = Self { kernel, pi, dims, label };
        let row_err = op.max_row_sum_error();
        if row_err > ROW_SUM_TOL {
            return Err(Error::Numeric(format!("{}: row sums off by {row_err:e}", op.label)));
        }
        let stat_err = op.max_stationarity_error();
        if stat_err > STATIONARITY_TOL {
            return Err(Error::Numeric(format!("{}: πP ≠ π (max error {stat_err:e})", op.label)));
        }
        Ok(op)
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn num_states(&self) -> usize {
        self.pi.len()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.kernel
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_stationarity_error(&self) -> f64 {
        let n = self.pi.len();
        (0..n)
            .map(|y| {
                let flow: f64 = (0..n).map(|x| self.pi[x] * self.kernel[(x, y)]).sum();
                (flow - self.pi[y]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest detailed-balance defect `|π(x)P(x,y) − π(y)P(y,x)|`.
    pub fn detailed_balance_error(&self) -> f64 {
        let n = self.pi.len();
        let mut worst: f64 = 0.0;
        for x in 0..n {
            for y in (x + 1)..n {
                let d = (self.pi[x] * self.kernel[(x, y)] - self.pi[y] * self.kernel[(y, x)]).abs();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_reversible(&self) -> bool {
        self.detailed_balance_error() <= REVERSIBILITY_TOL
    }

    /// `(P f)(x) = Σ_y P(x, y) f(y)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let v = &self.kernel * nalgebra::DVector::from_column_slice(f);
        v.as_slice().to_vec()
    }

    /// Run `self`, then `next`: table product `self · next`.
    pub fn then(&self, next: &MarkovOperator) -> Result<MarkovOperator> {
        if self.pi.len() != next.pi.len() {
            return Err(Error::Dimension("operators on different state spaces".into()));
        }
        MarkovOperator::new(
            &self.kernel * &next.kernel,
            self.pi.clone(),
            self.dims.clone(),
            format!("{} ; {}", self.label, next.label),
        )
    }

    fn support(&self) -> Vec<usize> {
        (0..self.pi.len()).filter(|&s| self.pi[s] > 0.0).collect()
    }

    /// `D^{1/2}(K − 1πᵀ)D^{-1/2}` on the support of π.
    fn centered_conjugate_of(&self, kernel: &DMatrix<f64>) -> DMatrix<f64> {
        let sup = self.support();
        let sq: Vec<f64> = sup.iter().map(|&s| self.pi[s].sqrt()).collect();
        DMatrix::from_fn(sup.len(), sup.len(), |a, b| {
            let (x, y) = (sup[a], sup[b]);
            sq[a] * (kernel[(x, y)] - self.pi[y]) / sq[b]
        })
    }

    /// `‖P − Π‖` in `L²(π)`.
    pub fn l2_norm_centered(&self) -> Result<f64> {
        top_singular_value(self.centered_conjugate_of(&self.kernel), &self.label)
    }

    /// Spectral radius of `P − Π` on `L²(π)`.
    ///
    /// Reversible operators use the symmetric eigen-solver on the conjugated
    /// table; all others use a real Schur decomposition and take the largest
    /// modulus of the (possibly complex) eigenvalues.
    pub fn spectral_radius_centered(&self) -> Result<f64> {
        let a = self.centered_conjugate_of(&self.kernel);
        if a.nrows() == 0 {
            return Ok(0.0);
        }
        if self.is_reversible() {
            let sym = (&a + a.transpose()) * 0.5;
            let eig = checked_eigenvalues(sym, &self.label)?;
            return Ok(eig.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
        let n = a.nrows();
        let schur = Schur::try_new(a, f64::EPSILON, SCHUR_MAX_ITER).ok_or_else(|| {
            Error::Numeric(format!(
                "{}: Schur iteration did not converge ({n} states, {SCHUR_MAX_ITER} sweeps)",
                self.label
            ))
        })?;
        Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Sorted eigenvalues of `P − Π` for reversible `P` (ascending).
    pub fn reversible_centered_spectrum(&self) -> Result<Vec<f64>> {
        if !self.is_reversible() {
            return Err(Error::validation(self.label.clone(), "operator is not reversible"));
        }
        let a = self.centered_conjugate_of(&self.kernel);
        let sym = (&a + a.transpose()) * 0.5;
        let mut v = checked_eigenvalues(sym, &self.label)?;
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// `1 − ρ`.
    pub fn spectral_gap(&self) -> Result<f64> {
        Ok(1.0 - self.spectral_radius_centered()?)
    }

    pub fn spectral_report(&self) -> Result<SpectralReport> {
        let norm = self.l2_norm_centered()?;
        let rho = self.spectral_radius_centered()?;
        Ok(SpectralReport {
            label: self.label.clone(),
            l2_norm_centered: norm,
            spectral_radius_centered: rho,
            spectral_gap: 1.0 - rho,
            reversible: self.is_reversible(),
            bound_entries: Vec::new(),
        })
    }

    pub fn summary(&self) -> OperatorSummary {
        OperatorSummary {
            label: self.label.clone(),
            dims: self.dims.clone(),
            states: self.num_states(),
            max_row_sum_error: self.max_row_sum_error(),
            max_stationarity_error: self.max_stationarity_error(),
            detailed_balance_error: self.detailed_balance_error(),
            reversible: self.is_reversible(),
        }
    }

    /// Flat row-major kernel as CSV, one table row per line.
    pub fn to_csv(&self) -> String {
        let n = self.num_states();
        let mut out = String::from("state");
        for j in 0..n {
            out.push_str(&format!(",p{j}"));
        }
        out.push('\n');
        for i in 0..n {
            out.push_str(&i.to_string());
            for j in 0..n {
                out.push_str(&format!(",{}", self.kernel[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

fn checked_eigenvalues(sym: DMatrix<f64>, label: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("{label}: symmetric eigen-solver produced non-finite values")));
    }
    Ok(v)
}

fn top_singular_value(a: DMatrix<f64>, label: &str) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let svd = SVD::try_new(a, false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::Numeric(format!("{label}: SVD did not converge")))?;
    Ok(svd.singular_values.max())
}

/// Invariant checks of a constructed operator, for reports.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorSummary {
    pub label: String,
    pub dims: Vec<usize>,
    pub states: usize,
    pub max_row_sum_error: f64,
    pub max_stationarity_error: f64,
    pub detailed_balance_error: f64,
    pub reversible: bool,
}

/// Exact centred spectral quantities of one operator.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub label: String,
    pub l2_norm_centered: f64,
    pub spectral_radius_centered: f64,
    pub spectral_gap: f64,
    pub reversible: bool,
    pub bound_entries: Vec<BoundEntry>,
}

// ---------------------------------------------------------------------------
// Scan specifications

/// Update order of a deterministic sweep (0-based coordinates).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let d = order.len();
        let mut seen = vec![false; d];
        for (pos, &c) in order.iter().enumerate() {
            if c >= d || seen[c] {
                return Err(Error::validation(
                    format!("permutation[{pos}]"),
                    format!("{order:?} is not a permutation of 0..{d}"),
                ));
            }
            seen[c] = true;
        }
        Ok(Self(order))
    }

    pub fn identity(d: usize) -> Self {
        Self((0..d).collect())
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All `d!` permutations in lexicographic order.
    pub fn all(d: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..d).collect();
        loop {
            out.push(Self(current.clone()));
            // next lexicographic permutation
            let Some(i) = (0..d.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
                break;
            };
            let j = (i + 1..d).rev().find(|&j| current[j] > current[i]).unwrap();
            current.swap(i, j);
            current[i + 1..].reverse();
        }
        out
    }
}

impl fmt::Display for Permutation {
    /// 1-based, e.g. `(2,1,3)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| (c + 1).to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Random-scan selection probabilities: all positive, summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

pub const WEIGHT_SUM_TOL: f64 = 1e-12;

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::validation("weights", "empty weight vector"));
        }
        for (i, &v) in w.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::validation(format!("weights[{i}]"), format!("{v} is not > 0")));
            }
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::validation("weights", format!("sum is {s}, expected 1")));
        }
        Ok(Self(w))
    }

    /// Positive weights rescaled to sum to one.
    pub fn from_unnormalized(w: Vec<f64>) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0) {
            return Err(Error::validation("weights", "total weight must be positive"));
        }
        Self::new(w.into_iter().map(|v| v / s).collect())
    }

    pub fn uniform(d: usize) -> Self {
        Self(vec![1.0 / d as f64; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.0.len() as f64;
        self.0.iter().all(|&w| (w - u).abs() <= WEIGHT_SUM_TOL)
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Either a deterministic sweep order or random-scan weights.
#[derive(Debug, Clone, PartialEq)]
pub enum ScanSpec {
    Deterministic(Permutation),
    Random(Weights),
}

impl ScanSpec {
    /// Parses `dsg:i1,…,id` (1-based update order), `rsg:uniform` or
    /// `rsg:w1,…,wd` for a space with `d` coordinates.
    pub fn parse(text: &str, d: usize) -> Result<Self> {
        let loc = format!("scan '{text}'");
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::validation(&loc, "expected `dsg:...` or `rsg:...`"))?;
        match kind.trim() {
            "dsg" => {
                let order = rest
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<usize>()
                            .ok()
                            .filter(|&c| c >= 1)
                            .map(|c| c - 1)
                            .ok_or_else(|| Error::validation(&loc, format!("bad coordinate '{t}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if order.len() != d {
                    return Err(Error::validation(&loc, format!("needs {d} coordinates, got {}", order.len())));
                }
                Permutation::new(order)
                    .map(ScanSpec::Deterministic)
                    .map_err(|e| Error::validation(&loc, e.to_string()))
            }
            "rsg" => {
                if rest.trim() == "uniform" {
                    return Ok(ScanSpec::Random(Weights::uniform(d)));
                }
                let w = rest
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::validation(&loc, format!("bad weight '{t}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if w.len() != d {
                    return Err(Error::validation(&loc, format!("needs {d} weights, got {}", w.len())));
                }
                Weights::new(w)
                    .map(ScanSpec::Random)
                    .map_err(|e| Error::validation(&loc, e.to_string()))
            }
            other => Err(Error::validation(&loc, format!("unknown scan kind '{other}'"))),
        }
    }

    pub fn num_coords(&self) -> usize {
        match self {
            ScanSpec::Deterministic(p) => p.len(),
            ScanSpec::Random(w) => w.len(),
        }
    }

    pub fn build(&self, pi: &TargetDistribution) -> Result<MarkovOperator> {
        match self {
            ScanSpec::Deterministic(p) => dsg(p, pi),
            ScanSpec::Random(w) => rsg(w, pi),
        }
    }
}

impl fmt::Display for ScanSpec {
    /// The CLI grammar form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScanSpec::Deterministic(p) => {
                let parts: Vec<String> = p.as_slice().iter().map(|c| (c + 1).to_string()).collect();
                write!(f, "dsg:{}", parts.join(","))
            }
            ScanSpec::Random(w) if w.is_uniform() => write!(f, "rsg:uniform"),
            ScanSpec::Random(w) => {
                let parts: Vec<String> = w.as_slice().iter().map(|v| v.to_string()).collect();
                write!(f, "rsg:{}", parts.join(","))
            }
        }
    }
}

impl Serialize for ScanSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Parses a scan for use with `FromStr`-driven CLI layers; `rsg:uniform`
/// requires knowing `d`, so this form keeps the raw text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanArg(pub String);

impl FromStr for ScanArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.starts_with("dsg:") || s.starts_with("rsg:") {
            Ok(Self(s.to_string()))
        } else {
            Err(format!("scan '{s}' must start with `dsg:` or `rsg:`"))
        }
    }
}

// ---------------------------------------------------------------------------
// Constructors

fn check_target(pi: &TargetDistribution) -> Result<()> {
    ensure_within_cap(pi.space().total_states(), DEFAULT_STATE_CAP)
}

/// Kernel whose every row is π (the operator `Π`).
pub fn stationary_projection(pi: &TargetDistribution) -> Result<MarkovOperator> {
    check_target(pi)?;
    let n = pi.pmf().len();
    let kernel = DMatrix::from_fn(n, n, |_, y| pi.pmf()[y]);
    MarkovOperator::new(kernel, pi.pmf().to_vec(), pi.space().dims().to_vec(), "Π")
}

fn small_step_kernel(coord: usize, pi: &TargetDistribution) -> DMatrix<f64> {
    let space = pi.space();
    let pmf = pi.pmf();
    let n = space.total_states();
    let k = space.dims()[coord];
    let stride = space.stride(coord);
    let mut kernel = DMatrix::zeros(n, n);
    for base in space.fiber_bases(coord) {
        let fiber: Vec<usize> = (0..k).map(|j| base + j * stride).collect();
        let mass: f64 = fiber.iter().map(|&s| pmf[s]).sum();
        for &x in &fiber {
            for &y in &fiber {
                kernel[(x, y)] = if mass > 0.0 { pmf[y] / mass } else { 1.0 / k as f64 };
            }
        }
    }
    kernel
}

/// `P_i`: resample coordinate `coord` from `π(· | x_{-coord})`.
pub fn small_step(coord: usize, pi: &TargetDistribution) -> Result<MarkovOperator> {
    check_target(pi)?;
    pi.space().check_coord(coord)?;
    MarkovOperator::new(
        small_step_kernel(coord, pi),
        pi.pmf().to_vec(),
        pi.space().dims().to_vec(),
        format!("P_{}", coord + 1),
    )
}

fn sweep_kernel(order: &[usize], pi: &TargetDistribution) -> DMatrix<f64> {
    let n = pi.space().total_states();
    order.iter().fold(DMatrix::identity(n, n), |acc, &c| acc * small_step_kernel(c, pi))
}

fn check_permutation(sigma: &Permutation, pi: &TargetDistribution) -> Result<()> {
    if sigma.len() != pi.num_coords() {
        return Err(Error::validation(
            "permutation",
            format!("has {} entries, target has d = {}", sigma.len(), pi.num_coords()),
        ));
    }
    Ok(())
}

/// Deterministic-scan kernel updating `sigma[0]` first and `sigma[d-1]` last.
///
/// The table is `K_{σ_1} ⋯ K_{σ_d}`; see the module docs for the
/// corresponding operator order.
pub fn dsg(sigma: &Permutation, pi: &TargetDistribution) -> Result<MarkovOperator> {
    check_target(pi)?;
    check_permutation(sigma, pi)?;
    MarkovOperator::new(
        sweep_kernel(sigma.as_slice(), pi),
        pi.pmf().to_vec(),
        pi.space().dims().to_vec(),
        format!("DSG σ={sigma}"),
    )
}

/// Random-scan kernel `Σ w_i P_i`.
pub fn rsg(weights: &Weights, pi: &TargetDistribution) -> Result<MarkovOperator> {
    check_target(pi)?;
    if weights.len() != pi.num_coords() {
        return Err(Error::validation(
            "weights",
            format!("has {} entries, target has d = {}", weights.len(), pi.num_coords()),
        ));
    }
    let n = pi.space().total_states();
    let kernel = weights
        .as_slice()
        .iter()
        .enumerate()
        .fold(DMatrix::zeros(n, n), |acc, (i, &w)| acc + small_step_kernel(i, pi) * w);
    MarkovOperator::new(
        kernel,
        pi.pmf().to_vec(),
        pi.space().dims().to_vec(),
        format!("RSG w={weights}"),
    )
}

/// Palindromic sweep `P_{σ_1} ⋯ P_{σ_d} ⋯ P_{σ_1}`; self-adjoint.
pub fn symmetrized_sweep(sigma: &Permutation, pi: &TargetDistribution) -> Result<MarkovOperator> {
    check_target(pi)?;
    check_permutation(sigma, pi)?;
    let mut order = sigma.as_slice().to_vec();
    order.extend(sigma.as_slice().iter().rev().skip(1));
    MarkovOperator::new(
        sweep_kernel(&order, pi),
        pi.pmf().to_vec(),
        pi.space().dims().to_vec(),
        format!("SYM σ={sigma}"),
    )
}

/// Time reversal `P*(x, y) = π(y) P(y, x) / π(x)`; on π-null rows the kernel
/// is left as the identity.
pub fn adjoint(p: &MarkovOperator) -> Result<MarkovOperator> {
    let err = p.max_stationarity_error();
    if err > STATIONARITY_TOL {
        return Err(Error::Numeric(format!("{}: not stationary (error {err:e})", p.label)));
    }
    let n = p.num_states();
    let pi = &p.pi;
    let kernel = DMatrix::from_fn(n, n, |x, y| {
        if pi[x] > 0.0 {
            pi[y] * p.kernel[(y, x)] / pi[x]
        } else {
            (x == y) as u8 as f64
        }
    });
    MarkovOperator::new(kernel, pi.clone(), p.dims.clone(), format!("({})*", p.label))
}

/// `½(P + P*)`.
pub fn additive_reversibilization(p: &MarkovOperator) -> Result<MarkovOperator> {
    let star = adjoint(p)?;
    MarkovOperator::new(
        (&p.kernel + &star.kernel) * 0.5,
        p.pi.clone(),
        p.dims.clone(),
        format!("½(P+P*) of {}", p.label),
    )
}

/// `[‖Pⁿ − Π‖ for n = 1..=n_max]`, each computed from the table power `Pⁿ`.
pub fn power_norm_sequence(p: &MarkovOperator, n_max: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_max);
    let mut power = p.kernel.clone();
    for n in 1..=n_max {
        if n > 1 {
            power = &power * &p.kernel;
        }
        out.push(top_singular_value(p.centered_conjugate_of(&power), &p.label)?);
    }
    Ok(out)
}

/// Slacks of the telescoping projection inequality for one function.
///
/// With `T_j` the first `j` projections of the sweep in the order they act
/// on functions (`T_d f = P_{σ_1}⋯P_{σ_d} f`, so `σ_d` acts first), entry
/// `j − 1` is `‖g‖² − ‖T_d g‖² − ‖T_{j−1} g − T_j g‖²` where `g = f − Πf`.
pub fn telescoping_slacks(sigma: &Permutation, pi: &TargetDistribution, f: &[f64]) -> Result<Vec<f64>> {
    if sigma.len() != pi.num_coords() {
        return Err(Error::Dimension(format!("permutation of {} for d = {}", sigma.len(), pi.num_coords())));
    }
    if f.len() != pi.pmf().len() {
        return Err(Error::Dimension(format!("{} values for {} states", f.len(), pi.pmf().len())));
    }
    let pmf = pi.pmf();
    let mean = pi.expectation(f);
    let g: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let mut iterates = vec![g];
    for &coord in sigma.as_slice().iter().rev() {
        let mut next = vec![0.0; pmf.len()];
        conditional_mean_into(iterates.last().expect("nonempty"), coord, pi, &mut next);
        iterates.push(next);
    }
    let total = weighted_dot(&iterates[0], &iterates[0], pmf) - weighted_dot(&iterates[sigma.len()], &iterates[sigma.len()], pmf);
    Ok(iterates
        .windows(2)
        .map(|w| {
            let diff: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
            total - weighted_dot(&diff, &diff, pmf)
        })
        .collect())
}

/// Exact `‖Pⁿ(x0, ·) − π‖_TV` for `n = 1..=n_max`.
pub fn tv_distance_decay(p: &MarkovOperator, x0: usize, n_max: usize) -> Result<Vec<f64>> {
    let n = p.num_states();
    if x0 >= n {
        return Err(Error::validation("x0", format!("state {x0} out of range 0..{n}")));
    }
    let mut row = nalgebra::RowDVector::zeros(n);
    row[x0] = 1.0;
    let mut out = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        row = &row * &p.kernel;
        let tv = 0.5 * row.iter().zip(&p.pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
        out.push(tv);
    }
    Ok(out)
}
