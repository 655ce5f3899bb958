//! The ladder chain: a geometrically ergodic kernel `P` (and its reversal
//! `P*`) whose additive reversibilization `K = ½(P + P*)` has conductance
//! tending to zero.
//!
//! From the origin `(0,0)` the chain jumps to the top `(n,n)` of rung `n` with
//! probability `p(n)` (`n = 0` is a self-loop), walks down the rung one step
//! at a time and returns to the origin from `(n,1)`. The infinite chain is
//! truncated to rungs `n ≤ N` with `p` renormalized on `{0..N}`.
//!
//! Flat states: index 0 is the origin and `(n,k)` with `1 ≤ k ≤ n ≤ N` has
//! index `1 + n(n−1)/2 + (k−1)`, for `1 + N(N+1)/2` states in total.

use nalgebra::{DMatrix, Schur};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{additive_reversibilization, adjoint, ensure_within_cap, MarkovOperator, DEFAULT_STATE_CAP};

pub const CHEEGER_TOL: f64 = 1e-9;
/// Largest chain for which every cut is enumerated.
pub const EXHAUSTIVE_CUT_MAX_STATES: usize = 20;
/// Largest chain whose non-reversible spectrum is computed densely.
pub const DENSE_SPECTRUM_MAX_STATES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum LadderFamily {
    /// `p(n) = (1−q)qⁿ`.
    Geometric { q: f64 },
    /// `p(0), p(1), …`, all positive.
    Explicit { p: Vec<f64> },
}

impl LadderFamily {
    fn validate(&self) -> Result<()> {
        match self {
            LadderFamily::Geometric { q } => {
                if !(*q > 0.0 && *q < 1.0) {
                    return Err(Error::validation("q", format!("{q} is outside (0, 1)")));
                }
            }
            LadderFamily::Explicit { p } => {
                if let Some(i) = p.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::validation(format!("p[{i}]"), format!("{} is not > 0", p[i])));
                }
            }
        }
        Ok(())
    }

    fn raw(&self, n: usize) -> f64 {
        match self {
            LadderFamily::Geometric { q } => (1.0 - q) * q.powi(n as i32),
            LadderFamily::Explicit { p } => p[n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderChainSpec {
    pub family: LadderFamily,
    pub truncation: usize,
}

impl LadderChainSpec {
    pub fn geometric(q: f64, truncation: usize) -> Result<Self> {
        let spec = Self { family: LadderFamily::Geometric { q }, truncation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if self.truncation < 1 {
            return Err(Error::validation("N", "truncation must be at least 1"));
        }
        if let LadderFamily::Explicit { p } = &self.family {
            if p.len() < self.truncation + 1 {
                return Err(Error::validation(
                    "p",
                    format!("{} values given, truncation {} needs {}", p.len(), self.truncation, self.truncation + 1),
                ));
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        1 + self.truncation * (self.truncation + 1) / 2
    }

    /// `p` renormalized on `{0..N}`.
    pub fn probabilities(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..=self.truncation).map(|n| self.family.raw(n)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    /// `E[τ] = Σ (n+1) p(n)` over the truncated support.
    pub fn mean_return_time(&self) -> f64 {
        self.probabilities().iter().enumerate().map(|(n, p)| (n + 1) as f64 * p).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LadderState {
    Origin,
    Rung { n: usize, k: usize },
}

impl LadderState {
    pub fn index(self) -> usize {
        match self {
            LadderState::Origin => 0,
            LadderState::Rung { n, k } => 1 + n * (n - 1) / 2 + (k - 1),
        }
    }

    pub fn from_index(idx: usize) -> Self {
        if idx == 0 {
            return LadderState::Origin;
        }
        let mut n = 1;
        while n * (n + 1) / 2 < idx {
            n += 1;
        }
        LadderState::Rung { n, k: idx - (1 + n * (n - 1) / 2) + 1 }
    }
}

fn rung(n: usize, k: usize) -> usize {
    LadderState::Rung { n, k }.index()
}

pub fn ladder_stationary(spec: &LadderChainSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let p = spec.probabilities();
    let et = spec.mean_return_time();
    let mut pi = vec![0.0; spec.num_states()];
    pi[0] = 1.0 / et;
    for n in 1..=spec.truncation {
        for k in 1..=n {
            pi[rung(n, k)] = p[n] / et;
        }
    }
    Ok(pi)
}

pub fn build_ladder_with_cap(spec: &LadderChainSpec, cap: usize) -> Result<MarkovOperator> {
    spec.validate()?;
    let states = spec.num_states();
    ensure_within_cap(states, cap)?;
    let p = spec.probabilities();
    let mut kernel = DMatrix::zeros(states, states);
    kernel[(0, 0)] = p[0];
    for n in 1..=spec.truncation {
        kernel[(0, rung(n, n))] = p[n];
        for k in 2..=n {
            kernel[(rung(n, k), rung(n, k - 1))] = 1.0;
        }
        kernel[(rung(n, 1), 0)] = 1.0;
    }
    MarkovOperator::new(kernel, ladder_stationary(spec)?, vec![states], format!("ladder N={}", spec.truncation))
}

pub fn build_ladder(spec: &LadderChainSpec) -> Result<MarkovOperator> {
    build_ladder_with_cap(spec, DEFAULT_STATE_CAP)
}

/// The time reversal written out rule by rule, independent of [`adjoint`].
pub fn ladder_adjoint_by_rules(spec: &LadderChainSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let states = spec.num_states();
    let p = spec.probabilities();
    let mut kernel = DMatrix::zeros(states, states);
    kernel[(0, 0)] = p[0];
    for n in 1..=spec.truncation {
        kernel[(0, rung(n, 1))] = p[n];
        for k in 2..=n {
            kernel[(rung(n, k - 1), rung(n, k))] = 1.0;
        }
        kernel[(rung(n, n), 0)] = 1.0;
    }
    Ok(kernel)
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentResult {
    pub b: f64,
    /// `None` when the series diverges.
    pub value: Option<f64>,
    pub divergent: bool,
    /// `Some(N)` for a truncated sum, `None` for the untruncated series.
    pub truncation: Option<usize>,
}

fn check_b(b: f64) -> Result<()> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(Error::validation("b", format!("{b} is not > 1")));
    }
    Ok(())
}

/// `E[b^τ | X₀ = (0,0)] = Σ b^{n+1} p(n)` on the truncated support.
pub fn return_time_moment(spec: &LadderChainSpec, b: f64) -> Result<MomentResult> {
    spec.validate()?;
    check_b(b)?;
    let value = spec
        .probabilities()
        .iter()
        .enumerate()
        .map(|(n, p)| b.powi(n as i32 + 1) * p)
        .sum();
    Ok(MomentResult { b, value: Some(value), divergent: false, truncation: Some(spec.truncation) })
}

/// Untruncated `E[b^τ]`; for the geometric family this is `b(1−q)/(1−bq)`
/// when `bq < 1` and divergent otherwise. Explicit sequences are summed as
/// given.
pub fn analytic_return_time_moment(family: &LadderFamily, b: f64) -> Result<MomentResult> {
    family.validate()?;
    check_b(b)?;
    let value = match family {
        LadderFamily::Geometric { q } => (b * q < 1.0).then(|| b * (1.0 - q) / (1.0 - b * q)),
        LadderFamily::Explicit { p } => {
            let s: f64 = p.iter().sum();
            let v: f64 = p.iter().enumerate().map(|(n, pn)| b.powi(n as i32 + 1) * pn / s).sum();
            v.is_finite().then_some(v)
        }
    };
    Ok(MomentResult { b, divergent: value.is_none(), value, truncation: None })
}

/// Untruncated `E[τ]`.
pub fn analytic_mean_return_time(family: &LadderFamily) -> Result<f64> {
    family.validate()?;
    Ok(match family {
        LadderFamily::Geometric { q } => 1.0 / (1.0 - q),
        LadderFamily::Explicit { p } => {
            let s: f64 = p.iter().sum();
            p.iter().enumerate().map(|(n, pn)| (n + 1) as f64 * pn / s).sum()
        }
    })
}

// ---------------------------------------------------------------------------
// Conductance

#[derive(Debug, Clone, Serialize)]
pub struct CutValue {
    pub name: String,
    pub pi_mass: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConductanceReport {
    /// Minimum over the searched family.
    pub kappa_upper: f64,
    pub argmin: String,
    pub cuts: Vec<CutValue>,
    /// Minimum over every nonempty proper subset, for small chains.
    pub exhaustive: Option<f64>,
}

/// `Σ_{x∈A} π(x)K(x,Aᶜ) / (π(A)π(Aᶜ))`.
pub fn cut_value(k: &MarkovOperator, members: &[bool]) -> Result<f64> {
    let pi = k.pi();
    let mass: f64 = pi.iter().zip(members).filter(|(_, &m)| m).map(|(p, _)| p).sum();
    let rest = 1.0 - mass;
    if !(mass > 0.0 && rest > 1e-15) {
        return Err(Error::validation("cut", format!("π(A) = {mass}: need 0 < π(A) < 1")));
    }
    let kernel = k.kernel();
    let mut flow = 0.0;
    for x in (0..pi.len()).filter(|&x| members[x]) {
        for y in (0..pi.len()).filter(|&y| !members[y]) {
            flow += pi[x] * kernel[(x, y)];
        }
    }
    Ok(flow / (mass * rest))
}

/// Rung cuts `A_n = {(n,k) : k = 1..n}` plus all singletons, and an
/// exhaustive search when the chain has at most 20 states.
pub fn conductance(k: &MarkovOperator, truncation: usize) -> Result<ConductanceReport> {
    if !k.is_reversible() {
        return Err(Error::validation(k.label(), "conductance needs a reversible kernel"));
    }
    let states = k.num_states();
    let mut cuts = Vec::new();
    for n in 1..=truncation {
        let mut members = vec![false; states];
        for kk in 1..=n {
            members[rung(n, kk)] = true;
        }
        cuts.push(named_cut(k, format!("A_{n}"), &members)?);
    }
    for x in 0..states {
        let mut members = vec![false; states];
        members[x] = true;
        let name = match LadderState::from_index(x) {
            LadderState::Origin => "{(0,0)}".to_string(),
            LadderState::Rung { n, k } => format!("{{({n},{k})}}"),
        };
        cuts.push(named_cut(k, name, &members)?);
    }
    let best = cuts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(_, c)| c.clone())
        .expect("at least one cut");
    let exhaustive = (states <= EXHAUSTIVE_CUT_MAX_STATES).then(|| exhaustive_conductance(k)).transpose()?;
    Ok(ConductanceReport { kappa_upper: best.value, argmin: best.name, cuts, exhaustive })
}

fn named_cut(k: &MarkovOperator, name: String, members: &[bool]) -> Result<CutValue> {
    let mass = k.pi().iter().zip(members).filter(|(_, &m)| m).map(|(p, _)| p).sum();
    Ok(CutValue { name, pi_mass: mass, value: cut_value(k, members)? })
}

fn exhaustive_conductance(k: &MarkovOperator) -> Result<f64> {
    let states = k.num_states();
    let full = (1u64 << states) - 1;
    (1..full)
        .into_par_iter()
        .map(|mask| {
            let members: Vec<bool> = (0..states).map(|s| mask & (1 << s) != 0).collect();
            cut_value(k, &members)
        })
        .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))
}

// ---------------------------------------------------------------------------
// Spectra

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    /// Real Schur decomposition of the dense centred table.
    DenseSchur,
    /// Roots of the renewal polynomial `λ^{N+1} − Σ p(n) λ^{N−n}`.
    RenewalPolynomial,
}

/// Spectral radius of `P − Π` from the renewal polynomial.
///
/// The nonzero eigenvalues of `P` are the roots of
/// `λ^{N+1} − Σ_n p(n) λ^{N−n}`; the root 1 is divided out and the rest are
/// the eigenvalues of the companion matrix of the quotient. `P*` has the
/// same spectrum.
pub fn renewal_spectral_radius(spec: &LadderChainSpec) -> Result<f64> {
    spec.validate()?;
    let p = spec.probabilities();
    // coefficients of λ^{N+1}, λ^N, …, λ^0
    let mut coeffs = vec![1.0];
    coeffs.extend(p.iter().map(|v| -v));
    // synthetic division by (λ − 1)
    let mut quotient = Vec::with_capacity(coeffs.len() - 1);
    let mut acc = 0.0;
    for &c in &coeffs[..coeffs.len() - 1] {
        acc += c;
        quotient.push(acc);
    }
    let deg = quotient.len() - 1;
    if deg == 0 {
        return Ok(0.0);
    }
    // λ = sμ with s = max_j |a_j/a_0|^{1/j}, so every scaled coefficient is at most 1
    let scale = (1..=deg)
        .map(|j| (quotient[j] / quotient[0]).abs().powf(1.0 / j as f64))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let companion = DMatrix::from_fn(deg, deg, |r, c| {
        if r == 0 {
            -quotient[c + 1] / quotient[0] / scale.powi(c as i32 + 1)
        } else {
            (r == c + 1) as u8 as f64
        }
    });
    let schur = Schur::try_new(companion, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric(format!("companion matrix of degree {deg} did not converge")))?;
    Ok(scale * schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct GapSweepRow {
    pub truncation: usize,
    pub states: usize,
    pub pi_origin: f64,
    pub gap_k: f64,
    pub gap_p: f64,
    pub gap_pstar: f64,
    pub gap_method: SpectrumMethod,
    pub kappa_upper: f64,
    pub kappa_argmin: String,
    /// `gap(K) ≤ 2κ + tol`.
    pub cheeger_upper_holds: bool,
    /// `κ²/8` from the family minimum; reported only.
    pub cheeger_lower_estimate: f64,
    /// Truncated `E[b^τ]`, one per requested `b`.
    pub moments: Vec<MomentResult>,
    /// Largest `value(A_n)·n·π(0,0)` over the rung cuts.
    pub max_cut_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapSweep {
    pub family: LadderFamily,
    pub bs: Vec<f64>,
    /// Untruncated `E[b^τ]`, one per requested `b`.
    pub analytic_moments: Vec<MomentResult>,
    pub rows: Vec<GapSweepRow>,
    pub gap_k_strictly_decreasing: bool,
    pub cheeger_upper_all_hold: bool,
}

impl GapSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,states,gap_K,gap_P,gap_Pstar,gap_method,kappa_upper,kappa_argmin,cheeger_upper_holds");
        for b in &self.bs {
            out.push_str(&format!(",E_b_tau[b={b}]"));
        }
        out.push_str(",pi_origin\n");
        for r in &self.rows {
            let method = match r.gap_method {
                SpectrumMethod::DenseSchur => "dense_schur",
                SpectrumMethod::RenewalPolynomial => "renewal_polynomial",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                r.truncation,
                r.states,
                r.gap_k,
                r.gap_p,
                r.gap_pstar,
                method,
                r.kappa_upper,
                crate::table::field(&r.kappa_argmin),
                r.cheeger_upper_holds,
            ));
            for m in &r.moments {
                out.push_str(&match m.value {
                    Some(v) => format!(",{v}"),
                    None => ",divergent".to_string(),
                });
            }
            out.push_str(&format!(",{}\n", r.pi_origin));
        }
        out
    }
}

fn sweep_row(spec: &LadderChainSpec, bs: &[f64], cap: usize) -> Result<GapSweepRow> {
    let p = build_ladder_with_cap(spec, cap)?;
    let k = additive_reversibilization(&p)?;
    let gap_k = k.spectral_gap()?;
    let states = spec.num_states();
    let (gap_p, gap_pstar, gap_method) = if states <= DENSE_SPECTRUM_MAX_STATES {
        (p.spectral_gap()?, adjoint(&p)?.spectral_gap()?, SpectrumMethod::DenseSchur)
    } else {
        let g = 1.0 - renewal_spectral_radius(spec)?;
        (g, g, SpectrumMethod::RenewalPolynomial)
    };
    let cond = conductance(&k, spec.truncation)?;
    let pi_origin = p.pi()[0];
    let max_cut_ratio = cond
        .cuts
        .iter()
        .take(spec.truncation)
        .enumerate()
        .map(|(i, c)| c.value * (i + 1) as f64 * pi_origin)
        .fold(0.0, f64::max);
    Ok(GapSweepRow {
        truncation: spec.truncation,
        states,
        pi_origin,
        gap_k,
        gap_p,
        gap_pstar,
        gap_method,
        kappa_upper: cond.kappa_upper,
        kappa_argmin: cond.argmin,
        cheeger_upper_holds: gap_k <= 2.0 * cond.kappa_upper + CHEEGER_TOL,
        cheeger_lower_estimate: cond.kappa_upper.powi(2) / 8.0,
        moments: bs.iter().map(|&b| return_time_moment(spec, b)).collect::<Result<_>>()?,
        max_cut_ratio,
    })
}

/// Gaps of `K_N`, `P_N`, `P*_N`, conductance and `E[b^τ]` for each
/// truncation, in increasing `N`.
pub fn reversibilization_gap_sweep(family: &LadderFamily, truncations: &[usize], bs: &[f64], cap: usize) -> Result<GapSweep> {
    if truncations.is_empty() {
        return Err(Error::validation("N", "no truncations given"));
    }
    if let Some(w) = truncations.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::validation("N", format!("truncations must increase ({} then {})", w[0], w[1])));
    }
    let specs = truncations
        .iter()
        .map(|&n| {
            let spec = LadderChainSpec { family: family.clone(), truncation: n };
            spec.validate()?;
            ensure_within_cap(spec.num_states(), cap)?;
            Ok(spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let analytic_moments = bs
        .iter()
        .map(|&b| analytic_return_time_moment(family, b))
        .collect::<Result<Vec<_>>>()?;
    let rows = specs
        .par_iter()
        .map(|s| sweep_row(s, bs, cap))
        .collect::<Result<Vec<_>>>()?;
    let gap_k_strictly_decreasing = rows.windows(2).all(|w| w[1].gap_k < w[0].gap_k);
    let cheeger_upper_all_hold = rows.iter().all(|r| r.cheeger_upper_holds);
    Ok(GapSweep {
        family: family.clone(),
        bs: bs.to_vec(),
        analytic_moments,
        rows,
        gap_k_strictly_decreasing,
        cheeger_upper_all_hold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn half(n: usize) -> LadderChainSpec {
        LadderChainSpec::geometric(0.5, n).unwrap()
    }

    #[test]
    fn state_indexing_round_trips() {
        let spec = half(6);
        assert_eq!(spec.num_states(), 22);
        for idx in 0..spec.num_states() {
            assert_eq!(LadderState::from_index(idx).index(), idx);
        }
        assert_eq!(LadderState::from_index(1), LadderState::Rung { n: 1, k: 1 });
        assert_eq!(LadderState::from_index(3), LadderState::Rung { n: 2, k: 2 });
    }

    #[test]
    fn transition_rules() {
        let spec = half(3);
        let p = build_ladder(&spec).unwrap();
        let norm: f64 = (0..=3).map(|n| 0.5f64.powi(n + 1)).sum();
        assert_abs_diff_eq!(p.kernel()[(0, rung(2, 2))], 0.125 / norm, epsilon = 1e-15);
        assert_eq!(p.kernel()[(rung(3, 2), rung(3, 1))], 1.0);
        assert_eq!(p.kernel()[(rung(2, 1), 0)], 1.0);
        assert!(LadderChainSpec::geometric(0.5, 0).is_err());
        assert!(LadderChainSpec::geometric(1.0, 3).is_err());
    }

    #[test]
    fn stationary_law() {
        let spec = half(20);
        let p = build_ladder(&spec).unwrap();
        assert!(p.max_stationarity_error() <= 1e-12);
        let pi = p.pi();
        for n in 1..=20 {
            for k in 2..=n {
                assert_eq!(pi[rung(n, k)], pi[rung(n, 1)]);
            }
        }
        assert_abs_diff_eq!(analytic_mean_return_time(&LadderFamily::Geometric { q: 0.5 }).unwrap(), 2.0);
        assert_abs_diff_eq!(1.0 / spec.mean_return_time(), 0.5, epsilon = 1e-5);
    }

    #[test]
    fn adjoint_matches_reversal_rules() {
        let spec = half(8);
        let p = build_ladder(&spec).unwrap();
        let star = adjoint(&p).unwrap();
        let rules = ladder_adjoint_by_rules(&spec).unwrap();
        assert!((star.kernel() - rules).amax() <= 1e-12);
        let k = additive_reversibilization(&p).unwrap();
        assert!(k.detailed_balance_error() <= 1e-12);
    }

    #[test]
    fn moments() {
        let geo = LadderFamily::Geometric { q: 0.5 };
        assert_abs_diff_eq!(analytic_return_time_moment(&geo, 1.5).unwrap().value.unwrap(), 3.0, epsilon = 1e-12);
        assert!(analytic_return_time_moment(&geo, 2.0).unwrap().divergent);
        let t = return_time_moment(&half(10), 2.0).unwrap();
        assert!(!t.divergent && t.value.unwrap().is_finite());
        assert_abs_diff_eq!(return_time_moment(&half(80), 1.5).unwrap().value.unwrap(), 3.0, epsilon = 1e-8);
        assert!(return_time_moment(&half(4), 1.0).is_err());
    }

    #[test]
    fn rung_cut_value_closed_form() {
        let spec = half(12);
        let k = additive_reversibilization(&build_ladder(&spec).unwrap()).unwrap();
        let cond = conductance(&k, 12).unwrap();
        let et = spec.mean_return_time();
        let p = spec.probabilities();
        for (n, &pn) in p.iter().enumerate().skip(1) {
            let delta = pn / et;
            let want = 1.0 / (n as f64 * (1.0 - n as f64 * delta));
            assert_abs_diff_eq!(cond.cuts[n - 1].value, want, epsilon = 1e-12);
            assert!(cond.cuts[n - 1].value <= 1.05 / (n as f64 * k.pi()[0]));
        }
        assert!(cut_value(&k, &vec![true; k.num_states()]).is_err());
    }

    #[test]
    fn exhaustive_search_is_below_family() {
        let spec = half(5);
        let k = additive_reversibilization(&build_ladder(&spec).unwrap()).unwrap();
        let cond = conductance(&k, 5).unwrap();
        let ex = cond.exhaustive.unwrap();
        assert!(ex <= cond.kappa_upper + 1e-15);
        assert!(k.spectral_gap().unwrap() <= 2.0 * ex + 1e-9);
    }

    #[test]
    fn conductance_needs_reversible_kernel() {
        let p = build_ladder(&half(3)).unwrap();
        assert!(conductance(&p, 3).is_err());
    }

    #[test]
    fn renewal_radius_matches_dense() {
        for n in [2, 5, 10, 16] {
            let spec = half(n);
            let p = build_ladder(&spec).unwrap();
            let dense = p.spectral_radius_centered().unwrap();
            let star = adjoint(&p).unwrap().spectral_radius_centered().unwrap();
            let poly = renewal_spectral_radius(&spec).unwrap();
            assert_abs_diff_eq!(dense, poly, epsilon = 1e-9);
            assert_abs_diff_eq!(dense, star, epsilon = 1e-10);
        }
    }

    #[test]
    fn small_sweep() {
        let sweep = reversibilization_gap_sweep(&LadderFamily::Geometric { q: 0.5 }, &[4, 8, 12], &[1.5, 2.0], DEFAULT_STATE_CAP).unwrap();
        assert!(sweep.gap_k_strictly_decreasing);
        assert!(sweep.cheeger_upper_all_hold);
        assert_eq!(sweep.rows.len(), 3);
        assert!(sweep.to_csv().starts_with("N,states,gap_K"));
        assert!(sweep.to_csv().lines().next().unwrap().contains("E_b_tau[b=2]"));
        assert!(sweep.analytic_moments[1].divergent);
        assert!(reversibilization_gap_sweep(&LadderFamily::Geometric { q: 0.5 }, &[8, 4], &[1.5], DEFAULT_STATE_CAP).is_err());
        assert!(matches!(
            reversibilization_gap_sweep(&LadderFamily::Geometric { q: 0.5 }, &[300], &[1.5], DEFAULT_STATE_CAP),
            Err(Error::StateCapExceeded { .. })
        ));
    }
}
