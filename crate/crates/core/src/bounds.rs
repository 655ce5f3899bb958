//! Closed-form norm bounds for random- and deterministic-scan samplers and
//! their slack against exact norms.
//!
//! Slack is `bound − exact` for upper bounds and `exact − bound` for lower
//! bounds, so a negative slack is always a violation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{friedrichs_angle_from_norm, inclination_lower_bound};
use crate::measure::TargetDistribution;
use crate::operators::{dsg, rsg, Permutation, Weights};

pub const SLACK_TOL: f64 = 1e-9;
/// Input range slack for `c` and `ℓ`.
const RANGE_TOL: f64 = 1e-9;
/// Largest `d` for which every permutation is enumerated.
pub const EXHAUSTIVE_PERMUTATION_MAX_D: usize = 5;

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::validation("d", format!("{d} < 2")));
    }
    Ok(())
}

fn check_c(c: f64, d: usize) -> Result<()> {
    let lo = -1.0 / (d as f64 - 1.0);
    if !(c >= lo - RANGE_TOL && c <= 1.0 + RANGE_TOL) {
        return Err(Error::validation("c", format!("{c} outside [{lo}, 1]")));
    }
    Ok(())
}

/// `((d−1)/d)·α·(c + 1/(d−1)) + 1 − α` with `α = d·min w_i`.
pub fn rsg_norm_bound(c: f64, d: usize, weights: &Weights) -> Result<f64> {
    check_d(d)?;
    check_c(c, d)?;
    if weights.len() != d {
        return Err(Error::validation("weights", format!("has {} entries, expected {d}", weights.len())));
    }
    let df = d as f64;
    let alpha = df * weights.min();
    Ok((df - 1.0) / df * alpha * (c + 1.0 / (df - 1.0)) + 1.0 - alpha)
}

/// `√(1 − ((d−1)²/(4d⁴))(1−c)²)`.
pub fn dsg_norm_bound_from_c(c: f64, d: usize) -> Result<f64> {
    check_d(d)?;
    check_c(c, d)?;
    let df = d as f64;
    let k = (df - 1.0).powi(2) / (4.0 * df.powi(4));
    Ok((1.0 - k * (1.0 - c.min(1.0)).powi(2)).max(0.0).sqrt())
}

/// `√(1 − ℓ²/d²)`; `ell` must be a certified lower bound on `ℓ`.
pub fn dsg_norm_bound_from_l(ell: f64, d: usize) -> Result<f64> {
    check_d(d)?;
    if !(0.0..=1.0 + RANGE_TOL).contains(&ell) {
        return Err(Error::validation("ell", format!("{ell} outside [0, 1]")));
    }
    let df = d as f64;
    Ok((1.0 - ell * ell / (df * df)).max(0.0).sqrt())
}

/// `(γ²/32)·d^{−2β−2}`: the deterministic-scan gap guaranteed when the
/// random-scan gap is at least `γ·d^{−β}`.
pub fn rapid_mixing_transfer(beta: f64, gamma: f64, d: usize) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::validation("beta", format!("{beta} is not > 0")));
    }
    if !(gamma > 0.0) {
        return Err(Error::validation("gamma", format!("{gamma} is not > 0")));
    }
    check_d(d)?;
    Ok(gamma * gamma / 32.0 * (d as f64).powf(-2.0 * beta - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundEntry {
    pub name: String,
    /// Scan in CLI grammar, e.g. `dsg:2,1,3`.
    pub scan: String,
    pub kind: BoundKind,
    pub inputs: BTreeMap<String, f64>,
    pub bound: f64,
    pub exact: f64,
    pub slack: f64,
    pub holds: bool,
}

impl BoundEntry {
    fn new(name: &str, scan: String, kind: BoundKind, inputs: &[(&str, f64)], bound: f64, exact: f64) -> Self {
        let slack = match kind {
            BoundKind::Upper => bound - exact,
            BoundKind::Lower => exact - bound,
        };
        Self {
            name: name.to_string(),
            scan,
            kind,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            bound,
            exact,
            slack,
            holds: slack >= -SLACK_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub d: usize,
    /// Exact angle from the uniform random-scan norm.
    pub c: f64,
    pub entries: Vec<BoundEntry>,
    /// Uniform-weight random-scan slack is within tolerance of 0, if tested.
    pub rsg_uniform_sharp: Option<bool>,
    pub all_hold: bool,
}

impl BoundReport {
    pub fn violations(&self) -> Vec<&BoundEntry> {
        self.entries.iter().filter(|e| !e.holds).collect()
    }

    pub fn min_slack(&self) -> f64 {
        self.entries.iter().map(|e| e.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,scan,kind,bound,exact,slack,holds\n");
        for e in &self.entries {
            let kind = match e.kind {
                BoundKind::Upper => "upper",
                BoundKind::Lower => "lower",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.name,
                crate::table::field(&e.scan),
                kind,
                e.bound,
                e.exact,
                e.slack,
                e.holds
            ));
        }
        out
    }
}

fn scan_label_dsg(sigma: &Permutation) -> String {
    crate::operators::ScanSpec::Deterministic(sigma.clone()).to_string()
}

fn scan_label_rsg(w: &Weights) -> String {
    crate::operators::ScanSpec::Random(w.clone()).to_string()
}

/// Exact norms of every listed scan against their closed-form bounds.
pub fn verify_bounds(pi: &TargetDistribution, sigmas: &[Permutation], weights: &[Weights]) -> Result<BoundReport> {
    let d = pi.num_coords();
    let angle = friedrichs_angle_from_norm(pi)?;
    let c = angle.value;
    let df = d as f64;

    let rsg_entries: Vec<Vec<BoundEntry>> = weights
        .par_iter()
        .map(|w| -> Result<Vec<BoundEntry>> {
            let exact = rsg(w, pi)?.l2_norm_centered()?;
            let bound = rsg_norm_bound(c, d, w)?;
            let alpha = df * w.min();
            Ok(vec![
                BoundEntry::new("rsg_norm", scan_label_rsg(w), BoundKind::Upper, &[("c", c), ("d", df), ("alpha", alpha)], bound, exact),
                BoundEntry::new("rsg_norm_floor", scan_label_rsg(w), BoundKind::Lower, &[("d", df)], 1.0 / df, exact),
            ])
        })
        .collect::<Result<_>>()?;

    let dsg_c = dsg_norm_bound_from_c(c, d)?;
    let ell_lo = inclination_lower_bound(c, d);
    let dsg_l = dsg_norm_bound_from_l(ell_lo.min(1.0), d)?;
    let dsg_entries: Vec<Vec<BoundEntry>> = sigmas
        .par_iter()
        .map(|s| -> Result<Vec<BoundEntry>> {
            let exact = dsg(s, pi)?.l2_norm_centered()?;
            Ok(vec![
                BoundEntry::new("dsg_norm_from_c", scan_label_dsg(s), BoundKind::Upper, &[("c", c), ("d", df)], dsg_c, exact),
                BoundEntry::new("dsg_norm_from_l", scan_label_dsg(s), BoundKind::Upper, &[("ell_lower", ell_lo), ("d", df)], dsg_l, exact),
            ])
        })
        .collect::<Result<_>>()?;

    let entries: Vec<BoundEntry> = rsg_entries.into_iter().chain(dsg_entries).flatten().collect();
    let rsg_uniform_sharp = weights
        .iter()
        .position(Weights::is_uniform)
        .map(|i| entries[2 * i].slack.abs() <= SLACK_TOL);
    let all_hold = entries.iter().all(|e| e.holds) && rsg_uniform_sharp.unwrap_or(true);
    Ok(BoundReport { d, c, entries, rsg_uniform_sharp, all_hold })
}

/// All permutations for `d ≤ 5`, otherwise the identity, its reversal and
/// `samples` seeded random orders.
pub fn permutations_for(d: usize, samples: usize, seed: u64) -> Vec<Permutation> {
    if d <= EXHAUSTIVE_PERMUTATION_MAX_D {
        return Permutation::all(d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = Permutation::identity(d);
    let mut out = vec![id.clone(), id.reversed()];
    for _ in 0..samples {
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut rng);
        out.push(Permutation::new(order).expect("shuffle of 0..d"));
    }
    out
}

/// Weights drawn uniformly from the open simplex.
pub fn random_weights(rng: &mut ChaCha8Rng, d: usize) -> Weights {
    loop {
        let raw: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
        if raw.iter().all(|&v: &f64| v > 0.0) {
            if let Ok(w) = Weights::from_unnormalized(raw) {
                return w;
            }
        }
    }
}

/// Least-squares fit of `gap(d) ≈ γ·d^{−β}`.
#[derive(Debug, Clone, Serialize)]
pub struct PowerLawFit {
    pub beta: f64,
    /// Lower envelope `min_d gap(d)·d^β`, so `gap(d) ≥ γ·d^{−β}` at every
    /// fitted point.
    pub gamma: f64,
    /// `β` came out non-positive and was clamped to a small positive value.
    pub beta_clamped: bool,
}

pub const MIN_FIT_BETA: f64 = 1e-6;

pub fn fit_power_law(ds: &[usize], gaps: &[f64]) -> Result<PowerLawFit> {
    if ds.len() != gaps.len() || ds.len() < 2 {
        return Err(Error::validation("fit", "needs at least two (d, gap) points"));
    }
    if let Some(i) = gaps.iter().position(|&g| !(g > 0.0)) {
        return Err(Error::validation(format!("gaps[{i}]"), format!("{} is not > 0", gaps[i])));
    }
    let x: Vec<f64> = ds.iter().map(|&d| (d as f64).ln()).collect();
    let y: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let raw = -sxy / sxx;
    let beta_clamped = !(raw > MIN_FIT_BETA);
    let beta = if beta_clamped { MIN_FIT_BETA } else { raw };
    let gamma = ds
        .iter()
        .zip(gaps)
        .map(|(&d, g)| g * (d as f64).powf(beta))
        .fold(f64::INFINITY, f64::min);
    Ok(PowerLawFit { beta, gamma, beta_clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::random_target;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rsg_bound_examples() {
        let w = Weights::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert_abs_diff_eq!(rsg_norm_bound(0.4, 3, &w).unwrap(), 0.7, epsilon = 1e-15);
        for d in 2..6 {
            let df = d as f64;
            assert_abs_diff_eq!(
                rsg_norm_bound(0.3, d, &Weights::uniform(d)).unwrap(),
                (df - 1.0) / df * (0.3 + 1.0 / (df - 1.0)),
                epsilon = 1e-15
            );
        }
        assert_abs_diff_eq!(rsg_norm_bound(1.0, 3, &w).unwrap(), 1.0, epsilon = 1e-15);
        assert!(rsg_norm_bound(0.4, 2, &w).is_err());
    }

    #[test]
    fn dsg_bound_examples() {
        assert_abs_diff_eq!(dsg_norm_bound_from_c(0.5, 2).unwrap(), 0.998045, epsilon = 1e-6);
        assert_abs_diff_eq!(dsg_norm_bound_from_c(1.0, 4).unwrap(), 1.0);
        assert_abs_diff_eq!(dsg_norm_bound_from_c(0.4, 3).unwrap(), 0.997776, epsilon = 1e-6);
        assert!(dsg_norm_bound_from_c(1.5, 3).is_err());
        assert!(dsg_norm_bound_from_c(-0.9, 3).is_err());

        assert_abs_diff_eq!(dsg_norm_bound_from_l(std::f64::consts::FRAC_1_SQRT_2, 2).unwrap(), 0.935414, epsilon = 1e-6);
        assert_abs_diff_eq!(dsg_norm_bound_from_l(0.0, 5).unwrap(), 1.0);
        let ell = inclination_lower_bound(0.5, 2);
        assert_abs_diff_eq!(ell, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(dsg_norm_bound_from_l(ell, 2).unwrap(), dsg_norm_bound_from_c(0.5, 2).unwrap(), epsilon = 1e-12);
        assert!(dsg_norm_bound_from_l(-0.1, 2).is_err());
    }

    #[test]
    fn transfer_examples() {
        assert_abs_diff_eq!(rapid_mixing_transfer(1.0, 1.0, 10).unwrap(), 3.125e-6, epsilon = 1e-18);
        assert_abs_diff_eq!(rapid_mixing_transfer(1.0, 1.0, 2).unwrap(), 1.0 / 512.0, epsilon = 1e-15);
        let v: Vec<f64> = (2..20).map(|d| rapid_mixing_transfer(0.7, 0.3, d).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(rapid_mixing_transfer(0.0, 1.0, 3).is_err());
        assert!(rapid_mixing_transfer(1.0, -1.0, 3).is_err());
    }

    #[test]
    fn verify_correlated_pair() {
        let pi = TargetDistribution::equicorrelated_binary(2, 0.25).unwrap();
        let r = verify_bounds(&pi, &Permutation::all(2), &[Weights::uniform(2)]).unwrap();
        assert!(r.all_hold);
        assert_eq!(r.rsg_uniform_sharp, Some(true));
        let e = r.entries.iter().find(|e| e.name == "dsg_norm_from_c").unwrap();
        assert_abs_diff_eq!(e.slack, 0.998045 - 0.5, epsilon = 1e-5);
    }

    #[test]
    fn verify_uniform_is_sharp() {
        let pi = TargetDistribution::uniform(vec![2, 2]).unwrap();
        let r = verify_bounds(&pi, &[], &[Weights::uniform(2)]).unwrap();
        assert_abs_diff_eq!(r.entries[0].slack, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.entries[0].exact, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn verify_random_target_all_permutations() {
        let pi = random_target(17, &[2, 3, 2, 2], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ws = vec![Weights::uniform(4)];
        ws.extend((0..5).map(|_| random_weights(&mut rng, 4)));
        let r = verify_bounds(&pi, &Permutation::all(4), &ws).unwrap();
        assert!(r.all_hold, "{:?}", r.violations());
        assert_eq!(r.entries.len(), 2 * 6 + 2 * 24);
        assert!(r.to_csv().starts_with("name,scan,kind,bound,exact,slack,holds\n"));
    }

    #[test]
    fn permutation_sampling() {
        assert_eq!(permutations_for(3, 10, 0).len(), 6);
        let a = permutations_for(7, 10, 4);
        assert_eq!(a.len(), 12);
        assert_eq!(a, permutations_for(7, 10, 4));
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let ds = [2usize, 3, 4, 5, 6];
        let gaps: Vec<f64> = ds.iter().map(|&d| 0.8 * (d as f64).powf(-1.5)).collect();
        let fit = fit_power_law(&ds, &gaps).unwrap();
        assert_abs_diff_eq!(fit.beta, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.gamma, 0.8, epsilon = 1e-12);
        let flat = fit_power_law(&ds, &[0.5; 5]).unwrap();
        assert!(flat.beta_clamped);
        assert!(fit_power_law(&ds, &[0.5, 0.0, 0.1, 0.1, 0.1]).is_err());
    }
}
