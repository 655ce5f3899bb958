//! Geometry of the subspaces `M_i` (functions not depending on coordinate
//! `i`): the generalized Friedrichs angle `c` and the inclination `ℓ`.
//!
//! All computations happen in whitened coordinates `u = √π ⊙ f` restricted
//! to the support of π, where the π-inner product becomes the Euclidean one.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::TargetDistribution;
use crate::operators::{rsg, Weights};

pub const RANK_TOL: f64 = 1e-10;
pub const DEFAULT_RESTARTS: usize = 32;
pub const DEFAULT_INCLINATION_TOL: f64 = 1e-8;
pub const DEFAULT_INCLINATION_SEED: u64 = 0;
pub const SANDWICH_TOL: f64 = 1e-9;

/// Orthonormal basis of `M_i ∩ M⊥` in the π-inner product.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    coord: usize,
    /// Whitened vectors `√π ⊙ b` over all states; zero off the support.
    whitened: Vec<Vec<f64>>,
    sqrt_pi: Vec<f64>,
}

impl SubspaceBasis {
    pub fn coord(&self) -> usize {
        self.coord
    }

    pub fn dim(&self) -> usize {
        self.whitened.len()
    }

    /// Basis vectors as functions on the state space (0 on π-null states).
    pub fn functions(&self) -> Vec<Vec<f64>> {
        self.whitened
            .iter()
            .map(|u| {
                u.iter()
                    .zip(&self.sqrt_pi)
                    .map(|(v, s)| if *s > 0.0 { v / s } else { 0.0 })
                    .collect()
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-pass modified Gram–Schmidt of `v` against `basis`; returns the
/// normalized residual when it exceeds [`RANK_TOL`].
fn orthonormal_residual(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..2 {
        for b in basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let n = dot(&v, &v).sqrt();
    (n > RANK_TOL).then(|| v.into_iter().map(|x| x / n).collect())
}

/// Bases of `M_i ∩ M⊥` for every coordinate, from centred indicators of
/// `x_{−i}` cells.
pub fn subspace_bases(pi: &TargetDistribution) -> Vec<SubspaceBasis> {
    let space = pi.space();
    let sqrt_pi: Vec<f64> = pi.pmf().iter().map(|p| p.sqrt()).collect();
    (0..space.num_coords())
        .map(|coord| {
            let stride = space.stride(coord);
            let k = space.dims()[coord];
            let mut whitened: Vec<Vec<f64>> = Vec::new();
            let constant = [sqrt_pi.clone()];
            for base in space.fiber_bases(coord) {
                let mut v = vec![0.0; sqrt_pi.len()];
                for j in 0..k {
                    let s = base + j * stride;
                    v[s] = sqrt_pi[s];
                }
                let v = orthonormal_residual_against(v, &constant, &whitened);
                if let Some(v) = v {
                    whitened.push(v);
                }
            }
            SubspaceBasis { coord, whitened, sqrt_pi: sqrt_pi.clone() }
        })
        .collect()
}

fn orthonormal_residual_against(mut v: Vec<f64>, fixed: &[Vec<f64>], basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for f in fixed {
        let c = dot(&v, f);
        v.iter_mut().zip(f).for_each(|(x, y)| *x -= c * y);
    }
    let mut all: Vec<Vec<f64>> = fixed.to_vec();
    all.extend_from_slice(basis);
    orthonormal_residual(v, &all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMethod {
    ClosedForm,
    BruteForce,
}

#[derive(Debug, Clone, Serialize)]
pub struct AngleResult {
    pub value: f64,
    pub method: AngleMethod,
    /// Block coefficient vector attaining the supremum (brute force only).
    pub witness: Option<Vec<f64>>,
    /// Set when `M⊥` is trivial and `c` is defined as 0.
    pub degenerate: bool,
}

fn is_degenerate(pi: &TargetDistribution) -> bool {
    pi.support().len() <= 1
}

/// `c = (d·‖(1/d)ΣP_i − Π‖ − 1)/(d − 1)`.
pub fn friedrichs_angle_from_norm(pi: &TargetDistribution) -> Result<AngleResult> {
    let d = pi.num_coords();
    if is_degenerate(pi) {
        return Ok(AngleResult { value: 0.0, method: AngleMethod::ClosedForm, witness: None, degenerate: true });
    }
    let norm = rsg(&Weights::uniform(d), pi)?.l2_norm_centered()?;
    let d = d as f64;
    Ok(AngleResult {
        value: (d * norm - 1.0) / (d - 1.0),
        method: AngleMethod::ClosedForm,
        witness: None,
        degenerate: false,
    })
}

/// Top generalized eigenvalue of `Σ_{i≠j}⟨f_j, f_i⟩` against
/// `(d−1)Σ‖f_i‖²` over `f_i ∈ M_i ∩ M⊥`.
///
/// With orthonormal block bases the denominator form is `(d−1)·I` and the
/// numerator is `G − I`, `G` the Gram matrix of all bases concatenated.
pub fn friedrichs_angle_bruteforce(pi: &TargetDistribution) -> Result<AngleResult> {
    let bases = subspace_bases(pi);
    let columns: Vec<&Vec<f64>> = bases.iter().flat_map(|b| b.whitened.iter()).collect();
    if columns.is_empty() {
        return Ok(AngleResult { value: 0.0, method: AngleMethod::BruteForce, witness: None, degenerate: true });
    }
    let k = columns.len();
    let numerator = DMatrix::from_fn(k, k, |a, b| if a == b { 0.0 } else { dot(columns[a], columns[b]) });
    let eig = SymmetricEigen::try_new(numerator, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric("Friedrichs-angle eigenproblem did not converge".into()))?;
    let top = eig.eigenvalues.imax();
    let d = pi.num_coords() as f64;
    Ok(AngleResult {
        value: eig.eigenvalues[top] / (d - 1.0),
        method: AngleMethod::BruteForce,
        witness: Some(eig.eigenvectors.column(top).iter().copied().collect()),
        degenerate: false,
    })
}

/// Certified lower bound `ℓ ≥ (d−1)(1−c)/(2d)` from an exact `c`.
pub fn inclination_lower_bound(c: f64, d: usize) -> f64 {
    let d = d as f64;
    ((d - 1.0) * (1.0 - c) / (2.0 * d)).max(0.0)
}

// ---------------------------------------------------------------------------
// Inclination

#[derive(Debug, Clone, Serialize)]
pub struct InclinationResult {
    /// `max_i dist(f, M_i)` at the witness; an upper bound on `ℓ`.
    pub value: f64,
    /// Witness function with `dist(f, M) = 1` (0 on π-null states).
    pub witness: Vec<f64>,
    /// `dist(witness, M_i)` per coordinate.
    pub distances: Vec<f64>,
    pub restarts: usize,
    pub tol: f64,
    pub converged: bool,
    /// Set when `M⊥` is trivial; the value is then reported as 0.
    pub degenerate: bool,
}

/// Quadratic forms `A_i = C_iᵀC_i` with `‖Q_i u‖² = zᵀA_i z` for
/// `u = V z` on the unit sphere of `M⊥`.
struct InclinationProblem {
    forms: Vec<DMatrix<f64>>,
    /// Orthonormal basis of `M⊥` (whitened), one column per direction.
    frame: DMatrix<f64>,
}

impl InclinationProblem {
    fn new(pi: &TargetDistribution) -> Self {
        let n = pi.pmf().len();
        let sqrt_pi: Vec<f64> = pi.pmf().iter().map(|p| p.sqrt()).collect();
        let support = pi.support();
        let mut frame_cols: Vec<Vec<f64>> = Vec::new();
        let fixed = [sqrt_pi.clone()];
        for &s in &support {
            let mut e = vec![0.0; n];
            e[s] = 1.0;
            if let Some(v) = orthonormal_residual_against(e, &fixed, &frame_cols) {
                frame_cols.push(v);
            }
        }
        let m = frame_cols.len();
        let frame = DMatrix::from_fn(n, m, |r, c| frame_cols[c][r]);
        let forms = subspace_bases(pi)
            .iter()
            .map(|b| {
                let k = b.dim();
                let basis = DMatrix::from_fn(n, k, |r, c| b.whitened[c][r]);
                let c = basis.transpose() * &frame;
                c.transpose() * c
            })
            .collect();
        Self { forms, frame }
    }

    fn dim(&self) -> usize {
        self.frame.ncols()
    }

    /// `h_i(z) = 1 − zᵀA_i z = dist(u, M_i)²`.
    fn residuals(&self, z: &DVector<f64>) -> Vec<f64> {
        self.forms.iter().map(|a| (1.0 - z.dot(&(a * z))).max(0.0)).collect()
    }

    fn max_residual(&self, z: &DVector<f64>) -> f64 {
        self.residuals(z).into_iter().fold(0.0, f64::max)
    }

    /// Riemannian gradient of `h_i` at `z`.
    fn tangent_gradient(&self, i: usize, z: &DVector<f64>) -> DVector<f64> {
        let g = &self.forms[i] * z * -2.0;
        let radial = g.dot(z);
        g - z * radial
    }
}

fn retract(z: &DVector<f64>, step: &DVector<f64>) -> DVector<f64> {
    let v = z + step;
    let n = v.norm();
    v / n
}

const SMOOTHING_SCHEDULE: [f64; 5] = [1e1, 1e2, 1e3, 1e4, 1e5];
const SMOOTH_ITERS: usize = 300;
const POLISH_ITERS: usize = 3000;
const ARMIJO: f64 = 1e-4;

/// Log-sum-exp surrogate of the max and its tangent gradient.
fn smoothed(problem: &InclinationProblem, z: &DVector<f64>, t: f64) -> (f64, DVector<f64>) {
    let h = problem.residuals(z);
    let top = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = h.iter().map(|v| (t * (v - top)).exp()).collect();
    let s: f64 = w.iter().sum();
    let value = top + s.ln() / t;
    let mut g = DVector::zeros(z.len());
    for (i, wi) in w.iter().enumerate() {
        g += problem.tangent_gradient(i, z) * (wi / s);
    }
    (value, g)
}

fn smooth_phase(problem: &InclinationProblem, mut z: DVector<f64>) -> DVector<f64> {
    for &t in &SMOOTHING_SCHEDULE {
        let mut alpha = 1.0 / t.sqrt();
        for _ in 0..SMOOTH_ITERS {
            let (f, g) = smoothed(problem, &z, t);
            let gg = g.norm_squared();
            if gg < 1e-24 {
                break;
            }
            alpha = (alpha * 2.0).min(1.0);
            let mut accepted = false;
            while alpha > 1e-16 {
                let cand = retract(&z, &(&g * -alpha));
                if smoothed(problem, &cand, t).0 <= f - ARMIJO * alpha * gg {
                    z = cand;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
    z
}

/// Minimum-norm point of the convex hull of `g`, by enumeration of the
/// affine minimizers over all subsets.
fn min_norm_hull_point(g: &[DVector<f64>]) -> DVector<f64> {
    let k = g.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1u32 << k) {
        let idx: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
        let s = idx.len();
        let mut kkt = DMatrix::zeros(s + 1, s + 1);
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                kkt[(a, b)] = g[ia].dot(&g[ib]);
            }
            kkt[(a, s)] = 1.0;
            kkt[(s, a)] = 1.0;
        }
        let mut rhs = DVector::zeros(s + 1);
        rhs[s] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if sol.iter().take(s).any(|&l| !(l >= -1e-12)) {
            continue;
        }
        let mut p = DVector::zeros(g[0].len());
        for (a, &ia) in idx.iter().enumerate() {
            p += &g[ia] * sol[a].max(0.0);
        }
        let n = p.norm();
        if best.as_ref().is_none_or(|(bn, _)| n < *bn) {
            best = Some((n, p));
        }
    }
    best.map(|(_, p)| p).unwrap_or_else(|| g[0].clone())
}

/// Descent along the negated min-norm element of the `δ`-active
/// subgradients of the true max.
fn polish_phase(problem: &InclinationProblem, mut z: DVector<f64>, tol: f64) -> (DVector<f64>, bool) {
    let mut delta = 1e-4;
    let mut alpha: f64 = 1e-2;
    for _ in 0..POLISH_ITERS {
        let h = problem.residuals(&z);
        let top = h.iter().copied().fold(0.0, f64::max);
        let active: Vec<usize> = (0..h.len()).filter(|&i| h[i] >= top - delta).collect();
        let grads: Vec<DVector<f64>> = active.iter().map(|&i| problem.tangent_gradient(i, &z)).collect();
        let dir = min_norm_hull_point(&grads);
        let dd = dir.norm_squared();
        if dd.sqrt() <= tol {
            if delta <= tol {
                return (z, true);
            }
            delta *= 0.1;
            continue;
        }
        alpha = (alpha * 4.0).min(1.0);
        let mut accepted = false;
        while alpha > 1e-18 {
            let cand = retract(&z, &(&dir * -alpha));
            if problem.max_residual(&cand) <= top - ARMIJO * alpha * dd {
                z = cand;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if delta >= 1.0 {
                return (z, false);
            }
            delta = (delta * 10.0).min(1.0);
            alpha = 1e-2;
        } else if top - problem.max_residual(&z) <= tol * tol && delta <= tol {
            return (z, true);
        }
    }
    (z, false)
}

/// Seeded multi-restart minimization of `max_i dist(f, M_i)` over the unit
/// sphere of `M⊥`; restart `r` draws its start from stream `r` of `seed`.
pub fn inclination_seeded(pi: &TargetDistribution, restarts: usize, tol: f64, seed: u64) -> Result<InclinationResult> {
    if restarts == 0 {
        return Err(Error::validation("restarts", "must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::validation("tol", format!("{tol} is not > 0")));
    }
    let n = pi.pmf().len();
    let problem = InclinationProblem::new(pi);
    let m = problem.dim();
    if m == 0 {
        return Ok(InclinationResult {
            value: 0.0,
            witness: vec![0.0; n],
            distances: vec![0.0; pi.num_coords()],
            restarts,
            tol,
            converged: true,
            degenerate: true,
        });
    }
    let runs: Vec<(f64, DVector<f64>, bool)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            if z.norm() == 0.0 {
                z[0] = 1.0;
            }
            z /= z.norm();
            let z = smooth_phase(&problem, z);
            let (z, converged) = polish_phase(&problem, z, tol);
            (problem.max_residual(&z), z, converged)
        })
        .collect();
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.0 < runs[best].0 {
            best = r;
        }
    }
    let (_, z, _) = &runs[best];
    let converged = runs.iter().any(|r| r.2);
    let u = &problem.frame * z;
    let witness: Vec<f64> = (0..n)
        .map(|s| {
            let p = pi.pmf()[s];
            if p > 0.0 { u[s] / p.sqrt() } else { 0.0 }
        })
        .collect();
    let distances: Vec<f64> = problem.residuals(z).into_iter().map(f64::sqrt).collect();
    Ok(InclinationResult {
        value: distances.iter().copied().fold(0.0, f64::max),
        witness,
        distances,
        restarts,
        tol,
        converged,
        degenerate: false,
    })
}

pub fn inclination(pi: &TargetDistribution, restarts: usize, tol: f64) -> Result<InclinationResult> {
    inclination_seeded(pi, restarts, tol, DEFAULT_INCLINATION_SEED)
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub c: f64,
    pub ell_hat: f64,
    pub d: usize,
    /// `1 − (2d/(d−1))·ℓ̂`
    pub left_bound: f64,
    /// `c − left_bound`
    pub left_slack: f64,
    pub left_holds: bool,
    /// `1 − ℓ̂²/(d−1)`
    pub right_bound: f64,
    /// `right_bound − c`; advisory only.
    pub right_slack: f64,
    pub right_holds: bool,
}

pub fn check_sandwich(c: f64, ell_hat: f64, d: usize) -> SandwichReport {
    let df = d as f64;
    let left_bound = 1.0 - 2.0 * df / (df - 1.0) * ell_hat;
    let right_bound = 1.0 - ell_hat * ell_hat / (df - 1.0);
    SandwichReport {
        c,
        ell_hat,
        d,
        left_bound,
        left_slack: c - left_bound,
        left_holds: left_bound <= c + SANDWICH_TOL,
        right_bound,
        right_slack: right_bound - c,
        right_holds: c <= right_bound + SANDWICH_TOL,
    }
}
