//! Product state spaces, target laws and the π-weighted function geometry.
//!
//! States are enumerated by a flat index with the **last coordinate varying
//! fastest**, so a pmf written as a flat list is portable between tools.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|Σ pmf − 1|` after normalization.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Inputs whose total mass is within this distance of 1 are renormalized
/// silently; anything further off is rejected.
pub const RENORMALIZE_WINDOW: f64 = 1e-6;

/// A finite product space `X_1 × … × X_d` with `|X_i| = dims[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProductSpace {
    dims: Vec<usize>,
    strides: Vec<usize>,
    total_states: usize,
}

impl ProductSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::validation(
                "dims",
                format!("need at least 2 coordinates, got {}", dims.len()),
            ));
        }
        if let Some(i) = dims.iter().position(|&n| n == 0) {
            return Err(Error::validation(format!("dims[{i}]"), "cardinality must be >= 1"));
        }
        let mut strides = vec![1usize; dims.len()];
        let mut total: usize = 1;
        for i in (0..dims.len()).rev() {
            strides[i] = total;
            total = total
                .checked_mul(dims[i])
                .ok_or_else(|| Error::validation("dims", "state count overflows usize"))?;
        }
        Ok(Self {
            dims,
            strides,
            total_states: total,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of coordinates `d`.
    pub fn num_coords(&self) -> usize {
        self.dims.len()
    }

    pub fn total_states(&self) -> usize {
        self.total_states
    }

    pub fn stride(&self, coord: usize) -> usize {
        self.strides[coord]
    }

    pub fn flat_index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.dims.len() {
            return Err(Error::Dimension(format!(
                "multi-index has {} entries, space has {} coordinates",
                multi.len(),
                self.dims.len()
            )));
        }
        let mut flat = 0;
        for (i, (&x, &n)) in multi.iter().zip(&self.dims).enumerate() {
            if x >= n {
                return Err(Error::validation(
                    format!("multi_index[{i}]"),
                    format!("value {x} out of range 0..{n}"),
                ));
            }
            flat += x * self.strides[i];
        }
        Ok(flat)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.dims.len()).map(|i| self.coordinate(flat, i)).collect()
    }

    /// Value of coordinate `coord` at flat state `flat`.
    #[inline]
    pub fn coordinate(&self, flat: usize, coord: usize) -> usize {
        (flat / self.strides[coord]) % self.dims[coord]
    }

    /// First state of the fiber through `flat` along `coord`, i.e. the state
    /// with the same `x_{-coord}` and `x_coord = 0`.
    #[inline]
    pub fn fiber_base(&self, flat: usize, coord: usize) -> usize {
        flat - self.coordinate(flat, coord) * self.strides[coord]
    }

    /// All states sharing `x_{-coord}` with `flat`, in increasing `x_coord`.
    pub fn fiber(&self, flat: usize, coord: usize) -> impl Iterator<Item = usize> + '_ {
        let base = self.fiber_base(flat, coord);
        let stride = self.strides[coord];
        (0..self.dims[coord]).map(move |k| base + k * stride)
    }

    /// Representative (`x_coord = 0`) of every fiber along `coord`.
    pub fn fiber_bases(&self, coord: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.total_states).filter(move |&s| self.coordinate(s, coord) == 0)
    }

    pub(crate) fn check_coord(&self, coord: usize) -> Result<()> {
        if coord >= self.dims.len() {
            return Err(Error::validation(
                "coordinate",
                format!("index {coord} out of range for d = {}", self.dims.len()),
            ));
        }
        Ok(())
    }
}

/// A probability mass function on a [`ProductSpace`].
///
/// Targets built from user data always have full support. The one exception
/// is a named model evaluated at a degenerate parameter (for instance the
/// perfectly correlated pair); its zero-mass states stay in the table but are
/// a π-null set, so every `L²(π)` quantity is computed on [`Self::support`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetDistribution {
    space: ProductSpace,
    pmf: Vec<f64>,
}

impl TargetDistribution {
    /// Validates a full-support pmf, renormalizing if it is within
    /// [`RENORMALIZE_WINDOW`] of total mass 1.
    pub fn new(space: ProductSpace, pmf: Vec<f64>) -> Result<Self> {
        Self::check_len(&space, &pmf)?;
        for (i, &p) in pmf.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::validation(
                    format!("pmf[{i}]"),
                    format!("mass {p} is not positive (full support required)"),
                ));
            }
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_WINDOW {
            return Err(Error::validation(
                "pmf",
                format!("total mass {total} is not 1 (tolerance {RENORMALIZE_WINDOW})"),
            ));
        }
        Ok(Self::normalized(space, pmf))
    }

    /// Normalizes strictly positive, unnormalized weights.
    pub fn from_weights(space: ProductSpace, weights: Vec<f64>) -> Result<Self> {
        Self::check_len(&space, &weights)?;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::validation(
                    format!("weights[{i}]"),
                    format!("weight {w} is not positive"),
                ));
            }
        }
        Ok(Self::normalized(space, weights))
    }

    /// Like [`Self::from_weights`] but keeps zero weights as π-null states.
    pub(crate) fn from_nonnegative_weights(space: ProductSpace, weights: Vec<f64>) -> Result<Self> {
        Self::check_len(&space, &weights)?;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::validation(format!("weights[{i}]"), format!("weight {w} is negative")));
            }
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::validation("weights", "all weights are zero"));
        }
        Ok(Self::normalized(space, weights))
    }

    fn check_len(space: &ProductSpace, values: &[f64]) -> Result<()> {
        if values.len() != space.total_states() {
            return Err(Error::Dimension(format!(
                "pmf has {} entries, space has {} states",
                values.len(),
                space.total_states()
            )));
        }
        Ok(())
    }

    fn normalized(space: ProductSpace, mut pmf: Vec<f64>) -> Self {
        let total: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= total);
        Self { space, pmf }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn num_coords(&self) -> usize {
        self.space.num_coords()
    }

    /// States with positive mass, in flat order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.pmf.len()).filter(|&s| self.pmf[s] > 0.0).collect()
    }

    pub fn has_full_support(&self) -> bool {
        self.pmf.iter().all(|&p| p > 0.0)
    }

    /// Product of marginal pmfs; `marginals[i]` must have `dims[i]` entries.
    pub fn independent(marginals: &[Vec<f64>]) -> Result<Self> {
        let space = ProductSpace::new(marginals.iter().map(Vec::len).collect())?;
        let weights = (0..space.total_states())
            .map(|s| {
                marginals
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m[space.coordinate(s, i)])
                    .product()
            })
            .collect();
        Self::from_weights(space, weights)
    }

    pub fn uniform(dims: Vec<usize>) -> Result<Self> {
        let space = ProductSpace::new(dims)?;
        let n = space.total_states();
        Self::from_weights(space, vec![1.0; n])
    }

    /// Equicorrelated binary family on `{0,1}^d`.
    ///
    /// Unnormalized weight `1 − ε` on the two constant configurations and
    /// `ε^D(x)` elsewhere, where `D(x) = k(d − k)` counts disagreeing pairs of
    /// a configuration with `k` ones. For `d = 2` this is
    /// `π(0,0) = π(1,1) = (1 − ε)/2`, `π(0,1) = π(1,0) = ε/2`.
    /// `ε ∈ {0, 1}` yields a target without full support.
    pub fn equicorrelated_binary(d: usize, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) || !epsilon.is_finite() {
            return Err(Error::validation("epsilon", format!("{epsilon} not in [0, 1]")));
        }
        let space = ProductSpace::new(vec![2; d])?;
        let weights = (0..space.total_states())
            .map(|s| {
                let ones = (0..d).filter(|&i| space.coordinate(s, i) == 1).count();
                if ones == 0 || ones == d {
                    1.0 - epsilon
                } else {
                    epsilon.powi((ones * (d - ones)) as i32)
                }
            })
            .collect();
        Self::from_nonnegative_weights(space, weights)
    }

    /// `E_π[f]` for a plain value table.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.pmf).map(|(v, p)| v * p).sum()
    }

    /// `Var_π(f)`.
    pub fn variance(&self, values: &[f64]) -> f64 {
        let mean = self.expectation(values);
        values.iter().zip(&self.pmf).map(|(v, p)| (v - mean).powi(2) * p).sum()
    }
}

/// Reproducible symmetric-Dirichlet draw of a full-support target.
pub fn random_target(seed: u64, dims: &[usize], concentration: f64) -> Result<TargetDistribution> {
    if !(concentration > 0.0) || !concentration.is_finite() {
        return Err(Error::validation("concentration", format!("{concentration} must be > 0")));
    }
    let space = ProductSpace::new(dims.to_vec())?;
    let gamma = Gamma::new(concentration, 1.0).map_err(|e| Error::validation("concentration", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..space.total_states())
        .map(|_| gamma.sample(&mut rng).max(f64::MIN_POSITIVE))
        .collect();
    TargetDistribution::from_weights(space, weights)
}

/// A real function on the states of a product space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiFunction {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl PiFunction {
    pub fn new(space: &ProductSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.total_states() {
            return Err(Error::Dimension(format!(
                "function has {} values, space has {} states",
                values.len(),
                space.total_states()
            )));
        }
        Ok(Self {
            dims: space.dims().to_vec(),
            values,
        })
    }

    pub fn constant(space: &ProductSpace, c: f64) -> Self {
        Self {
            dims: space.dims().to_vec(),
            values: vec![c; space.total_states()],
        }
    }

    /// `f(x) = g(x)` evaluated on every multi-index.
    pub fn from_fn(space: &ProductSpace, g: impl Fn(&[usize]) -> f64) -> Self {
        let values = (0..space.total_states()).map(|s| g(&space.multi_index(s))).collect();
        Self {
            dims: space.dims().to_vec(),
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn check_space(&self, pi: &TargetDistribution) -> Result<()> {
        if self.dims != pi.space().dims() {
            return Err(Error::Dimension(format!(
                "function lives on dims {:?}, target on {:?}",
                self.dims,
                pi.space().dims()
            )));
        }
        Ok(())
    }
}

/// `⟨f, g⟩_π = Σ_x f(x) g(x) π(x)`.
pub fn inner_product(f: &PiFunction, g: &PiFunction, pi: &TargetDistribution) -> Result<f64> {
    f.check_space(pi)?;
    g.check_space(pi)?;
    Ok(weighted_dot(&f.values, &g.values, pi.pmf()))
}

/// `‖f‖_π`.
pub fn norm(f: &PiFunction, pi: &TargetDistribution) -> Result<f64> {
    inner_product(f, f, pi).map(f64::sqrt)
}

pub(crate) fn weighted_dot(f: &[f64], g: &[f64], pmf: &[f64]) -> f64 {
    f.iter().zip(g).zip(pmf).map(|((a, b), p)| a * b * p).sum()
}

/// `Π f`: the constant function `π(f)`.
pub fn mean_project(f: &PiFunction, pi: &TargetDistribution) -> Result<PiFunction> {
    f.check_space(pi)?;
    Ok(PiFunction::constant(pi.space(), pi.expectation(&f.values)))
}

/// `P_i f (x) = E_π[f | x_{-i}]`, the orthogonal projection onto `M_i`.
///
/// On a fiber of zero π-mass the conditional law is undefined; the plain
/// average is used there, which is irrelevant in `L²(π)`.
pub fn conditional_mean(f: &PiFunction, coord: usize, pi: &TargetDistribution) -> Result<PiFunction> {
    f.check_space(pi)?;
    pi.space().check_coord(coord)?;
    let mut out = vec![0.0; f.values.len()];
    conditional_mean_into(&f.values, coord, pi, &mut out);
    Ok(PiFunction {
        dims: f.dims.clone(),
        values: out,
    })
}

/// Allocation-free kernel of [`conditional_mean`]; `out` may not alias `f`.
pub(crate) fn conditional_mean_into(f: &[f64], coord: usize, pi: &TargetDistribution, out: &mut [f64]) {
    let space = pi.space();
    let pmf = pi.pmf();
    let n = space.dims()[coord];
    let stride = space.stride(coord);
    for base in space.fiber_bases(coord) {
        let (mut mass, mut acc) = (0.0, 0.0);
        for k in 0..n {
            let s = base + k * stride;
            mass += pmf[s];
            acc += pmf[s] * f[s];
        }
        let value = if mass > 0.0 {
            acc / mass
        } else {
            (0..n).map(|k| f[base + k * stride]).sum::<f64>() / n as f64
        };
        for k in 0..n {
            out[base + k * stride] = value;
        }
    }
}

// ---------------------------------------------------------------------------
// Target spec documents

/// Parsed form of a target spec document.
///
/// ```json
/// {"dims": [2, 2], "pmf": [0.25, 0.25, 0.25, 0.25]}
/// {"dims": [2, 2], "model": {"name": "equicorrelated_binary", "epsilon": 0.25}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
}

/// Named target families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// See [`TargetDistribution::equicorrelated_binary`]; all dims must be 2.
    EquicorrelatedBinary { epsilon: f64 },
    /// Uniform law on the product space.
    Uniform,
    /// Symmetric Dirichlet draw, see [`random_target`].
    RandomDirichlet {
        seed: u64,
        #[serde(default = "default_concentration")]
        concentration: f64,
    },
}

fn default_concentration() -> f64 {
    1.0
}

impl TargetSpec {
    pub fn build(&self) -> Result<TargetDistribution> {
        match (&self.pmf, &self.model) {
            (Some(pmf), None) => TargetDistribution::new(ProductSpace::new(self.dims.clone())?, pmf.clone()),
            (None, Some(model)) => match model {
                ModelSpec::EquicorrelatedBinary { epsilon } => {
                    if let Some(i) = self.dims.iter().position(|&n| n != 2) {
                        return Err(Error::validation(
                            format!("dims[{i}]"),
                            "equicorrelated_binary requires binary coordinates",
                        ));
                    }
                    TargetDistribution::equicorrelated_binary(self.dims.len(), *epsilon)
                        .map_err(|e| relocate(e, "model.epsilon"))
                }
                ModelSpec::Uniform => TargetDistribution::uniform(self.dims.clone()),
                ModelSpec::RandomDirichlet { seed, concentration } => {
                    random_target(*seed, &self.dims, *concentration)
                }
            },
            _ => Err(Error::validation("(root)", "exactly one of `pmf` or `model` is required")),
        }
    }
}

fn relocate(err: Error, location: &str) -> Error {
    match err {
        Error::Validation { message, .. } => Error::validation(location, message),
        other => other,
    }
}

/// Parses a JSON target spec document and builds the distribution.
pub fn parse_target(spec_text: &str) -> Result<TargetDistribution> {
    let spec: TargetSpec = serde_json::from_str(spec_text).map_err(|e| {
        Error::validation(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    spec.build()
}
