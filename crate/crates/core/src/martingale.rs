//! Test (super)martingales as streaming per-path state machines.
//!
//! All multiplicative processes live in log space so that horizons of 1e5+
//! steps neither underflow nor overflow. `1/M` is the H-value: a p-value
//! that stays valid at any stopping time.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trajectory's live statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub t: u64,
    log_m: f64,
    log_s: f64,
    /// Cumulative declared variance.
    pub v: f64,
    /// Running sum of raw increments.
    pub z_sum: f64,
    pub rng_seed: u64,
}

impl PathState {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            t: 0,
            log_m: 0.0,
            log_s: 0.0,
            v: 0.0,
            z_sum: 0.0,
            rng_seed,
        }
    }

    pub fn m(&self) -> f64 {
        self.log_m.exp()
    }

    pub fn s(&self) -> f64 {
        self.log_s.exp()
    }

    pub fn log_m(&self) -> f64 {
        self.log_m
    }

    pub fn log_s(&self) -> f64 {
        self.log_s
    }

    /// `M_t / S_t`, exact in log space.
    pub fn ratio_to_max(&self) -> f64 {
        (self.log_m - self.log_s).exp()
    }

    pub fn at_record(&self) -> bool {
        self.log_m == self.log_s
    }

    pub fn h_value(&self) -> f64 {
        (-self.log_m).exp()
    }

    fn advance(mut self, log_m: f64, z: f64, variance: f64) -> Self {
        self.t += 1;
        self.log_m = log_m;
        self.log_s = self.log_s.max(log_m);
        self.z_sum += z;
        self.v += variance;
        self
    }

    /// Multiplies `M` by `exp(λz − λ²/2)`.
    pub fn step_gaussian_exp(self, lambda: f64, z: f64) -> Self {
        let log_m = self.log_m + lambda * z - 0.5 * lambda * lambda;
        self.advance(log_m, z, 1.0)
    }

    /// Sets `M` to the mixture `Σ_k w_k exp(λ_k Z − λ_k² V / 2)` after adding
    /// increment `z` with declared sub-Gaussian variance `variance`.
    pub fn step_mixture(self, grid: &MixtureGrid, z: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::Domain {
                what: "increment variance",
                value: variance,
            });
        }
        let z_sum = self.z_sum + z;
        let v = self.v + variance;
        let log_w = grid.log_value(z_sum, v);
        Ok(self.advance(log_w, z, variance))
    }

    /// Multiplies `M` by the likelihood ratio `f(X)/g(X)`.
    pub fn step_likelihood_ratio(self, f_density: f64, g_density: f64) -> Result<Self> {
        if !(g_density > 0.0) {
            return Err(Error::ZeroDensity);
        }
        if !(f_density >= 0.0) {
            return Err(Error::Domain {
                what: "alternative density",
                value: f_density,
            });
        }
        let log_m = self.log_m + f_density.ln() - g_density.ln();
        Ok(self.advance(log_m, 0.0, 0.0))
    }
}

/// `1/W`, with `+∞` for `W = 0`.
pub fn h_value(w: f64) -> f64 {
    if w == 0.0 {
        f64::INFINITY
    } else {
        1.0 / w
    }
}

/// Best fixed-time Gaussian p-value `exp(−Z²/(2t))`.
pub fn fixed_time_pvalue(z_sum: f64, t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::Domain {
            what: "fixed-time p-value step count",
            value: 0.0,
        });
    }
    Ok((-z_sum * z_sum / (2.0 * t as f64)).exp())
}

/// Discrete mixing distribution over exponential-martingale rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct MixtureGrid {
    lambdas: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    lambdas: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawGrid> for MixtureGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        Self::new(raw.lambdas, raw.weights)
    }
}

impl From<MixtureGrid> for RawGrid {
    fn from(g: MixtureGrid) -> Self {
        RawGrid {
            lambdas: g.lambdas,
            weights: g.weights,
        }
    }
}

impl Default for MixtureGrid {
    fn default() -> Self {
        Self::geometric(4.0, 1.1, 100, 1.4).expect("default grid is valid")
    }
}

impl MixtureGrid {
    pub fn new(lambdas: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() || lambdas.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "mixture grid needs matching nonempty arrays, got {} lambdas and {} weights",
                lambdas.len(),
                weights.len()
            )));
        }
        if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidParameter("lambdas must be positive".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {total}, not 1"
            )));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            lambdas,
            weights,
            log_weights,
        })
    }

    /// Geometric grid `λ_k = λ_max η^(−k−1/2)`, `k < count`, with masses
    /// `∝ 1/ln^s(e η^k)`: the cell masses of the density
    /// `∝ 1/(λ ln^s(e λ_max/λ))` on this grid.
    pub fn geometric(lambda_max: f64, eta: f64, count: usize, s: f64) -> Result<Self> {
        if !(lambda_max > 0.0 && eta > 1.0 && count > 0 && s > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "geometric grid lambda_max={lambda_max} eta={eta} count={count} s={s}"
            )));
        }
        let lambdas: Vec<f64> = (0..count)
            .map(|k| lambda_max * eta.powf(-(k as f64) - 0.5))
            .collect();
        let raw: Vec<f64> = (0..count)
            .map(|k| (1.0 + k as f64 * eta.ln()).powf(-s))
            .collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        Self::new(lambdas, weights)
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ln Σ_k w_k exp(λ_k z − λ_k² v / 2)` via log-sum-exp.
    pub fn log_value(&self, z_sum: f64, v: f64) -> f64 {
        let exponent = |l: f64, lw: f64| lw + l * z_sum - 0.5 * l * l * v;
        let top = self
            .lambdas
            .iter()
            .zip(&self.log_weights)
            .map(|(&l, &lw)| exponent(l, lw))
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self
            .lambdas
            .iter()
            .zip(&self.log_weights)
            .map(|(&l, &lw)| (exponent(l, lw) - top).exp())
            .sum();
        top + sum.ln()
    }
}

/// Which martingale drives a simulated path. All are driven by i.i.d. null
/// data, so each is a nonnegative (super)martingale started at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessSpec {
    /// `exp(λ Z_t − λ² t/2)` over standard normal increments.
    GaussianExp { lambda: f64 },
    /// Mixture over the grid (default grid when absent), standard normal increments.
    Mixture {
        #[serde(default)]
        grid: Option<MixtureGrid>,
    },
    /// Likelihood ratio of `Beta(a, 1)` against a `Uniform(0, 1)` null.
    BetaVsUniform { a: f64 },
}

impl Default for ProcessSpec {
    fn default() -> Self {
        Self::GaussianExp { lambda: 1.0 }
    }
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GaussianExp { lambda } if !(lambda.is_finite() && *lambda != 0.0) => Err(
                Error::InvalidConfig(format!("gaussian_exp lambda = {lambda}")),
            ),
            Self::BetaVsUniform { a } if !(a.is_finite() && *a > 0.0) => {
                Err(Error::InvalidConfig(format!("beta_vs_uniform a = {a}")))
            }
            _ => Ok(()),
        }
    }

    /// Resolved grid for mixture processes.
    pub fn grid(&self) -> Option<MixtureGrid> {
        match self {
            Self::Mixture { grid } => Some(grid.clone().unwrap_or_default()),
            _ => None,
        }
    }

    /// Draws one observation and advances the state. `grid` must be the
    /// resolved grid for mixture processes.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: PathState,
        grid: Option<&MixtureGrid>,
        rng: &mut R,
    ) -> PathState {
        match *self {
            Self::GaussianExp { lambda } => {
                let z: f64 = rng.sample(StandardNormal);
                state.step_gaussian_exp(lambda, z)
            }
            Self::Mixture { .. } => {
                let z: f64 = rng.sample(StandardNormal);
                let grid = grid.expect("mixture process needs a resolved grid");
                state.step_mixture(grid, z, 1.0).expect("unit variance")
            }
            Self::BetaVsUniform { a } => {
                let x = crate::rng::open_uniform(rng);
                let f = a * x.powf(a - 1.0);
                state.step_likelihood_ratio(f, 1.0).expect("uniform density")
            }
        }
    }
}
