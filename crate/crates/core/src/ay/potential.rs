//! Nondecreasing scores `g` and their future-loss potentials
//!
//! ```text
//!     𝒢(s)  = ∫_0^1 g(s/u) du          (concave, nondecreasing)
//!     𝒢′(s) = ∫_s^∞ (g(x) − g(s)) / x² dx
//! ```
//!
//! related by `g(s) = 𝒢(s) − s 𝒢′(s)`.

use serde::{Deserialize, Serialize};

use super::pchip::MonotoneTable;
use crate::dist::DistributionModel;
use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, adaptive_simpson_graded};

/// Width of the left end of `[0, 1]` integrated in closed form for the
/// singular scores.
const SINGULAR_SPLIT: f64 = 1e-6;
const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSpec {
    Log,
    Power(f64),
    TailQuantileOf(DistributionModel),
    Table(Vec<[f64; 2]>),
}

/// JSON form: `{"g": "log" | {"power": a} | {"tail_quantile_of": μ} | {"table": [[x, g], ...]}}`
/// with an optional `"mode"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub g: ScoreSpec,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq)]
enum Score {
    Log,
    Power(f64),
    TailQuantileOf(DistributionModel),
    Table(MonotoneTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialSpec", into = "PotentialSpec")]
pub struct Potential {
    score: Score,
    spec: ScoreSpec,
    mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialEval {
    pub g: f64,
    pub value: f64,
    pub slope: f64,
}

impl TryFrom<PotentialSpec> for Potential {
    type Error = Error;

    fn try_from(spec: PotentialSpec) -> Result<Self> {
        Self::new(spec.g, spec.mode)
    }
}

impl From<Potential> for PotentialSpec {
    fn from(p: Potential) -> Self {
        PotentialSpec {
            g: p.spec,
            mode: p.mode,
        }
    }
}

impl Potential {
    /// Validates integrability of `g(x)/x²` away from zero up front.
    pub fn new(spec: ScoreSpec, mode: Mode) -> Result<Self> {
        let score = match &spec {
            ScoreSpec::Log => Score::Log,
            ScoreSpec::Power(a) => {
                if !(a.is_finite() && *a >= 0.0 && *a < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power potential needs 0 <= a < 1, got {a}"
                    )));
                }
                Score::Power(*a)
            }
            ScoreSpec::TailQuantileOf(mu) => {
                mu.mean()?;
                Score::TailQuantileOf(mu.clone())
            }
            ScoreSpec::Table(points) => Score::Table(MonotoneTable::new(points)?),
        };
        Ok(Self { score, spec, mode })
    }

    pub fn log() -> Self {
        Self::new(ScoreSpec::Log, Mode::ClosedForm).expect("valid")
    }

    pub fn power(a: f64) -> Result<Self> {
        Self::new(ScoreSpec::Power(a), Mode::ClosedForm)
    }

    pub fn tail_quantile_of(mu: DistributionModel) -> Result<Self> {
        Self::new(ScoreSpec::TailQuantileOf(mu), Mode::ClosedForm)
    }

    pub fn table(points: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(ScoreSpec::Table(points), Mode::Quadrature)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> Mode {
        match self.score {
            Score::Table(_) => Mode::Quadrature,
            _ => self.mode,
        }
    }

    pub fn spec(&self) -> &ScoreSpec {
        &self.spec
    }

    /// The distribution behind a tail-quantile potential.
    pub fn calibration_law(&self) -> Option<&DistributionModel> {
        match &self.score {
            Score::TailQuantileOf(mu) => Some(mu),
            _ => None,
        }
    }

    /// Smallest argument the potential is defined at.
    pub fn domain_min(&self) -> f64 {
        match self.score {
            Score::TailQuantileOf(_) => 1.0,
            _ => 0.0,
        }
    }

    pub fn g(&self, s: f64) -> f64 {
        match &self.score {
            Score::Log => s.ln(),
            Score::Power(a) => s.powf(*a),
            Score::TailQuantileOf(mu) => mu
                .tail_quantile((1.0 / s).min(1.0))
                .expect("argument within domain"),
            Score::Table(t) => t.eval(s),
        }
    }

    /// `𝒢(s)`.
    pub fn value(&self, s: f64) -> f64 {
        match self.mode() {
            Mode::ClosedForm => self.value_closed(s),
            Mode::Quadrature => self.value_quad(s),
        }
    }

    /// `𝒢′(s)`.
    pub fn slope(&self, s: f64) -> f64 {
        match self.mode() {
            Mode::ClosedForm => self.slope_closed(s),
            Mode::Quadrature => self.slope_quad(s),
        }
    }

    /// `∫_s^∞ g(x)/x² dx = 𝒢(s)/s`.
    pub fn tail_integral(&self, s: f64) -> f64 {
        self.value(s) / s
    }

    pub fn eval(&self, s: f64) -> Result<PotentialEval> {
        let inside = match self.score {
            Score::TailQuantileOf(_) => s >= 1.0,
            _ => s > 0.0,
        };
        if !inside || !s.is_finite() {
            return Err(Error::Domain {
                what: "potential argument",
                value: s,
            });
        }
        Ok(PotentialEval {
            g: self.g(s),
            value: self.value(s),
            slope: self.slope(s),
        })
    }

    fn value_closed(&self, s: f64) -> f64 {
        match &self.score {
            Score::Log => s.ln() + 1.0,
            Score::Power(a) => s.powf(*a) / (1.0 - a),
            Score::TailQuantileOf(mu) => mu
                .superquantile((1.0 / s).min(1.0))
                .expect("checked integrable at construction"),
            Score::Table(_) => self.value_quad(s),
        }
    }

    fn slope_closed(&self, s: f64) -> f64 {
        match &self.score {
            Score::Log => 1.0 / s,
            Score::Power(a) => a * s.powf(a - 1.0) / (1.0 - a),
            // d/ds SQ(1/s) = (SQ(1/s) − q(1/s)) / s
            Score::TailQuantileOf(_) => (self.value_closed(s) - self.g(s)) / s,
            Score::Table(_) => self.slope_quad(s),
        }
    }

    /// `∫_0^1 g(s/u) du` numerically.
    fn value_quad(&self, s: f64) -> f64 {
        self.integrate_score(s, 0.0)
    }

    /// `(1/s) ∫_0^1 (g(s/u) − g(s)) du` numerically.
    fn slope_quad(&self, s: f64) -> f64 {
        self.integrate_score(s, self.g(s)) / s
    }

    /// `∫_0^1 (g(s/u) − shift) du`.
    fn integrate_score(&self, s: f64, shift: f64) -> f64 {
        match &self.score {
            Score::Log => {
                let e = SINGULAR_SPLIT;
                // ∫_0^e (ln s − ln u) du = e ln s − e ln e + e
                let head = e * s.ln() - e * e.ln() + e - shift * e;
                let body = adaptive_simpson_graded(&|u: f64| s.ln() - u.ln() - shift, e, 1.0, QUAD_TOL);
                head + body
            }
            Score::Power(a) => {
                let e = SINGULAR_SPLIT;
                let head = s.powf(*a) * e.powf(1.0 - a) / (1.0 - a) - shift * e;
                let body =
                    adaptive_simpson_graded(&|u: f64| (s / u).powf(*a) - shift, e, 1.0, QUAD_TOL);
                head + body
            }
            Score::TailQuantileOf(mu) => {
                let sq = mu
                    .superquantile_by_quadrature((1.0 / s).min(1.0))
                    .expect("checked integrable at construction");
                sq - shift
            }
            Score::Table(t) => {
                // g(s/u) is flat at the last value for u <= s / x_last and at
                // the first value for u >= s / x_first.
                let (x_last, g_last) = t.last();
                let mut cuts: Vec<f64> = t
                    .knots()
                    .iter()
                    .map(|&x| s / x)
                    .filter(|&u| u > 0.0 && u < 1.0)
                    .collect();
                cuts.push(1.0);
                cuts.sort_by(f64::total_cmp);
                let start = (s / x_last).min(1.0);
                let head = start * (g_last - shift);
                let mut body = 0.0;
                let mut lo = start;
                for &hi in cuts.iter().filter(|&&c| c > start) {
                    body += adaptive_simpson(&|u: f64| t.eval(s / u) - shift, lo, hi, QUAD_TOL);
                    lo = hi;
                }
                head + body
            }
        }
    }
}
