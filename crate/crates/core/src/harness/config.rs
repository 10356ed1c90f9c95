use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ay::Potential;
use crate::dist::DistributionModel;
use crate::error::{Error, Result};
use crate::martingale::{MixtureGrid, ProcessSpec};

/// How a peeker decides when to stop and report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeekStrategy {
    /// Stop the first time the p-value is at most `α`.
    FirstCrossing(f64),
    /// Look at every step up to `T` and report the smallest p-value seen.
    MinOverHorizon(u64),
    /// Report the p-value at step `t` only.
    FixedTime(u64),
    /// Stop at the first step whose p-value is a strict new running minimum.
    StopAtNewMin,
}

impl PeekStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::FirstCrossing(a) if !(a > 0.0 && a < 1.0) => {
                Err(Error::InvalidConfig(format!("first_crossing alpha = {a}")))
            }
            Self::MinOverHorizon(0) | Self::FixedTime(0) => {
                Err(Error::InvalidConfig(format!("{self} needs a step count >= 1")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PeekStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FirstCrossing(a) => write!(f, "first_crossing({a})"),
            Self::MinOverHorizon(t) => write!(f, "min_over_horizon({t})"),
            Self::FixedTime(t) => write!(f, "fixed_time({t})"),
            Self::StopAtNewMin => write!(f, "stop_at_new_min"),
        }
    }
}

/// The p-value process a peeker looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeekProcess {
    /// Fixed-time Gaussian p-value `exp(−Z_t²/2t)` read at every step.
    NaiveZ,
    /// `1/W_t` for the mixture martingale `W`.
    HValue,
    /// `R_t = min_{s≤t} M_s/S_s` of the configured process, reported no
    /// later than the estimated last record time.
    RStatistic,
}

impl fmt::Display for PeekProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NaiveZ => "naive_z",
            Self::HValue => "h_value",
            Self::RStatistic => "r_statistic",
        })
    }
}

/// Everything a run depends on. Unset fields take their defaults, and the
/// whole config is echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub n_paths: usize,
    pub horizon: u64,
    /// Martingale behind extrema, AY and R statistics.
    pub process: ProcessSpec,
    pub peek_processes: Vec<PeekProcess>,
    pub strategies: Vec<PeekStrategy>,
    pub alpha_levels: Vec<f64>,
    /// Grid of the H-value mixture; the default grid when absent.
    pub mixture: Option<MixtureGrid>,
    pub potential: Potential,
    pub mu: DistributionModel,
    /// `τ_F` counts as resolved once `M/S` at the horizon is below this.
    pub decay_threshold: f64,
    /// Failure probability of each DKW band.
    pub delta: f64,
    /// Number of leading paths written step by step to `paths.csv`.
    pub trace_paths: usize,
    /// Where reports go. Not echoed into reports, so reruns into different
    /// directories stay byte-identical.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 20_240_601,
            n_paths: 100_000,
            horizon: 10_000,
            process: ProcessSpec::default(),
            peek_processes: vec![PeekProcess::NaiveZ, PeekProcess::HValue, PeekProcess::RStatistic],
            strategies: vec![
                PeekStrategy::FixedTime(100),
                PeekStrategy::FirstCrossing(0.05),
                PeekStrategy::MinOverHorizon(100),
                PeekStrategy::MinOverHorizon(1_000),
                PeekStrategy::MinOverHorizon(10_000),
                PeekStrategy::StopAtNewMin,
            ],
            alpha_levels: vec![0.1, 0.05, 0.01],
            mixture: None,
            potential: Potential::log(),
            mu: DistributionModel::Uniform01,
            decay_threshold: 1e-6,
            delta: 0.01,
            trace_paths: 10,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rejects configs no run could use. A zero horizon is allowed: every
    /// check on it is vacuous.
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be at least 1".into()));
        }
        self.process.validate()?;
        for s in &self.strategies {
            s.validate()?;
        }
        for &a in &self.alpha_levels {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidConfig(format!("alpha level {a} outside (0, 1)")));
            }
        }
        if !(self.decay_threshold > 0.0 && self.decay_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "decay_threshold = {}",
                self.decay_threshold
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta = {}", self.delta)));
        }
        Ok(())
    }

    pub fn mixture_grid(&self) -> MixtureGrid {
        self.mixture.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_is_the_default() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = ExperimentConfig {
            process: ProcessSpec::BetaVsUniform { a: 0.5 },
            potential: Potential::power(0.5).unwrap(),
            mu: DistributionModel::pareto(2.0).unwrap(),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn strategy_json_shapes() {
        let s: Vec<PeekStrategy> = serde_json::from_str(
            r#"[{"first_crossing":0.05},{"min_over_horizon":100},{"fixed_time":7},"stop_at_new_min"]"#,
        )
        .unwrap();
        assert_eq!(
            s,
            vec![
                PeekStrategy::FirstCrossing(0.05),
                PeekStrategy::MinOverHorizon(100),
                PeekStrategy::FixedTime(7),
                PeekStrategy::StopAtNewMin
            ]
        );
        assert_eq!(s[0].to_string(), "first_crossing(0.05)");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ExperimentConfig { n_paths: 0, ..Default::default() },
            ExperimentConfig { strategies: vec![PeekStrategy::FirstCrossing(1.0)], ..Default::default() },
            ExperimentConfig { strategies: vec![PeekStrategy::FixedTime(0)], ..Default::default() },
            ExperimentConfig { alpha_levels: vec![0.0], ..Default::default() },
            ExperimentConfig { process: ProcessSpec::GaussianExp { lambda: 0.0 }, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"n_path": 3}"#).is_err());
        let zero = ExperimentConfig { horizon: 0, ..Default::default() };
        zero.validate().unwrap();
    }
}
