//! Peeking experiments: every path is watched by every strategy through
//! every p-value process, and the reported p-values are tallied.
//!
//! The naive and H-value p-values only reach a new minimum when
//! `Z_t²/t` (naive) or `Z_t` (H-value, all mixture rates positive) reaches a
//! new maximum, because `exp(λz − λ²t/2)` grows in `z` and shrinks in `t`.
//! They are therefore evaluated only at those record steps, at fixed-time
//! checkpoints and at the horizon.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PeekProcess, PeekStrategy};
use super::sim::PathSim;
use crate::error::{Error, Result};
use crate::extrema::FinalMaxTracker;
use crate::martingale::MixtureGrid;
use crate::rng::derive_seed;

/// One (path, process, strategy) outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeekRunRecord {
    pub path: usize,
    pub process: PeekProcess,
    pub strategy: PeekStrategy,
    /// `None` when the strategy never stopped before the horizon.
    pub stop_time: Option<u64>,
    /// The stopped p-value, or the horizon value for censored runs.
    pub reported_p: f64,
    /// R-statistic runs whose last record time could not be located.
    pub excluded: bool,
    pub tau_f: Option<u64>,
    pub rho_f: Option<u64>,
}

/// End-of-path statistics of the configured martingale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path: usize,
    pub seed: u64,
    pub log_m_final: f64,
    pub log_s_final: f64,
    pub final_ratio: f64,
    pub tau_f: Option<u64>,
    pub rho_f: Option<u64>,
    pub r_at_tau_f: f64,
    pub z_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeIRow {
    pub process: PeekProcess,
    pub strategy: String,
    pub alpha: f64,
    /// Records counted (excluded R-statistic runs are left out).
    pub n: usize,
    pub rejections: usize,
    pub rate: f64,
    pub stderr: f64,
    pub stopped: usize,
    pub censored: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeekSummary {
    pub n_paths: usize,
    pub horizon: u64,
    pub n_records: usize,
    /// Records equal paths × strategies × processes, and every
    /// (process, strategy) pair has stopped + censored = paths.
    pub accounting_ok: bool,
    pub type_i: Vec<TypeIRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeekOutcome {
    pub records: Vec<PeekRunRecord>,
    pub paths: Vec<PathSummary>,
    pub summary: PeekSummary,
}

impl PeekOutcome {
    /// Reported p-values of one (process, strategy) pair, excluded runs dropped.
    pub fn reported(&self, process: PeekProcess, strategy: PeekStrategy) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.process == process && r.strategy == strategy && !r.excluded)
            .map(|r| r.reported_p)
            .collect()
    }

    pub fn excluded(&self, process: PeekProcess, strategy: PeekStrategy) -> usize {
        self.records
            .iter()
            .filter(|r| r.process == process && r.strategy == strategy && r.excluded)
            .count()
    }

    pub fn row(&self, process: PeekProcess, strategy: PeekStrategy, alpha: f64) -> Option<&TypeIRow> {
        let label = strategy.to_string();
        self.summary
            .type_i
            .iter()
            .find(|r| r.process == process && r.strategy == label && r.alpha == alpha)
    }
}

#[derive(Debug, Clone, Copy)]
struct Tracker {
    strategy: PeekStrategy,
    end: u64,
    best_t: u64,
    best_p: f64,
    stop: Option<(u64, f64)>,
}

impl Tracker {
    fn new(strategy: PeekStrategy, horizon: u64) -> Self {
        let end = match strategy {
            PeekStrategy::MinOverHorizon(t) => t.min(horizon),
            PeekStrategy::FixedTime(t) => t,
            _ => horizon,
        };
        Self {
            strategy,
            end,
            best_t: 0,
            best_p: 1.0,
            stop: None,
        }
    }

    /// `p = None` promises that step `t` is not a strict new minimum.
    fn observe(&mut self, t: u64, p: Option<f64>) {
        if self.stop.is_some() {
            return;
        }
        match self.strategy {
            PeekStrategy::FirstCrossing(alpha) => {
                if let Some(p) = p.filter(|&p| p <= alpha) {
                    self.stop = Some((t, p));
                }
            }
            PeekStrategy::MinOverHorizon(_) => {
                if let Some(p) = p.filter(|&p| p < self.best_p) {
                    self.best_t = t;
                    self.best_p = p;
                }
                if t == self.end {
                    self.stop = Some((self.best_t, self.best_p));
                }
            }
            PeekStrategy::FixedTime(at) => {
                if t == at {
                    self.stop = Some((t, p.expect("value supplied at checkpoints")));
                }
            }
            PeekStrategy::StopAtNewMin => {
                if let Some(p) = p.filter(|&p| p < self.best_p) {
                    self.stop = Some((t, p));
                }
            }
        }
    }

    fn finish(&self, p_horizon: f64) -> (Option<u64>, f64) {
        match self.stop {
            Some((t, p)) => (Some(t), p),
            None => (None, p_horizon),
        }
    }
}

struct Lane {
    process: PeekProcess,
    trackers: Vec<Tracker>,
}

impl Lane {
    fn observe(&mut self, t: u64, p: Option<f64>) {
        for tr in &mut self.trackers {
            tr.observe(t, p);
        }
    }
}

fn checkpoints(strategies: &[PeekStrategy], horizon: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = strategies
        .iter()
        .filter_map(|s| match *s {
            PeekStrategy::FixedTime(t) | PeekStrategy::MinOverHorizon(t) => Some(t.min(horizon)),
            _ => None,
        })
        .chain(std::iter::once(horizon))
        .filter(|&t| t >= 1 && t <= horizon)
        .collect();
    cps.sort_unstable();
    cps.dedup();
    cps
}

fn naive_p(z: f64, t: u64) -> f64 {
    (-0.5 * z * z / t as f64).exp()
}

fn h_p(grid: &MixtureGrid, z: f64, t: u64) -> f64 {
    (-grid.log_value(z, t as f64)).exp().min(1.0)
}

struct PathResult {
    records: Vec<PeekRunRecord>,
    summary: PathSummary,
}

fn run_path(cfg: &ExperimentConfig, process_grid: Option<&MixtureGrid>, h_grid: &MixtureGrid, cps: &[u64], index: usize) -> PathResult {
    let horizon = cfg.horizon;
    let lazy_h = h_grid.lambdas().iter().all(|&l| l > 0.0);
    let mut sim = PathSim::new(&cfg.process, process_grid, cfg.master_seed, index as u64);
    let mut lanes: Vec<Lane> = cfg
        .peek_processes
        .iter()
        .map(|&process| Lane {
            process,
            trackers: cfg.strategies.iter().map(|&s| Tracker::new(s, horizon)).collect(),
        })
        .collect();
    let mut tracker = FinalMaxTracker::new();
    let mut max_key = 0.0_f64;
    let mut max_z = 0.0_f64;
    let mut next_cp = 0usize;
    for t in 1..=horizon {
        sim.step();
        let z = sim.z_sum;
        let old_log_r = tracker.log_r();
        let st = *sim.state();
        tracker.feed(st.log_m(), st.log_s());
        let at_cp = cps.get(next_cp) == Some(&t);
        if at_cp {
            next_cp += 1;
        }
        let key = z * z / t as f64;
        let naive_new = key > max_key;
        if naive_new {
            max_key = key;
        }
        let h_new = z > max_z || !lazy_h;
        if z > max_z {
            max_z = z;
        }
        let r_new = tracker.log_r() < old_log_r;
        for lane in &mut lanes {
            let p = match lane.process {
                PeekProcess::NaiveZ => (naive_new || at_cp).then(|| naive_p(z, t)),
                PeekProcess::HValue => (h_new || at_cp).then(|| h_p(h_grid, z, t)),
                PeekProcess::RStatistic => (r_new || at_cp).then(|| tracker.log_r().exp()),
            };
            if p.is_some() || at_cp {
                lane.observe(t, p);
            }
        }
    }
    let est = tracker.finish(cfg.decay_threshold);
    let z = sim.z_sum;
    let mut records = Vec::with_capacity(lanes.len() * cfg.strategies.len());
    for lane in &lanes {
        let p_horizon = match lane.process {
            PeekProcess::NaiveZ => naive_p(z, horizon),
            PeekProcess::HValue => h_p(h_grid, z, horizon),
            PeekProcess::RStatistic => tracker.log_r().exp(),
        };
        for tr in &lane.trackers {
            let (mut stop_time, mut reported_p) = tr.finish(p_horizon);
            let mut excluded = false;
            if lane.process == PeekProcess::RStatistic {
                match est.tau_f {
                    None => excluded = true,
                    Some(tf) => match stop_time {
                        Some(t) if t > tf => {
                            stop_time = Some(tf);
                            reported_p = est.r_at_tau_f;
                        }
                        None => reported_p = est.r_at_tau_f,
                        _ => {}
                    },
                }
            }
            records.push(PeekRunRecord {
                path: index,
                process: lane.process,
                strategy: tr.strategy,
                stop_time,
                reported_p: reported_p.max(f64::MIN_POSITIVE),
                excluded,
                tau_f: est.tau_f,
                rho_f: est.rho_f,
            });
        }
    }
    let st = sim.state();
    PathResult {
        records,
        summary: PathSummary {
            path: index,
            seed: derive_seed(cfg.master_seed, index as u64),
            log_m_final: st.log_m(),
            log_s_final: st.log_s(),
            final_ratio: est.final_ratio,
            tau_f: est.tau_f,
            rho_f: est.rho_f,
            r_at_tau_f: est.r_at_tau_f,
            z_final: z,
        },
    }
}

/// Simulates `n_paths` paths in parallel and records what every
/// (process, strategy) pair would have reported.
pub fn run_peek_experiment(cfg: &ExperimentConfig) -> Result<PeekOutcome> {
    cfg.validate()?;
    if cfg.horizon == 0 {
        return Err(Error::InvalidConfig("peeking needs a horizon of at least 1".into()));
    }
    let process_grid = cfg.process.grid();
    let h_grid = cfg.mixture_grid();
    let cps = checkpoints(&cfg.strategies, cfg.horizon);
    let results: Vec<PathResult> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| run_path(cfg, process_grid.as_ref(), &h_grid, &cps, i))
        .collect();
    let mut records = Vec::with_capacity(results.len() * cfg.peek_processes.len() * cfg.strategies.len());
    let mut paths = Vec::with_capacity(results.len());
    for r in results {
        records.extend(r.records);
        paths.push(r.summary);
    }
    let summary = summarize(cfg, &records);
    Ok(PeekOutcome {
        records,
        paths,
        summary,
    })
}

fn summarize(cfg: &ExperimentConfig, records: &[PeekRunRecord]) -> PeekSummary {
    let mut accounting_ok =
        records.len() == cfg.n_paths * cfg.peek_processes.len() * cfg.strategies.len();
    let mut type_i = Vec::new();
    for &process in &cfg.peek_processes {
        for &strategy in &cfg.strategies {
            let group: Vec<&PeekRunRecord> = records
                .iter()
                .filter(|r| r.process == process && r.strategy == strategy)
                .collect();
            let stopped = group.iter().filter(|r| r.stop_time.is_some()).count();
            let censored = group.len() - stopped;
            let excluded = group.iter().filter(|r| r.excluded).count();
            accounting_ok &= stopped + censored == cfg.n_paths;
            let kept: Vec<f64> = group.iter().filter(|r| !r.excluded).map(|r| r.reported_p).collect();
            for &alpha in &cfg.alpha_levels {
                let n = kept.len();
                let rejections = kept.iter().filter(|&&p| p <= alpha).count();
                let rate = if n == 0 { 0.0 } else { rejections as f64 / n as f64 };
                let stderr = if n == 0 { 0.0 } else { (rate * (1.0 - rate) / n as f64).sqrt() };
                type_i.push(TypeIRow {
                    process,
                    strategy: strategy.to_string(),
                    alpha,
                    n,
                    rejections,
                    rate,
                    stderr,
                    stopped,
                    censored,
                    excluded,
                });
            }
        }
    }
    PeekSummary {
        n_paths: cfg.n_paths,
        horizon: cfg.horizon,
        n_records: records.len(),
        accounting_ok,
        type_i,
    }
}
