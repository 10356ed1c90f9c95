//! Running-maximum bookkeeping for a nonnegative (super)martingale.
//!
//! Along any path with `M_0 = S_0 = 1`,
//!
//! ```text
//!     M_t / S_t = 1 + Q_t − L_t
//!     Q_t = Σ (M_i − M_{i−1}) / S_i
//!     L_t = Σ M_{i−1} (1/S_{i−1} − 1/S_i)
//! ```
//!
//! and `M_t / S_t` bounds the probability that the running maximum is ever
//! exceeded again. `R_t = min_{s<=t} M_s/S_s` is a valid p-value at any time
//! up to the last record.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{check_dominance, check_dominates_law, DominanceReport};
use crate::error::{Error, Result};
use crate::rng::{open_uniform, path_rng};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremaState {
    step: usize,
    q: CompensatedSum,
    l: CompensatedSum,
    r: f64,
    azema_bound: f64,
}

impl Default for ExtremaState {
    fn default() -> Self {
        Self::new()
    }
}

impl ExtremaState {
    pub fn new() -> Self {
        Self {
            step: 0,
            q: CompensatedSum::default(),
            l: CompensatedSum::default(),
            r: 1.0,
            azema_bound: 1.0,
        }
    }

    pub fn q(&self) -> f64 {
        self.q.value()
    }

    pub fn l(&self) -> f64 {
        self.l.value()
    }

    /// Running minimum of `M/S`.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// `M_t / S_t`.
    pub fn azema_bound(&self) -> f64 {
        self.azema_bound
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// `M_t/S_t − (1 + Q_t − L_t)`; zero in exact arithmetic.
    pub fn identity_residual(&self) -> f64 {
        self.azema_bound - (1.0 + self.q() - self.l())
    }

    pub fn update(mut self, m_prev: f64, s_prev: f64, m_new: f64, s_new: f64) -> Result<Self> {
        let step = self.step + 1;
        if !(s_prev > 0.0) {
            return Err(Error::InvalidPath {
                step,
                reason: format!("previous running max {s_prev} is not positive"),
            });
        }
        if m_new < 0.0 || m_prev < 0.0 {
            return Err(Error::InvalidPath {
                step,
                reason: "negative martingale value".into(),
            });
        }
        if s_new != s_prev.max(m_new) {
            return Err(Error::InvalidPath {
                step,
                reason: format!("S_new = {s_new} but max(S_prev, M_new) = {}", s_prev.max(m_new)),
            });
        }
        self.q.add((m_new - m_prev) / s_new);
        if s_new != s_prev {
            self.l.add(m_prev * (1.0 / s_prev - 1.0 / s_new));
        }
        self.azema_bound = m_new / s_new;
        self.r = self.r.min(self.azema_bound);
        self.step = step;
        Ok(self)
    }
}

/// Streaming estimate of the last record time `τ_F` and of `ρ_F`, the last
/// time `M/S` attains its minimum over `[0, τ_F]`, on a truncated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalMaxTracker {
    t: u64,
    log_r: f64,
    argmin: u64,
    last_record: u64,
    log_r_at_record: f64,
    argmin_at_record: u64,
    last_log_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalMaxEstimate {
    /// `None` when `M/S` at the horizon is still above the decay threshold.
    pub tau_f: Option<u64>,
    pub rho_f: Option<u64>,
    /// `R` at the last record, i.e. `min_{s <= τ_F} M_s/S_s`.
    pub r_at_tau_f: f64,
    pub final_ratio: f64,
}

impl Default for FinalMaxTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl FinalMaxTracker {
    pub fn new() -> Self {
        Self {
            t: 0,
            log_r: 0.0,
            argmin: 0,
            last_record: 0,
            log_r_at_record: 0.0,
            argmin_at_record: 0,
            last_log_ratio: 0.0,
        }
    }

    /// Feeds step `t + 1` with log values of `M` and `S`.
    pub fn feed(&mut self, log_m: f64, log_s: f64) {
        self.t += 1;
        let log_ratio = log_m - log_s;
        self.last_log_ratio = log_ratio;
        if log_ratio <= self.log_r {
            self.log_r = log_ratio;
            self.argmin = self.t;
        }
        if log_m == log_s {
            self.last_record = self.t;
            self.log_r_at_record = self.log_r;
            self.argmin_at_record = self.argmin;
        }
    }

    /// Current `ln R_t`.
    pub fn log_r(&self) -> f64 {
        self.log_r
    }

    pub fn finish(&self, decay_threshold: f64) -> FinalMaxEstimate {
        let final_ratio = self.last_log_ratio.exp();
        let resolved = self.t == 0 || final_ratio < decay_threshold;
        FinalMaxEstimate {
            tau_f: resolved.then_some(self.last_record),
            rho_f: resolved.then_some(self.argmin_at_record),
            r_at_tau_f: self.log_r_at_record.exp(),
            final_ratio,
        }
    }
}

/// Lookahead dominance `max_{t<=s<=T} M_s ⪯ M_t / U` from log paths.
///
/// Works on logs (a monotone map) so vanishing `M` stays comparable. Each path
/// gets a fresh uniform from stream `uniform_seed`.
pub fn lookahead_dominance_check(
    log_paths: &[Vec<f64>],
    t: usize,
    uniform_seed: u64,
    delta: f64,
) -> Result<DominanceReport> {
    if log_paths.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut bound = Vec::with_capacity(log_paths.len());
    let mut lookahead = Vec::with_capacity(log_paths.len());
    for (i, path) in log_paths.iter().enumerate() {
        if t >= path.len() {
            return Err(Error::InvalidPath {
                step: t,
                reason: format!("path {i} has only {} points", path.len()),
            });
        }
        let mut rng = path_rng(uniform_seed, i as u64);
        let u = open_uniform(&mut rng);
        bound.push(path[t] - u.ln());
        lookahead.push(path[t..].iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    check_dominance(&bound, &lookahead, delta)
}

/// Validity of stopped `R` values: `R_τ ⪰ U`, i.e. `ECDF(u) <= u + slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RValidity {
    pub report: DominanceReport,
    /// Paths dropped because `τ_F` was unresolved at the horizon.
    pub excluded: usize,
}

pub fn r_statistic_validity(stopped_r: &[f64], excluded: usize, delta: f64) -> Result<RValidity> {
    let report = check_dominates_law(stopped_r, |u| (1.0 - u).clamp(0.0, 1.0), delta)?;
    Ok(RValidity { report, excluded })
}

/// Draws `n` fresh uniforms and checks them against the identity CDF: a
/// calibration run of the ECDF machinery.
pub fn uniform_calibration<R: Rng + ?Sized>(rng: &mut R, n: usize, delta: f64) -> Result<RValidity> {
    let us: Vec<f64> = (0..n).map(|_| open_uniform(rng)).collect();
    r_statistic_validity(&us, 0, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::{PathState, ProcessSpec};

    #[test]
    fn no_new_max_leaves_l_unchanged() {
        let s = ExtremaState::new().update(1.0, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(s.l(), 0.0);
        assert_eq!(s.q(), -0.5);
        assert_eq!(s.azema_bound(), 0.5);
        assert_eq!(s.r(), 0.5);
    }

    #[test]
    fn new_max_step_by_hand() {
        let s = ExtremaState::new().update(1.0, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(s.q(), 0.5);
        assert_eq!(s.l(), 0.5);
        assert_eq!(s.azema_bound(), 1.0);
        assert_eq!(s.identity_residual(), 0.0);
    }

    #[test]
    fn rejects_inconsistent_steps() {
        let e = ExtremaState::new();
        assert!(matches!(
            e.update(1.0, 0.0, 1.0, 1.0),
            Err(Error::InvalidPath { step: 1, .. })
        ));
        assert!(e.update(1.0, 1.0, 2.0, 1.5).is_err());
        assert!(e.update(1.0, 1.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn identity_holds_along_simulated_paths() {
        for (k, spec) in [
            ProcessSpec::GaussianExp { lambda: 1.0 },
            ProcessSpec::GaussianExp { lambda: 0.05 },
            ProcessSpec::BetaVsUniform { a: 2.0 },
        ]
        .iter()
        .enumerate()
        {
            let mut rng = path_rng(42, k as u64);
            let mut p = PathState::new(0);
            let mut e = ExtremaState::new();
            let mut prev_l = 0.0;
            let mut prev_r = 1.0;
            for _ in 0..5000 {
                let next = spec.step(p, None, &mut rng);
                e = e.update(p.m(), p.s(), next.m(), next.s()).unwrap();
                assert!(e.identity_residual().abs() < 1e-12);
                assert!(e.l() <= next.log_s() + 1e-12);
                assert!(e.l() >= prev_l);
                if next.s() == p.s() {
                    assert_eq!(e.l(), prev_l);
                }
                assert!(e.r() <= prev_r);
                assert!((0.0..=1.0).contains(&e.azema_bound()));
                prev_l = e.l();
                prev_r = e.r();
                p = next;
            }
        }
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut c = CompensatedSum::default();
        let mut naive = 0.0;
        c.add(1.0);
        naive += 1.0;
        for _ in 0..10_000 {
            c.add(1e-16);
            naive += 1e-16;
        }
        assert_eq!(naive, 1.0);
        assert!((c.value() - (1.0 + 1e-12)).abs() < 1e-20);
    }

    #[test]
    fn tracker_finds_last_record_and_argmin() {
        // log M: 0, 1, 0.5, 2, 1.2, 1.0, 1.5 with running max 0,1,1,2,2,2,2
        let log_m = [1.0, 0.5, 2.0, 1.2, 1.0, 1.5];
        let mut tr = FinalMaxTracker::new();
        let mut log_s = 0.0f64;
        for &lm in &log_m {
            log_s = log_s.max(lm);
            tr.feed(lm, log_s);
        }
        let est = tr.finish(10.0);
        assert_eq!(est.tau_f, Some(3));
        // ratios up to t=3: 1, 1, e^-0.5, 1 -> min at t=2
        assert_eq!(est.rho_f, Some(2));
        assert!((est.r_at_tau_f - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(tr.finish(1e-6).tau_f, None);
    }

    #[test]
    fn constant_path_lookahead_holds() {
        let paths = vec![vec![0.0; 20]; 500];
        let r = lookahead_dominance_check(&paths, 5, 1, 0.01).unwrap();
        assert!(r.holds());
        assert_eq!(r.max_violation, 0.0);
        assert!(lookahead_dominance_check(&[], 0, 1, 0.01).is_err());
    }

    #[test]
    fn zero_stop_gives_trivial_r() {
        let r = r_statistic_validity(&vec![1.0; 1000], 0, 0.01).unwrap();
        assert!(r.report.holds());
        assert_eq!(r.report.max_violation, 0.0);
    }

    #[test]
    fn uniform_calibration_passes() {
        let mut rng = path_rng(99, 0);
        let r = uniform_calibration(&mut rng, 100_000, 0.01).unwrap();
        assert!(r.report.holds(), "{:?}", r.report);
    }
}
