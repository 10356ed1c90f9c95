//! Pathwise invariant checks, decomposition roundtrips and stopped-sample
//! experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::peek::PathSummary;
use super::sim::PathSim;
use crate::ay::{
    ay_forms, ay_stop_rule, bregman, mm_decompose, stopped_max_dominance_check, AyState,
    Potential, StoppedMaxReport,
};
use crate::dist::{check_dominance, check_dominated_by_law, DistributionModel, DominanceReport};
use crate::error::Result;
use crate::extrema::{r_statistic_validity, uniform_calibration, ExtremaState, FinalMaxTracker};
use crate::rng::derive_seed;

pub const IDENTITY_TOL: f64 = 1e-10;
pub const LOG_BOUND_TOL: f64 = 1e-12;
pub const AY_TOL: f64 = 1e-9;
pub const ROUNDTRIP_TOL: f64 = 1e-9;
/// Steps between evaluations of the four AY forms.
const FORMS_STRIDE: u64 = 97;

/// A deliberate defect for checking that the suite catches it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Reads `L` with the wrong sign when checking the extrema identity.
    FlipLSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub name: String,
    pub passed: bool,
    /// Nothing was checked (e.g. a zero horizon).
    pub vacuous: bool,
    pub worst_deviation: f64,
    pub tolerance: f64,
    pub path: Option<usize>,
    pub step: Option<u64>,
    /// Seed reproducing the worst path.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub all_passed: bool,
    pub all_vacuous: bool,
    pub invariants: Vec<InvariantResult>,
}

impl InvariantReport {
    pub fn get(&self, name: &str) -> Option<&InvariantResult> {
        self.invariants.iter().find(|r| r.name == name)
    }
}

/// Worst deviation of one pathwise check, with its location.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Worst {
    dev: f64,
    step: Option<u64>,
}

impl Worst {
    const NONE: Self = Self {
        dev: f64::NEG_INFINITY,
        step: None,
    };

    fn record(&mut self, dev: f64, step: u64) {
        // NaN counts as the worst possible deviation.
        if dev.is_nan() || dev > self.dev {
            self.dev = if dev.is_nan() { f64::INFINITY } else { dev };
            self.step = Some(step);
        }
    }
}

const PATH_CHECKS: [(&str, f64); 9] = [
    ("extrema_identity", IDENTITY_TOL),
    ("l_below_log_s", LOG_BOUND_TOL),
    ("q_logmax_bound", LOG_BOUND_TOL),
    ("ay_max_equals_potential", 0.0),
    ("ay_between_bounds", AY_TOL),
    ("ay_difference_identity", AY_TOL),
    ("ay_forms_agree", AY_TOL),
    ("bachelier_decomposition", AY_TOL),
    ("mm_roundtrip", ROUNDTRIP_TOL),
];

struct PathChecks {
    worst: [Worst; PATH_CHECKS.len()],
    log_s_final: f64,
    est_r_at_tau_f: f64,
    resolved: bool,
    g_final: f64,
}

fn rel(x: f64) -> f64 {
    x.abs().max(1.0)
}

fn check_path(cfg: &ExperimentConfig, grid: Option<&crate::martingale::MixtureGrid>, index: usize, fault: Fault) -> Result<PathChecks> {
    let p = &cfg.potential;
    let mut sim = PathSim::new(&cfg.process, grid, cfg.master_seed, index as u64);
    let mut ex = ExtremaState::new();
    let mut ay = AyState::start(p);
    let mut tracker = FinalMaxTracker::new();
    let mut w = [Worst::NONE; PATH_CHECKS.len()];
    let invertible = p.slope(1.0) > 0.0 && p.domain_min() == 0.0;
    let mut b_path = Vec::with_capacity(if invertible { cfg.horizon as usize + 1 } else { 0 });
    let mut m_path = Vec::with_capacity(b_path.capacity());
    if invertible {
        b_path.push(ay.b);
        m_path.push(1.0);
    }
    for t in 1..=cfg.horizon {
        let prev = sim.step();
        let st = *sim.state();
        let (m0, s0, m1, s1) = (prev.m(), prev.s(), st.m(), st.s());
        tracker.feed(st.log_m(), st.log_s());
        ex = ex.update(m0, s0, m1, s1)?;
        let l = match fault {
            Fault::None => ex.l(),
            Fault::FlipLSign => -ex.l(),
        };
        w[0].record((ex.azema_bound() - (1.0 + ex.q() - l)).abs(), t);
        w[1].record(ex.l() - st.log_s(), t);
        w[2].record(ex.q() - (st.log_s() + ex.azema_bound() - 1.0), t);

        let y_prev = ay.y;
        ay = ay.step(p, m0, s0, m1, s1)?;
        let big = p.value(s1);
        w[3].record((ay.y_max - big).abs(), t);
        let lower = if m1 > 0.0 && m1 >= p.domain_min() {
            p.g(s1).max(p.value(m1))
        } else {
            p.g(s1)
        };
        w[4].record(((lower - ay.y).max(ay.y - big)) / rel(big), t);
        let rhs = (m1 - m0) * p.slope(s0) - bregman(p, s1, s0);
        w[5].record(((ay.y - y_prev) - rhs).abs() / rel(big), t);
        if t % FORMS_STRIDE == 0 || t == cfg.horizon {
            let f = ay_forms(p, m1, s1);
            let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
            w[6].record((hi - lo).max((f[3] - ay.y).abs()) / rel(big), t);
        }
        w[7].record((ay.b - (ay.y + ay.bregman_sum)).abs() / rel(ay.b), t);
        if invertible {
            b_path.push(ay.b);
            m_path.push(m1);
        }
    }
    if invertible && cfg.horizon > 0 {
        let (m_back, _) = mm_decompose(&b_path, p)?;
        for (t, (a, b)) in m_path.iter().zip(&m_back).enumerate() {
            w[8].record((a - b).abs(), t as u64);
        }
    }
    let est = tracker.finish(cfg.decay_threshold);
    let st = sim.state();
    Ok(PathChecks {
        worst: w,
        log_s_final: st.log_s(),
        est_r_at_tau_f: est.r_at_tau_f,
        resolved: est.tau_f.is_some(),
        g_final: p.g(st.s()),
    })
}

fn statistical(name: &str, report: Option<&DominanceReport>) -> InvariantResult {
    match report {
        Some(r) => InvariantResult {
            name: name.into(),
            passed: r.holds(),
            vacuous: false,
            worst_deviation: r.max_violation,
            tolerance: r.slack,
            path: None,
            step: None,
            seed: None,
        },
        None => vacuous(name, 0.0),
    }
}

fn vacuous(name: &str, tolerance: f64) -> InvariantResult {
    InvariantResult {
        name: name.into(),
        passed: true,
        vacuous: true,
        worst_deviation: 0.0,
        tolerance,
        path: None,
        step: None,
        seed: None,
    }
}

/// Runs every pathwise identity on `n_paths` paths of the configured
/// process and potential, then the distributional checks on the same paths.
pub fn run_invariant_suite(cfg: &ExperimentConfig) -> Result<InvariantReport> {
    run_invariant_suite_with(cfg, Fault::None)
}

pub fn run_invariant_suite_with(cfg: &ExperimentConfig, fault: Fault) -> Result<InvariantReport> {
    cfg.validate()?;
    let grid = cfg.process.grid();
    let checks: Vec<PathChecks> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| check_path(cfg, grid.as_ref(), i, fault))
        .collect::<Result<_>>()?;
    let mut invariants = Vec::new();
    for (k, &(name, tol)) in PATH_CHECKS.iter().enumerate() {
        let worst = checks
            .iter()
            .enumerate()
            .filter(|(_, c)| c.worst[k].step.is_some())
            .max_by(|a, b| a.1.worst[k].dev.total_cmp(&b.1.worst[k].dev));
        invariants.push(match worst {
            None => vacuous(name, tol),
            Some((i, c)) => InvariantResult {
                name: name.into(),
                passed: c.worst[k].dev <= tol,
                vacuous: false,
                worst_deviation: c.worst[k].dev,
                tolerance: tol,
                path: Some(i),
                step: c.worst[k].step,
                seed: Some(derive_seed(cfg.master_seed, i as u64)),
            },
        });
    }

    let live = cfg.horizon > 0;
    let n = checks.len() as f64;
    for c in [0.5, 0.2, 0.1] {
        let name = format!("ville_inequality_c{c}");
        if !live {
            invariants.push(vacuous(&name, 0.0));
            continue;
        }
        let hits = checks.iter().filter(|p| p.log_s_final >= -(c as f64).ln()).count() as f64;
        let rate = hits / n;
        let slack = 3.0 * (c * (1.0 - c) / n).sqrt();
        invariants.push(InvariantResult {
            name,
            passed: rate <= c + slack,
            vacuous: false,
            worst_deviation: rate - c,
            tolerance: slack,
            path: None,
            step: None,
            seed: None,
        });
    }
    let s_final: Vec<f64> = checks.iter().map(|p| p.log_s_final.exp()).collect();
    let s_dom = live
        .then(|| check_dominated_by_law(&s_final, |x| (1.0 / x).min(1.0), cfg.delta))
        .transpose()?;
    invariants.push(statistical("running_max_dominated_by_pareto1", s_dom.as_ref()));

    let resolved: Vec<f64> = checks.iter().filter(|p| p.resolved).map(|p| p.est_r_at_tau_f).collect();
    let excluded = checks.len() - resolved.len();
    let r_valid = (live && !resolved.is_empty())
        .then(|| r_statistic_validity(&resolved, excluded, cfg.delta))
        .transpose()?;
    invariants.push(statistical("r_statistic_at_last_record", r_valid.as_ref().map(|r| &r.report)));

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, u64::MAX));
    let calib = uniform_calibration(&mut rng, cfg.n_paths, cfg.delta)?;
    invariants.push(statistical("uniform_calibration", Some(&calib.report)));

    let mean_bound = crate::ay::expected_ultimate_max(&cfg.potential);
    if live {
        let g: Vec<f64> = checks.iter().map(|p| p.g_final).collect();
        let mean = g.iter().sum::<f64>() / n;
        let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let slack = 3.0 * (var / n).sqrt();
        invariants.push(InvariantResult {
            name: "expected_ultimate_max_upper".into(),
            passed: mean <= mean_bound + slack,
            vacuous: false,
            worst_deviation: mean - mean_bound,
            tolerance: slack,
            path: None,
            step: None,
            seed: None,
        });
    } else {
        invariants.push(vacuous("expected_ultimate_max_upper", 0.0));
    }

    let tau_mu_ok = cfg.mu.mean().is_ok();
    if live && tau_mu_ok {
        let tm = run_tau_mu(cfg, &cfg.mu)?;
        invariants.push(statistical("tau_mu_stopped_law", tm.law_check.as_ref()));
        invariants.push(statistical(
            "tau_mu_running_max_hl",
            tm.hl_check.as_ref().and_then(|r| r.dominance.as_ref()),
        ));
    } else {
        invariants.push(vacuous("tau_mu_stopped_law", 0.0));
        invariants.push(vacuous("tau_mu_running_max_hl", 0.0));
    }

    let all_passed = invariants.iter().all(|r| r.passed);
    let all_vacuous = invariants
        .iter()
        .filter(|r| r.name != "uniform_calibration")
        .all(|r| r.vacuous);
    Ok(InvariantReport {
        all_passed,
        all_vacuous,
        invariants,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripRow {
    pub path: usize,
    pub seed: u64,
    pub sup_error_m: f64,
    pub sup_error_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub n_paths: usize,
    pub horizon: u64,
    pub max_error_m: f64,
    pub max_error_s: f64,
    pub worst_path: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip)]
    pub rows: Vec<RoundtripRow>,
}

/// `M → B → M` through the AY process and [`mm_decompose`], per path.
pub fn run_decomposition_roundtrip(cfg: &ExperimentConfig) -> Result<RoundtripReport> {
    cfg.validate()?;
    let grid = cfg.process.grid();
    let p = &cfg.potential;
    let rows: Vec<RoundtripRow> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| -> Result<RoundtripRow> {
            let mut sim = PathSim::new(&cfg.process, grid.as_ref(), cfg.master_seed, i as u64);
            let mut ay = AyState::start(p);
            let mut m = vec![1.0];
            let mut s = vec![1.0];
            let mut b = vec![ay.b];
            for _ in 0..cfg.horizon {
                let prev = sim.step();
                let st = sim.state();
                ay = ay.step(p, prev.m(), prev.s(), st.m(), st.s())?;
                m.push(st.m());
                s.push(st.s());
                b.push(ay.b);
            }
            let (m2, s2) = mm_decompose(&b, p)?;
            let sup = |x: &[f64], y: &[f64]| {
                x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            };
            Ok(RoundtripRow {
                path: i,
                seed: derive_seed(cfg.master_seed, i as u64),
                sup_error_m: sup(&m, &m2),
                sup_error_s: sup(&s, &s2),
            })
        })
        .collect::<Result<_>>()?;
    let worst = rows
        .iter()
        .max_by(|a, b| a.sup_error_m.max(a.sup_error_s).total_cmp(&b.sup_error_m.max(b.sup_error_s)));
    let max_error_m = rows.iter().map(|r| r.sup_error_m).fold(0.0, f64::max);
    let max_error_s = rows.iter().map(|r| r.sup_error_s).fold(0.0, f64::max);
    Ok(RoundtripReport {
        n_paths: cfg.n_paths,
        horizon: cfg.horizon,
        max_error_m,
        max_error_s,
        worst_path: worst.map(|r| r.path),
        tolerance: ROUNDTRIP_TOL,
        passed: max_error_m <= ROUNDTRIP_TOL && max_error_s <= ROUNDTRIP_TOL,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMuReport {
    pub n_paths: usize,
    pub stopped: usize,
    pub censored: usize,
    pub censoring_rate: f64,
    /// `Y_τ ⪯ μ` on stopped paths.
    pub law_check: Option<DominanceReport>,
    /// `max_{s≤τ} Y_s ⪯ μ^HL` after the precheck.
    pub hl_check: Option<StoppedMaxReport>,
    #[serde(skip)]
    pub stopped_values: Vec<f64>,
    #[serde(skip)]
    pub running_max: Vec<f64>,
}

/// Runs the AY process of `g^μ` on each path of the configured martingale
/// and stops at `τ^μ`. Paths still running at the horizon are censored.
pub fn run_tau_mu(cfg: &ExperimentConfig, mu: &DistributionModel) -> Result<TauMuReport> {
    cfg.validate()?;
    let p = Potential::tail_quantile_of(mu.clone())?;
    let grid = cfg.process.grid();
    let outcomes: Vec<Option<(f64, f64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| -> Result<Option<(f64, f64)>> {
            let mut sim = PathSim::new(&cfg.process, grid.as_ref(), cfg.master_seed, i as u64);
            let mut ay = AyState::start(&p);
            if ay_stop_rule(&ay, mu, 1.0) {
                return Ok(Some((ay.y, ay.y_max)));
            }
            for _ in 0..cfg.horizon {
                let prev = sim.step();
                let st = sim.state();
                ay = ay.step(&p, prev.m(), prev.s(), st.m(), st.s())?;
                if ay_stop_rule(&ay, mu, st.s()) {
                    return Ok(Some((ay.y, ay.y_max)));
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;
    let (stopped_values, running_max): (Vec<f64>, Vec<f64>) = outcomes.iter().flatten().copied().unzip();
    let censored = cfg.n_paths - stopped_values.len();
    let (law_check, hl_check) = if stopped_values.is_empty() {
        (None, None)
    } else {
        let law = match mu {
            DistributionModel::Empirical(e) => check_dominance(e.sorted(), &stopped_values, cfg.delta)?,
            _ => check_dominated_by_law(&stopped_values, |x| mu.ccdf(x), cfg.delta)?,
        };
        let hl = stopped_max_dominance_check(
            &stopped_values,
            &running_max,
            mu,
            derive_seed(cfg.master_seed, u64::MAX - 1),
            cfg.delta,
        )?;
        (Some(law), Some(hl))
    };
    Ok(TauMuReport {
        n_paths: cfg.n_paths,
        stopped: stopped_values.len(),
        censored,
        censoring_rate: censored as f64 / cfg.n_paths as f64,
        law_check,
        hl_check,
        stopped_values,
        running_max,
    })
}

/// Stop rules applied directly to the martingale value `A = M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    FixedTime(u64),
    /// First exit from `(lower, upper)`, or the horizon.
    BandExit { lower: f64, upper: f64 },
    /// The time of the path's maximum over the horizon. Not a stopping time.
    Argmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppedSample {
    pub stopped: Vec<f64>,
    pub running_max: Vec<f64>,
    /// Band exits that had not happened by the horizon.
    pub censored: usize,
}

/// Stops every path of the configured martingale under `rule` and returns
/// `A_τ` and `max_{s≤τ} A_s` per path.
pub fn simulate_stopped(cfg: &ExperimentConfig, rule: StopRule) -> Result<StoppedSample> {
    cfg.validate()?;
    let grid = cfg.process.grid();
    let out: Vec<(f64, f64, bool)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut sim = PathSim::new(&cfg.process, grid.as_ref(), cfg.master_seed, i as u64);
            let steps = match rule {
                StopRule::FixedTime(t) => t.min(cfg.horizon),
                _ => cfg.horizon,
            };
            for _ in 0..steps {
                sim.step();
                let st = sim.state();
                if let StopRule::BandExit { lower, upper } = rule {
                    let m = st.m();
                    if m <= lower || m >= upper {
                        return (m, st.s(), false);
                    }
                }
            }
            let st = sim.state();
            match rule {
                StopRule::Argmax => (st.s(), st.s(), false),
                StopRule::BandExit { .. } => (st.m(), st.s(), true),
                StopRule::FixedTime(_) => (st.m(), st.s(), false),
            }
        })
        .collect();
    Ok(StoppedSample {
        stopped: out.iter().map(|o| o.0).collect(),
        running_max: out.iter().map(|o| o.1).collect(),
        censored: out.iter().filter(|o| o.2).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VilleRow {
    pub c: f64,
    pub rate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub n_paths: usize,
    pub horizon: u64,
    /// `P(max M ≥ 1/c)` estimates.
    pub ville: Vec<VilleRow>,
    pub mean_log_s: f64,
    pub mean_log_s_stderr: f64,
    /// `S_T ⪯ Pareto(1)`.
    pub running_max_dominance: DominanceReport,
    /// Two-sided sup distance between the ECDF of `S_T` and Pareto(1).
    pub running_max_sup_distance: f64,
    pub unresolved_tau_f: usize,
}

pub fn simulate_paths(cfg: &ExperimentConfig) -> Result<Vec<PathSummary>> {
    cfg.validate()?;
    let grid = cfg.process.grid();
    Ok((0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut sim = PathSim::new(&cfg.process, grid.as_ref(), cfg.master_seed, i as u64);
            let mut tracker = FinalMaxTracker::new();
            for _ in 0..cfg.horizon {
                sim.step();
                tracker.feed(sim.state().log_m(), sim.state().log_s());
            }
            let est = tracker.finish(cfg.decay_threshold);
            let st = sim.state();
            PathSummary {
                path: i,
                seed: derive_seed(cfg.master_seed, i as u64),
                log_m_final: st.log_m(),
                log_s_final: st.log_s(),
                final_ratio: est.final_ratio,
                tau_f: est.tau_f,
                rho_f: est.rho_f,
                r_at_tau_f: est.r_at_tau_f,
                z_final: sim.z_sum,
            }
        })
        .collect())
}

/// Distributional summary of the running maxima in `paths`.
pub fn summarize_paths(paths: &[PathSummary], horizon: u64, delta: f64) -> Result<SimulationSummary> {
    let n = paths.len() as f64;
    let ville = [0.5, 0.2, 0.1]
        .into_iter()
        .map(|c: f64| {
            let rate = paths.iter().filter(|p| p.log_s_final >= -c.ln()).count() as f64 / n;
            VilleRow {
                c,
                rate,
                stderr: (rate * (1.0 - rate) / n).sqrt(),
            }
        })
        .collect();
    let logs: Vec<f64> = paths.iter().map(|p| p.log_s_final).collect();
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let s: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    let pareto1 = |x: f64| (1.0 / x).min(1.0);
    Ok(SimulationSummary {
        n_paths: paths.len(),
        horizon,
        ville,
        mean_log_s: mean,
        mean_log_s_stderr: (var / n).sqrt(),
        running_max_dominance: check_dominated_by_law(&s, pareto1, delta)?,
        running_max_sup_distance: crate::dist::ccdf_sup_distance(&s, pareto1)?,
        unresolved_tau_f: paths.iter().filter(|p| p.tau_f.is_none()).count(),
    })
}

/// One row of `paths.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub path: usize,
    pub t: u64,
    pub m: f64,
    pub s: f64,
    pub v: f64,
    pub h: f64,
    pub m_over_s: f64,
    pub q: f64,
    pub l: f64,
    pub r: f64,
    pub y: f64,
    pub y_max: f64,
    pub b: f64,
}

/// Step-by-step traces of the first `trace_paths` paths.
pub fn trace_paths(cfg: &ExperimentConfig) -> Result<Vec<TraceRow>> {
    let grid = cfg.process.grid();
    let p = &cfg.potential;
    let mut rows = Vec::new();
    for i in 0..cfg.trace_paths.min(cfg.n_paths) {
        let mut sim = PathSim::new(&cfg.process, grid.as_ref(), cfg.master_seed, i as u64);
        let mut ex = ExtremaState::new();
        let mut ay = AyState::start(p);
        let row = |t, st: &crate::martingale::PathState, ex: &ExtremaState, ay: &AyState| TraceRow {
            path: i,
            t,
            m: st.m(),
            s: st.s(),
            v: st.v,
            h: st.h_value(),
            m_over_s: st.ratio_to_max(),
            q: ex.q(),
            l: ex.l(),
            r: ex.r(),
            y: ay.y,
            y_max: ay.y_max,
            b: ay.b,
        };
        rows.push(row(0, sim.state(), &ex, &ay));
        for t in 1..=cfg.horizon {
            let prev = sim.step();
            let st = *sim.state();
            ex = ex.update(prev.m(), prev.s(), st.m(), st.s())?;
            ay = ay.step(p, prev.m(), prev.s(), st.m(), st.s())?;
            rows.push(row(t, &st, &ex, &ay));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::ProcessSpec;

    fn cfg(n_paths: usize, horizon: u64) -> ExperimentConfig {
        ExperimentConfig {
            n_paths,
            horizon,
            ..Default::default()
        }
    }

    #[test]
    fn default_suite_passes_on_small_runs() {
        let report = run_invariant_suite(&cfg(200, 300)).unwrap();
        for r in &report.invariants {
            assert!(r.passed, "{r:?}");
        }
        assert!(report.all_passed && !report.all_vacuous);
    }

    #[test]
    fn flipped_l_is_caught_with_location() {
        let report = run_invariant_suite_with(&cfg(20, 200), Fault::FlipLSign).unwrap();
        let r = report.get("extrema_identity").unwrap();
        assert!(!r.passed);
        assert!(r.step.is_some() && r.path.is_some() && r.seed.is_some());
        assert!(!report.all_passed);
        assert!(report.get("l_below_log_s").unwrap().passed);
    }

    #[test]
    fn zero_horizon_is_vacuous() {
        let report = run_invariant_suite(&cfg(5, 0)).unwrap();
        assert!(report.all_passed && report.all_vacuous);
    }

    #[test]
    fn other_processes_and_potentials() {
        for (process, potential) in [
            (ProcessSpec::BetaVsUniform { a: 0.5 }, Potential::power(0.5).unwrap()),
            (ProcessSpec::Mixture { grid: None }, Potential::log()),
            (
                ProcessSpec::GaussianExp { lambda: 0.1 },
                Potential::tail_quantile_of(DistributionModel::pareto(2.0).unwrap()).unwrap(),
            ),
        ] {
            let c = ExperimentConfig {
                process,
                potential,
                ..cfg(50, 200)
            };
            let report = run_invariant_suite(&c).unwrap();
            for name in PATH_CHECKS.iter().map(|x| x.0) {
                let r = report.get(name).unwrap();
                assert!(r.passed, "{r:?}");
            }
        }
    }

    #[test]
    fn roundtrip_small() {
        let r = run_decomposition_roundtrip(&cfg(20, 300)).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.rows.len(), 20);
    }

    #[test]
    fn roundtrip_rejects_flat_potential() {
        let c = ExperimentConfig {
            potential: Potential::power(0.0).unwrap(),
            ..cfg(2, 10)
        };
        assert!(run_decomposition_roundtrip(&c).is_err());
    }

    #[test]
    fn stopped_samples() {
        let c = cfg(100, 50);
        let fixed = simulate_stopped(&c, StopRule::FixedTime(10)).unwrap();
        assert!(fixed.stopped.iter().zip(&fixed.running_max).all(|(a, m)| a <= m));
        let arg = simulate_stopped(&c, StopRule::Argmax).unwrap();
        assert_eq!(arg.stopped, arg.running_max);
        let band = simulate_stopped(&c, StopRule::BandExit { lower: 0.5, upper: 2.0 }).unwrap();
        assert!(band.censored < 100);
    }

    #[test]
    fn traces_follow_the_paths() {
        let c = ExperimentConfig {
            trace_paths: 2,
            ..cfg(5, 20)
        };
        let rows = trace_paths(&c).unwrap();
        assert_eq!(rows.len(), 2 * 21);
        let paths = simulate_paths(&c).unwrap();
        assert_eq!(rows[20].s.ln(), paths[0].log_s_final);
    }
}
