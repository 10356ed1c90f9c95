//! The Azéma–Yor process of a martingale path and its decompositions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::potential::Potential;
use crate::dist::{check_dominance, check_dominated_by_law, DistributionModel, DominanceReport};
use crate::error::{Error, Result};
use crate::extrema::CompensatedSum;
use crate::rng::open_uniform;

/// Slopes below this make the inverse map numerically meaningless.
const MIN_SLOPE: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct AyState {
    pub t: u64,
    pub y: f64,
    pub y_max: f64,
    pub b: f64,
    pub bregman_sum: f64,
    pub stopped: bool,
    pub stop_time: Option<u64>,
    b_acc: CompensatedSum,
    d_acc: CompensatedSum,
}

impl AyState {
    /// State at `M_0 = S_0 = 1`, where `Y_0 = 𝒢(1)`.
    pub fn start(p: &Potential) -> Self {
        let g1 = p.value(1.0);
        let mut b_acc = CompensatedSum::default();
        b_acc.add(g1);
        Self {
            t: 0,
            y: g1,
            y_max: g1,
            b: g1,
            bregman_sum: 0.0,
            stopped: false,
            stop_time: None,
            b_acc,
            d_acc: CompensatedSum::default(),
        }
    }

    /// Advances by one step of `(M, S)`. A stopped state is frozen.
    ///
    /// `Y = g(S) + M 𝒢′(S)`, capped at `𝒢(S)` and set to it exactly at
    /// record times, so the running maximum of `Y` is `𝒢(S)` bit for bit.
    pub fn step(mut self, p: &Potential, m_prev: f64, s_prev: f64, m_new: f64, s_new: f64) -> Result<Self> {
        if self.stopped {
            return Ok(self);
        }
        let step = self.t as usize + 1;
        if !(s_new >= s_prev) {
            return Err(Error::InvalidPath {
                step,
                reason: format!("running max decreased from {s_prev} to {s_new}"),
            });
        }
        if !(m_new >= 0.0) || m_new > s_new {
            return Err(Error::InvalidPath {
                step,
                reason: format!("M = {m_new} outside [0, S = {s_new}]"),
            });
        }
        let big = p.value(s_new);
        self.y = if m_new == s_new {
            big
        } else {
            (p.g(s_new) + m_new * p.slope(s_new)).min(big)
        };
        self.y_max = self.y_max.max(self.y);
        self.b_acc.add((m_new - m_prev) * p.slope(s_prev));
        self.b = self.b_acc.value();
        if s_new > s_prev {
            self.d_acc.add(bregman(p, s_new, s_prev));
            self.bregman_sum = self.d_acc.value();
        }
        self.t += 1;
        Ok(self)
    }

    pub fn freeze(&mut self) {
        if !self.stopped {
            self.stopped = true;
            self.stop_time = Some(self.t);
        }
    }
}

/// `D_{−𝒢}(a, b) = 𝒢(b) − 𝒢(a) + (a − b) 𝒢′(b)`, nonnegative by concavity.
pub fn bregman(p: &Potential, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    p.value(b) - p.value(a) + (a - b) * p.slope(b)
}

/// The four algebraically equal expressions for `Y` at `(M, S)`.
pub fn ay_forms(p: &Potential, m: f64, s: f64) -> [f64; 4] {
    let g = p.g(s);
    let big = p.value(s);
    let slope = p.slope(s);
    let ratio = m / s;
    [
        (1.0 - ratio) * g + m * p.tail_integral(s),
        (1.0 - ratio) * g + ratio * big,
        big - (s - m) * slope,
        g + m * slope,
    ]
}

/// Stop once `g^μ(S)` has caught up with `Y`.
pub fn ay_stop_rule(state: &AyState, mu: &DistributionModel, s: f64) -> bool {
    mu.g_mu(s).is_ok_and(|g| g >= state.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecheckStatus {
    Accepted,
    RejectedPrecondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedMaxReport {
    pub status: PrecheckStatus,
    /// Stopped values against μ.
    pub precheck: DominanceReport,
    /// Running maxima against μ^HL; absent when the precheck fails.
    pub dominance: Option<DominanceReport>,
}

impl StoppedMaxReport {
    pub fn holds(&self) -> bool {
        self.status == PrecheckStatus::Accepted
            && self.dominance.as_ref().is_some_and(DominanceReport::holds)
    }
}

/// Checks `max_{s≤τ} A_s ⪯ μ^HL` for a stop rule whose stopped values
/// `A_τ` are first confirmed to satisfy `A_τ ⪯ μ`.
///
/// The HL side is a fresh sample of `SQ^μ(U)` of the same size, drawn from
/// `hl_seed`.
pub fn stopped_max_dominance_check(
    stopped: &[f64],
    running_max: &[f64],
    mu: &DistributionModel,
    hl_seed: u64,
    delta: f64,
) -> Result<StoppedMaxReport> {
    let precheck = match mu {
        DistributionModel::Empirical(law) => check_dominance(law.sorted(), stopped, delta)?,
        _ => check_dominated_by_law(stopped, |x| mu.ccdf(x), delta)?,
    };
    if !precheck.holds() {
        return Ok(StoppedMaxReport {
            status: PrecheckStatus::RejectedPrecondition,
            precheck,
            dominance: None,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hl_seed);
    let hl = (0..running_max.len())
        .map(|_| mu.hl_sample(open_uniform(&mut rng)))
        .collect::<Result<Vec<_>>>()?;
    let dominance = check_dominance(&hl, running_max, delta)?;
    Ok(StoppedMaxReport {
        status: PrecheckStatus::Accepted,
        precheck,
        dominance: Some(dominance),
    })
}

/// Inverts `B ↦ (M, S)`: `M_t = 1 + Σ ΔB_s / 𝒢′(S_{s−1})`.
pub fn mm_decompose(b_path: &[f64], p: &Potential) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(&b0) = b_path.first() else {
        return Err(Error::EmptySample);
    };
    let expected = p.value(1.0);
    if (b0 - expected).abs() > 1e-12 * expected.abs().max(1.0) {
        return Err(Error::InitialCondition { expected, got: b0 });
    }
    let mut m_path = Vec::with_capacity(b_path.len());
    let mut s_path = Vec::with_capacity(b_path.len());
    let mut acc = CompensatedSum::default();
    acc.add(1.0);
    let mut s = 1.0_f64;
    m_path.push(1.0);
    s_path.push(1.0);
    for w in b_path.windows(2) {
        let slope = p.slope(s);
        if !(slope >= MIN_SLOPE) {
            return Err(Error::DegeneratePotential { s, slope });
        }
        acc.add((w[1] - w[0]) / slope);
        let m = acc.value();
        s = s.max(m);
        m_path.push(m);
        s_path.push(s);
    }
    Ok((m_path, s_path))
}

/// Largest deviation from `B = Y + Σ D` along recorded states.
pub fn bachelier_residual(states: &[AyState]) -> f64 {
    states
        .iter()
        .map(|st| (st.b - (st.y + st.bregman_sum)).abs())
        .fold(0.0, f64::max)
}

/// `𝒢(m) − m 𝒢′(m)`, the lower process of the max-plus decomposition.
pub fn maxplus_lower(p: &Potential, m: f64) -> f64 {
    p.value(m) - m * p.slope(m)
}

/// `g(1) + 𝒢′(1)`.
pub fn expected_ultimate_max(p: &Potential) -> f64 {
    p.g(1.0) + p.slope(1.0)
}

/// Largest excess of `Q_t` over `log S_t + M_t/S_t − 1` along a path.
///
/// `q`, `m` and `s` are aligned per step. A value at or below `tol`
/// means the bound held everywhere.
pub fn q_logmax_bound_check(q: &[f64], m: &[f64], s: &[f64]) -> f64 {
    q.iter()
        .zip(m.iter().zip(s))
        .map(|(&q, (&m, &s))| q - (s.ln() + m / s - 1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionModel;
    use crate::martingale::PathState;
    use crate::rng::path_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_path(seed: u64, n: usize, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = path_rng(seed, 0);
        let mut st = PathState::new(seed);
        let mut m = vec![1.0];
        let mut s = vec![1.0];
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            st = st.step_gaussian_exp(lambda, z);
            m.push(st.m());
            s.push(st.s());
        }
        (m, s)
    }

    fn run(p: &Potential, m: &[f64], s: &[f64]) -> Vec<AyState> {
        let mut out = vec![AyState::start(p)];
        for i in 1..m.len() {
            let next = out[i - 1].clone().step(p, m[i - 1], s[i - 1], m[i], s[i]).unwrap();
            out.push(next);
        }
        out
    }

    #[test]
    fn initial_state_for_log() {
        let st = AyState::start(&Potential::log());
        assert_eq!((st.y, st.y_max, st.b, st.bregman_sum), (1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn flat_max_step_is_a_martingale_increment() {
        let p = Potential::log();
        let st = AyState::start(&p).step(&p, 1.0, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(st.bregman_sum, 0.0);
        assert!((st.y - 0.5).abs() < 1e-15);
        assert!((st.b - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decreasing_max_is_rejected() {
        let p = Potential::log();
        let st = AyState::start(&p);
        assert!(matches!(
            st.step(&p, 1.0, 2.0, 1.0, 1.5),
            Err(Error::InvalidPath { .. })
        ));
    }

    #[test]
    fn pathwise_properties_on_simulated_paths() {
        for p in [
            Potential::log(),
            Potential::power(0.5).unwrap(),
            Potential::tail_quantile_of(DistributionModel::pareto(2.0).unwrap()).unwrap(),
        ] {
            let (m, s) = gaussian_path(7, 400, 0.3);
            let states = run(&p, &m, &s);
            let mut running = f64::NEG_INFINITY;
            for (i, st) in states.iter().enumerate() {
                running = running.max(st.y);
                assert_eq!(running, p.value(s[i]));
                assert!(st.y + 1e-12 >= p.g(s[i]));
                if m[i] >= p.domain_min().max(1e-300) {
                    assert!(st.y + 1e-12 >= p.value(m[i]));
                }
                if i > 0 {
                    let lhs = st.y - states[i - 1].y;
                    let rhs = (m[i] - m[i - 1]) * p.slope(s[i - 1]) - bregman(&p, s[i], s[i - 1]);
                    assert!((lhs - rhs).abs() < 1e-12 * p.value(s[i]).max(1.0), "{lhs} {rhs}");
                }
            }
            assert!(bachelier_residual(&states) < 1e-12);
        }
    }

    #[test]
    fn forms_agree() {
        let p = Potential::power(0.5).unwrap();
        let f = ay_forms(&p, 1.0, 4.0);
        for v in f {
            assert!((v - 2.5).abs() < 1e-14, "{f:?}");
        }
    }

    #[test]
    fn bregman_is_nonnegative() {
        let p = Potential::log();
        for (a, b) in [(1.0, 2.0), (2.0, 1.0), (10.0, 1.5), (1.5, 1.5)] {
            assert!(bregman(&p, a, b) >= 0.0);
        }
    }

    #[test]
    fn mm_hand_example() {
        let (m, s) = mm_decompose(&[1.0, 1.5], &Potential::log()).unwrap();
        assert_eq!(m, vec![1.0, 1.5]);
        assert_eq!(s, vec![1.0, 1.5]);
        let (m, s) = mm_decompose(&[1.0; 5], &Potential::log()).unwrap();
        assert!(m.iter().chain(&s).all(|&v| v == 1.0));
    }

    #[test]
    fn mm_errors() {
        assert!(matches!(
            mm_decompose(&[2.0, 1.5], &Potential::log()),
            Err(Error::InitialCondition { .. })
        ));
        let flat = Potential::power(0.0).unwrap();
        assert!(matches!(
            mm_decompose(&[1.0, 1.5], &flat),
            Err(Error::DegeneratePotential { .. })
        ));
    }

    #[test]
    fn mm_roundtrip() {
        for p in [Potential::log(), Potential::power(0.5).unwrap()] {
            let (m, s) = gaussian_path(11, 1000, 0.2);
            let states = run(&p, &m, &s);
            let b: Vec<f64> = states.iter().map(|st| st.b).collect();
            let (m2, s2) = mm_decompose(&b, &p).unwrap();
            let err = m.iter().zip(&m2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{err}");
            let err = s.iter().zip(&s2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{err}");
        }
    }

    #[test]
    fn maxplus_examples() {
        assert_eq!(maxplus_lower(&Potential::log(), 1.0), 0.0);
        let v = maxplus_lower(&Potential::power(0.5).unwrap(), 4.0);
        assert!((v - 2.0).abs() < 1e-14);
        assert_eq!(expected_ultimate_max(&Potential::log()), 1.0);
        assert!((expected_ultimate_max(&Potential::power(0.5).unwrap()) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn stop_rule_fires_when_martingale_vanishes() {
        let mu = DistributionModel::Uniform01;
        let p = Potential::tail_quantile_of(mu.clone()).unwrap();
        let st = AyState::start(&p).step(&p, 1.0, 1.0, 2.0, 2.0).unwrap();
        assert!(!ay_stop_rule(&st, &mu, 2.0));
        let st = st.step(&p, 2.0, 2.0, 0.0, 2.0).unwrap();
        assert!(ay_stop_rule(&st, &mu, 2.0));
    }

    #[test]
    fn degenerate_stop_rule_is_trivial() {
        let sample = DistributionModel::empirical(vec![1.0; 10]).unwrap();
        let report = stopped_max_dominance_check(&[1.0; 10], &[1.0; 10], &sample, 1, 0.01).unwrap();
        assert!(report.holds());
    }

    #[test]
    fn argmax_stopping_fails_the_precheck() {
        let mu = DistributionModel::Uniform01;
        let stopped = vec![1.5; 1000];
        let report = stopped_max_dominance_check(&stopped, &stopped, &mu, 1, 0.01).unwrap();
        assert_eq!(report.status, PrecheckStatus::RejectedPrecondition);
        assert!(report.dominance.is_none());
    }

    #[test]
    fn q_bound_holds_on_a_path() {
        let (m, s) = gaussian_path(3, 500, 1.0);
        let mut ex = crate::extrema::ExtremaState::new();
        let mut q = vec![0.0];
        for i in 1..m.len() {
            ex = ex.update(m[i - 1], s[i - 1], m[i], s[i]).unwrap();
            q.push(ex.q());
        }
        assert!(q_logmax_bound_check(&q, &m, &s) <= 1e-12);
    }
}
