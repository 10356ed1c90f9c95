//! Property-based checks of the pathwise identities on arbitrary paths.

use peekstat::ay::{bregman, mm_decompose, AyState, MonotoneTable, Potential};
use peekstat::dist::{check_dominance, DistributionModel};
use peekstat::extrema::ExtremaState;
use peekstat::martingale::MixtureGrid;
use proptest::prelude::*;

/// A nonnegative path started at 1 from multiplicative factors.
fn path_from(factors: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut m = vec![1.0];
    let mut s = vec![1.0_f64];
    for &f in factors {
        let next = m[m.len() - 1] * f;
        m.push(next);
        s.push(s[s.len() - 1].max(next));
    }
    (m, s)
}

fn factors() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![0.0..3.0, Just(1.0), Just(0.0)], 1..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn extrema_identity_and_log_bound(fs in factors()) {
        let (m, s) = path_from(&fs);
        let mut ex = ExtremaState::new();
        for i in 1..m.len() {
            ex = ex.update(m[i - 1], s[i - 1], m[i], s[i]).unwrap();
            let scale = ex.q().abs().max(ex.l().abs()).max(1.0);
            prop_assert!(ex.identity_residual().abs() <= 1e-12 * scale);
            prop_assert!(ex.l() <= s[i].ln() + 1e-12);
            prop_assert!(ex.r() <= m[i] / s[i]);
        }
    }

    #[test]
    fn ay_process_properties(fs in factors(), a in 0.0..0.95_f64) {
        let (m, s) = path_from(&fs);
        for p in [Potential::log(), Potential::power(a).unwrap()] {
            let mut st = AyState::start(&p);
            let mut running = st.y;
            for i in 1..m.len() {
                let prev_y = st.y;
                st = st.step(&p, m[i - 1], s[i - 1], m[i], s[i]).unwrap();
                running = running.max(st.y);
                let big = p.value(s[i]);
                let tol = 1e-10 * big.abs().max(1.0);
                prop_assert_eq!(running, big);
                prop_assert!(st.y <= big && st.y + tol >= p.g(s[i]));
                let rhs = (m[i] - m[i - 1]) * p.slope(s[i - 1]) - bregman(&p, s[i], s[i - 1]);
                prop_assert!((st.y - prev_y - rhs).abs() <= tol);
                prop_assert!((st.b - st.y - st.bregman_sum).abs() <= tol);
            }
        }
    }

    #[test]
    fn mm_decomposition_inverts_the_bachelier_map(fs in prop::collection::vec(0.2..3.0_f64, 1..300)) {
        let (m, s) = path_from(&fs);
        let p = Potential::log();
        let mut st = AyState::start(&p);
        let mut b = vec![st.b];
        for i in 1..m.len() {
            st = st.step(&p, m[i - 1], s[i - 1], m[i], s[i]).unwrap();
            b.push(st.b);
        }
        let (m2, s2) = mm_decompose(&b, &p).unwrap();
        for i in 0..m.len() {
            let tol = 1e-9 * s[i].max(1.0);
            prop_assert!((m[i] - m2[i]).abs() <= tol);
            prop_assert!((s[i] - s2[i]).abs() <= tol);
        }
    }

    #[test]
    fn potential_recovers_its_score(sv in 1.0..1e4_f64, a in 0.0..0.95_f64) {
        for p in [
            Potential::log(),
            Potential::power(a).unwrap(),
            Potential::tail_quantile_of(DistributionModel::pareto(1.0 + 1.0 / (1.0 - a)).unwrap()).unwrap(),
        ] {
            let e = p.eval(sv).unwrap();
            prop_assert!((e.g - (e.value - sv * e.slope)).abs() <= 1e-9 * e.value.abs().max(1.0));
            prop_assert!(e.slope >= 0.0);
        }
    }

    #[test]
    fn superquantile_dominates_quantile(xi in 1e-6..1.0_f64, alpha in 1.1..6.0_f64) {
        for mu in [
            DistributionModel::Uniform01,
            DistributionModel::pareto(alpha).unwrap(),
            DistributionModel::exponential(alpha).unwrap(),
        ] {
            let q = mu.tail_quantile(xi).unwrap();
            let sq = mu.superquantile(xi).unwrap();
            prop_assert!(sq + 1e-12 >= q);
            prop_assert!(sq <= mu.superquantile(xi * 0.5).unwrap() + 1e-12);
        }
    }

    #[test]
    fn shifting_up_preserves_dominance(xs in prop::collection::vec(-10.0..10.0_f64, 1..200), shift in 0.0..5.0_f64) {
        let ys: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        prop_assert!(check_dominance(&ys, &xs, 0.05).unwrap().holds());
        prop_assert_eq!(check_dominance(&xs, &xs, 0.05).unwrap().max_violation, 0.0);
    }

    #[test]
    fn mixture_log_value_matches_direct_sum(z in -30.0..30.0_f64, v in 1.0..1e4_f64) {
        let grid = MixtureGrid::geometric(4.0, 1.3, 30, 1.4).unwrap();
        let direct: f64 = grid
            .lambdas()
            .iter()
            .zip(grid.weights())
            .map(|(l, w)| w * (l * z - 0.5 * l * l * v).exp())
            .sum();
        prop_assume!(direct > 1e-300 && direct < 1e300);
        prop_assert!((grid.log_value(z, v) - direct.ln()).abs() <= 1e-10 * direct.ln().abs().max(1.0));
    }

    #[test]
    fn pchip_stays_monotone(steps in prop::collection::vec((0.1..2.0_f64, 0.0..3.0_f64), 2..12), probe in 0.0..1.0_f64) {
        let mut x = 0.5;
        let mut y = 0.0;
        let mut pts = vec![[x, y]];
        for (dx, dy) in steps {
            x += dx;
            y += dy;
            pts.push([x, y]);
        }
        let t = MonotoneTable::new(&pts).unwrap();
        let lo = pts[0][0] * 0.5;
        let hi = x * 1.5;
        let a = lo + (hi - lo) * probe;
        let b = a + (hi - lo) * 0.01;
        prop_assert!(t.eval(b) + 1e-12 >= t.eval(a));
        prop_assert!(t.eval(a) >= pts[0][1] - 1e-12 && t.eval(a) <= y + 1e-12);
    }
}
