use coex_core::ctmc::{
    overlap, stationary_on_prob, transition_matrix, CtmcParams, Sensed,
};
use coex_core::avg_alloc::sensing_probability;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = CtmcParams> {
    (0.05f64..10.0, 0.05f64..10.0).prop_map(|(l, m)| CtmcParams::new(l, m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn rows_are_stochastic(p in params(), tau in 0.0f64..20.0) {
        let m = transition_matrix(&p, tau).unwrap().0;
        for row in m {
            prop_assert!((row[0] + row[1] - 1.0).abs() < 1e-10);
            prop_assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn chapman_kolmogorov(p in params(), t1 in 0.0f64..5.0, t2 in 0.0f64..5.0) {
        let a = transition_matrix(&p, t1).unwrap();
        let b = transition_matrix(&p, t2).unwrap();
        let ab = a.mul(&b);
        let direct = transition_matrix(&p, t1 + t2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((ab.0[i][j] - direct.0[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stationary_mixture_of_full_frame(p in params(), frame in 0.01f64..10.0) {
        let mix: f64 = [Sensed::Idle, Sensed::Busy]
            .iter()
            .map(|&y| sensing_probability(&p, y).unwrap() * overlap(&p, frame, 1.0, y).unwrap())
            .sum();
        prop_assert!((mix - stationary_on_prob(&p).unwrap()).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn overlap_strictly_convex_and_increasing(l in 0.1f64..5.0, m in 0.1f64..5.0, frame in 0.1f64..3.0) {
        let p = CtmcParams::new(l, m).unwrap();
        let step = 1e-3;
        for y in [Sensed::Idle, Sensed::Busy] {
            let v: Vec<f64> = (0..=1000).map(|k| overlap(&p, frame, k as f64 * step, y).unwrap()).collect();
            for w in v.windows(3) {
                prop_assert!(w[1] > w[0]);
                prop_assert!(w[2] - 2.0 * w[1] + w[0] > 0.0, "{y:?} {w:?}");
            }
        }
    }
}
