use coex_core::avg_alloc::{
    evaluate_policy, idle_frame_reference, no_sensing_reference, sensing_probability, solve_optimal, solve_p2,
    solve_p3, ChannelDistribution, ChannelKind, IdleFallback, OutcomeAllocation, Policy, RealizationPolicy, Scheme,
};
use coex_core::ctmc::{overlap, CtmcParams, Sensed};
use coex_core::frame_alloc::dual::Tolerances;
use coex_core::frame_alloc::{max_rate, solve_p1, Duals, ProblemSpec, SensingOutcome};
use coex_core::sim::stream_rng;
use coex_core::Error;
use rand::Rng;

const TOL: Tolerances = Tolerances { eps_rate: 1e-9, eps_power: 1e-9 };

fn spec(frame: f64, bands: Vec<(f64, f64)>, band_of: Vec<usize>, beta: Vec<f64>, power: f64, rate: f64) -> ProblemSpec {
    ProblemSpec {
        frame,
        rate,
        power,
        beta,
        band_of,
        bands: bands.into_iter().map(|(l, m)| CtmcParams::new(l, m).unwrap()).collect(),
    }
}

// Reference values from a general-purpose conic solver (exponential cone)
// applied to the same programs, solved to 1e-10 gaps.
#[test]
fn single_channel_matches_conic_solver() {
    let cases = [
        (1.0, 1.0, 1.0, 1.5, 1.0, 0.4, 0.025454418657999536),
        (2.0, 0.5, 0.5, 0.8, 2.0, 0.6, 0.19721464986525133),
        (0.5, 3.0, 2.0, 3.0, 0.5, 0.5, 0.022074176601183847),
    ];
    for (l, m, t, b, p, r, expected) in cases {
        let s = spec(t, vec![(l, m)], vec![0], vec![b], p, r);
        let got = solve_p2(&s, TOL).unwrap().objective;
        assert!((got - expected).abs() < 1e-7, "{got} vs {expected}");
    }
}

#[test]
fn two_point_channel_matches_conic_solver() {
    let s = spec(1.0, vec![(1.0, 2.0)], vec![0, 0], vec![1.0, 1.0], 1.0, 0.6);
    let got = solve_optimal(&s, &[vec![1.5, 0.4], vec![0.6, 2.0]], TOL).unwrap().objective;
    assert!((got - 0.04942536860761204).abs() < 1e-7, "{got}");

    let s = spec(0.5, vec![(1.0, 1.0), (2.0, 1.0)], vec![0, 1], vec![1.0, 1.0], 0.8, 0.7);
    let got = solve_optimal(&s, &[vec![1.0, 0.5], vec![0.3, 2.5]], TOL).unwrap().objective;
    assert!((got - 0.2058453261721177).abs() < 1e-7, "{got}");
}

#[test]
fn evaluation_reproduces_solver_totals() {
    let mut rng = stream_rng(21, 0);
    for _ in 0..30 {
        let s = spec(
            rng.random_range(0.2..2.0),
            vec![(rng.random_range(0.2..3.0), rng.random_range(0.2..3.0)), (rng.random_range(0.2..3.0), rng.random_range(0.2..3.0))],
            vec![0, 1, 0, 1],
            (0..4).map(|_| rng.random_range(0.2..3.0)).collect(),
            rng.random_range(0.5..3.0),
            0.0,
        );
        let s = s.with_rate(rng.random_range(0.1..0.9) * max_rate(&s).unwrap());
        for policy in [
            solve_p2(&s, TOL).unwrap(),
            idle_frame_reference(&s, IdleFallback::AllowBusy, TOL).unwrap(),
            no_sensing_reference(&s, TOL).unwrap(),
        ] {
            let e = evaluate_policy(&policy, &s).unwrap();
            assert!((e.overlap - policy.objective).abs() < 1e-9, "{:?}", policy.scheme);
            assert!((e.rate - policy.average_rate).abs() < 1e-9);
            assert!((e.power - policy.average_power).abs() < 1e-9);
            assert!(e.rate >= s.rate * (1.0 - 1e-8) && e.power <= s.power * (1.0 + 1e-8));
        }
    }
}

#[test]
fn schemes_are_ordered_and_share_feasibility() {
    let mut rng = stream_rng(22, 0);
    for _ in 0..40 {
        let s = spec(
            rng.random_range(0.1..2.0),
            vec![(rng.random_range(0.2..3.0), rng.random_range(0.2..3.0))],
            vec![0; 3],
            (0..3).map(|_| rng.random_range(0.2..3.0)).collect(),
            rng.random_range(0.5..3.0),
            0.0,
        );
        let cap = max_rate(&s).unwrap();
        for k in 1..=12 {
            let s = s.with_rate(cap * k as f64 / 10.0);
            let results = [
                solve_p2(&s, TOL),
                idle_frame_reference(&s, IdleFallback::AllowBusy, TOL),
                no_sensing_reference(&s, TOL),
            ];
            let feasible: Vec<bool> = results.iter().map(|r| r.is_ok()).collect();
            assert!(feasible.iter().all(|&f| f == feasible[0]), "rate {k}: {feasible:?}");
            if let [Ok(opt), Ok(idle), Ok(none)] = &results {
                assert!(opt.objective <= idle.objective + 1e-9);
                assert!(opt.objective <= none.objective + 1e-9);
                // Idle-only transmission can light up more sub-channels than the
                // no-sensing scheme; it is guaranteed cheaper only when even all
                // of them together cost less than one stationary sub-channel.
                let band = s.bands[0];
                let idle_cost = sensing_probability(&band, Sensed::Idle).unwrap() * overlap(&band, s.frame, 1.0, Sensed::Idle).unwrap();
                if 3.0 * idle_cost <= coex_core::ctmc::stationary_on_prob(&band).unwrap() {
                    assert!(idle.objective <= none.objective + 1e-12);
                }
            } else {
                assert!(results.iter().all(|r| matches!(r, Err(Error::Infeasible { .. }))));
            }
        }
    }
}

#[test]
fn identical_outcome_allocations_reduce_to_frame_problem() {
    // One band; apply a frame-level allocation to both readings.
    let s = spec(1.0, vec![(1.5, 0.7)], vec![0, 0, 0], vec![0.8, 1.7, 1.1], 1.2, 0.5);
    let band = s.bands[0];
    let frame = solve_p1(&s, &SensingOutcome::all_idle(1), TOL).unwrap();
    let outcomes = [Sensed::Idle, Sensed::Busy]
        .into_iter()
        .map(|y| OutcomeAllocation {
            y: SensingOutcome { y: vec![y] },
            eta: sensing_probability(&band, y).unwrap(),
            p: frame.p.clone(),
            rho: frame.rho.clone(),
        })
        .collect();
    let policy = Policy {
        scheme: Scheme::Optimal,
        duals: Duals { gamma: 0.0, nu: 0.0 },
        realizations: vec![RealizationPolicy { beta: s.beta.clone(), weight: 1.0, outcomes }],
        objective: 0.0,
        average_rate: 0.0,
        average_power: 0.0,
        fallback: false,
    };
    let e = evaluate_policy(&policy, &s).unwrap();
    let mixture: f64 = [Sensed::Idle, Sensed::Busy]
        .iter()
        .map(|&y| {
            sensing_probability(&band, y).unwrap()
                * frame.rho.iter().map(|&r| overlap(&band, 1.0, r, y).unwrap()).sum::<f64>()
        })
        .sum();
    assert!((e.overlap - mixture).abs() < 1e-12);
    assert!((e.rate - frame.achieved_rate).abs() < 1e-12);
    // The averaged optimum can only do better than repeating one allocation.
    assert!(solve_p2(&s, TOL).unwrap().objective <= e.overlap + 1e-9);
}

#[test]
fn random_channel_average_is_stable() {
    let s = spec(1.0, vec![(1.0, 1.0)], vec![0; 3], vec![1.0; 3], 1.0, 0.6);
    let dist = |samples, seed| ChannelDistribution { kind: ChannelKind::RayleighIid, mean: vec![1.0; 3], samples, seed };
    let a = solve_p3(&s, &dist(500, 3), TOL).unwrap();
    let b = solve_p3(&s, &dist(500, 3), TOL).unwrap();
    assert_eq!(a, b);

    // Per-draw objectives of the doubled run give the Monte Carlo error bar.
    let big = solve_p3(&s, &dist(1000, 4), TOL).unwrap();
    let per_draw: Vec<f64> = big
        .realizations
        .iter()
        .map(|r| {
            let single = Policy { realizations: vec![RealizationPolicy { weight: 1.0, ..r.clone() }], ..big.clone() };
            evaluate_policy(&single, &ProblemSpec { beta: r.beta.clone(), ..s.clone() }).unwrap().overlap
        })
        .collect();
    let est = coex_core::sim::Estimate::from_samples(per_draw);
    assert!((a.objective - big.objective).abs() < 3.0 * est.stderr * 2f64.sqrt(), "{} vs {} (se {})", a.objective, big.objective, est.stderr);
}
