//! Monte Carlo layer: ON/OFF trajectories, realized overlap, Rayleigh gains,
//! and the experiment sweeps built on top of them.
//!
//! All randomness comes from `ChaCha8Rng`. Independent pieces of work draw
//! from their own stream of the same seed (see [`stream_rng`]) so results do
//! not depend on the order in which parallel work finishes.

pub mod experiment;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};

use crate::ctmc::{stationary_on_prob, CtmcParams, Placement, Sensed};
use crate::error::{check_domain, Error, Result};

pub use experiment::{run_experiment, CurveRow, ExperimentConfig, ExperimentMode, GainModel, OverlapCurve};

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sample path of one band: its state at time 0 and the sorted jump times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: Sensed,
    pub jumps: Vec<f64>,
    pub horizon: f64,
}

impl Trajectory {
    pub fn state_at(&self, t: f64) -> Sensed {
        let flips = self.jumps.partition_point(|&j| j <= t);
        if flips % 2 == 0 {
            self.initial
        } else {
            flip(self.initial)
        }
    }

    /// Total ON time inside `[a, b]`.
    pub fn on_time(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        let mut state = self.initial;
        let mut seg_start = 0.0_f64;
        for &jump in self.jumps.iter().chain(std::iter::once(&self.horizon)) {
            if state.is_busy() {
                let lo = seg_start.max(a);
                let hi = jump.min(b);
                if hi > lo {
                    total += hi - lo;
                }
            }
            if jump >= b {
                break;
            }
            seg_start = jump;
            state = flip(state);
        }
        total
    }
}

fn flip(s: Sensed) -> Sensed {
    match s {
        Sensed::Idle => Sensed::Busy,
        Sensed::Busy => Sensed::Idle,
    }
}

/// Alternating exponential holding times: rate `lambda` while OFF, `mu` while ON.
pub fn sample_trajectory<R: Rng + ?Sized>(
    params: &CtmcParams,
    horizon: f64,
    x0: Sensed,
    rng: &mut R,
) -> Result<Trajectory> {
    params.validate()?;
    check_domain("horizon", horizon, "(0, inf)", horizon.is_finite() && horizon > 0.0)?;
    let off = Exp::new(params.lambda).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let on = Exp::new(params.mu).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let mut state = x0;
    loop {
        t += match state {
            Sensed::Idle => off.sample(rng),
            Sensed::Busy => on.sample(rng),
        };
        if t > horizon {
            break;
        }
        jumps.push(t);
        state = flip(state);
    }
    Ok(Trajectory {
        initial: x0,
        jumps,
        horizon,
    })
}

/// State drawn from the stationary law, i.e. a perfect sensing reading of a band in steady state.
pub fn sample_stationary_state<R: Rng + ?Sized>(params: &CtmcParams, rng: &mut R) -> Result<Sensed> {
    let on = stationary_on_prob(params)?;
    Ok(if rng.random::<f64>() < on { Sensed::Busy } else { Sensed::Idle })
}

/// Seconds of ON time inside the placement interval.
pub fn realized_overlap(traj: &Trajectory, placement: &Placement) -> f64 {
    traj.on_time(placement.start, placement.end.min(traj.horizon))
}

/// `n` i.i.d. power gains `|h|^2` of a Rayleigh channel with mean `mean`.
pub fn sample_rayleigh_gains<R: Rng + ?Sized>(mean: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    check_domain("mean", mean, "(0, inf)", mean.is_finite() && mean > 0.0)?;
    Ok((0..n).map(|_| draw_gain(mean, rng)).collect())
}

/// One Rayleigh power gain per entry of `means`.
pub fn sample_rayleigh_gains_with_means<R: Rng + ?Sized>(means: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    means
        .iter()
        .map(|&m| {
            check_domain("mean", m, "(0, inf)", m.is_finite() && m > 0.0)?;
            Ok(draw_gain(m, rng))
        })
        .collect()
}

fn draw_gain<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    // Exp1 can return exactly 0; gains must stay strictly positive.
    mean * e.max(f64::MIN_POSITIVE)
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for x in values {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Self {
            mean,
            stderr: (var / n.max(1) as f64).sqrt(),
            samples: n,
        }
    }

    /// Number of standard errors separating the estimate from `value`.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (self.mean - value).abs();
        if self.stderr > 0.0 {
            diff / self.stderr
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Monte Carlo estimate of `Pr(X(tau) = 1 | X(0) = from)`.
pub fn mc_on_probability<R: Rng + ?Sized>(
    params: &CtmcParams,
    from: Sensed,
    tau: f64,
    trials: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let horizon = tau.max(f64::MIN_POSITIVE);
    let mut hits = Vec::with_capacity(trials);
    for _ in 0..trials {
        let traj = sample_trajectory(params, horizon, from, rng)?;
        hits.push(if traj.state_at(tau).is_busy() { 1.0 } else { 0.0 });
    }
    Ok(Estimate::from_samples(hits))
}

/// Monte Carlo estimate of the overlap fraction of a `rho T` transmission
/// placed by the optimal placement rule after sensing `sensed`.
pub fn mc_overlap<R: Rng + ?Sized>(
    params: &CtmcParams,
    frame: f64,
    rho: f64,
    sensed: Sensed,
    trials: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let placement = crate::ctmc::optimal_placement(sensed, rho, frame)?;
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let traj = sample_trajectory(params, frame, sensed, rng)?;
        values.push(realized_overlap(&traj, &placement) / frame);
    }
    Ok(Estimate::from_samples(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::{overlap_idle, transition_matrix};

    #[test]
    fn nearly_absorbing_off_state_never_jumps() {
        let p = CtmcParams::new(1e-9, 1.0).unwrap();
        let mut rng = stream_rng(1, 0);
        for _ in 0..1000 {
            let t = sample_trajectory(&p, 10.0, Sensed::Idle, &mut rng).unwrap();
            assert!(t.jumps.is_empty());
        }
    }

    #[test]
    fn jumps_sorted_within_horizon() {
        let p = CtmcParams::new(3.0, 2.0).unwrap();
        let mut rng = stream_rng(2, 0);
        let t = sample_trajectory(&p, 50.0, Sensed::Busy, &mut rng).unwrap();
        assert!(t.jumps.windows(2).all(|w| w[0] < w[1]));
        assert!(t.jumps.iter().all(|&j| (0.0..=50.0).contains(&j)));
    }

    #[test]
    fn ergodic_on_fraction() {
        let p = CtmcParams::new(2.0, 3.0).unwrap();
        let horizon = 1e4 / p.total_rate();
        let mut rng = stream_rng(3, 0);
        // Batch means over independent long paths give an honest standard error.
        let fractions: Vec<f64> = (0..50)
            .map(|_| {
                let t = sample_trajectory(&p, horizon, Sensed::Idle, &mut rng).unwrap();
                t.on_time(0.0, horizon) / horizon
            })
            .collect();
        let est = Estimate::from_samples(fractions);
        assert!(est.z_score(0.4) < 3.0, "{est:?}");
    }

    #[test]
    fn on_probability_matches_transition_matrix() {
        let p = CtmcParams::new(1.3, 0.6).unwrap();
        let mut rng = stream_rng(4, 0);
        let est = mc_on_probability(&p, Sensed::Idle, 0.7, 100_000, &mut rng).unwrap();
        let exact = transition_matrix(&p, 0.7).unwrap().0[0][1];
        assert!(est.z_score(exact) < 3.0, "{est:?} vs {exact}");
    }

    #[test]
    fn overlap_edge_cases() {
        let always_off = Trajectory { initial: Sensed::Idle, jumps: vec![], horizon: 1.0 };
        assert_eq!(realized_overlap(&always_off, &Placement { start: 0.0, end: 1.0 }), 0.0);
        let t = Trajectory { initial: Sensed::Busy, jumps: vec![0.2, 0.5, 0.9], horizon: 1.0 };
        assert_eq!(realized_overlap(&t, &Placement { start: 0.3, end: 0.3 }), 0.0);
        // ON on [0, 0.2] and [0.5, 0.9].
        assert!((realized_overlap(&t, &Placement { start: 0.0, end: 1.0 }) - 0.6).abs() < 1e-15);
        assert!((realized_overlap(&t, &Placement { start: 0.1, end: 0.6 }) - 0.2).abs() < 1e-15);
        assert_eq!(t.state_at(0.3), Sensed::Idle);
        assert_eq!(t.state_at(0.95), Sensed::Idle);
        assert_eq!(t.state_at(0.6), Sensed::Busy);
    }

    #[test]
    fn idle_overlap_matches_closed_form() {
        let p = CtmcParams::new(1.0, 1.0).unwrap();
        let mut rng = stream_rng(5, 0);
        let est = mc_overlap(&p, 1.0, 0.6, Sensed::Idle, 100_000, &mut rng).unwrap();
        let exact = overlap_idle(&p, 1.0, 0.6).unwrap();
        assert!(est.z_score(exact) < 3.0, "{est:?} vs {exact}");
    }

    #[test]
    fn rayleigh_moments() {
        let mut rng = stream_rng(6, 0);
        let g = sample_rayleigh_gains(2.5, 1_000_000, &mut rng).unwrap();
        assert!(g.iter().all(|&x| x > 0.0));
        let est = Estimate::from_samples(g.iter().copied());
        assert!((est.mean / 2.5 - 1.0).abs() < 0.01);
        let var = est.stderr.powi(2) * g.len() as f64;
        assert!((var / 6.25 - 1.0).abs() < 0.03);
        assert!(sample_rayleigh_gains(0.0, 3, &mut rng).is_err());
    }

    #[test]
    fn streams_are_independent_of_order() {
        let a: f64 = stream_rng(9, 3).random();
        let _: f64 = stream_rng(9, 1).random();
        let b: f64 = stream_rng(9, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, stream_rng(9, 4).random::<f64>());
    }
}
