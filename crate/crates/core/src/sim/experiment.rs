//! Rate sweeps comparing the optimal allocation with the reference schemes.
//!
//! In [`ExperimentMode::Average`] each channel realization is held fixed
//! (block fading) and the sensing-averaged problem is solved per realization;
//! realizations whose rate exceeds the water-filling capacity count as outage
//! and are left out of the overlap average. In
//! [`ExperimentMode::RandomChannel`] the draws form the sample set of a single
//! problem averaged over the channel as well.
//!
//! Realization `r` always uses stream `r` of the configured seed, so every
//! rate point and every scheme sees the same channels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::avg_alloc::{
    idle_frame_over, no_sensing_over, solve_optimal, IdleFallback, Policy, Scheme,
};
use crate::ctmc::{optimal_placement, CtmcParams, Sensed};
use crate::error::{Error, Result};
use crate::frame_alloc::dual::Tolerances;
use crate::frame_alloc::{ProblemSpec, SensingOutcome};

use super::{
    realized_overlap, sample_rayleigh_gains_with_means, sample_stationary_state, sample_trajectory,
    stream_rng, Estimate,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentMode {
    /// Fixed channel per realization, expectation over sensing outcomes.
    Average,
    /// Expectation over sensing outcomes and the channel draws.
    RandomChannel,
}

/// Where the channel gains of each realization come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainModel {
    /// The same gains in every realization.
    Fixed(Vec<f64>),
    /// Independent Rayleigh power gains with these means.
    Rayleigh(Vec<f64>),
}

impl GainModel {
    pub fn channels(&self) -> usize {
        match self {
            GainModel::Fixed(v) | GainModel::Rayleigh(v) => v.len(),
        }
    }

    /// Per-channel means: the gains themselves when fixed.
    pub fn means(&self) -> &[f64] {
        match self {
            GainModel::Fixed(v) | GainModel::Rayleigh(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    /// Frame length, seconds.
    pub frame: f64,
    pub bands: Vec<CtmcParams>,
    pub band_of: Vec<usize>,
    pub gains: GainModel,
    pub power: f64,
    /// Rate targets, nats.
    pub rates: Vec<f64>,
    /// Channel draws: realizations in average mode, the sample set in random-channel mode.
    pub realizations: usize,
    /// Simulated frames per realization and scheme; 0 disables simulation.
    pub trajectories: usize,
    pub seed: u64,
    pub tol: Tolerances,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::InvalidParams("need at least one channel realization".into()));
        }
        if self.rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidParams("rates must be finite and nonnegative".into()));
        }
        if self.gains.channels() != self.band_of.len() {
            return Err(Error::DimensionMismatch("gains and band_of lengths differ".into()));
        }
        self.spec(self.gains.means().to_vec(), 0.0).validate()
    }

    pub fn spec(&self, beta: Vec<f64>, rate: f64) -> ProblemSpec {
        ProblemSpec {
            frame: self.frame,
            rate,
            power: self.power,
            beta,
            band_of: self.band_of.clone(),
            bands: self.bands.clone(),
        }
    }

    /// Gains of realization `r`.
    pub fn draw(&self, r: usize) -> Result<Vec<f64>> {
        match &self.gains {
            GainModel::Fixed(beta) => Ok(beta.clone()),
            GainModel::Rayleigh(means) => sample_rayleigh_gains_with_means(means, &mut stream_rng(self.seed, r as u64)),
        }
    }

    pub fn draws(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.realizations).map(|r| self.draw(r)).collect()
    }
}

/// One rate point of one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    /// Rate target, nats.
    pub rate_target: f64,
    /// Mean achieved rate over non-outage realizations, nats.
    pub achieved_rate: f64,
    pub overlap_mean: f64,
    pub overlap_stderr: f64,
    pub outage: f64,
    pub sum_power: f64,
    /// Monte Carlo overlap from simulated trajectories, when enabled.
    pub simulated_mean: Option<f64>,
    pub simulated_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapCurve {
    pub scheme: String,
    pub rows: Vec<CurveRow>,
}

/// Name of the per-realization comparison curve in random-channel mode.
pub const PER_REALIZATION_CURVE: &str = "per-realization";

/// Run the configured sweep; one curve per scheme, in the order
/// optimal, idle-frame, no-sensing (plus the per-realization curve in
/// random-channel mode).
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<OverlapCurve>> {
    config.validate()?;
    match config.mode {
        ExperimentMode::Average => run_average(config),
        ExperimentMode::RandomChannel => run_random_channel(config),
    }
}

/// Result of one scheme on one realization.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    overlap: f64,
    rate: f64,
    power: f64,
    simulated: Option<(f64, f64, usize)>,
}

fn solve_scheme(scheme: Scheme, spec: &ProblemSpec, draws: &[Vec<f64>], fallback: IdleFallback, tol: Tolerances) -> Result<Policy> {
    match scheme {
        Scheme::Optimal => solve_optimal(spec, draws, tol),
        Scheme::IdleFrame => idle_frame_over(spec, draws, fallback, tol),
        Scheme::NoSensing => no_sensing_over(spec, draws, tol),
    }
}

fn run_average(config: &ExperimentConfig) -> Result<Vec<OverlapCurve>> {
    let draws = config.draws()?;
    let mut curves: Vec<OverlapCurve> = Scheme::ALL
        .iter()
        .map(|s| OverlapCurve { scheme: s.name().to_string(), rows: Vec::new() })
        .collect();

    for (ri, &rate) in config.rates.iter().enumerate() {
        // results[r][scheme]; None marks outage.
        let results: Vec<Vec<Option<Outcome>>> = draws
            .par_iter()
            .enumerate()
            .map(|(r, beta)| {
                let spec = config.spec(beta.clone(), rate);
                Scheme::ALL
                    .iter()
                    .enumerate()
                    .map(|(si, &scheme)| {
                        match solve_scheme(scheme, &spec, std::slice::from_ref(beta), IdleFallback::AllowBusy, config.tol) {
                            Ok(policy) => {
                                let simulated = if config.trajectories > 0 {
                                    let stream = sim_stream(r, ri, si, config.rates.len());
                                    Some(simulate_policy(&policy, &spec, config.trajectories, config.seed, stream)?)
                                } else {
                                    None
                                };
                                Ok(Some(Outcome {
                                    overlap: policy.objective,
                                    rate: policy.average_rate,
                                    power: policy.average_power,
                                    simulated,
                                }))
                            }
                            Err(Error::Infeasible { .. }) => Ok(None),
                            Err(e) => Err(e),
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        for (si, curve) in curves.iter_mut().enumerate() {
            let column: Vec<Option<Outcome>> = results.iter().map(|row| row[si]).collect();
            curve.rows.push(aggregate(rate, &column));
        }
    }
    Ok(curves)
}

fn sim_stream(realization: usize, rate_index: usize, scheme_index: usize, rates: usize) -> u64 {
    // Streams below 2^32 are reserved for the channel draws.
    (1u64 << 32) + ((realization * rates + rate_index) * Scheme::ALL.len() + scheme_index) as u64
}

fn aggregate(rate: f64, column: &[Option<Outcome>]) -> CurveRow {
    let ok: Vec<&Outcome> = column.iter().flatten().collect();
    let overlap = Estimate::from_samples(ok.iter().map(|o| o.overlap));
    let mean = |f: fn(&Outcome) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|o| f(o)).sum::<f64>() / ok.len() as f64
        }
    };
    let (mut sim_sum, mut sim_sq, mut sim_n) = (0.0, 0.0, 0usize);
    let mut any_sim = false;
    for o in &ok {
        if let Some((sum, sq, n)) = o.simulated {
            any_sim = true;
            sim_sum += sum;
            sim_sq += sq;
            sim_n += n;
        }
    }
    let (simulated_mean, simulated_stderr) = if any_sim && sim_n > 1 {
        let m = sim_sum / sim_n as f64;
        let var = (sim_sq - sim_n as f64 * m * m).max(0.0) / (sim_n - 1) as f64;
        (Some(m), Some((var / sim_n as f64).sqrt()))
    } else {
        (None, None)
    };
    CurveRow {
        rate_target: rate,
        achieved_rate: mean(|o| o.rate),
        overlap_mean: if ok.is_empty() { f64::NAN } else { overlap.mean },
        overlap_stderr: if ok.is_empty() { f64::NAN } else { overlap.stderr },
        outage: (column.len() - ok.len()) as f64 / column.len() as f64,
        sum_power: mean(|o| o.power),
        simulated_mean,
        simulated_stderr,
    }
}

/// Simulate `frames` frames of a single-realization policy: draw each band's
/// state from the stationary law, read the allocation for that outcome, place
/// every transmission by the placement rule and measure the ON time it hits.
/// Returns the sum, sum of squares and count of the per-frame overlaps.
pub fn simulate_policy(policy: &Policy, spec: &ProblemSpec, frames: usize, seed: u64, stream: u64) -> Result<(f64, f64, usize)> {
    let real = policy
        .realizations
        .first()
        .ok_or_else(|| Error::InvalidParams("policy has no realizations".into()))?;
    let mut rng = stream_rng(seed, stream);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..frames {
        let y = spec
            .bands
            .iter()
            .map(|b| sample_stationary_state(b, &mut rng))
            .collect::<Result<Vec<Sensed>>>()?;
        let index = outcome_index(&y);
        let alloc = &real.outcomes[index];
        debug_assert_eq!(alloc.y, SensingOutcome { y: y.clone() });
        let trajectories = spec
            .bands
            .iter()
            .zip(&y)
            .map(|(b, &s)| sample_trajectory(b, spec.frame, s, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut frame_overlap = 0.0;
        for (ch, &rho) in alloc.rho.iter().enumerate() {
            if rho > 0.0 {
                let band = spec.band_of[ch];
                let placement = optimal_placement(y[band], rho, spec.frame)?;
                frame_overlap += realized_overlap(&trajectories[band], &placement) / spec.frame;
            }
        }
        sum += frame_overlap;
        sq += frame_overlap * frame_overlap;
    }
    Ok((sum, sq, frames))
}

fn outcome_index(y: &[Sensed]) -> usize {
    y.iter().enumerate().map(|(i, s)| (s.bit() as usize) << i).sum()
}

fn run_random_channel(config: &ExperimentConfig) -> Result<Vec<OverlapCurve>> {
    let draws = config.draws()?;
    let mut curves: Vec<OverlapCurve> = Scheme::ALL
        .iter()
        .map(|s| s.name())
        .chain(std::iter::once(PER_REALIZATION_CURVE))
        .map(|name| OverlapCurve { scheme: name.to_string(), rows: Vec::new() })
        .collect();

    for &rate in &config.rates {
        let spec = config.spec(config.gains.means().to_vec(), rate);
        let joint: Vec<CurveRow> = Scheme::ALL
            .par_iter()
            .map(|&scheme| match solve_scheme(scheme, &spec, &draws, IdleFallback::Strict, config.tol) {
                Ok(policy) => joint_row(rate, &policy, &spec),
                Err(Error::Infeasible { .. }) => Ok(outage_row(rate)),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;

        let per: Vec<Option<Outcome>> = draws
            .par_iter()
            .map(|beta| match solve_optimal(&config.spec(beta.clone(), rate), std::slice::from_ref(beta), config.tol) {
                Ok(p) => Ok(Some(Outcome {
                    overlap: p.objective,
                    rate: p.average_rate,
                    power: p.average_power,
                    simulated: None,
                })),
                Err(Error::Infeasible { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;

        for (curve, row) in curves.iter_mut().zip(joint) {
            curve.rows.push(row);
        }
        curves[3].rows.push(aggregate(rate, &per));
    }
    Ok(curves)
}

/// Row for a policy solved jointly over the sample set; the standard error
/// is that of the Monte Carlo average over draws.
fn joint_row(rate: f64, policy: &Policy, spec: &ProblemSpec) -> Result<CurveRow> {
    let per_draw = policy
        .realizations
        .iter()
        .map(|real| {
            let single = Policy {
                realizations: vec![crate::avg_alloc::RealizationPolicy { weight: 1.0, ..real.clone() }],
                ..policy.clone()
            };
            let s = ProblemSpec { beta: real.beta.clone(), ..spec.clone() };
            Ok(crate::avg_alloc::evaluate_policy(&single, &s)?.overlap)
        })
        .collect::<Result<Vec<f64>>>()?;
    let est = Estimate::from_samples(per_draw);
    Ok(CurveRow {
        rate_target: rate,
        achieved_rate: policy.average_rate,
        overlap_mean: policy.objective,
        overlap_stderr: est.stderr,
        outage: 0.0,
        sum_power: policy.average_power,
        simulated_mean: None,
        simulated_stderr: None,
    })
}

fn outage_row(rate: f64) -> CurveRow {
    CurveRow {
        rate_target: rate,
        achieved_rate: f64::NAN,
        overlap_mean: f64::NAN,
        overlap_stderr: f64::NAN,
        outage: 1.0,
        sum_power: f64::NAN,
        simulated_mean: None,
        simulated_stderr: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(mode: ExperimentMode, frame: f64, rates: Vec<f64>) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            frame,
            bands: vec![CtmcParams::new(1.0, 1.0).unwrap()],
            band_of: vec![0; 5],
            gains: GainModel::Rayleigh(vec![1.0; 5]),
            power: 1.0,
            rates,
            realizations: 20,
            trajectories: 0,
            seed: 7,
            tol: Tolerances::default(),
        }
    }

    #[test]
    fn zero_rate_has_no_overlap_or_outage() {
        let curves = run_experiment(&config(ExperimentMode::Average, 1.0, vec![0.0])).unwrap();
        assert_eq!(curves.len(), 3);
        for c in &curves {
            assert_eq!(c.rows[0].overlap_mean, 0.0);
            assert_eq!(c.rows[0].outage, 0.0);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = config(ExperimentMode::Average, 1.0, vec![0.2, 0.6]);
        assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
        let mut other = cfg.clone();
        other.seed = 8;
        assert_ne!(run_experiment(&cfg).unwrap(), run_experiment(&other).unwrap());
    }

    #[test]
    fn outage_shared_across_schemes() {
        let curves = run_experiment(&config(ExperimentMode::Average, 1.0, vec![0.5, 1.0, 1.5])).unwrap();
        for k in 0..3 {
            assert_eq!(curves[0].rows[k].outage, curves[1].rows[k].outage);
            assert_eq!(curves[0].rows[k].outage, curves[2].rows[k].outage);
        }
    }

    #[test]
    fn simulated_overlap_agrees_with_analytic() {
        let mut cfg = config(ExperimentMode::Average, 1.0, vec![0.4]);
        cfg.realizations = 3;
        cfg.trajectories = 20_000;
        let curves = run_experiment(&cfg).unwrap();
        for c in &curves {
            let row = &c.rows[0];
            let (m, se) = (row.simulated_mean.unwrap(), row.simulated_stderr.unwrap());
            assert!((m - row.overlap_mean).abs() < 4.0 * se, "{}: {row:?}", c.scheme);
        }
    }

    #[test]
    fn random_channel_mode_produces_four_curves() {
        let mut cfg = config(ExperimentMode::RandomChannel, 1.0, vec![0.3]);
        cfg.realizations = 50;
        let curves = run_experiment(&cfg).unwrap();
        assert_eq!(curves.len(), 4);
        assert_eq!(curves[3].scheme, PER_REALIZATION_CURVE);
        assert!(curves[0].rows[0].overlap_mean <= curves[3].rows[0].overlap_mean);
    }
}
