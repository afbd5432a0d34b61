//! Allocation with rate and power constraints met on average.
//!
//! Averaging over the sensing outcomes (and, for random channels, over the
//! channel draws) keeps the frame-level solution structure: one dual pair is
//! shared by every outcome and every draw. Because a sub-channel's
//! allocation only depends on the reading of its own band, the expectation
//! over the `2^M` outcomes reduces to a two-term mixture per sub-channel,
//! which is what the solver optimizes. Policies still expose the full
//! per-outcome table.
//!
//! Two reference schemes are provided: no sensing (power-minimizing
//! water-filling, full frames on every used sub-channel) and idle-frame
//! (full frames on idle sub-channels only, with an optional fallback).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctmc::{overlap, stationary_on_prob, CtmcParams, Sensed};
use crate::error::{Error, Result};
use crate::frame_alloc::dual::{Term, TermSet, Tolerances, WaterLevel};
use crate::frame_alloc::{achievable_rate, power_star, rho_star, Duals, ProblemSpec, SensingOutcome};
use crate::sim::sample_rayleigh_gains_with_means;

/// Default cap on the number of bands for which outcome tables are built.
pub const DEFAULT_MAX_BANDS: usize = 20;

/// All sensing outcomes with their product-form probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    pub outcomes: Vec<SensingOutcome>,
    pub eta: Vec<f64>,
}

impl OutcomeTable {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// Probability that `band` is sensed in state `sensed` (stationary law).
pub fn sensing_probability(band: &CtmcParams, sensed: Sensed) -> Result<f64> {
    let on = stationary_on_prob(band)?;
    Ok(match sensed {
        Sensed::Idle => band.mu / band.total_rate(),
        Sensed::Busy => on,
    })
}

pub fn outcome_table(bands: &[CtmcParams]) -> Result<OutcomeTable> {
    outcome_table_with_limit(bands, DEFAULT_MAX_BANDS)
}

/// Outcome `k` has band `i` busy iff bit `i` of `k` is set.
pub fn outcome_table_with_limit(bands: &[CtmcParams], max_bands: usize) -> Result<OutcomeTable> {
    let m = bands.len();
    if m == 0 {
        return Err(Error::InvalidParams("need at least one band".into()));
    }
    if m > max_bands {
        return Err(Error::SizeLimit {
            what: "sensing outcome table",
            size: 1u128 << m.min(127),
            limit: 1u128 << max_bands.min(127),
        });
    }
    let marginals = bands
        .iter()
        .map(|b| Ok([sensing_probability(b, Sensed::Idle)?, sensing_probability(b, Sensed::Busy)?]))
        .collect::<Result<Vec<_>>>()?;
    let count = 1usize << m;
    let mut outcomes = Vec::with_capacity(count);
    let mut eta = Vec::with_capacity(count);
    for k in 0..count {
        let y: Vec<Sensed> = (0..m)
            .map(|i| if (k >> i) & 1 == 1 { Sensed::Busy } else { Sensed::Idle })
            .collect();
        eta.push(y.iter().zip(&marginals).map(|(s, p)| p[s.bit() as usize]).product());
        outcomes.push(SensingOutcome { y });
    }
    Ok(OutcomeTable { outcomes, eta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Optimal,
    IdleFrame,
    NoSensing,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Optimal, Scheme::IdleFrame, Scheme::NoSensing];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Optimal => "optimal",
            Scheme::IdleFrame => "idle-frame",
            Scheme::NoSensing => "no-sensing",
        }
    }
}

/// What the idle-frame scheme does when idle sub-channels alone cannot meet the rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdleFallback {
    /// Use busy sub-channels too, i.e. the no-sensing allocation.
    AllowBusy,
    /// Report infeasibility with the idle-only capacity as certificate.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Fixed,
    RayleighIid,
}

/// Distribution of the sub-channel gains for the random-channel problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDistribution {
    pub kind: ChannelKind,
    /// Mean gain per sub-channel (the gain itself when `kind` is fixed).
    pub mean: Vec<f64>,
    /// Draws used to evaluate the expectations over the channel.
    pub samples: usize,
    pub seed: u64,
}

impl ChannelDistribution {
    pub fn validate(&self) -> Result<()> {
        if self.mean.is_empty() || self.mean.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidParams("mean gains must be positive".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParams("sample count must be at least 1".into()));
        }
        Ok(())
    }

    /// The fixed sample set: one point for a fixed channel, otherwise
    /// `samples` seeded Rayleigh draws.
    pub fn draws(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        match self.kind {
            ChannelKind::Fixed => Ok(vec![self.mean.clone()]),
            ChannelKind::RayleighIid => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..self.samples)
                    .map(|_| sample_rayleigh_gains_with_means(&self.mean, &mut rng))
                    .collect()
            }
        }
    }
}

/// Allocation used after one sensing outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeAllocation {
    pub y: SensingOutcome,
    pub eta: f64,
    pub p: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Allocations for one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationPolicy {
    pub beta: Vec<f64>,
    pub weight: f64,
    pub outcomes: Vec<OutcomeAllocation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub scheme: Scheme,
    /// Dual pair of the optimal scheme; reference schemes carry `gamma = 0`
    /// and their water level in `nu`.
    pub duals: Duals,
    pub realizations: Vec<RealizationPolicy>,
    /// Average expected overlap (sum over sub-channels).
    pub objective: f64,
    /// Nats per frame.
    pub average_rate: f64,
    pub average_power: f64,
    /// True when the idle-frame scheme had to fall back to busy sub-channels.
    pub fallback: bool,
}

impl Policy {
    /// Allocation for an arbitrary reading and gain vector under the
    /// optimal scheme's duals. Reference schemes are only defined on the
    /// realizations they were solved for.
    pub fn allocate(&self, spec: &ProblemSpec, y: &SensingOutcome, beta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.scheme != Scheme::Optimal {
            return Err(Error::InvalidParams(format!(
                "{} policies have no closed-form extension",
                self.scheme.name()
            )));
        }
        if beta.len() != spec.channels() || y.y.len() != spec.band_count() {
            return Err(Error::DimensionMismatch("gain or outcome length does not match spec".into()));
        }
        let Duals { gamma, nu } = self.duals;
        let rho: Vec<f64> = (0..beta.len())
            .map(|n| rho_star(gamma, nu, beta[n], spec.band(n), spec.frame, y.for_channel(spec, n)))
            .collect();
        let p = rho.iter().zip(beta).map(|(&r, &b)| power_star(r, nu, b)).collect();
        Ok((p, rho))
    }
}

/// Exact expectation of overlap, rate and power of a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub overlap: f64,
    pub rate: f64,
    pub power: f64,
}

/// Index of the term for realization `s`, channel `n`, reading `sensed`.
fn term_index(channels: usize, s: usize, n: usize, sensed: Sensed) -> usize {
    (s * channels + n) * 2 + sensed.bit() as usize
}

fn build_terms(spec: &ProblemSpec, realizations: &[Vec<f64>]) -> Result<TermSet> {
    spec.validate()?;
    if realizations.is_empty() {
        return Err(Error::InvalidParams("need at least one channel realization".into()));
    }
    let n = spec.channels();
    let w = 1.0 / realizations.len() as f64;
    let mut terms = Vec::with_capacity(realizations.len() * n * 2);
    for beta in realizations {
        if beta.len() != n {
            return Err(Error::DimensionMismatch(format!("realization has {} gains, spec has {n}", beta.len())));
        }
        for (ch, &b) in beta.iter().enumerate() {
            let band = *spec.band(ch);
            for sensed in [Sensed::Idle, Sensed::Busy] {
                terms.push(Term {
                    weight: w * sensing_probability(&band, sensed)?,
                    beta: b,
                    band,
                    sensed,
                });
            }
        }
    }
    TermSet::new(spec.frame, terms)
}

/// Expand per-term values into per-outcome allocations.
fn expand(
    spec: &ProblemSpec,
    realizations: &[Vec<f64>],
    table: &OutcomeTable,
    rho: &[f64],
    power: &[f64],
) -> Vec<RealizationPolicy> {
    let n = spec.channels();
    let w = 1.0 / realizations.len() as f64;
    realizations
        .iter()
        .enumerate()
        .map(|(s, beta)| RealizationPolicy {
            beta: beta.clone(),
            weight: w,
            outcomes: table
                .outcomes
                .iter()
                .zip(&table.eta)
                .map(|(y, &eta)| {
                    let idx = |ch: usize| term_index(n, s, ch, y.for_channel(spec, ch));
                    OutcomeAllocation {
                        y: y.clone(),
                        eta,
                        p: (0..n).map(|ch| power[idx(ch)]).collect(),
                        rho: (0..n).map(|ch| rho[idx(ch)]).collect(),
                    }
                })
                .collect(),
        })
        .collect()
}

/// Optimal allocation averaged over sensing outcomes for the fixed gains in `spec`.
pub fn solve_p2(spec: &ProblemSpec, tol: Tolerances) -> Result<Policy> {
    solve_optimal(spec, std::slice::from_ref(&spec.beta), tol)
}

/// Optimal allocation averaged over sensing outcomes and channel draws.
/// The gains in `spec` are ignored; they come from `dist`.
pub fn solve_p3(spec: &ProblemSpec, dist: &ChannelDistribution, tol: Tolerances) -> Result<Policy> {
    if dist.mean.len() != spec.channels() {
        return Err(Error::DimensionMismatch("distribution and spec disagree on sub-channel count".into()));
    }
    solve_optimal(spec, &dist.draws()?, tol)
}

/// Optimal allocation over an explicit, equally weighted set of gain vectors.
pub fn solve_optimal(spec: &ProblemSpec, realizations: &[Vec<f64>], tol: Tolerances) -> Result<Policy> {
    let set = build_terms(spec, realizations)?;
    let table = outcome_table(&spec.bands)?;
    let sol = set.solve(spec.rate, spec.power, tol)?;
    Ok(Policy {
        scheme: Scheme::Optimal,
        duals: sol.duals,
        realizations: expand(spec, realizations, &table, &sol.rho, &sol.power),
        objective: sol.objective,
        average_rate: sol.rate,
        average_power: sol.sum_power,
        fallback: false,
    })
}

/// Largest average rate any scheme can reach: full-time water-filling.
pub fn average_capacity(spec: &ProblemSpec, realizations: &[Vec<f64>]) -> Result<f64> {
    Ok(build_terms(spec, realizations)?.capacity(spec.power).rate)
}

fn water_level_for(set: &TermSet, rate: f64, budget: f64, tol: Tolerances) -> Option<WaterLevel> {
    let cap = set.capacity(budget);
    if rate > cap.rate + tol.eps_rate * rate {
        None
    } else if rate >= cap.rate {
        Some(cap)
    } else {
        Some(set.min_power(rate))
    }
}

pub fn no_sensing_reference(spec: &ProblemSpec, tol: Tolerances) -> Result<Policy> {
    no_sensing_over(spec, std::slice::from_ref(&spec.beta), tol)
}

/// Power-minimizing water-filling that ignores the sensing result; every
/// sub-channel with positive power is used for the whole frame.
pub fn no_sensing_over(spec: &ProblemSpec, realizations: &[Vec<f64>], tol: Tolerances) -> Result<Policy> {
    let set = build_terms(spec, realizations)?;
    let table = outcome_table(&spec.bands)?;
    if spec.rate == 0.0 {
        return Ok(zero_policy(Scheme::NoSensing, spec, realizations, &table, &set));
    }
    let level = water_level_for(&set, spec.rate, spec.power, tol).ok_or(Error::Infeasible {
        required: spec.rate,
        max_rate: set.capacity(spec.power).rate,
    })?;
    let (rho, power) = set.full_time_allocation(level.nu);
    // Without sensing the overlap of a full frame is the stationary ON
    // probability, independent of the frame length.
    let w = 1.0 / realizations.len() as f64;
    let mut objective = 0.0;
    for beta in realizations {
        for (ch, &b) in beta.iter().enumerate() {
            if level.nu * b > 1.0 {
                objective += w * stationary_on_prob(spec.band(ch))?;
            }
        }
    }
    Ok(Policy {
        scheme: Scheme::NoSensing,
        duals: Duals { gamma: 0.0, nu: level.nu },
        realizations: expand(spec, realizations, &table, &rho, &power),
        objective,
        average_rate: set.achieved_rate(&rho, &power),
        average_power: set.weighted_power(&power),
        fallback: false,
    })
}

pub fn idle_frame_reference(spec: &ProblemSpec, fallback: IdleFallback, tol: Tolerances) -> Result<Policy> {
    idle_frame_over(spec, std::slice::from_ref(&spec.beta), fallback, tol)
}

/// Full frames on idle sub-channels only, power minimized for the average
/// rate; busy sub-channels stay silent unless the fallback kicks in.
pub fn idle_frame_over(
    spec: &ProblemSpec,
    realizations: &[Vec<f64>],
    fallback: IdleFallback,
    tol: Tolerances,
) -> Result<Policy> {
    let set = build_terms(spec, realizations)?;
    let table = outcome_table(&spec.bands)?;
    if spec.rate == 0.0 {
        return Ok(zero_policy(Scheme::IdleFrame, spec, realizations, &table, &set));
    }
    if water_level_for(&set, spec.rate, spec.power, tol).is_none() {
        return Err(Error::Infeasible {
            required: spec.rate,
            max_rate: set.capacity(spec.power).rate,
        });
    }

    // Busy terms get zero weight, so water-filling never touches them.
    let idle_only = TermSet {
        frame: set.frame,
        terms: set
            .terms
            .iter()
            .map(|t| Term {
                weight: if t.sensed.is_busy() { 0.0 } else { t.weight },
                ..*t
            })
            .collect(),
    };
    match water_level_for(&idle_only, spec.rate, spec.power, tol) {
        Some(level) => {
            let (mut rho, mut power) = idle_only.full_time_allocation(level.nu);
            for (k, t) in idle_only.terms.iter().enumerate() {
                if t.sensed.is_busy() {
                    rho[k] = 0.0;
                    power[k] = 0.0;
                }
            }
            Ok(Policy {
                scheme: Scheme::IdleFrame,
                duals: Duals { gamma: 0.0, nu: level.nu },
                realizations: expand(spec, realizations, &table, &rho, &power),
                objective: set.objective(&rho)?,
                average_rate: set.achieved_rate(&rho, &power),
                average_power: set.weighted_power(&power),
                fallback: false,
            })
        }
        None => match fallback {
            IdleFallback::Strict => Err(Error::Infeasible {
                required: spec.rate,
                max_rate: idle_only.capacity(spec.power).rate,
            }),
            IdleFallback::AllowBusy => {
                let mut policy = no_sensing_over(spec, realizations, tol)?;
                policy.scheme = Scheme::IdleFrame;
                policy.fallback = true;
                Ok(policy)
            }
        },
    }
}

/// Largest average rate of the idle-frame scheme without fallback.
pub fn idle_frame_capacity(spec: &ProblemSpec, realizations: &[Vec<f64>]) -> Result<f64> {
    let set = build_terms(spec, realizations)?;
    let idle_only = TermSet {
        frame: set.frame,
        terms: set.terms.into_iter().filter(|t| !t.sensed.is_busy()).collect(),
    };
    Ok(idle_only.capacity(spec.power).rate)
}

fn zero_policy(
    scheme: Scheme,
    spec: &ProblemSpec,
    realizations: &[Vec<f64>],
    table: &OutcomeTable,
    set: &TermSet,
) -> Policy {
    let zeros = vec![0.0; set.len()];
    Policy {
        scheme,
        duals: Duals { gamma: 0.0, nu: 0.0 },
        realizations: expand(spec, realizations, table, &zeros, &zeros),
        objective: 0.0,
        average_rate: 0.0,
        average_power: 0.0,
        fallback: false,
    }
}

/// Re-evaluate a policy by summing over every realization and every outcome.
pub fn evaluate_policy(policy: &Policy, spec: &ProblemSpec) -> Result<Evaluation> {
    spec.validate()?;
    let mut eval = Evaluation { overlap: 0.0, rate: 0.0, power: 0.0 };
    for real in &policy.realizations {
        for out in &real.outcomes {
            let w = real.weight * out.eta;
            let mut cost = 0.0;
            for (ch, &r) in out.rho.iter().enumerate() {
                cost += overlap(spec.band(ch), spec.frame, r, out.y.for_channel(spec, ch))?;
            }
            eval.overlap += w * cost;
            eval.rate += w * achievable_rate(&out.p, &out.rho, &real.beta)?;
            eval.power += w * out.p.iter().sum::<f64>();
        }
    }
    Ok(eval)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym() -> CtmcParams {
        CtmcParams::new(1.0, 1.0).unwrap()
    }

    fn spec(beta: Vec<f64>, rate: f64, power: f64, frame: f64) -> ProblemSpec {
        let n = beta.len();
        ProblemSpec { frame, rate, power, beta, band_of: vec![0; n], bands: vec![sym()] }
    }

    #[test]
    fn symmetric_single_band_table() {
        let t = outcome_table(&[sym()]).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.eta, vec![0.5, 0.5]);
        assert_eq!(t.outcomes[1].y, vec![Sensed::Busy]);
    }

    #[test]
    fn two_band_product_form() {
        let t = outcome_table(&[CtmcParams::new(1.0, 1.0).unwrap(), CtmcParams::new(2.0, 1.0).unwrap()]).unwrap();
        // [idle, idle]: (1/2)(1/3).
        assert!((t.eta[0] - 1.0 / 6.0).abs() < 1e-15);
        // [idle, busy]: (1/2)(2/3).
        assert!((t.eta[2] - 1.0 / 3.0).abs() < 1e-15);
        assert!((t.eta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_size_limit() {
        let bands = vec![sym(); 21];
        assert!(matches!(outcome_table(&bands), Err(Error::SizeLimit { .. })));
        assert!(outcome_table_with_limit(&bands[..3], 2).is_err());
    }

    #[test]
    fn p2_meets_average_constraints() {
        let s = spec(vec![0.8, 1.4, 0.3], 0.6, 1.0, 1.0);
        let pol = solve_p2(&s, Tolerances::default()).unwrap();
        let ev = evaluate_policy(&pol, &s).unwrap();
        assert!((ev.overlap - pol.objective).abs() < 1e-12);
        assert!((ev.rate - pol.average_rate).abs() < 1e-12);
        assert!(s.rate - ev.rate <= 1e-8 * s.rate && ev.rate <= s.rate + 1e-12);
        assert!(ev.power <= s.power + 1e-8);
    }

    #[test]
    fn fixed_distribution_reproduces_p2() {
        let s = spec(vec![0.8, 1.4, 0.3], 0.6, 1.0, 1.0);
        let dist = ChannelDistribution { kind: ChannelKind::Fixed, mean: s.beta.clone(), samples: 500, seed: 3 };
        let p2 = solve_p2(&s, Tolerances::default()).unwrap();
        let p3 = solve_p3(&s, &dist, Tolerances::default()).unwrap();
        assert!((p2.objective - p3.objective).abs() < 1e-9);
        assert!((p2.duals.gamma - p3.duals.gamma).abs() < 1e-9);
    }

    #[test]
    fn p3_policy_extends_to_new_draws() {
        let s = spec(vec![1.0; 3], 0.5, 1.0, 1.0);
        let dist = ChannelDistribution { kind: ChannelKind::RayleighIid, mean: vec![1.0; 3], samples: 200, seed: 11 };
        let pol = solve_p3(&s, &dist, Tolerances::default()).unwrap();
        let first = &pol.realizations[0];
        let (p, rho) = pol.allocate(&s, &first.outcomes[1].y, &first.beta).unwrap();
        assert_eq!(p, first.outcomes[1].p);
        assert_eq!(rho, first.outcomes[1].rho);
        let ev = evaluate_policy(&pol, &s).unwrap();
        assert!((ev.overlap - pol.objective).abs() < 1e-12);
    }

    #[test]
    fn no_sensing_full_use_overlap() {
        let s = spec(vec![1.0; 4], 3.0, 8.0, 1.0);
        let pol = no_sensing_reference(&s, Tolerances::default()).unwrap();
        assert!((pol.objective - 4.0 * 0.5).abs() < 1e-15);
        let ev = evaluate_policy(&pol, &s).unwrap();
        assert!((ev.overlap - pol.objective).abs() < 1e-12);
        assert!((ev.rate - 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_sensing_low_rate_uses_best_channel_only() {
        let s = spec(vec![0.5, 2.0, 1.0], 1e-3, 8.0, 1.0);
        let pol = no_sensing_reference(&s, Tolerances::default()).unwrap();
        let used: Vec<bool> = pol.realizations[0].outcomes[0].p.iter().map(|&p| p > 0.0).collect();
        assert_eq!(used, vec![false, true, false]);
    }

    #[test]
    fn no_sensing_independent_of_frame_length() {
        let a = no_sensing_reference(&spec(vec![0.5, 2.0, 1.0], 1.0, 2.0, 1.0), Tolerances::default()).unwrap();
        let b = no_sensing_reference(&spec(vec![0.5, 2.0, 1.0], 1.0, 2.0, 0.1), Tolerances::default()).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn idle_frame_single_channel_doubles_rate() {
        // Half of the frames are idle, so those must carry 2R.
        let r = 0.4;
        let s = spec(vec![1.0], r, 10.0, 1.0);
        let pol = idle_frame_reference(&s, IdleFallback::AllowBusy, Tolerances::default()).unwrap();
        assert!(!pol.fallback);
        let idle = &pol.realizations[0].outcomes[0];
        let busy = &pol.realizations[0].outcomes[1];
        assert_eq!(busy.rho, vec![0.0]);
        assert_eq!(idle.rho, vec![1.0]);
        assert!((idle.p[0] - ((2.0 * r).exp() - 1.0)).abs() < 1e-12);
        assert!((pol.average_power - 0.5 * ((2.0 * r).exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn idle_frame_fallback_and_strict() {
        // Idle-only capacity 0.5 ln(1 + 2P) < R <= ln(1 + P).
        let s = spec(vec![1.0], 0.6, 1.0, 1.0);
        let pol = idle_frame_reference(&s, IdleFallback::AllowBusy, Tolerances::default()).unwrap();
        assert!(pol.fallback);
        let ns = no_sensing_reference(&s, Tolerances::default()).unwrap();
        assert_eq!(pol.objective, ns.objective);
        match idle_frame_reference(&s, IdleFallback::Strict, Tolerances::default()) {
            Err(Error::Infeasible { max_rate, .. }) => assert!((max_rate - 0.5 * 3f64.ln()).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schemes_share_feasibility() {
        let s = spec(vec![1.0, 0.5], 5.0, 1.0, 1.0);
        assert!(matches!(solve_p2(&s, Tolerances::default()), Err(Error::Infeasible { .. })));
        assert!(matches!(no_sensing_reference(&s, Tolerances::default()), Err(Error::Infeasible { .. })));
        assert!(matches!(
            idle_frame_reference(&s, IdleFallback::AllowBusy, Tolerances::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn scheme_ordering_on_a_sweep() {
        for k in 1..12 {
            let s = spec(vec![0.9, 1.1, 0.5, 1.5, 0.7], 0.15 * k as f64, 2.0, 1.0);
            let opt = solve_p2(&s, Tolerances::default()).unwrap();
            let idle = idle_frame_reference(&s, IdleFallback::AllowBusy, Tolerances::default()).unwrap();
            let ns = no_sensing_reference(&s, Tolerances::default()).unwrap();
            assert!(opt.objective <= idle.objective + 1e-9, "R={}", s.rate);
            assert!(idle.objective <= ns.objective + 1e-12, "R={}", s.rate);
        }
    }
}
