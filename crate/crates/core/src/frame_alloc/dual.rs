//! Nested dual bisection over a weighted collection of allocation terms.
//!
//! Every allocation problem in this crate (one frame, the average over
//! sensing outcomes, the average over sensing outcomes and channel draws) has
//! the same Lagrangian structure: a sum over terms, each carrying a
//! probability weight, a gain, a band and a sensed state. For a dual pair
//! `(gamma, nu)` each term receives the closed-form time fraction and
//! water-filling power, so one solver covers all of them.
//!
//! The inner loop bisects `nu` until the weighted rate meets the target; the
//! outer loop bisects `gamma` until the weighted power meets the budget. The
//! outer search relies on the power at `(gamma, nu*(gamma))` decreasing in
//! `gamma`.

use crate::ctmc::{overlap, CtmcParams, Sensed};
use serde::{Deserialize, Serialize};
use crate::error::{Error, Result};

use super::{h, power_star, rho_star, Duals};

/// Iteration cap for each bisection once a bracket is found.
pub const MAX_BISECTION_ITERATIONS: usize = 200;
/// Doublings tried when expanding the `nu` bracket; `nu` overflows before this.
pub const NU_EXPANSION_LIMIT: usize = 1100;
/// Doublings and halvings tried when bracketing `gamma`.
pub const GAMMA_EXPANSION_LIMIT: usize = 400;

/// Relative tolerances on the rate and power constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eps_rate: f64,
    pub eps_power: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_rate: 1e-8,
            eps_power: 1e-8,
        }
    }
}

/// One weighted allocation variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    /// Probability weight (1 for a single frame).
    pub weight: f64,
    pub beta: f64,
    pub band: CtmcParams,
    pub sensed: Sensed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub outer_iterations: usize,
    pub max_inner_iterations: usize,
}

/// Full-time water-filling level together with its rate and power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterLevel {
    pub nu: f64,
    pub rate: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub duals: Duals,
    pub rho: Vec<f64>,
    pub power: Vec<f64>,
    /// Weighted rate, nats.
    pub rate: f64,
    /// Weighted sum power.
    pub sum_power: f64,
    /// Weighted expected overlap.
    pub objective: f64,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermSet {
    pub frame: f64,
    pub terms: Vec<Term>,
}

impl TermSet {
    pub fn new(frame: f64, terms: Vec<Term>) -> Result<Self> {
        if !(frame.is_finite() && frame > 0.0) {
            return Err(Error::InvalidParams(format!("frame length must be positive, got {frame}")));
        }
        for t in &terms {
            t.band.validate()?;
            if !(t.beta.is_finite() && t.beta > 0.0) {
                return Err(Error::InvalidParams(format!("gain must be positive, got {}", t.beta)));
            }
            if !(t.weight.is_finite() && t.weight >= 0.0) {
                return Err(Error::InvalidParams(format!("weight must be nonnegative, got {}", t.weight)));
            }
        }
        Ok(Self { frame, terms })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn rho(&self, k: usize, gamma: f64, nu: f64) -> f64 {
        let t = &self.terms[k];
        rho_star(gamma, nu, t.beta, &t.band, self.frame, t.sensed)
    }

    /// Weighted rate `sum_k w_k rho_k [ln(nu beta_k)]^+`.
    pub fn rate(&self, gamma: f64, nu: f64) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let gain = (nu * t.beta).ln().max(0.0);
                if gain == 0.0 {
                    0.0
                } else {
                    t.weight * self.rho(k, gamma, nu) * gain
                }
            })
            .sum()
    }

    /// Weighted power `sum_k w_k rho_k (nu - 1/beta_k)^+`.
    pub fn power(&self, gamma: f64, nu: f64) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let level = (nu - 1.0 / t.beta).max(0.0);
                if level == 0.0 {
                    0.0
                } else {
                    t.weight * self.rho(k, gamma, nu) * level
                }
            })
            .sum()
    }

    pub fn allocation(&self, gamma: f64, nu: f64) -> (Vec<f64>, Vec<f64>) {
        let rho: Vec<f64> = (0..self.len()).map(|k| self.rho(k, gamma, nu)).collect();
        let power = rho
            .iter()
            .zip(&self.terms)
            .map(|(&r, t)| power_star(r, nu, t.beta))
            .collect();
        (rho, power)
    }

    /// Weighted expected overlap of a time allocation.
    pub fn objective(&self, rho: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (t, &r) in self.terms.iter().zip(rho) {
            acc += t.weight * overlap(&t.band, self.frame, r, t.sensed)?;
        }
        Ok(acc)
    }

    /// Weighted rate `sum_k w_k rho_k ln(1 + p_k beta_k / rho_k)`.
    pub fn achieved_rate(&self, rho: &[f64], power: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(rho.iter().zip(power))
            .map(|(t, (&r, &p))| t.weight * rate_term(r, p, t.beta))
            .sum()
    }

    pub fn weighted_power(&self, power: &[f64]) -> f64 {
        self.terms.iter().zip(power).map(|(t, &p)| t.weight * p).sum()
    }

    fn sorted_by_gain(&self) -> Vec<&Term> {
        let mut order: Vec<&Term> = self.terms.iter().filter(|t| t.weight > 0.0).collect();
        order.sort_by(|a, b| b.beta.total_cmp(&a.beta));
        order
    }

    /// Full-time water-filling that spends exactly `budget`; its rate is the
    /// largest weighted rate any allocation with that power can reach.
    pub fn capacity(&self, budget: f64) -> WaterLevel {
        let order = self.sorted_by_gain();
        if order.is_empty() {
            return WaterLevel { nu: 0.0, rate: 0.0, power: 0.0 };
        }
        let (mut weights, mut inv_gain) = (0.0, 0.0);
        let mut nu = 1.0 / order[0].beta;
        for (k, t) in order.iter().enumerate() {
            weights += t.weight;
            inv_gain += t.weight / t.beta;
            nu = (budget.max(0.0) + inv_gain) / weights;
            if order.get(k + 1).is_none_or(|next| nu * next.beta <= 1.0) {
                break;
            }
        }
        self.full_time_level(nu)
    }

    /// Full-time water-filling with the least power reaching `rate`.
    pub fn min_power(&self, rate: f64) -> WaterLevel {
        let order = self.sorted_by_gain();
        if order.is_empty() || rate <= 0.0 {
            let nu = order.first().map_or(0.0, |t| 1.0 / t.beta);
            return WaterLevel { nu, rate: 0.0, power: 0.0 };
        }
        let (mut weights, mut log_gain) = (0.0, 0.0);
        let mut log_nu = 0.0;
        for (k, t) in order.iter().enumerate() {
            weights += t.weight;
            log_gain += t.weight * t.beta.ln();
            log_nu = (rate - log_gain) / weights;
            if order.get(k + 1).is_none_or(|next| log_nu + next.beta.ln() <= 0.0) {
                break;
            }
        }
        self.full_time_level(log_nu.exp())
    }

    fn full_time_level(&self, nu: f64) -> WaterLevel {
        let (mut rate, mut power) = (0.0, 0.0);
        for t in &self.terms {
            if nu * t.beta > 1.0 {
                rate += t.weight * (nu * t.beta).ln();
                power += t.weight * (nu - 1.0 / t.beta);
            }
        }
        WaterLevel { nu, rate, power }
    }

    /// Full-time allocation at water level `nu`: `rho = 1` wherever power is positive.
    pub fn full_time_allocation(&self, nu: f64) -> (Vec<f64>, Vec<f64>) {
        self.terms
            .iter()
            .map(|t| {
                let p = (nu - 1.0 / t.beta).max(0.0);
                (if p > 0.0 { 1.0 } else { 0.0 }, p)
            })
            .unzip()
    }

    /// Smallest `gamma` at which every term with positive power is used full time.
    fn saturating_gamma(&self, nu: f64) -> f64 {
        let mut gamma: f64 = 0.0;
        for t in &self.terms {
            let hv = h(nu, t.beta);
            if hv > 0.0 {
                let threshold = match t.sensed {
                    Sensed::Idle => idle_threshold(&t.band, self.frame),
                    Sensed::Busy => 1.0,
                };
                gamma = gamma.max(threshold / hv);
            }
        }
        gamma
    }

    /// Inner loop: `nu` with `0 <= rate - R(gamma, nu) <= tol`, plus the
    /// number of bisection steps taken.
    pub fn bisect_nu(&self, gamma: f64, rate: f64, tol: f64) -> Result<(f64, usize)> {
        let mut lo = 0.0;
        if rate <= 0.0 {
            return Ok((lo, 0));
        }
        let max_inv_gain = self.terms.iter().map(|t| 1.0 / t.beta).fold(0.0, f64::max);
        let mut hi = rate.exp() * max_inv_gain + 1.0;
        let mut expansions = 0;
        while !(self.rate(gamma, hi) >= rate) {
            lo = hi;
            hi *= 2.0;
            expansions += 1;
            if expansions > NU_EXPANSION_LIMIT || !hi.is_finite() {
                return Err(Error::BracketFailure { what: "nu", limit: NU_EXPANSION_LIMIT });
            }
        }
        for iter in 1..=MAX_BISECTION_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok((lo, iter));
            }
            let achieved = self.rate(gamma, mid);
            let gap = rate - achieved;
            if (0.0..=tol).contains(&gap) {
                return Ok((mid, iter));
            }
            if achieved >= rate {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((lo, MAX_BISECTION_ITERATIONS))
    }

    /// Power at `(gamma, nu*(gamma))`; infinite when `nu*` cannot be bracketed.
    fn power_along_rate(&self, gamma: f64, rate: f64, tol: f64) -> (f64, f64, usize) {
        match self.bisect_nu(gamma, rate, tol) {
            Ok((nu, iters)) => (self.power(gamma, nu), nu, iters),
            Err(_) => (f64::INFINITY, f64::INFINITY, 0),
        }
    }

    /// Minimize the weighted overlap subject to weighted rate `>= rate` and
    /// weighted power `<= budget`.
    pub fn solve(&self, rate: f64, budget: f64, tol: Tolerances) -> Result<DualSolution> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidParams(format!("rate must be finite and nonnegative, got {rate}")));
        }
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::InvalidParams(format!("power budget must be positive, got {budget}")));
        }
        if rate == 0.0 {
            let zeros = vec![0.0; self.len()];
            return self.finish(Duals { gamma: 0.0, nu: 0.0 }, zeros.clone(), zeros, SolverStats::default());
        }

        let tol_rate = tol.eps_rate * rate;
        let tol_power = tol.eps_power * budget;
        let cap = self.capacity(budget);
        if rate > cap.rate + tol_rate {
            return Err(Error::Infeasible { required: rate, max_rate: cap.rate });
        }

        let least = self.min_power(rate);
        if least.power >= budget - tol_power {
            // The budget only just covers the rate: full-time water-filling.
            let level = if least.power <= budget { least } else { cap };
            let (rho, power) = self.full_time_allocation(level.nu);
            let duals = Duals { gamma: self.saturating_gamma(level.nu), nu: level.nu };
            return self.finish(duals, rho, power, SolverStats::default());
        }

        // Keep nu*(gamma) much tighter than the outer window so that the
        // power seen by the outer loop is smooth in gamma.
        let inner_tol = 1e-3 * tol_rate;
        let mut stats = SolverStats::default();
        let eval = |gamma: f64, stats: &mut SolverStats| {
            let (p, nu, iters) = self.power_along_rate(gamma, rate, inner_tol);
            stats.max_inner_iterations = stats.max_inner_iterations.max(iters);
            (p, nu)
        };

        let (mut lo, mut hi) = (1.0, 1.0);
        let mut hi_eval = eval(hi, &mut stats);
        if hi_eval.0 > budget {
            let mut n = 0;
            while hi_eval.0 > budget {
                lo = hi;
                hi *= 2.0;
                hi_eval = eval(hi, &mut stats);
                n += 1;
                if n > GAMMA_EXPANSION_LIMIT {
                    return Err(Error::BracketFailure { what: "gamma", limit: GAMMA_EXPANSION_LIMIT });
                }
            }
        } else {
            let mut n = 0;
            loop {
                let lo_eval = eval(lo, &mut stats);
                if lo_eval.0 >= budget {
                    break;
                }
                hi = lo;
                hi_eval = lo_eval;
                lo *= 0.5;
                n += 1;
                if n > GAMMA_EXPANSION_LIMIT {
                    return Err(Error::BracketFailure { what: "gamma", limit: GAMMA_EXPANSION_LIMIT });
                }
            }
        }

        let mut best = (hi, hi_eval.1);
        if !(0.0..=tol_power).contains(&(budget - hi_eval.0)) {
            for iter in 1..=MAX_BISECTION_ITERATIONS {
                stats.outer_iterations = iter;
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let (p, nu) = eval(mid, &mut stats);
                let gap = budget - p;
                if (0.0..=tol_power).contains(&gap) {
                    best = (mid, nu);
                    break;
                }
                if p > budget {
                    lo = mid;
                } else {
                    hi = mid;
                    best = (mid, nu);
                }
            }
        }

        let (gamma, nu) = best;
        let (rho, power) = self.allocation(gamma, nu);
        self.finish(Duals { gamma, nu }, rho, power, stats)
    }

    fn finish(&self, duals: Duals, rho: Vec<f64>, power: Vec<f64>, stats: SolverStats) -> Result<DualSolution> {
        let objective = self.objective(&rho)?;
        Ok(DualSolution {
            duals,
            rate: self.achieved_rate(&rho, &power),
            sum_power: self.weighted_power(&power),
            objective,
            rho,
            power,
            stats,
        })
    }
}

/// `rho ln(1 + p beta / rho)`, zero when `rho` is zero.
pub(crate) fn rate_term(rho: f64, power: f64, beta: f64) -> f64 {
    if rho <= 0.0 {
        0.0
    } else {
        rho * (power * beta / rho).ln_1p()
    }
}

/// Idle-branch threshold: above it the optimal time fraction is 1.
pub(crate) fn idle_threshold(band: &CtmcParams, frame: f64) -> f64 {
    let s = band.total_rate();
    -band.lambda / s * (-s * frame).exp_m1()
}

/// Busy-branch threshold: below it the optimal time fraction is 0.
pub(crate) fn busy_threshold(band: &CtmcParams, frame: f64) -> f64 {
    let s = band.total_rate();
    (band.lambda + band.mu * (-s * frame).exp()) / s
}
