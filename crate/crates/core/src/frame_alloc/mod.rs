//! Frame-level allocation: minimize the expected overlap with ad-hoc ON time
//! subject to a rate constraint and a power budget, given the sensing result
//! at the start of the frame.
//!
//! The optimum has a closed form in the dual pair `(gamma, nu)`:
//!
//! - power follows water-filling, `p_n = rho_n (nu - 1/beta_n)^+`;
//! - the time fraction `rho_n` depends on the duals only through
//!   `gamma * h(nu, beta_n)` and is monotone in it, with separate branches for
//!   idle and busy sensing results.
//!
//! The duals are found by nested bisection (see [`dual`]). Rates are in nats
//! per frame-normalized channel use.

pub mod dual;

use serde::{Deserialize, Serialize};

use crate::ctmc::{optimal_placement, CtmcParams, Placement, Sensed};
use crate::error::{Error, Result};

use dual::{busy_threshold, idle_threshold, rate_term, SolverStats, Term, TermSet, Tolerances};

/// One infrastructure link: frame length, constraints, gains and band map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Frame length `T`, seconds.
    pub frame: f64,
    /// Rate constraint `R`, nats.
    pub rate: f64,
    /// Power budget `P`, linear units.
    pub power: f64,
    /// Effective gains `beta_n = kappa |h_n|^2 / N0`.
    pub beta: Vec<f64>,
    /// Band index (0-based) overlapping each sub-channel.
    pub band_of: Vec<usize>,
    pub bands: Vec<CtmcParams>,
}

impl ProblemSpec {
    pub fn channels(&self) -> usize {
        self.beta.len()
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.beta.len();
        let m = self.bands.len();
        if n == 0 || m == 0 {
            return Err(Error::InvalidParams("need at least one sub-channel and one band".into()));
        }
        if !(self.frame.is_finite() && self.frame > 0.0) {
            return Err(Error::InvalidParams(format!("frame length must be positive, got {}", self.frame)));
        }
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(Error::InvalidParams(format!("rate must be nonnegative, got {}", self.rate)));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::InvalidParams(format!("power budget must be positive, got {}", self.power)));
        }
        if let Some(b) = self.beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::InvalidParams(format!("gains must be positive, got {b}")));
        }
        if self.band_of.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "band_of has {} entries for {} sub-channels",
                self.band_of.len(),
                n
            )));
        }
        let mut covered = vec![false; m];
        for &i in &self.band_of {
            *covered
                .get_mut(i)
                .ok_or_else(|| Error::InvalidParams(format!("band index {i} out of range for {m} bands")))? = true;
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidParams(format!("band {i} overlaps no sub-channel")));
        }
        for b in &self.bands {
            b.validate()?;
        }
        Ok(())
    }

    pub fn band(&self, channel: usize) -> &CtmcParams {
        &self.bands[self.band_of[channel]]
    }

    /// Copy with a different rate constraint.
    pub fn with_rate(&self, rate: f64) -> Self {
        Self { rate, ..self.clone() }
    }

    /// Copy keeping only `channels` (in the given order) and the bands they touch.
    pub fn restrict(&self, channels: &[usize]) -> Result<Self> {
        let mut bands = Vec::new();
        let mut remap = vec![usize::MAX; self.bands.len()];
        let mut band_of = Vec::with_capacity(channels.len());
        let mut beta = Vec::with_capacity(channels.len());
        for &n in channels {
            let old = *self
                .band_of
                .get(n)
                .ok_or_else(|| Error::InvalidParams(format!("sub-channel {n} out of range")))?;
            if remap[old] == usize::MAX {
                remap[old] = bands.len();
                bands.push(self.bands[old]);
            }
            band_of.push(remap[old]);
            beta.push(self.beta[n]);
        }
        Ok(Self {
            frame: self.frame,
            rate: self.rate,
            power: self.power,
            beta,
            band_of,
            bands,
        })
    }
}

/// Per-band sensing result at the start of a frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingOutcome {
    pub y: Vec<Sensed>,
}

impl SensingOutcome {
    pub fn all_idle(bands: usize) -> Self {
        Self { y: vec![Sensed::Idle; bands] }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        Ok(Self {
            y: bits.iter().map(|&b| Sensed::from_bit(b)).collect::<Result<_>>()?,
        })
    }

    pub fn for_channel(&self, spec: &ProblemSpec, channel: usize) -> Sensed {
        self.y[spec.band_of[channel]]
    }

    fn check(&self, spec: &ProblemSpec) -> Result<()> {
        if self.y.len() == spec.band_count() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "sensing outcome has {} bands, spec has {}",
                self.y.len(),
                spec.band_count()
            )))
        }
    }
}

/// Lagrange multipliers of the rate constraint (`gamma`) and the ratio
/// `nu = gamma / epsilon`, where `epsilon` prices the power constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub gamma: f64,
    pub nu: f64,
}

impl Duals {
    /// Power multiplier `epsilon = gamma / nu`, zero when `nu` is zero.
    pub fn epsilon(&self) -> f64 {
        if self.nu > 0.0 {
            self.gamma / self.nu
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub p: Vec<f64>,
    pub rho: Vec<f64>,
    pub duals: Duals,
    /// Nats per frame.
    pub achieved_rate: f64,
    pub sum_power: f64,
    /// Expected overlap, summed over sub-channels.
    pub objective: f64,
    pub stats: SolverStats,
}

impl Allocation {
    /// Transmission intervals after the placement rule for each sub-channel.
    pub fn placements(&self, spec: &ProblemSpec, sensing: &SensingOutcome) -> Result<Vec<Placement>> {
        self.rho
            .iter()
            .enumerate()
            .map(|(n, &r)| optimal_placement(sensing.for_channel(spec, n), r, spec.frame))
            .collect()
    }
}

/// `sum_n rho_n ln(1 + p_n beta_n / rho_n)`; channels with `rho_n = 0` add nothing.
pub fn achievable_rate(p: &[f64], rho: &[f64], beta: &[f64]) -> Result<f64> {
    if p.len() != rho.len() || p.len() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "p, rho, beta have lengths {}, {}, {}",
            p.len(),
            rho.len(),
            beta.len()
        )));
    }
    Ok(p.iter()
        .zip(rho)
        .zip(beta)
        .map(|((&p, &r), &b)| rate_term(r, p, b))
        .sum())
}

/// `[ln(nu beta)]^+ - (nu beta - 1)^+ / (1 + (nu beta - 1)^+)`: the marginal
/// rate gained per unit of time on a channel at water level `nu`, net of
/// the power it costs.
pub fn h(nu: f64, beta: f64) -> f64 {
    let x = nu * beta;
    if x <= 1.0 {
        0.0
    } else {
        x.ln() - (x - 1.0) / x
    }
}

/// Optimal time fraction for one sub-channel at duals `(gamma, nu)`.
pub fn rho_star(gamma: f64, nu: f64, beta: f64, band: &CtmcParams, frame: f64, sensed: Sensed) -> f64 {
    let drive = gamma * h(nu, beta);
    let s = band.total_rate();
    let rho = match sensed {
        Sensed::Idle => {
            if drive >= idle_threshold(band, frame) {
                1.0
            } else {
                -(-s / band.lambda * drive).ln_1p() / (s * frame)
            }
        }
        Sensed::Busy => {
            if drive < busy_threshold(band, frame) {
                0.0
            } else if drive > 1.0 {
                1.0
            } else {
                1.0 + ((s * drive - band.lambda) / band.mu).ln() / (s * frame)
            }
        }
    };
    rho.clamp(0.0, 1.0)
}

/// Water-filling power `rho (nu - 1/beta)^+`.
pub fn power_star(rho: f64, nu: f64, beta: f64) -> f64 {
    rho * (nu - 1.0 / beta).max(0.0)
}

fn term_set(spec: &ProblemSpec, sensing: &SensingOutcome) -> Result<TermSet> {
    spec.validate()?;
    sensing.check(spec)?;
    let terms = (0..spec.channels())
        .map(|n| Term {
            weight: 1.0,
            beta: spec.beta[n],
            band: *spec.band(n),
            sensed: sensing.for_channel(spec, n),
        })
        .collect();
    TermSet::new(spec.frame, terms)
}

/// Rate `sum_n rho_n(gamma, nu) [ln(nu beta_n)]^+` of the structured allocation.
pub fn dual_rate(gamma: f64, nu: f64, spec: &ProblemSpec, sensing: &SensingOutcome) -> Result<f64> {
    Ok(term_set(spec, sensing)?.rate(gamma, nu))
}

/// Power `sum_n rho_n(gamma, nu) (nu - 1/beta_n)^+` of the structured allocation.
pub fn dual_power(gamma: f64, nu: f64, spec: &ProblemSpec, sensing: &SensingOutcome) -> Result<f64> {
    Ok(term_set(spec, sensing)?.power(gamma, nu))
}

/// Water level `nu` meeting `spec.rate` for fixed `gamma`, with
/// `0 <= R - dual_rate <= eps_rate * R`.
pub fn bisect_nu(gamma: f64, spec: &ProblemSpec, sensing: &SensingOutcome, eps_rate: f64) -> Result<f64> {
    let set = term_set(spec, sensing)?;
    Ok(set.bisect_nu(gamma, spec.rate, eps_rate * spec.rate)?.0)
}

/// Solve the frame-level problem for one sensing outcome.
pub fn solve_p1(spec: &ProblemSpec, sensing: &SensingOutcome, tol: Tolerances) -> Result<Allocation> {
    let set = term_set(spec, sensing)?;
    let sol = set.solve(spec.rate, spec.power, tol)?;
    Ok(Allocation {
        p: sol.power,
        rho: sol.rho,
        duals: sol.duals,
        achieved_rate: sol.rate,
        sum_power: sol.sum_power,
        objective: sol.objective,
        stats: sol.stats,
    })
}

/// Largest achievable rate: full-time water-filling of the whole budget.
pub fn max_rate(spec: &ProblemSpec) -> Result<f64> {
    let set = term_set(spec, &SensingOutcome::all_idle(spec.band_count()))?;
    Ok(set.capacity(spec.power).rate)
}

/// Gain normalization for variable-rate M-QAM at a target bit error rate.
pub fn kappa_mqam(ber: f64) -> Result<f64> {
    if !(ber > 0.0 && ber < 1.0) {
        return Err(Error::Domain { name: "ber", value: ber, domain: "(0, 1)" });
    }
    Ok(1.5 / -ber.ln())
}
