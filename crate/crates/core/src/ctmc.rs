//! Two-state ON/OFF continuous-time Markov chain model of one ad-hoc band.
//!
//! The band is OFF (idle) for an exponential time with rate `lambda`, then ON
//! (busy) for an exponential time with rate `mu`, and so on. Given the state
//! sensed at the start of a frame, the chain predicts how much of a
//! transmission of duration `rho * T` will collide with ON periods.
//!
//! Times are in seconds and rates in 1/seconds throughout.

use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};

/// ON/OFF rates of one ad-hoc band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtmcParams {
    /// OFF -> ON rate.
    pub lambda: f64,
    /// ON -> OFF rate.
    pub mu: f64,
}

impl CtmcParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let params = Self { lambda, mu };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.lambda) && ok(self.mu) {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "CTMC rates must be finite and positive, got lambda={} mu={}",
                self.lambda, self.mu
            )))
        }
    }

    /// Total rate `lambda + mu`, the decay rate of the chain's memory.
    #[inline]
    pub fn total_rate(&self) -> f64 {
        self.lambda + self.mu
    }
}

/// Sensed state of a band at the start of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensed {
    Idle,
    Busy,
}

impl Sensed {
    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(Sensed::Idle),
            1 => Ok(Sensed::Busy),
            _ => Err(Error::InvalidParams(format!("sensing bit must be 0 or 1, got {bit}"))),
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Sensed::Idle => 0,
            Sensed::Busy => 1,
        }
    }

    pub fn is_busy(self) -> bool {
        self == Sensed::Busy
    }
}

/// `P(tau)`: entry `[a][b]` is `Pr(X(t0 + tau) = b | X(t0) = a)` with 0 = OFF, 1 = ON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix(pub [[f64; 2]; 2]);

impl TransitionMatrix {
    pub fn entry(&self, from: Sensed, to: Sensed) -> f64 {
        self.0[from.bit() as usize][to.bit() as usize]
    }

    pub fn mul(&self, other: &TransitionMatrix) -> TransitionMatrix {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        TransitionMatrix(out)
    }
}

/// A single contiguous transmission interval inside the frame `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub start: f64,
    pub end: f64,
}

impl Placement {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

pub fn transition_matrix(params: &CtmcParams, tau: f64) -> Result<TransitionMatrix> {
    params.validate()?;
    check_domain("tau", tau, "[0, inf)", tau >= 0.0)?;
    let (l, m) = (params.lambda, params.mu);
    let s = params.total_rate();
    // 1 - e^{-s tau}, computed without cancellation for small tau.
    let relaxed = -(-s * tau).exp_m1();
    let decay = 1.0 - relaxed;
    Ok(TransitionMatrix([
        [(m + l * decay) / s, l * relaxed / s],
        [m * relaxed / s, (l + m * decay) / s],
    ]))
}

/// Probability that the band is ON `tau` seconds after being sensed in `from`.
pub fn on_probability(params: &CtmcParams, from: Sensed, tau: f64) -> Result<f64> {
    Ok(transition_matrix(params, tau)?.entry(from, Sensed::Busy))
}

/// Stationary ON probability `lambda / (lambda + mu)`.
pub fn stationary_on_prob(params: &CtmcParams) -> Result<f64> {
    params.validate()?;
    Ok(params.lambda / params.total_rate())
}

fn check_frame(frame: f64, rho: f64) -> Result<()> {
    check_domain("T", frame, "(0, inf)", frame.is_finite() && frame > 0.0)?;
    check_domain("rho", rho, "[0, 1]", (0.0..=1.0).contains(&rho))
}

/// Expected overlap fraction for an idle sensing result, transmitting during `[0, rho T]`.
pub fn overlap_idle(params: &CtmcParams, frame: f64, rho: f64) -> Result<f64> {
    params.validate()?;
    check_frame(frame, rho)?;
    let s = params.total_rate();
    let x = s * rho * frame;
    Ok(params.lambda / (s * frame) * (rho * frame + (-x).exp_m1() / s))
}

/// Expected overlap fraction for a busy sensing result, transmitting during `[(1 - rho) T, T]`.
pub fn overlap_busy(params: &CtmcParams, frame: f64, rho: f64) -> Result<f64> {
    params.validate()?;
    check_frame(frame, rho)?;
    let s = params.total_rate();
    // e^{-sT}(e^{s rho T} - 1) rewritten so nothing overflows for large sT.
    let tail = (-s * (1.0 - rho) * frame).exp() - (-s * frame).exp();
    Ok((params.lambda * rho * frame + params.mu / s * tail) / (s * frame))
}

pub fn overlap(params: &CtmcParams, frame: f64, rho: f64, sensed: Sensed) -> Result<f64> {
    match sensed {
        Sensed::Idle => overlap_idle(params, frame, rho),
        Sensed::Busy => overlap_busy(params, frame, rho),
    }
}

/// Derivative of the overlap fraction with respect to `rho`.
pub fn overlap_slope(params: &CtmcParams, frame: f64, rho: f64, sensed: Sensed) -> f64 {
    let s = params.total_rate();
    match sensed {
        Sensed::Idle => -params.lambda / s * (-s * rho * frame).exp_m1(),
        Sensed::Busy => (params.lambda + params.mu * (-s * (1.0 - rho) * frame).exp()) / s,
    }
}

/// Placement minimizing the expected overlap: the start of the frame after an
/// idle reading, the end of the frame after a busy one.
pub fn optimal_placement(sensed: Sensed, rho: f64, frame: f64) -> Result<Placement> {
    check_frame(frame, rho)?;
    let len = rho * frame;
    Ok(match sensed {
        Sensed::Idle => Placement { start: 0.0, end: len },
        Sensed::Busy => Placement {
            start: frame - len,
            end: frame,
        },
    })
}
