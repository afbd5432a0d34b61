//! TOML experiment configuration.
//!
//! ```toml
//! version = 1
//!
//! [bands]
//! lambda = [1.0]
//! mu = [1.0]
//!
//! [channels]
//! band_of = [0, 0, 0, 0, 0]   # 0-based band of each sub-channel
//! beta = [0.9, 1.1, 0.5, 1.5, 1.0]   # fixed gains (frame command, fixed average runs)
//! mean_gain = 1.0              # Rayleigh mean; a list gives one mean per sub-channel
//!
//! [constraints]
//! frame = 1.0
//! power = 0.6
//!
//! [sweep]
//! rates_bits = [0.1, 0.2, 0.3]   # or rates_nats
//!
//! [simulation]
//! realizations = 100
//! samples = 1000
//! trajectories = 0
//!
//! [seeds]
//! seed = 1
//! ```
//!
//! Rates are per frame-normalized channel use. Optional sections: `[frame]`
//! (sensing readings), `[multiuser]`, `[validate]`, `[tolerances]`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use coex_core::ctmc::{CtmcParams, Sensed};
use coex_core::frame_alloc::dual::Tolerances;
use coex_core::frame_alloc::{ProblemSpec, SensingOutcome};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub bands: Bands,
    pub channels: Channels,
    pub constraints: Constraints,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub simulation: Simulation,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub tolerances: TolConfig,
    #[serde(default)]
    pub frame: FrameSection,
    pub multiuser: Option<MultiuserSection>,
    pub validate: Option<ValidateSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bands {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanGain {
    Common(f64),
    PerChannel(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channels {
    pub band_of: Vec<usize>,
    pub beta: Option<Vec<f64>>,
    pub mean_gain: Option<MeanGain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    pub frame: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub rates_bits: Option<Vec<f64>>,
    pub rates_nats: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    /// Channel realizations for the fixed-channel sweep and the multiuser runs.
    pub realizations: usize,
    /// Channel draws forming the random-channel sample set.
    pub samples: usize,
    /// Simulated frames per realization and scheme (0 disables), or Monte
    /// Carlo trials per check in `validate`.
    pub trajectories: usize,
}

impl Default for Simulation {
    fn default() -> Self {
        Self { realizations: 100, samples: 1000, trajectories: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolConfig {
    pub eps_rate: f64,
    pub eps_power: f64,
}

impl Default for TolConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self { eps_rate: t.eps_rate, eps_power: t.eps_power }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    /// Reading per band, 0 idle / 1 busy; all idle when absent.
    pub sensing: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiuserSection {
    pub users: usize,
    /// Per-user power budget; the `[constraints]` power when absent.
    pub power: Option<f64>,
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Transition,
    IdleOverlap,
    BusyOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub checks: Vec<CheckKind>,
    /// Random parameter tuples per check.
    pub tuples: usize,
    /// Pass threshold in standard errors.
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
}

fn default_sigmas() -> f64 {
    3.0
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            bail!("unsupported config version {} (expected {SCHEMA_VERSION})", self.version);
        }
        if self.bands.lambda.len() != self.bands.mu.len() {
            bail!("bands.lambda and bands.mu differ in length");
        }
        if let Some(beta) = &self.channels.beta {
            if beta.len() != self.channels.band_of.len() {
                bail!("channels.beta and channels.band_of differ in length");
            }
        }
        if let Some(MeanGain::PerChannel(m)) = &self.channels.mean_gain {
            if m.len() != self.channels.band_of.len() {
                bail!("channels.mean_gain and channels.band_of differ in length");
            }
        }
        if self.sweep.rates_bits.is_some() && self.sweep.rates_nats.is_some() {
            bail!("give either sweep.rates_bits or sweep.rates_nats, not both");
        }
        self.bands()?;
        Ok(())
    }

    pub fn bands(&self) -> Result<Vec<CtmcParams>> {
        self.bands
            .lambda
            .iter()
            .zip(&self.bands.mu)
            .map(|(&l, &m)| CtmcParams::new(l, m).map_err(Into::into))
            .collect()
    }

    /// Rate targets in nats.
    pub fn rates(&self) -> Result<Vec<f64>> {
        match (&self.sweep.rates_bits, &self.sweep.rates_nats) {
            (Some(bits), None) => Ok(bits.iter().map(|b| b * std::f64::consts::LN_2).collect()),
            (None, Some(nats)) => Ok(nats.clone()),
            _ => bail!("config needs sweep.rates_bits or sweep.rates_nats"),
        }
    }

    pub fn fixed_beta(&self) -> Result<Vec<f64>> {
        self.channels.beta.clone().context("config needs channels.beta")
    }

    pub fn mean_gain(&self) -> Result<Vec<f64>> {
        let n = self.channels.band_of.len();
        match &self.channels.mean_gain {
            Some(MeanGain::Common(m)) => Ok(vec![*m; n]),
            Some(MeanGain::PerChannel(m)) => Ok(m.clone()),
            None => bail!("config needs channels.mean_gain"),
        }
    }

    pub fn spec(&self, beta: Vec<f64>, rate: f64) -> Result<ProblemSpec> {
        let spec = ProblemSpec {
            frame: self.constraints.frame,
            rate,
            power: self.constraints.power,
            beta,
            band_of: self.channels.band_of.clone(),
            bands: self.bands()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sensing(&self) -> Result<SensingOutcome> {
        let bands = self.bands.lambda.len();
        match &self.frame.sensing {
            None => Ok(SensingOutcome::all_idle(bands)),
            Some(bits) => {
                if bits.len() != bands {
                    bail!("frame.sensing has {} entries for {bands} bands", bits.len());
                }
                let y = bits.iter().map(|&b| Sensed::from_bit(b)).collect::<coex_core::Result<Vec<_>>>()?;
                Ok(SensingOutcome { y })
            }
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { eps_rate: self.tolerances.eps_rate, eps_power: self.tolerances.eps_power }
    }

    /// SHA-256 of the canonical JSON form (after command-line overrides).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(&canonical))
    }
}
