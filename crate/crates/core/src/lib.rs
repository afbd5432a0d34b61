//! Interference-aware power and transmission-time allocation for an
//! infrastructure link that shares spectrum with ON/OFF ad-hoc bands.
//!
//! - [`ctmc`]: ON/OFF Markov model of a band, overlap cost functions, placement.
//! - [`frame_alloc`]: frame-level allocation for one sensing outcome.
//! - [`avg_alloc`]: allocation averaged over sensing outcomes and channel
//!   draws, plus the no-sensing and idle-frame reference schemes.
//! - [`multiuser`]: sub-channel assignment across several users.
//! - [`sim`]: Monte Carlo trajectories, fading draws and experiment sweeps.

pub mod avg_alloc;
pub mod ctmc;
pub mod error;
pub mod frame_alloc;
pub mod multiuser;
pub mod sim;

pub use error::{Error, Result};
