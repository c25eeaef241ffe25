//! Finite-alphabet simulation of the likelihood encoder over random codebooks.
//!
//! The crate is organized bottom-up:
//!
//! - [`finite_prob`]: pmfs, channels, joints, entropy, mutual information and
//!   total variation, all exact.
//! - [`rd_solver`]: the rate-distortion function by Blahut-Arimoto alternating
//!   minimization, yielding the test channel that parameterizes the encoder.
//! - [`codec`]: random codebooks, the stochastic likelihood encoder, a MAP
//!   baseline, the lookup decoder and block distortion.
//! - [`analysis`]: exact soft-covering TV measurements, the idealized joint `Q`
//!   versus the induced joint `P`, codebook averages and distortion sweeps.
//! - [`config`] and [`experiments`]: the text configuration format and the CSV
//!   producing sweeps behind the `lel` command-line tool.

pub mod analysis;
pub mod codec;
pub mod config;
pub mod error;
pub mod experiments;
pub mod finite_prob;
pub mod rd_solver;
pub mod seed;

pub use error::{Error, Result};

/// Default ceiling on the size of any exactly enumerated space.
pub const DEFAULT_ENUM_CAP: u64 = 1 << 24;
/// Default ceiling on the number of codewords in a generated codebook.
pub const DEFAULT_MAX_CODEWORDS: u64 = 1 << 24;
/// Environment variable overriding [`Limits::enum_cap`].
pub const ENUM_CAP_ENV: &str = "LEL_ENUM_CAP";

/// Memory guards shared by every exact construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of states in an enumerated sequence (or joint) space.
    pub enum_cap: u64,
    /// Maximum codebook size `M`.
    pub max_codewords: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            enum_cap: DEFAULT_ENUM_CAP,
            max_codewords: DEFAULT_MAX_CODEWORDS,
        }
    }
}

impl Limits {
    /// Defaults, with `LEL_ENUM_CAP` applied when set to a positive integer.
    pub fn from_env() -> Result<Self> {
        let mut limits = Self::default();
        if let Ok(raw) = std::env::var(ENUM_CAP_ENV) {
            limits.enum_cap = raw
                .trim()
                .parse::<u64>()
                .ok()
                .filter(|&c| c > 0)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("{ENUM_CAP_ENV}={raw:?} is not a positive integer"))
                })?;
        }
        Ok(limits)
    }
}
