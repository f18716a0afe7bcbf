//! Link-level simulation of time-reversal (TR) prefiltering and All-Rake (AR)
//! reception for time-hopping impulse-radio multiple access under imperfect
//! channel state information.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`]: cluster/ray multipath generation, discretization and
//!   normalization.
//! * [`signal`]: time-hopping codes, convolution, TR prefilter and CSI
//!   perturbation.
//! * [`transceiver`]: coupling coefficients and decision variables for both
//!   transceiver structures.
//! * [`estimation`]: PN training, downlink matched-filter and uplink joint
//!   linear channel estimation.
//! * [`montecarlo`]: symbol-error-probability sweeps, single-user equivalence
//!   checks and coupling statistics.
//! * [`mutual_info`]: characteristic-function pipeline for mutual information
//!   and spectral efficiency.
//! * [`cli`]: the `uwbsim` batch runner.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
mod error;
pub mod estimation;
pub mod montecarlo;
pub mod mutual_info;
pub mod rng;
pub mod signal;
pub mod stats;
pub mod transceiver;

pub use error::{Error, Result};

/// Transceiver structure under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Time-reversal prefilter at the transmitter, single-tap (1Rake) receiver.
    Tr,
    /// No prefilter, All-Rake matched filter at the receiver.
    Ar,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Tr => "tr",
            Scheme::Ar => "ar",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tr" => Ok(Scheme::Tr),
            "ar" => Ok(Scheme::Ar),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}
