//! Joint transceiver beamforming and power optimization for a full-duplex
//! integrated sensing and communication base station.
//!
//! The crate covers the signal model ([`scenario`], [`sinr`]), a small conic
//! modelling layer over an interior-point solver ([`conic`]), the three
//! optimization algorithms ([`power_min`], [`special_case`], [`rate_max`]),
//! the comparison schemes ([`benchmarks`]) and the Monte Carlo harness
//! ([`experiments`]).

extern crate openblas_src;

pub mod benchmarks;
pub mod conic;
pub mod detection;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod power_min;
pub mod rate_max;
pub mod scenario;
pub mod sinr;
pub mod special_case;
pub mod units;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{ConstraintFamily, Error, Result};
pub use linalg::{CMat, CVec};
pub use scenario::{generate_scenario, Scenario, ScenarioConfig};
pub use sinr::{RxDesign, SinrReport, TxDesign};
