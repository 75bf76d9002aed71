//! Over-the-air iterative bidirectional training for full-duplex cell-free
//! massive MIMO: channel model, beamformer designs, OTA signalling
//! schedule, baselines, metrics and a Monte Carlo harness.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod mmse_design;
pub mod ota_ibt;
pub mod paired_design;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
