//! Learned limited-feedback beamforming for point-to-point MIMO links.
//!
//! A receiver network maps the pilot observation `Y = sqrt(Ep) H P + N` straight to `B`
//! feedback bits; a transmitter network maps the bits to a unit-norm beamformer. Both are
//! trained jointly to maximize the effective gain `||H w||^2`. Classical pipelines (LMMSE
//! estimation followed by DFT or Lloyd codebook search) are provided for comparison, along
//! with Monte Carlo evaluation of normalized gain, QPSK symbol error rate and online latency.

pub mod artifact;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod neural;
pub mod numerics;

pub use error::{Error, Result};
