//! Spectrally tuned single-qubit control pulses for transmons.
//!
//! The crate covers envelope synthesis (raised cosine, Gaussian, FAST Fourier
//! series, higher-derivative DRAG), baseband spectra, control-line distortion
//! and its inversion, Lindblad simulation of a truncated Duffing oscillator,
//! simulated calibration, and randomized benchmarking.

pub mod benchmarking;
pub mod calibration;
pub mod cli;
pub mod distortion;
pub mod envelopes;
pub mod error;
pub mod fast_synth;
pub mod fitting;
pub mod hd_drag;
pub mod quad;
pub mod simulator;
pub mod spectrum;

pub use error::{Error, Result};
