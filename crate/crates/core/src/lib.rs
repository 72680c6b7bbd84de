//! Multicarrier PHY-layer simulation library.
//!
//! Implements CP-OFDM (optionally WOLA-windowed), conventional FBMC/OQAM and
//! dual-polarization FBMC with three polarization multiplexing structures,
//! together with the machinery needed to study them: prototype filter design,
//! time-frequency localization analysis, tapped-delay-line fading channels
//! with cross-polarization leakage, pilot-based channel estimation, and a
//! deterministic Monte-Carlo experiment runner.
//!
//! All arithmetic is `f64`; waveforms are complex baseband sample streams.

pub mod channel;
pub mod dp;
pub mod eq;
pub mod error;
pub mod experiment;
pub mod filters;
pub mod grid;
pub mod interference;
pub mod metrics;
pub mod modem;
pub mod rng;

pub use error::{Error, Result};
pub use filters::{FilterKind, PrototypeFilter};
pub use grid::{OqamGrid, QamGrid, SystemConfig};
pub use modem::Waveform;
