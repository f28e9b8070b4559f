//! Link-level simulation and analysis for downlink index-modulation-aided
//! NOMA with rotated constellations (IM-NOMA-RC), with PD-NOMA and OFDM
//! baselines.

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod constellation;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod quadrature;
pub mod superposition;

pub use error::{Error, Result};
