//! Forward and inverse models of a two-photon interferometer that combines a
//! NOON stage (delay `τ1`) with a Hong-Ou-Mandel stage (delay `τ2`).
//!
//! Frequencies are angular and in units of a reference linewidth; delays are
//! in the reciprocal unit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod config;
pub mod freq_engine;
pub mod io;
pub mod numeric;
pub mod spectral_model;
pub mod spectroscopy;
pub mod time_engine;

pub use config::{preset, ConfigError, EngineChoice, ModelConfig, Preset, ScanAxis, ScanConfig};
pub use freq_engine::{
    rate_gaussian_closed, rate_quadrature, scan, DelayPair, Engine, EngineError, Interferogram, Interferometer,
    QuadratureSpec,
};
pub use spectral_model::{make_gaussian_jsa, Coordinate, JointSpectralAmplitude, ModelError, SpectralDensity, Symmetry};
pub use spectroscopy::{reconstruct, ReconstructionResult, SpectroscopyError, Verdict};
pub use time_engine::{cross_term_audit, rate_from_time_domain, TimeError, TimeGrid};
