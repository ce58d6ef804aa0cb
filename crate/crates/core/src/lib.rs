//! Prony-based channel prediction for massive MIMO under user mobility.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] synthesises multipath channels over a uniform planar array
//!   and an OFDM subcarrier grid, including Doppler evolution and noisy
//!   sample generation.
//! * [`prony`] fits linear recursions to uniformly sampled exponential
//!   mixtures (scalar and vector forms) and extrapolates them.
//! * [`pad`] predicts in the angular-delay domain: a unitary 3-D DFT
//!   projection, energy-based support selection, per-tap Prony recursion
//!   and reconstruction.
//! * [`denoise`] provides truncated-SVD (Tufts-Kumaresan) solving and the
//!   covariance-based LMMSE denoising filter.
//! * [`eval`] carries the metrics, the EZF / MMSE-IRC downlink chain, the
//!   FIR Wiener baseline and the Monte Carlo experiment driver.
//!
//! Sample windows are stored oldest-first everywhere.

pub mod channel;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod pad;
pub mod prony;

pub use num_complex::Complex64;

pub use channel::{
    ArrayGeometry, ChannelModel, ChannelSnapshot, ClusterScenario, PathParams, SampleTrack, SubcarrierGrid,
    UeKinematics,
};
pub use denoise::{DenoiseFilter, SpatialCovariance, TruncationPolicy};
pub use error::{Error, Result};
pub use eval::{
    DenoiseMode, ExperimentConfig, ExperimentReport, PredictionErrorReport, Predictor, SampleSnr,
    SpectralEfficiencyReport,
};
pub use pad::{AngularDelayDims, AngularDelayTrack, AngularDelayTransform, SupportSet};
pub use prony::{PronyCoefficients, SolverStrategy};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
