//! Metrics, the downlink evaluation chain, the FIR Wiener baseline and the
//! Monte Carlo driver.

pub mod experiment;
pub mod metrics;
pub mod precoding;
pub mod wiener;

pub use experiment::{
    run_experiment, run_experiment_with, ArrayConfig, DenoiseMode, ExperimentConfig, ExperimentReport, GridConfig,
    PredictionErrorReport, Predictor, SampleSnr, ScenarioConfig, SpectralEfficiencyReport,
};
pub use metrics::{nmse_db, spectral_efficiency, SpectralEfficiency, NMSE_FLOOR_DB};
pub use precoding::{ezf_precoder, mmse_irc_sinr, Precoder};
pub use wiener::fir_wiener_predict;
