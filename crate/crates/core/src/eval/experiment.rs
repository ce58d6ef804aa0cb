//! Monte Carlo experiment driver.
//!
//! Every drop draws independent multipath for each UE, samples the channel
//! `L + 1` times at spacing `delta_t`, optionally corrupts and denoises the
//! samples, predicts `N_d` periods ahead, precodes on the prediction and
//! scores the result against the true channel. Drops run in parallel; each
//! one draws from its own ChaCha stream keyed by `(seed, drop, ue,
//! purpose)`, so reports do not depend on the worker count.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{
    add_noise_with_variance, noise_variance_for, synthesize_cluster_paths, ArrayGeometry, ChannelModel,
    ChannelSnapshot, ClusterScenario, PathParams, SampleTrack, SubcarrierGrid, UeKinematics,
};
use crate::denoise::{apply_filter, build_lmmse_filter, estimate_covariance, estimate_noise_power, TruncationPolicy};
use crate::error::{Error, Result};
use crate::pad::{default_order, pad_predict_with, AngularDelayDims, AngularDelayTransform, PadParams};
use crate::prony::{vector_prony_predict, SolverStrategy};

use super::metrics::{mean_std, nmse_ratio, ratio_to_db, spectral_efficiency};
use super::precoding::{ezf_precoder, mmse_irc_sinr};
use super::wiener::{default_fir_order, fir_wiener_predict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    /// Use the most recent sample as is.
    None,
    VectorProny,
    Pad,
    FirWiener,
}

impl Predictor {
    pub const ALL: [Predictor; 4] = [
        Predictor::None,
        Predictor::VectorProny,
        Predictor::Pad,
        Predictor::FirWiener,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Predictor::None => "none",
            Predictor::VectorProny => "vector_prony",
            Predictor::Pad => "pad",
            Predictor::FirWiener => "fir_wiener",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl std::fmt::Display for Predictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiseMode {
    Off,
    /// Covariance-based filter on the samples.
    Lmmse,
    /// Truncated-SVD solving inside the Prony fits.
    TkSolver,
    Both,
}

impl DenoiseMode {
    fn filters(&self) -> bool {
        matches!(self, DenoiseMode::Lmmse | DenoiseMode::Both)
    }

    fn truncates(&self) -> bool {
        matches!(self, DenoiseMode::TkSolver | DenoiseMode::Both)
    }
}

/// Sample quality: noise-free, or additive noise at a channel-to-noise
/// power ratio in dB. Written as `"ideal"` or a number in config files.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SampleSnr {
    #[default]
    Ideal,
    Db(f64),
}

impl SampleSnr {
    pub fn db(&self) -> f64 {
        match *self {
            SampleSnr::Ideal => f64::INFINITY,
            SampleSnr::Db(x) => x,
        }
    }
}

impl Serialize for SampleSnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            SampleSnr::Ideal => s.serialize_str("ideal"),
            SampleSnr::Db(x) => s.serialize_f64(x),
        }
    }
}

impl<'de> Deserialize<'de> for SampleSnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) if t == "ideal" => Ok(SampleSnr::Ideal),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected \"ideal\" or a number of dB, got \"{t}\""
            ))),
            Raw::Int(x) => Ok(SampleSnr::Db(x as f64)),
            Raw::Float(x) => Ok(SampleSnr::Db(x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub n_v: usize,
    pub n_h: usize,
    pub d_v_wavelengths: f64,
    pub d_h_wavelengths: f64,
    /// UE receive antennas, spaced half a wavelength apart.
    pub n_r: usize,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            n_v: 4,
            n_h: 8,
            d_v_wavelengths: 0.8,
            d_h_wavelengths: 0.5,
            n_r: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub carrier_hz: f64,
    pub n_f: usize,
    pub delta_f_hz: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 3.5e9,
            n_f: 51,
            delta_f_hz: 30e3,
        }
    }
}

/// Clustered multipath parameters; angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    pub zod_deg: (f64, f64),
    pub aod_deg: (f64, f64),
    pub zoa_deg: (f64, f64),
    pub aoa_deg: (f64, f64),
    pub ray_spread_deg: f64,
    pub delay_spread_ns: f64,
    pub power_decay_db: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_clusters: 23,
            rays_per_cluster: 20,
            zod_deg: (70.0, 110.0),
            aod_deg: (-60.0, 60.0),
            zoa_deg: (45.0, 135.0),
            aoa_deg: (-180.0, 180.0),
            ray_spread_deg: 5.0,
            delay_spread_ns: 300.0,
            power_decay_db: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn to_cluster_scenario(&self, seed: u64) -> ClusterScenario {
        let rad = |(a, b): (f64, f64)| (a.to_radians(), b.to_radians());
        ClusterScenario {
            n_clusters: self.n_clusters,
            rays_per_cluster: self.rays_per_cluster,
            zod_range: rad(self.zod_deg),
            aod_range: rad(self.aod_deg),
            zoa_range: rad(self.zoa_deg),
            aoa_range: rad(self.aoa_deg),
            ray_spread: self.ray_spread_deg.to_radians(),
            delay_spread: self.delay_spread_ns * 1e-9,
            power_decay_db: self.power_decay_db,
            seed,
        }
    }
}

/// One experiment cell. Speeds are in km/h and times in milliseconds;
/// every UE `k` moves at `ue_speeds_kmh[k % len]` in a random horizontal
/// direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub drops: usize,
    /// Consecutive prediction instants per drop, one sample apart.
    pub epochs: usize,
    pub n_ues: usize,
    pub ue_speeds_kmh: Vec<f64>,
    pub delta_t_ms: f64,
    pub csi_delay_ms: f64,
    /// `L`: the predictor sees `L + 1` samples.
    pub history_len: usize,
    pub predictor: Predictor,
    /// Shared predictor order; per-predictor defaults when absent.
    pub order: Option<usize>,
    pub sample_snr: SampleSnr,
    pub denoise: DenoiseMode,
    /// Most recent samples averaged into the LMMSE covariance; all when absent.
    pub covariance_window: Option<usize>,
    /// Fraction of smallest covariance eigenvalues averaged for the noise
    /// power estimate.
    pub noise_tail_fraction: f64,
    /// Give the LMMSE filter the true noise variance instead of estimating it.
    pub oracle_noise_power: bool,
    pub gamma: f64,
    pub gamma_tk: f64,
    /// Downlink SNR points for the spectral-efficiency curves.
    pub snr_db: Vec<f64>,
    /// Total transmit power.
    pub power: f64,
    pub array: ArrayConfig,
    pub grid: GridConfig,
    pub scenario: ScenarioConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            drops: 10,
            epochs: 1,
            n_ues: 8,
            ue_speeds_kmh: vec![60.0],
            delta_t_ms: 0.5,
            csi_delay_ms: 4.0,
            history_len: 15,
            predictor: Predictor::Pad,
            order: None,
            sample_snr: SampleSnr::Ideal,
            denoise: DenoiseMode::Off,
            covariance_window: None,
            noise_tail_fraction: 0.25,
            oracle_noise_power: false,
            gamma: 0.99,
            gamma_tk: 0.99,
            snr_db: vec![20.0],
            power: 1.0,
            array: ArrayConfig::default(),
            grid: GridConfig::default(),
            scenario: ScenarioConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn lambda0(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.grid.carrier_hz
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t_ms * 1e-3
    }

    /// `N_d = T_d / delta_t`; the ratio must be a positive integer.
    pub fn n_d(&self) -> Result<usize> {
        if !(self.delta_t_ms.is_finite() && self.delta_t_ms > 0.0) {
            return Err(Error::invalid(
                "delta_t_ms",
                format!("must be positive, got {}", self.delta_t_ms),
            ));
        }
        if !(self.csi_delay_ms.is_finite() && self.csi_delay_ms > 0.0) {
            return Err(Error::invalid(
                "csi_delay_ms",
                format!("must be positive, got {}", self.csi_delay_ms),
            ));
        }
        let ratio = self.csi_delay_ms / self.delta_t_ms;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(
                "csi_delay_ms",
                format!(
                    "csi_delay_ms = {} must be a positive integer multiple of delta_t_ms = {}",
                    self.csi_delay_ms, self.delta_t_ms
                ),
            ));
        }
        Ok(n as usize)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::with_spacing_in_wavelengths(
            self.array.n_v,
            self.array.n_h,
            self.array.d_v_wavelengths,
            self.array.d_h_wavelengths,
            self.grid.carrier_hz,
        )
    }

    pub fn subcarriers(&self) -> Result<SubcarrierGrid> {
        SubcarrierGrid::new(self.grid.n_f, self.grid.delta_f_hz, self.grid.carrier_hz)
    }

    pub fn model(&self) -> Result<ChannelModel> {
        Ok(ChannelModel::new(self.geometry()?, self.subcarriers()?, self.array.n_r))
    }

    pub fn solver(&self) -> Result<SolverStrategy> {
        Ok(if self.denoise.truncates() {
            SolverStrategy::TuftsKumaresan(TruncationPolicy::new(self.gamma_tk)?)
        } else {
            SolverStrategy::default()
        })
    }

    /// Order actually used by the configured predictor (`None` for the
    /// no-prediction baseline).
    pub fn effective_order(&self) -> Result<Option<usize>> {
        let samples = self.history_len + 1;
        Ok(match self.predictor {
            Predictor::None => None,
            Predictor::VectorProny => Some(self.order.unwrap_or(self.history_len)),
            Predictor::Pad => Some(self.order.unwrap_or_else(|| default_order(samples))),
            Predictor::FirWiener => Some(
                self.order
                    .unwrap_or_else(|| default_fir_order(samples, self.n_d().unwrap_or(1))),
            ),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n_d = self.n_d()?;
        if self.drops == 0 {
            return Err(Error::invalid("drops", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if self.n_ues == 0 {
            return Err(Error::invalid("n_ues", "must be at least 1"));
        }
        if self.array.n_r == 0 {
            return Err(Error::invalid("array.n_r", "must be at least 1"));
        }
        let geometry = self.geometry()?;
        self.subcarriers()?;
        if self.n_ues > geometry.n_t() {
            return Err(Error::invalid(
                "n_ues",
                format!("{} UEs exceed n_t = {} BS antennas", self.n_ues, geometry.n_t()),
            ));
        }
        if self.ue_speeds_kmh.is_empty() {
            return Err(Error::Empty("ue_speeds_kmh"));
        }
        if let Some(v) = self.ue_speeds_kmh.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid("ue_speeds_kmh", format!("speeds must be >= 0, got {v}")));
        }
        if self.history_len == 0 {
            return Err(Error::invalid("history_len", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must be in (0, 1], got {}", self.gamma),
            ));
        }
        TruncationPolicy::new(self.gamma_tk)?;
        if !(self.noise_tail_fraction > 0.0 && self.noise_tail_fraction < 1.0) {
            return Err(Error::invalid(
                "noise_tail_fraction",
                format!("must be in (0, 1), got {}", self.noise_tail_fraction),
            ));
        }
        if let Some(w) = self.covariance_window {
            if w == 0 || w > self.history_len + 1 {
                return Err(Error::invalid(
                    "covariance_window",
                    format!("must be in 1..={} (history_len + 1), got {w}", self.history_len + 1),
                ));
            }
        }
        if let SampleSnr::Db(x) = self.sample_snr {
            if !x.is_finite() {
                return Err(Error::invalid("sample_snr", "must be \"ideal\" or a finite dB value"));
            }
        }
        if self.snr_db.is_empty() {
            return Err(Error::Empty("snr_db"));
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid("snr_db", format!("must be finite, got {x}")));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::invalid("power", "must be positive"));
        }
        self.scenario.to_cluster_scenario(0).validate()?;

        let samples = self.history_len + 1;
        if let Some(order) = self.effective_order()? {
            let ok = match self.predictor {
                Predictor::None => true,
                Predictor::VectorProny => (1..=self.history_len).contains(&order),
                Predictor::Pad => order >= 1 && 2 * order <= samples,
                Predictor::FirWiener => order >= 1 && order + n_d <= samples,
            };
            if !ok {
                return Err(Error::invalid(
                    "order",
                    format!(
                        "order {order} is not supported by {} with history_len = {}",
                        self.predictor, self.history_len
                    ),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrorReport {
    /// `per_drop_db[drop][epoch]`.
    pub per_drop_db: Vec<Vec<f64>>,
    pub mean_db: f64,
    pub std_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEfficiencyReport {
    pub snr_db: Vec<f64>,
    /// `sum_se_per_drop[snr][drop]`, averaged over epochs.
    pub sum_se_per_drop: Vec<Vec<f64>>,
    pub sum_se_mean: Vec<f64>,
    pub sum_se_std: Vec<f64>,
    /// `per_ue_mean[snr][ue]`.
    pub per_ue_mean: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub predictor: Predictor,
    pub drops: usize,
    pub seed: u64,
    pub nmse: PredictionErrorReport,
    pub se: SpectralEfficiencyReport,
    /// Precoding on the true channel at the application instant.
    pub se_perfect_csi: SpectralEfficiencyReport,
    /// Mean angular-delay support size (PAD only).
    pub mean_support: Option<f64>,
}

/// Stream tags for the per-drop generators.
pub mod stream {
    pub const PATHS: u64 = 1;
    pub const MOTION: u64 = 2;
    pub const NOISE: u64 = 3;
}

/// Generator for `(drop, ue, purpose)` under master seed `seed`.
pub fn drop_rng(seed: u64, drop: usize, ue: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((drop as u64) << 32) | ((ue as u64 & 0xff_ffff) << 8) | (purpose & 0xff));
    rng
}

/// Source of per-UE multipath: `(drop, ue, seed) -> paths`.
pub type PathSource<'a> = dyn Fn(usize, usize, u64) -> Result<Vec<PathParams>> + Sync + 'a;

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let scenario = config.scenario.clone();
    run_experiment_with(config, &move |_, _, seed| {
        synthesize_cluster_paths(&scenario.to_cluster_scenario(seed))
    })
}

pub fn run_experiment_with(config: &ExperimentConfig, paths: &PathSource<'_>) -> Result<ExperimentReport> {
    config.validate()?;
    let setup = Setup::new(config)?;
    let outcomes: Vec<DropOutcome> = (0..config.drops)
        .into_par_iter()
        .map(|d| {
            setup.run_drop(d, paths).map_err(|e| Error::DropFailed {
                drop: d,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(config, &outcomes))
}

/// Immutable per-run state shared by all drops.
struct Setup<'a> {
    config: &'a ExperimentConfig,
    model: ChannelModel,
    n_d: usize,
    solver: SolverStrategy,
    order: Option<usize>,
    transform: Option<AngularDelayTransform>,
}

#[derive(Debug, Clone)]
struct DropOutcome {
    nmse_db: Vec<f64>,
    /// `[snr]`, mean over epochs.
    se_sum: Vec<f64>,
    /// `[snr][ue]`.
    se_per_ue: Vec<Vec<f64>>,
    se_perfect_sum: Vec<f64>,
    se_perfect_per_ue: Vec<Vec<f64>>,
    support: Option<f64>,
}

impl<'a> Setup<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self> {
        let model = config.model()?;
        let transform = match config.predictor {
            Predictor::Pad => Some(AngularDelayTransform::new(AngularDelayDims::new(
                config.array.n_v,
                config.array.n_h,
                config.grid.n_f,
            ))?),
            _ => None,
        };
        Ok(Self {
            config,
            model,
            n_d: config.n_d()?,
            solver: config.solver()?,
            order: config.effective_order()?,
            transform,
        })
    }

    fn kinematics(&self, d: usize, ue: usize) -> Result<UeKinematics> {
        let cfg = self.config;
        let speed = cfg.ue_speeds_kmh[ue % cfg.ue_speeds_kmh.len()] / 3.6;
        let phi_v = drop_rng(cfg.seed, d, ue, stream::MOTION).random_range(-PI..PI);
        UeKinematics::new(
            speed,
            phi_v,
            PI / 2.0,
            UeKinematics::default_rx_positions(cfg.array.n_r, cfg.lambda0()),
        )
    }

    fn predict(&self, track: &SampleTrack) -> Result<(ChannelSnapshot, Option<usize>)> {
        Ok(match self.config.predictor {
            Predictor::None => (track.last().clone(), None),
            Predictor::VectorProny => {
                let (n_r, n_t, n_f) = track.dims();
                let data = vector_prony_predict(track, self.n_d, self.order, &self.solver)?;
                (
                    ChannelSnapshot::from_stacked(n_r, n_t, n_f, track.time_after(self.n_d), data)?,
                    None,
                )
            }
            Predictor::Pad => {
                let params = PadParams {
                    gamma: self.config.gamma,
                    n_d: self.n_d,
                    order: self.order,
                    solver: self.solver,
                };
                let transform = self.transform.as_ref().expect("PAD transform is built in Setup::new");
                let out = pad_predict_with(track, transform, &params)?;
                let support = out.support.len();
                (out.snapshot, Some(support))
            }
            Predictor::FirWiener => (fir_wiener_predict(track, self.order.unwrap_or(1), self.n_d)?, None),
        })
    }

    fn run_drop(&self, d: usize, paths: &PathSource<'_>) -> Result<DropOutcome> {
        let cfg = self.config;
        let dt = cfg.delta_t();
        let samples = cfg.history_len + 1;
        let n_snr = cfg.snr_db.len();
        let sample_snr = cfg.sample_snr.db();

        let mut prepared = Vec::with_capacity(cfg.n_ues);
        let mut noise_rngs = Vec::with_capacity(cfg.n_ues);
        for ue in 0..cfg.n_ues {
            let path_seed = drop_rng(cfg.seed, d, ue, stream::PATHS).random::<u64>();
            let ue_paths = paths(d, ue, path_seed)?;
            prepared.push(self.model.prepare(&ue_paths, &self.kinematics(d, ue)?)?);
            noise_rngs.push(drop_rng(cfg.seed, d, ue, stream::NOISE));
        }

        let mut nmse_db = Vec::with_capacity(cfg.epochs);
        let mut se_sum = vec![0.0; n_snr];
        let mut se_per_ue = vec![vec![0.0; cfg.n_ues]; n_snr];
        let mut se_perfect_sum = vec![0.0; n_snr];
        let mut se_perfect_per_ue = vec![vec![0.0; cfg.n_ues]; n_snr];
        let mut support_total = 0usize;
        let mut support_count = 0usize;

        for epoch in 0..cfg.epochs {
            let mut predicted = Vec::with_capacity(cfg.n_ues);
            let mut truths = Vec::with_capacity(cfg.n_ues);
            let mut ratio = 0.0;
            for (ue, channel) in prepared.iter().enumerate() {
                let mut sigma2_sum = 0.0;
                let mut snaps = Vec::with_capacity(samples);
                for l in 0..samples {
                    let clean = channel.snapshot((epoch + l) as f64 * dt);
                    let sigma2 = noise_variance_for(&clean, sample_snr);
                    sigma2_sum += sigma2;
                    snaps.push(add_noise_with_variance(&clean, sigma2, &mut noise_rngs[ue]));
                }
                if cfg.denoise.filters() {
                    let window = cfg.covariance_window.unwrap_or(samples);
                    let cov = estimate_covariance(&snaps[samples - window..])?;
                    let sigma2 = if cfg.oracle_noise_power {
                        sigma2_sum / samples as f64
                    } else {
                        estimate_noise_power(&cov, cfg.noise_tail_fraction)?
                    };
                    let filter = build_lmmse_filter(&cov, sigma2, cfg.array.n_r)?;
                    snaps = snaps.iter().map(|s| apply_filter(s, &filter)).collect::<Result<_>>()?;
                }
                let track = SampleTrack::new(dt, snaps)?;
                let (pred, support) = self.predict(&track)?;
                if let Some(s) = support {
                    support_total += s;
                    support_count += 1;
                }
                let truth = channel.snapshot((epoch + cfg.history_len + self.n_d) as f64 * dt);
                ratio += nmse_ratio(&pred, &truth)?;
                predicted.push(pred);
                truths.push(truth);
            }
            nmse_db.push(ratio_to_db(ratio / cfg.n_ues as f64));

            let (se, per_ue) = self.downlink_se(&predicted, &truths)?;
            let (se_p, per_ue_p) = self.downlink_se(&truths, &truths)?;
            for s in 0..n_snr {
                se_sum[s] += se[s];
                se_perfect_sum[s] += se_p[s];
                for ue in 0..cfg.n_ues {
                    se_per_ue[s][ue] += per_ue[s][ue];
                    se_perfect_per_ue[s][ue] += per_ue_p[s][ue];
                }
            }
        }

        let epochs = cfg.epochs as f64;
        let scale = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x /= epochs);
        scale(&mut se_sum);
        scale(&mut se_perfect_sum);
        se_per_ue.iter_mut().for_each(scale);
        se_perfect_per_ue.iter_mut().for_each(scale);
        Ok(DropOutcome {
            nmse_db,
            se_sum,
            se_per_ue,
            se_perfect_sum,
            se_perfect_per_ue,
            support: (support_count > 0).then(|| support_total as f64 / support_count as f64),
        })
    }

    /// Sum and per-UE SE for every downlink SNR point.
    fn downlink_se(&self, csi: &[ChannelSnapshot], truth: &[ChannelSnapshot]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let cfg = self.config;
        let n_f = cfg.grid.n_f;
        let n_snr = cfg.snr_db.len();
        // sinr[snr][ue][bin]
        let mut sinr = vec![vec![vec![0.0; n_f]; cfg.n_ues]; n_snr];
        #[allow(clippy::needless_range_loop)]
        for i in 0..n_f {
            let est: Vec<_> = csi.iter().map(|s| s.frequency_slice(i)).collect();
            let real: Vec<_> = truth.iter().map(|s| s.frequency_slice(i)).collect();
            let precoder = ezf_precoder(&est, cfg.power)?;
            for (s, &snr) in cfg.snr_db.iter().enumerate() {
                let noise = cfg.power / 10f64.powf(snr / 10.0);
                for (ue, v) in mmse_irc_sinr(&real, &precoder.w, noise)?.into_iter().enumerate() {
                    sinr[s][ue][i] = v;
                }
            }
        }
        let mut sums = Vec::with_capacity(n_snr);
        let mut per_ue = Vec::with_capacity(n_snr);
        for grid in &sinr {
            let se = spectral_efficiency(grid)?;
            sums.push(se.sum);
            per_ue.push(se.per_ue);
        }
        Ok((sums, per_ue))
    }
}

fn se_report(
    config: &ExperimentConfig,
    per_drop: Vec<&Vec<f64>>,
    per_ue: Vec<&Vec<Vec<f64>>>,
) -> SpectralEfficiencyReport {
    let n_snr = config.snr_db.len();
    let drops = per_drop.len() as f64;
    let sum_se_per_drop: Vec<Vec<f64>> = (0..n_snr).map(|s| per_drop.iter().map(|d| d[s]).collect()).collect();
    let (sum_se_mean, sum_se_std) = sum_se_per_drop.iter().map(|v| mean_std(v)).unzip();
    let per_ue_mean = (0..n_snr)
        .map(|s| {
            (0..config.n_ues)
                .map(|ue| per_ue.iter().map(|d| d[s][ue]).sum::<f64>() / drops)
                .collect()
        })
        .collect();
    SpectralEfficiencyReport {
        snr_db: config.snr_db.clone(),
        sum_se_per_drop,
        sum_se_mean,
        sum_se_std,
        per_ue_mean,
    }
}

fn aggregate(config: &ExperimentConfig, outcomes: &[DropOutcome]) -> ExperimentReport {
    let per_drop_db: Vec<Vec<f64>> = outcomes.iter().map(|o| o.nmse_db.clone()).collect();
    let flat: Vec<f64> = per_drop_db.iter().flatten().copied().collect();
    let (mean_db, std_db) = mean_std(&flat);
    let supports: Vec<f64> = outcomes.iter().filter_map(|o| o.support).collect();
    ExperimentReport {
        predictor: config.predictor,
        drops: config.drops,
        seed: config.seed,
        nmse: PredictionErrorReport {
            per_drop_db,
            mean_db,
            std_db,
        },
        se: se_report(
            config,
            outcomes.iter().map(|o| &o.se_sum).collect(),
            outcomes.iter().map(|o| &o.se_per_ue).collect(),
        ),
        se_perfect_csi: se_report(
            config,
            outcomes.iter().map(|o| &o.se_perfect_sum).collect(),
            outcomes.iter().map(|o| &o.se_perfect_per_ue).collect(),
        ),
        mean_support: (!supports.is_empty()).then(|| supports.iter().sum::<f64>() / supports.len() as f64),
    }
}
