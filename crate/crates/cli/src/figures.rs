//! Desk-scale figure presets.
//!
//! Every preset shares one reduced scenario: a 4 x 8 array, 16 frequency
//! bins one resource block (360 kHz) apart, 4 UEs with two receive
//! antennas, and three clusters of twenty rays with 5 degree ray spread
//! (P = 60). Samples are 0.5 ms apart, the CSI delay is 4 ms (N_d = 8)
//! and the predictors see 16 samples. Each preset writes one CSV in the
//! sweep schema; reference curves appear as extra predictor labels.

use std::f64::consts::{PI, TAU};

use mobipred::channel::PathParams;
use mobipred::eval::{ArrayConfig, GridConfig, ScenarioConfig};
use mobipred::{Complex64, DenoiseMode, ExperimentConfig, Predictor, Result, SampleSnr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{SweepAxis, SweepSpec, SweepValue};
use crate::sweep::{cluster_paths, run_sweep_with, CsvRow, PathFn};

/// Label of the low-mobility reference: no prediction at 3 km/h.
pub const SLOW_REFERENCE: &str = "none@3kmh";

/// Rician K-factor of the line-of-sight preset, dB.
pub const LOS_K_FACTOR_DB: f64 = 13.3;

pub const PRESETS: [&str; 6] = [
    "fig2-desk",
    "fig3-desk",
    "fig4-desk",
    "fig5-desk",
    "fig6-desk",
    "fig7-desk",
];

/// One labelled sweep of a figure.
pub struct FigurePart {
    pub label: Option<String>,
    pub spec: SweepSpec,
    pub line_of_sight: bool,
}

pub struct Figure {
    pub name: &'static str,
    pub description: &'static str,
    pub parts: Vec<FigurePart>,
}

pub fn desk_base(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        drops: 30,
        n_ues: 4,
        ue_speeds_kmh: vec![60.0],
        history_len: 15,
        snr_db: vec![0.0, 10.0, 20.0, 30.0],
        array: ArrayConfig {
            n_v: 4,
            n_h: 8,
            ..ArrayConfig::default()
        },
        grid: GridConfig {
            n_f: 16,
            delta_f_hz: 360e3,
            ..GridConfig::default()
        },
        scenario: ScenarioConfig {
            n_clusters: 3,
            rays_per_cluster: 20,
            ray_spread_deg: 5.0,
            ..ScenarioConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

fn snr_sweep(base: ExperimentConfig, predictors: Vec<Predictor>, stationary: bool) -> SweepSpec {
    SweepSpec {
        axis: SweepAxis::SnrDb,
        values: base.snr_db.iter().map(|&x| SweepValue::Number(x)).collect(),
        predictors,
        stationary,
        base,
    }
}

fn part(spec: SweepSpec) -> FigurePart {
    FigurePart {
        label: None,
        spec,
        line_of_sight: false,
    }
}

/// No prediction at 3 km/h on otherwise identical settings.
fn slow_reference(base: &ExperimentConfig) -> FigurePart {
    let slow = ExperimentConfig {
        ue_speeds_kmh: vec![3.0],
        denoise: DenoiseMode::Off,
        ..base.clone()
    };
    FigurePart {
        label: Some(SLOW_REFERENCE.to_string()),
        spec: snr_sweep(slow, vec![Predictor::None], false),
        line_of_sight: false,
    }
}

const ALL_PREDICTORS: [Predictor; 4] = [
    Predictor::Pad,
    Predictor::VectorProny,
    Predictor::FirWiener,
    Predictor::None,
];

pub fn figure(name: &str, seed: u64) -> Option<Figure> {
    let base = desk_base(seed);
    let wide = ArrayConfig {
        n_v: 4,
        n_h: 16,
        ..base.array
    };
    let fig = match name {
        "fig2-desk" => Figure {
            name: "fig2-desk",
            description: "sum SE vs SNR, 32 antennas, 60 km/h, noise-free samples",
            parts: vec![
                part(snr_sweep(base.clone(), ALL_PREDICTORS.to_vec(), true)),
                slow_reference(&base),
            ],
        },
        "fig3-desk" => {
            let base = ExperimentConfig { array: wide, ..base };
            Figure {
                name: "fig3-desk",
                description: "sum SE vs SNR, 64 antennas, 60 km/h, noise-free samples",
                parts: vec![
                    part(snr_sweep(base.clone(), ALL_PREDICTORS.to_vec(), true)),
                    slow_reference(&base),
                ],
            }
        }
        "fig4-desk" => {
            let base = ExperimentConfig {
                array: wide,
                n_ues: 8,
                ue_speeds_kmh: vec![3.0, 30.0, 60.0, 90.0],
                order: Some(8),
                ..base
            };
            Figure {
                name: "fig4-desk",
                description: "sum SE vs SNR, 64 antennas, 8 UEs at 3/30/60/90 km/h, shared order 8",
                parts: vec![part(snr_sweep(base, ALL_PREDICTORS.to_vec(), true))],
            }
        }
        "fig5-desk" => {
            let base = ExperimentConfig {
                drops: 20,
                order: Some(4),
                snr_db: vec![20.0],
                scenario: ScenarioConfig {
                    n_clusters: 20,
                    rays_per_cluster: 1,
                    ray_spread_deg: 0.0,
                    ..base.scenario.clone()
                },
                ..base
            };
            Figure {
                name: "fig5-desk",
                description: "PAD prediction error vs antennas, 20 single-ray paths, order 4",
                parts: vec![part(SweepSpec {
                    axis: SweepAxis::NAntennas,
                    values: [4, 16, 64, 256].map(SweepValue::Count).to_vec(),
                    predictors: vec![Predictor::Pad],
                    stationary: false,
                    base,
                })],
            }
        }
        "fig6-desk" => {
            let base = ExperimentConfig {
                ue_speeds_kmh: vec![90.0],
                array: ArrayConfig {
                    n_v: 2,
                    n_h: 16,
                    ..base.array
                },
                scenario: ScenarioConfig {
                    zod_deg: (80.0, 100.0),
                    ..base.scenario.clone()
                },
                ..base
            };
            let mut slow = slow_reference(&base);
            slow.line_of_sight = true;
            Figure {
                name: "fig6-desk",
                description: "sum SE vs SNR, 2 x 16 array, line of sight, 90 km/h",
                parts: vec![
                    FigurePart {
                        line_of_sight: true,
                        ..part(snr_sweep(base.clone(), ALL_PREDICTORS.to_vec(), true))
                    },
                    slow,
                ],
            }
        }
        "fig7-desk" => {
            let base = ExperimentConfig {
                ue_speeds_kmh: vec![30.0],
                sample_snr: SampleSnr::Db(20.0),
                denoise: DenoiseMode::Both,
                order: Some(4),
                ..base
            };
            Figure {
                name: "fig7-desk",
                description: "sum SE vs SNR, 30 km/h, 20 dB sample SNR, denoised, order 4",
                parts: vec![
                    part(snr_sweep(
                        base.clone(),
                        vec![Predictor::Pad, Predictor::VectorProny, Predictor::None],
                        true,
                    )),
                    slow_reference(&base),
                ],
            }
        }
        _ => return None,
    };
    Some(fig)
}

/// Cluster multipath scaled to `1 / (1 + K)` plus one direct ray carrying
/// `K / (1 + K)` of the power, at the first cluster's delay and a random
/// direction inside the scenario ranges.
pub fn line_of_sight_paths(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<PathParams>> {
    let k = 10f64.powf(LOS_K_FACTOR_DB / 10.0);
    let mut paths = cluster_paths(cfg, seed)?;
    let scale = (1.0 + k).sqrt().recip();
    for p in &mut paths {
        p.beta *= scale;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c4f_5321);
    let deg = PI / 180.0;
    let s = &cfg.scenario;
    let mut draw = |(lo, hi): (f64, f64)| {
        if hi > lo {
            rng.random_range(lo..hi) * deg
        } else {
            lo * deg
        }
    };
    let (zod, aod, zoa, aoa) = (draw(s.zod_deg), draw(s.aod_deg), draw(s.zoa_deg), draw(s.aoa_deg));
    let tau = paths.iter().map(|p| p.tau).fold(f64::INFINITY, f64::min);
    let beta = Complex64::from_polar((k / (1.0 + k)).sqrt(), rng.random_range(0.0..TAU));
    paths.push(PathParams::new(zod, aod, zoa, aoa, tau, beta)?);
    Ok(paths)
}

pub fn run_figure(fig: &Figure) -> Result<Vec<CsvRow>> {
    let mut rows = Vec::new();
    for p in &fig.parts {
        let source: &PathFn = if p.line_of_sight {
            &line_of_sight_paths
        } else {
            &cluster_paths
        };
        rows.extend(run_sweep_with(&p.spec, p.label.as_deref(), source)?);
    }
    Ok(rows)
}
