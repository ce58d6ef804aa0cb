//! Sweep execution and the CSV schema.

use std::io::Write;

use mobipred::channel::{synthesize_cluster_paths, PathParams};
use mobipred::eval::{run_experiment_with, NMSE_FLOOR_DB};
use mobipred::{ExperimentConfig, ExperimentReport, Result};
use serde::Serialize;

use crate::config::{SweepAxis, SweepSpec, SweepValue};

/// Label of the perfect-CSI reference rows.
pub const STATIONARY: &str = "stationary";

pub const CSV_HEADER: &str = "axis,value,predictor,drops,nmse_db_mean,nmse_db_std,se_sum_mean,se_sum_std,seed";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub axis: String,
    pub value: String,
    pub predictor: String,
    pub drops: usize,
    pub nmse_db_mean: f64,
    pub nmse_db_std: f64,
    pub se_sum_mean: f64,
    pub se_sum_std: f64,
    pub seed: u64,
}

/// Draws the multipath of one UE in one drop from its seed.
pub type PathFn = dyn Fn(&ExperimentConfig, u64) -> Result<Vec<PathParams>> + Sync;

pub fn cluster_paths(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<PathParams>> {
    synthesize_cluster_paths(&cfg.scenario.to_cluster_scenario(seed))
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CsvRow>> {
    run_sweep_with(spec, None, &cluster_paths)
}

/// Rows are ordered value-major, predictor-minor, with the stationary row
/// last at each point. `label` replaces the predictor column.
pub fn run_sweep_with(spec: &SweepSpec, label: Option<&str>, paths: &PathFn) -> Result<Vec<CsvRow>> {
    let run = |cfg: &ExperimentConfig| run_experiment_with(cfg, &|_, _, seed| paths(cfg, seed));
    let mut rows = Vec::new();
    match spec.axis {
        SweepAxis::SnrDb => {
            let cfg = spec.snr_config();
            let reports = spec
                .predictors
                .iter()
                .map(|&p| {
                    run(&ExperimentConfig {
                        predictor: p,
                        ..cfg.clone()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            for (s, value) in spec.values.iter().enumerate() {
                for report in &reports {
                    rows.push(row(spec, *value, label, report, s, false));
                }
                if spec.stationary {
                    rows.push(row(spec, *value, label, &reports[0], s, true));
                }
            }
        }
        SweepAxis::Predictor => {
            let mut first = None;
            for &value in &spec.values {
                let report = run(&spec.point_config(value))?;
                rows.push(row(spec, value, label, &report, 0, false));
                first.get_or_insert(report);
            }
            if spec.stationary {
                if let Some(report) = first {
                    rows.push(row(spec, spec.values[0], label, &report, 0, true));
                }
            }
        }
        _ => {
            for &value in &spec.values {
                let cfg = spec.point_config(value);
                let mut stationary = None;
                for &p in &spec.predictors {
                    let report = run(&ExperimentConfig {
                        predictor: p,
                        ..cfg.clone()
                    })?;
                    rows.push(row(spec, value, label, &report, 0, false));
                    stationary.get_or_insert(report);
                }
                if spec.stationary {
                    if let Some(report) = stationary {
                        rows.push(row(spec, value, label, &report, 0, true));
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn row(
    spec: &SweepSpec,
    value: SweepValue,
    label: Option<&str>,
    report: &ExperimentReport,
    snr: usize,
    stationary: bool,
) -> CsvRow {
    let predictor = match (stationary, label) {
        (true, _) => STATIONARY.to_string(),
        (false, Some(l)) => l.to_string(),
        (false, None) => report.predictor.to_string(),
    };
    let (nmse_db_mean, nmse_db_std) = if stationary {
        (NMSE_FLOOR_DB, 0.0)
    } else {
        (report.nmse.mean_db, report.nmse.std_db)
    };
    let se = if stationary { &report.se_perfect_csi } else { &report.se };
    CsvRow {
        axis: spec.axis.name().to_string(),
        value: value.to_string(),
        predictor,
        drops: report.drops,
        nmse_db_mean,
        nmse_db_std,
        se_sum_mean: se.sum_se_mean[snr],
        se_sum_std: se.sum_se_std[snr],
        seed: report.seed,
    }
}

pub fn write_csv<W: Write>(rows: &[CsvRow], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    if rows.is_empty() {
        writer.write_record(CSV_HEADER.split(','))?;
    }
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[CsvRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// One drop of a config, per-epoch NMSE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub predictor: String,
    pub nmse_db: f64,
}

pub fn predict_trace(cfg: &ExperimentConfig) -> Result<Vec<TraceRow>> {
    let one = ExperimentConfig {
        drops: 1,
        ..cfg.clone()
    };
    let report = run_experiment_with(&one, &|_, _, seed| cluster_paths(&one, seed))?;
    Ok(report.nmse.per_drop_db[0]
        .iter()
        .enumerate()
        .map(|(epoch, &nmse_db)| TraceRow {
            epoch,
            predictor: report.predictor.to_string(),
            nmse_db,
        })
        .collect())
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in rows {
        writer.serialize(r).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("writing to memory")).expect("csv is utf-8")
}
