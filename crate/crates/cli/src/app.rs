//! Command dispatch shared by the binary and the tests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{parse_config, ConfigFile};
use crate::figures::{figure, run_figure, PRESETS};
use crate::selftest::run_selftest;
use crate::sweep::{csv_string, predict_trace, run_sweep, trace_csv, CsvRow};

#[derive(Debug, Parser)]
#[command(
    name = "mobipred",
    version,
    about = "Channel prediction experiments for mobile massive MIMO"
)]
pub struct Cli {
    /// TOML experiment or sweep config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Figure preset name.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run one drop and write the per-epoch prediction error.
    PredictTrace,
    /// Run a `[sweep]` config and write the CSV.
    Sweep,
    /// Run a desk-scale figure preset.
    Figure {
        /// Preset name (same as --preset).
        name: Option<String>,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Debug, Serialize)]
struct Versions {
    mobipred: &'static str,
    #[serde(rename = "mobipred-cli")]
    cli: &'static str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    preset: Option<&'a str>,
    seed: u64,
    versions: Versions,
    outputs: Vec<String>,
    config: C,
}

/// What a command produced; `ok` is false when a self check failed.
#[derive(Debug)]
pub struct Outcome {
    pub ok: bool,
    pub files: Vec<PathBuf>,
    pub report: String,
}

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match cli.threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::Selftest => {
            let checks = run_selftest();
            let mut report = String::new();
            for c in &checks {
                report.push_str(&format!(
                    "{} {}: {}\n",
                    if c.passed { "ok  " } else { "FAIL" },
                    c.name,
                    c.detail
                ));
            }
            Ok(Outcome {
                ok: checks.iter().all(|c| c.passed),
                files: Vec::new(),
                report,
            })
        }
        Command::PredictTrace => {
            let file = load(cli)?;
            let cfg = file.base();
            let rows = predict_trace(cfg)?;
            let files = write_outputs(cli, "trace", &trace_csv(&rows), "predict-trace", None, cfg.seed, cfg)?;
            let report = rows
                .iter()
                .map(|r| format!("epoch {:>3}  {:>12}  {:9.3} dB\n", r.epoch, r.predictor, r.nmse_db))
                .collect();
            Ok(Outcome {
                ok: true,
                files,
                report,
            })
        }
        Command::Sweep => {
            let ConfigFile::Sweep(spec) = load(cli)? else {
                bail!("`sweep` needs a config with a [sweep] table");
            };
            let rows = run_sweep(&spec)?;
            let files = write_outputs(cli, "sweep", &csv_string(&rows), "sweep", None, spec.base.seed, &spec)?;
            Ok(Outcome {
                ok: true,
                files,
                report: summary(&rows),
            })
        }
        Command::Figure { name } => {
            let name = match (name, &cli.preset) {
                (Some(a), Some(b)) if a != b => bail!("figure name `{a}` conflicts with --preset `{b}`"),
                (Some(a), _) | (None, Some(a)) => a.clone(),
                (None, None) => bail!("figure needs a preset name, one of: {}", PRESETS.join(", ")),
            };
            if cli.config.is_some() {
                bail!("figure presets are self-contained; drop --config");
            }
            let seed = cli.seed.unwrap_or(1);
            let fig = figure(&name, seed)
                .with_context(|| format!("unknown preset `{name}`, expected one of: {}", PRESETS.join(", ")))?;
            let rows = run_figure(&fig)?;
            let specs: Vec<_> = fig.parts.iter().map(|p| (&p.label, &p.spec)).collect();
            let files = write_outputs(
                cli,
                fig.name,
                &csv_string(&rows),
                "figure",
                Some(fig.name),
                seed,
                &specs,
            )?;
            Ok(Outcome {
                ok: true,
                files,
                report: format!("{}: {}\n{}", fig.name, fig.description, summary(&rows)),
            })
        }
    }
}

fn load(cli: &Cli) -> anyhow::Result<ConfigFile> {
    let path = cli.config.as_deref().context("this command needs --config <path>")?;
    let mut file = parse_config(path)?;
    if let Some(seed) = cli.seed {
        file.base_mut().seed = seed;
    }
    Ok(file)
}

fn write_outputs<C: Serialize>(
    cli: &Cli,
    stem: &str,
    csv: &str,
    command: &str,
    preset: Option<&str>,
    seed: u64,
    config: &C,
) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(&cli.out).with_context(|| format!("cannot create {}", cli.out.display()))?;
    let csv_path = cli.out.join(format!("{stem}.csv"));
    let manifest_path = cli.out.join(format!("{stem}.manifest.json"));
    let manifest = Manifest {
        command,
        preset,
        seed,
        versions: Versions {
            mobipred: mobipred::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        outputs: vec![file_name(&csv_path)],
        config,
    };
    fs::write(&csv_path, csv).with_context(|| format!("cannot write {}", csv_path.display()))?;
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;
    Ok(vec![csv_path, manifest_path])
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Fixed-width table of the sweep rows.
pub fn summary(rows: &[CsvRow]) -> String {
    let mut out = format!(
        "{:<10} {:>8} {:>14} {:>6} {:>10} {:>8} {:>10} {:>8}\n",
        "axis", "value", "predictor", "drops", "nmse_dB", "std", "sum_SE", "std"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<10} {:>8} {:>14} {:>6} {:>10.2} {:>8.2} {:>10.3} {:>8.3}\n",
            r.axis, r.value, r.predictor, r.drops, r.nmse_db_mean, r.nmse_db_std, r.se_sum_mean, r.se_sum_std
        ));
    }
    out
}
