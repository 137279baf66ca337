//! Config loading and the `run` / `compare` / `sweep` commands.
//!
//! Every command writes its CSVs and a `manifest.json` into one output
//! directory. Files are written to a temporary name and renamed into place,
//! so a reader never sees a half-written output. The CSV schemas are listed
//! in `docs/csv-schemas.md`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{
    apply_grid_value, run_experiment, ConfigError, MetricsReport, Mode, SimConfig, SimError, SweepParam, ROUND_COLUMNS,
};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPARE_ROUNDS_FILE: &str = "compare_rounds.csv";
pub const COMPARE_SUMMARY_FILE: &str = "compare_summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Columns of the compare summary table.
pub const COMPARE_SUMMARY_COLUMNS: [&str; 8] = [
    "mode",
    "pretrain_accuracy",
    "final_accuracy",
    "total_bits",
    "total_energy",
    "convergence_round",
    "total_transmitted",
    "total_discarded",
];

/// Columns of the sweep table.
pub const SWEEP_COLUMNS: [&str; 8] = [
    "param",
    "value",
    "mode",
    "final_accuracy",
    "total_bits",
    "total_energy",
    "total_transmitted",
    "convergence_round",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("run failed: {0}")]
    Runtime(String),
}

impl HarnessError {
    /// 2 for anything wrong with the inputs, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Parse(_) => 2,
            HarnessError::Io { .. } | HarnessError::Runtime(_) => 1,
        }
    }

    /// The config field at fault, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            HarnessError::Config { field, .. } => Some(field),
            _ => None,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config {
            field: e.field,
            reason: e.reason,
        }
    }
}

impl From<SimError> for HarnessError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

/// Parses a config document. Missing and unknown fields are reported by
/// name; the result is validated.
pub fn parse_config(text: &str) -> Result<SimConfig, HarnessError> {
    let cfg: SimConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        match backticked(&msg) {
            Some(field) if msg.starts_with("missing field") || msg.starts_with("unknown field") => {
                HarnessError::Config {
                    field: field.to_string(),
                    reason: msg,
                }
            }
            _ => HarnessError::Parse(msg),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn backticked(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

pub fn load_config(path: &Path) -> Result<SimConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Config {
        field: "config".into(),
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text)
}

/// Applies a `--seed` override and revalidates.
pub fn with_overrides(mut cfg: SimConfig, seed: Option<u64>) -> Result<SimConfig, HarnessError> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Record of one command invocation. Contains the effective config, so
/// feeding `config` back through `run` / `compare` / `sweep` with the same
/// `sweep` settings reproduces the outputs byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub seed_override: Option<u64>,
    /// `None` for `compare` and `sweep`, which run every mode.
    pub mode: Option<Mode>,
    pub sweep: Option<SweepSpec>,
    pub outputs: Vec<String>,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: String,
    pub grid: Vec<f64>,
}

impl RunManifest {
    fn new(command: &str, cfg: &SimConfig, seed_override: Option<u64>, mode: Option<Mode>, outputs: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            seed_override,
            mode,
            sweep: None,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            config: cfg.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse(e.to_string()))
    }
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, HarnessError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, &target).map_err(|e| HarnessError::io(&target, e))?;
    Ok(target)
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn opt_u32(v: Option<u32>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), HarnessError> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_atomic(dir, MANIFEST_FILE, format!("{json}\n").as_bytes())?;
    Ok(())
}

/// Runs one experiment and writes `metrics.csv`, `summary.json` and the
/// manifest into `out`.
pub fn cmd_run(cfg: &SimConfig, seed_override: Option<u64>, out: &Path) -> Result<MetricsReport, HarnessError> {
    let cfg = with_overrides(cfg.clone(), seed_override)?;
    let report = run_experiment(&cfg)?;
    ensure_dir(out)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).expect("in-memory csv");
    write_atomic(out, METRICS_FILE, &csv)?;
    write_atomic(out, SUMMARY_FILE, format!("{}\n", report.summary_json()).as_bytes())?;
    let manifest = RunManifest::new(
        "run",
        &cfg,
        seed_override,
        Some(cfg.mode),
        &[METRICS_FILE, SUMMARY_FILE],
    );
    write_manifest(out, &manifest)?;
    Ok(report)
}

/// Runs the three modes for one config with the same seed. RandomFilter
/// gets the per-round counts of the Cognitive run. Reports come back in
/// [`Mode::ALL`] order.
pub fn compare_modes(cfg: &SimConfig) -> Result<Vec<MetricsReport>, HarnessError> {
    let pair: Vec<Result<MetricsReport, SimError>> = [Mode::BaselineAll, Mode::Cognitive]
        .par_iter()
        .map(|&mode| {
            run_experiment(&SimConfig {
                mode,
                random_filter_counts: None,
                ..cfg.clone()
            })
        })
        .collect();
    let mut pair = pair.into_iter();
    let baseline = pair.next().expect("two runs")?;
    let cognitive = pair.next().expect("two runs")?;
    let counts = cognitive.records.iter().map(|r| r.samples_transmitted as u32).collect();
    let random = run_experiment(&SimConfig {
        mode: Mode::RandomFilter,
        random_filter_counts: Some(counts),
        ..cfg.clone()
    })?;
    Ok(vec![baseline, random, cognitive])
}

/// Joined per-round CSV keyed by `(mode, round)`.
pub fn compare_rounds_csv(reports: &[MetricsReport]) -> Vec<u8> {
    let header: Vec<&str> = std::iter::once("mode").chain(ROUND_COLUMNS).collect();
    let rows = reports.iter().flat_map(|rep| {
        rep.records.iter().map(move |r| {
            let mut row = vec![rep.summary.mode.as_str().to_string()];
            row.extend(r.csv_fields());
            row
        })
    });
    csv_bytes(&header, rows)
}

pub fn compare_summary_csv(reports: &[MetricsReport]) -> Vec<u8> {
    let rows = reports.iter().map(|rep| {
        let s = &rep.summary;
        vec![
            s.mode.as_str().to_string(),
            s.pretrain_accuracy.to_string(),
            s.final_accuracy.to_string(),
            s.total_bits.to_string(),
            s.total_energy.to_string(),
            opt_u32(s.convergence_round),
            s.total_transmitted.to_string(),
            s.total_discarded.to_string(),
        ]
    });
    csv_bytes(&COMPARE_SUMMARY_COLUMNS, rows)
}

pub fn cmd_compare(
    cfg: &SimConfig,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<Vec<MetricsReport>, HarnessError> {
    let cfg = with_overrides(cfg.clone(), seed_override)?;
    let reports = compare_modes(&cfg)?;
    ensure_dir(out)?;
    write_atomic(out, COMPARE_ROUNDS_FILE, &compare_rounds_csv(&reports))?;
    write_atomic(out, COMPARE_SUMMARY_FILE, &compare_summary_csv(&reports))?;
    let manifest = RunManifest::new(
        "compare",
        &cfg,
        seed_override,
        None,
        &[COMPARE_ROUNDS_FILE, COMPARE_SUMMARY_FILE],
    );
    write_manifest(out, &manifest)?;
    Ok(reports)
}

/// Parses `v1,v2,...`; the grid must be non-empty and strictly ascending.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, HarnessError> {
    let grid_err = |reason: String| HarnessError::Config {
        field: "grid".into(),
        reason,
    };
    let grid = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| grid_err(format!("`{s}` is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err(grid_err("must not be empty".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(grid_err("values must be finite".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(grid_err("must be strictly ascending".into()));
    }
    Ok(grid)
}

/// One sweep point: the grid value and the three mode reports in
/// [`Mode::ALL`] order.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub reports: Vec<MetricsReport>,
}

/// Runs every mode at every grid point on at most `jobs` worker threads.
/// Results do not depend on `jobs`.
pub fn sweep_modes(
    cfg: &SimConfig,
    param: SweepParam,
    grid: &[f64],
    jobs: usize,
) -> Result<Vec<SweepPoint>, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::Config {
            field: "grid".into(),
            reason: "must not be empty".into(),
        });
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::Config {
            field: "grid".into(),
            reason: "must be strictly ascending".into(),
        });
    }
    let configs = grid
        .iter()
        .map(|&v| apply_grid_value(cfg, param, v))
        .collect::<Result<Vec<_>, _>>()?;
    for c in &configs {
        c.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let reports: Vec<Result<Vec<MetricsReport>, HarnessError>> =
        pool.install(|| configs.par_iter().map(compare_modes).collect());
    grid.iter()
        .zip(reports)
        .map(|(&value, r)| Ok(SweepPoint { value, reports: r? }))
        .collect()
}

/// Rows sorted by grid value, modes in [`Mode::ALL`] order within a value.
pub fn sweep_csv(param: SweepParam, points: &[SweepPoint]) -> Vec<u8> {
    let rows = points.iter().flat_map(|p| {
        p.reports.iter().map(move |rep| {
            let s = &rep.summary;
            vec![
                param.as_str().to_string(),
                p.value.to_string(),
                s.mode.as_str().to_string(),
                s.final_accuracy.to_string(),
                s.total_bits.to_string(),
                s.total_energy.to_string(),
                s.total_transmitted.to_string(),
                opt_u32(s.convergence_round),
            ]
        })
    });
    csv_bytes(&SWEEP_COLUMNS, rows)
}

pub fn cmd_sweep(
    cfg: &SimConfig,
    seed_override: Option<u64>,
    param: SweepParam,
    grid: &[f64],
    jobs: usize,
    out: &Path,
) -> Result<Vec<SweepPoint>, HarnessError> {
    let cfg = with_overrides(cfg.clone(), seed_override)?;
    let points = sweep_modes(&cfg, param, grid, jobs)?;
    ensure_dir(out)?;
    write_atomic(out, SWEEP_FILE, &sweep_csv(param, &points))?;
    let mut manifest = RunManifest::new("sweep", &cfg, seed_override, None, &[SWEEP_FILE]);
    manifest.sweep = Some(SweepSpec {
        param: param.as_str().to_string(),
        grid: grid.to_vec(),
    });
    write_manifest(out, &manifest)?;
    Ok(points)
}
