//! Seeded Monte Carlo experiment runner.
//!
//! [`run`] executes one [`ExperimentConfig`] and writes CSV files plus a
//! `manifest.json` into an output directory. CSV bodies depend only on the
//! configuration; timestamps live in the manifest.
//!
//! | file | columns |
//! |---|---|
//! | `ber_vs_snr.csv` | `snr_db,method,mean_ber,stderr_ber,trials,failures` |
//! | `ber_vs_snr_inclusive.csv` | same, failed trials counted as BER 0.5 |
//! | `ber_vs_snr_summary.csv` | `snr_db,method,rho,mean_ber,stderr_ber,trials,failures,failure_rate,mean_iterations,inclusive_mean_ber` |
//! | `ber_vs_rho.csv` | `snr_db,rho,method,mean_ber,stderr_ber,trials,failures` |
//! | `cond_vs_rho.csv` | `snr_db,rho,axis,cond` (mean over trials) |
//! | `flops_vs_size.csv` | `n_h,n_v,method,flops` |
//! | `af_<method>.csv` | `p,q,af_db` |
//! | `af_sources.csv` | `index,p,q,desired` |
//!
//! Missing values are written as `NaN`. BER rows are appended and flushed
//! after every SNR point, so an interrupted run leaves the completed points
//! on disk with the manifest still marked `running`.

pub mod config;
pub mod experiments;
pub mod records;

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind, Method, Overrides, RhoSpec, StatsMode};
pub use records::{aggregate, MethodOutcome, SummaryRow, TrialRecord};

use crate::error::{Error, Result};
use crate::signal_model::Axis;

/// Version of the CSV column layout and manifest fields.
pub const SCHEMA_VERSION: u32 = 1;

pub const BER_VS_SNR_HEADER: [&str; 6] = [
    "snr_db",
    "method",
    "mean_ber",
    "stderr_ber",
    "trials",
    "failures",
];
pub const BER_SUMMARY_HEADER: [&str; 10] = [
    "snr_db",
    "method",
    "rho",
    "mean_ber",
    "stderr_ber",
    "trials",
    "failures",
    "failure_rate",
    "mean_iterations",
    "inclusive_mean_ber",
];
pub const BER_VS_RHO_HEADER: [&str; 7] = [
    "snr_db",
    "rho",
    "method",
    "mean_ber",
    "stderr_ber",
    "trials",
    "failures",
];
pub const COND_VS_RHO_HEADER: [&str; 4] = ["snr_db", "rho", "axis", "cond"];
pub const FLOPS_VS_SIZE_HEADER: [&str; 4] = ["n_h", "n_v", "method", "flops"];
pub const ARRAY_FACTOR_HEADER: [&str; 3] = ["p", "q", "af_db"];
pub const AF_SOURCES_HEADER: [&str; 4] = ["index", "p", "q", "desired"];

/// One file listed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub kind: String,
    pub file: String,
    pub columns: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub library_version: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub status: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub config: ExperimentConfig,
    pub outputs: Vec<OutputEntry>,
}

/// Paths produced by a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: PathBuf,
    pub files: Vec<PathBuf>,
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), num)
}

struct Csv {
    w: csv::Writer<File>,
}

impl Csv {
    fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        w.flush()?;
        Ok(Self { w })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.w.write_record(fields).map_err(csv_err)
    }

    fn flush(&mut self) -> Result<()> {
        Ok(self.w.flush()?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

fn entry(kind: &str, file: &str, columns: &[&str], method: Option<&str>) -> OutputEntry {
    OutputEntry {
        kind: kind.to_string(),
        file: file.to_string(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        method: method.map(str::to_string),
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn write_manifest(path: &Path, m: &Manifest) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_string_pretty(m)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))
}

/// Trial records for one SNR point, in trial order.
pub fn ber_point(
    cfg: &ExperimentConfig,
    methods: &[Method],
    rhos: &[f64],
    point: usize,
) -> Result<Vec<TrialRecord>> {
    let g = cfg.geometry()?;
    let snr_db = cfg.snr_grid_db[point];
    pool(cfg.workers)?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| experiments::ber_trial(cfg, &g, methods, rhos, t, point, snr_db))
            .collect()
    })
}

/// Mean condition numbers for one SNR point: `(axis, ρ, mean cond)`.
pub fn cond_point(cfg: &ExperimentConfig, point: usize) -> Result<Vec<(Axis, f64, f64)>> {
    let g = cfg.geometry()?;
    let snr_db = cfg.snr_grid_db[point];
    let per_trial: Vec<Vec<(Axis, f64, f64)>> = pool(cfg.workers)?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| experiments::cond_trial(cfg, &g, t, point, snr_db))
            .collect::<Result<_>>()
    })?;
    let mut mean = per_trial[0].clone();
    for (i, cell) in mean.iter_mut().enumerate() {
        cell.2 = per_trial.iter().map(|t| t[i].2).sum::<f64>() / per_trial.len() as f64;
    }
    Ok(mean)
}

/// Runs the configured experiment, writing results under `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let manifest_path = out_dir.join("manifest.json");
    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment,
        seed: cfg.seed,
        status: "running".into(),
        started_at: now(),
        finished_at: None,
        config: cfg.clone(),
        outputs: Vec::new(),
    };
    manifest.outputs = planned_outputs(cfg);
    write_manifest(&manifest_path, &manifest)?;

    match cfg.experiment {
        ExperimentKind::BerVsSnr => run_ber_vs_snr(cfg, out_dir)?,
        ExperimentKind::BerVsRho => run_ber_vs_rho(cfg, out_dir)?,
        ExperimentKind::CondVsRho => run_cond_vs_rho(cfg, out_dir)?,
        ExperimentKind::FlopsVsSize => run_flops(cfg, out_dir)?,
        ExperimentKind::ArrayFactorMaps => run_af(cfg, out_dir)?,
    }

    manifest.status = "complete".into();
    manifest.finished_at = Some(now());
    write_manifest(&manifest_path, &manifest)?;
    Ok(RunOutput {
        files: manifest
            .outputs
            .iter()
            .map(|o| out_dir.join(&o.file))
            .collect(),
        manifest: manifest_path,
    })
}

const AF_METHODS: [&str; 5] = ["mmse", "tmmse", "kmmse", "kmmse_h", "kmmse_v"];

fn planned_outputs(cfg: &ExperimentConfig) -> Vec<OutputEntry> {
    match cfg.experiment {
        ExperimentKind::BerVsSnr => vec![
            entry("ber_vs_snr", "ber_vs_snr.csv", &BER_VS_SNR_HEADER, None),
            entry(
                "ber_vs_snr_inclusive",
                "ber_vs_snr_inclusive.csv",
                &BER_VS_SNR_HEADER,
                None,
            ),
            entry(
                "ber_vs_snr_summary",
                "ber_vs_snr_summary.csv",
                &BER_SUMMARY_HEADER,
                None,
            ),
        ],
        ExperimentKind::BerVsRho => {
            vec![entry(
                "ber_vs_rho",
                "ber_vs_rho.csv",
                &BER_VS_RHO_HEADER,
                None,
            )]
        }
        ExperimentKind::CondVsRho => {
            vec![entry(
                "cond_vs_rho",
                "cond_vs_rho.csv",
                &COND_VS_RHO_HEADER,
                None,
            )]
        }
        ExperimentKind::FlopsVsSize => {
            vec![entry(
                "flops_vs_size",
                "flops_vs_size.csv",
                &FLOPS_VS_SIZE_HEADER,
                None,
            )]
        }
        ExperimentKind::ArrayFactorMaps => {
            let mut v: Vec<OutputEntry> = AF_METHODS
                .iter()
                .map(|m| {
                    entry(
                        "array_factor",
                        &format!("af_{m}.csv"),
                        &ARRAY_FACTOR_HEADER,
                        Some(m),
                    )
                })
                .collect();
            v.push(entry(
                "af_sources",
                "af_sources.csv",
                &AF_SOURCES_HEADER,
                None,
            ));
            v
        }
    }
}

fn run_ber_vs_snr(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut main = Csv::create(&dir.join("ber_vs_snr.csv"), &BER_VS_SNR_HEADER)?;
    let mut incl = Csv::create(&dir.join("ber_vs_snr_inclusive.csv"), &BER_VS_SNR_HEADER)?;
    let mut summ = Csv::create(&dir.join("ber_vs_snr_summary.csv"), &BER_SUMMARY_HEADER)?;
    let rho = [cfg.rho_primary()];
    for point in 0..cfg.snr_grid_db.len() {
        let records = ber_point(cfg, &cfg.methods, &rho, point)?;
        for r in aggregate(&records)? {
            let snr = num(r.snr_db);
            let (trials, failures) = (r.trials.to_string(), r.failures.to_string());
            main.row(&[
                snr.clone(),
                r.method.clone(),
                opt(r.mean_ber),
                opt(r.stderr_ber),
                trials.clone(),
                failures.clone(),
            ])?;
            incl.row(&[
                snr.clone(),
                r.method.clone(),
                num(r.inclusive_mean_ber),
                opt(r.inclusive_stderr_ber),
                trials.clone(),
                failures.clone(),
            ])?;
            summ.row(&[
                snr,
                r.method.clone(),
                opt(r.rho),
                opt(r.mean_ber),
                opt(r.stderr_ber),
                trials,
                failures,
                num(r.failure_rate()),
                opt(r.mean_iterations),
                num(r.inclusive_mean_ber),
            ])?;
        }
        main.flush()?;
        incl.flush()?;
        summ.flush()?;
    }
    Ok(())
}

fn run_ber_vs_rho(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut out = Csv::create(&dir.join("ber_vs_rho.csv"), &BER_VS_RHO_HEADER)?;
    let rhos = cfg.rho_values();
    for point in 0..cfg.snr_grid_db.len() {
        let records = ber_point(cfg, &[Method::Kmmse], &rhos, point)?;
        for r in aggregate(&records)? {
            out.row(&[
                num(r.snr_db),
                opt(r.rho),
                r.method.clone(),
                opt(r.mean_ber),
                opt(r.stderr_ber),
                r.trials.to_string(),
                r.failures.to_string(),
            ])?;
        }
        out.flush()?;
    }
    Ok(())
}

fn run_cond_vs_rho(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut out = Csv::create(&dir.join("cond_vs_rho.csv"), &COND_VS_RHO_HEADER)?;
    for point in 0..cfg.snr_grid_db.len() {
        for (axis, rho, cond) in cond_point(cfg, point)? {
            out.row(&[
                num(cfg.snr_grid_db[point]),
                num(rho),
                axis.label().to_string(),
                num(cond),
            ])?;
        }
        out.flush()?;
    }
    Ok(())
}

fn run_flops(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut out = Csv::create(&dir.join("flops_vs_size.csv"), &FLOPS_VS_SIZE_HEADER)?;
    for (n_h, n_v, method, count) in experiments::flops_rows(cfg)? {
        out.row(&[
            n_h.to_string(),
            n_v.to_string(),
            method.to_string(),
            count.to_string(),
        ])?;
    }
    out.flush()
}

fn run_af(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let design = experiments::af_design(cfg)?;
    let maps = pool(cfg.workers)?.install(|| experiments::af_maps(cfg, &design))?;
    let floor = cfg.array_factor.floor_db;
    for (name, grid) in &maps {
        let mut out = Csv::create(&dir.join(format!("af_{name}.csv")), &ARRAY_FACTOR_HEADER)?;
        for (i, &p) in grid.p_grid.iter().enumerate() {
            for (j, &q) in grid.q_grid.iter().enumerate() {
                out.row(&[num(p), num(q), num(grid.db(i, j, floor))])?;
            }
        }
        out.flush()?;
    }
    let mut src = Csv::create(&dir.join("af_sources.csv"), &AF_SOURCES_HEADER)?;
    for (i, d) in design.scenario.manifolds.directions.iter().enumerate() {
        let desired = if i == design.scenario.desired_index {
            "1"
        } else {
            "0"
        };
        src.row(&[i.to_string(), num(d.p), num(d.q), desired.to_string()])?;
    }
    src.flush()
}
