use serde::Serialize;

use crate::array_model::DirectionCosines;
use crate::error::{Error, Result};

/// BER charged to a failed design in the inclusive convention.
pub const FAILURE_BER: f64 = 0.5;

/// Result of one method on one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub method: String,
    /// Regularization weight, for methods that take one.
    pub rho: Option<f64>,
    /// `None` when the design failed (singular or degenerate).
    pub ber: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

impl MethodOutcome {
    pub fn failed(&self) -> bool {
        self.ber.is_none()
    }
}

/// One Monte Carlo trial at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub snr_db: f64,
    pub directions: Vec<DirectionCosines>,
    pub outcomes: Vec<MethodOutcome>,
}

impl TrialRecord {
    pub fn outcome(&self, method: &str, rho: Option<f64>) -> Option<&MethodOutcome> {
        self.outcomes
            .iter()
            .find(|o| o.method == method && o.rho == rho)
    }
}

/// Aggregate over trials for one (SNR, method, ρ) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub snr_db: f64,
    pub method: String,
    pub rho: Option<f64>,
    /// Mean over successful trials; `None` when every trial failed.
    pub mean_ber: Option<f64>,
    pub stderr_ber: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    pub mean_iterations: Option<f64>,
    /// Mean with failures charged [`FAILURE_BER`].
    pub inclusive_mean_ber: f64,
    pub inclusive_stderr_ber: Option<f64>,
}

impl SummaryRow {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }
}

/// Mean and standard error of the mean (`None` below two samples).
pub fn mean_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (None, None);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

/// Per-cell summaries in order of first appearance.
pub fn aggregate(records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument(
            "no trial records to aggregate".into(),
        ));
    }
    let mut keys: Vec<(u64, String, Option<u64>)> = Vec::new();
    let mut cells: Vec<Vec<&MethodOutcome>> = Vec::new();
    let mut snrs: Vec<f64> = Vec::new();
    for rec in records {
        for o in &rec.outcomes {
            let key = (
                rec.snr_db.to_bits(),
                o.method.clone(),
                o.rho.map(f64::to_bits),
            );
            match keys.iter().position(|k| *k == key) {
                Some(i) => cells[i].push(o),
                None => {
                    keys.push(key);
                    cells.push(vec![o]);
                    snrs.push(rec.snr_db);
                }
            }
        }
    }
    Ok(cells
        .iter()
        .zip(&snrs)
        .map(|(cell, &snr_db)| {
            let ok: Vec<f64> = cell.iter().filter_map(|o| o.ber).collect();
            let all: Vec<f64> = cell.iter().map(|o| o.ber.unwrap_or(FAILURE_BER)).collect();
            let iters: Vec<f64> = cell
                .iter()
                .filter_map(|o| o.iterations.map(|i| i as f64))
                .collect();
            let (mean_ber, stderr_ber) = mean_stderr(&ok);
            let (inclusive, inclusive_stderr_ber) = mean_stderr(&all);
            SummaryRow {
                snr_db,
                method: cell[0].method.clone(),
                rho: cell[0].rho,
                mean_ber,
                stderr_ber,
                trials: cell.len(),
                failures: cell.len() - ok.len(),
                mean_iterations: mean_stderr(&iters).0,
                inclusive_mean_ber: inclusive.unwrap_or(FAILURE_BER),
                inclusive_stderr_ber,
            }
        })
        .collect())
}
