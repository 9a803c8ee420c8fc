//! Evaluation: bit error ratio, MSE, array factor surfaces, conditioning
//! sweeps and the flops accounting model.
//!
//! # Flops accounting
//!
//! Counts are real floating-point operations for the filter *design* (second
//! order statistics plus the linear solves); applying the filter is excluded.
//!
//! | operation | cost |
//! |---|---|
//! | complex multiply-add | 8 |
//! | sample covariance, dimension `n`, `K` snapshots | `8 n² K` |
//! | sample cross-covariance, dimension `n` | `8 n K` |
//! | `n x n` Hermitian solve | `(8/3) n³ + 8 n²` |
//!
//! Per method, with `N = N_h N_v`:
//!
//! - `mmse_sample`: covariance and cross-covariance of dimension `N`, one
//!   `N x N` solve.
//! - `mmse_lemma`: `A^H A` (`8 R² N`), one `R x R` solve, `A z` (`8 N R`).
//! - `kmmse`: sub-array statistics and one solve per axis.
//! - `tmmse(I)`: per iteration and per axis, forming the sub-array inputs
//!   (`8 N K`), their statistics and one solve; multiplied by `I`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{subarray_steering, UraGeometry};
use crate::beamformers::FilterRef;
use crate::error::{Error, Result};
use crate::kron_algebra::{condition_number_2, ComplexMatrix, ComplexVector};
use crate::signal_model::{analytic_subarray_stats, qpsk_decide, Axis, Scenario, SecondOrderStats};

/// Fraction of mismatching bits.
pub fn ber(decoded: &[bool], reference: &[bool]) -> Result<f64> {
    if decoded.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            context: "bit streams",
            expected: reference.len(),
            actual: decoded.len(),
        });
    }
    if reference.is_empty() {
        return Err(Error::InvalidArgument("bit streams are empty".into()));
    }
    let errors = decoded
        .iter()
        .zip(reference)
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / reference.len() as f64)
}

/// Hard QPSK decisions, two bits `(b1, b0)` per symbol.
pub fn qpsk_bits(y: &[Complex64]) -> Vec<bool> {
    y.iter()
        .flat_map(|&z| {
            let (b1, b0) = qpsk_decide(z);
            [b1, b0]
        })
        .collect()
}

/// `J = σ_s² − 2 Re(p^H w) + w^H R w`, clipped at zero.
pub fn mse_eval(w: &ComplexVector, stats: &SecondOrderStats, sigma_s2: f64) -> Result<f64> {
    let n = stats.cross.len();
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            context: "filter length",
            expected: n,
            actual: w.len(),
        });
    }
    let cross = stats.cross.dotc(w).re;
    let quad = w.dotc(&(&stats.cov * w)).re;
    Ok((sigma_s2 - 2.0 * cross + quad).max(0.0))
}

/// Peak-normalized `|w^H a(p, q)|²` on a rectangular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFactorGrid {
    pub p_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    /// `af[(i, j)]` is the value at `(p_grid[i], q_grid[j])`.
    pub af: DMatrix<f64>,
}

impl ArrayFactorGrid {
    /// Value in dB relative to the peak, floored at `floor_db`.
    pub fn db(&self, i: usize, j: usize, floor_db: f64) -> f64 {
        power_db(self.af[(i, j)], floor_db)
    }
}

pub fn power_db(x: f64, floor_db: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(floor_db)
    } else {
        floor_db
    }
}

/// `n` equally spaced points covering `[-1, 1]`.
pub fn cosine_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Unnormalized line-array factor `|w^H a(c)|²` at each cosine.
pub fn subarray_factor(w: &ComplexVector, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter()
        .map(|&c| Ok(w.dotc(&subarray_steering(w.len(), c)?).norm_sqr()))
        .collect()
}

/// Unnormalized array factor at one direction.
pub fn array_factor_at(filter: FilterRef<'_>, g: &UraGeometry, p: f64, q: f64) -> Result<f64> {
    let ah = subarray_steering(g.n_h(), p)?;
    let av = subarray_steering(g.n_v(), q)?;
    Ok(match filter {
        FilterRef::Full(b) => {
            b.w.dotc(&crate::kron_algebra::kron_vec(&av, &ah))
                .norm_sqr()
        }
        FilterRef::Separable(s) => s.w_h.dotc(&ah).norm_sqr() * s.w_v.dotc(&av).norm_sqr(),
    })
}

fn check_filter(filter: FilterRef<'_>, g: &UraGeometry) -> Result<()> {
    let ok = match filter {
        FilterRef::Full(b) => b.w.len() == g.n(),
        FilterRef::Separable(s) => s.w_h.len() == g.n_h() && s.w_v.len() == g.n_v(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context: "filter vs geometry",
            expected: g.n(),
            actual: filter.composed().len(),
        })
    }
}

/// Array factor over `p_grid x q_grid`, normalized to a unit peak.
///
/// Separable filters use the product of the two sub-array factors; full
/// filters evaluate `w^H (a_v(q) ⊗ a_h(p))` row by row.
pub fn array_factor(
    filter: FilterRef<'_>,
    g: &UraGeometry,
    p_grid: &[f64],
    q_grid: &[f64],
) -> Result<ArrayFactorGrid> {
    if p_grid.is_empty() || q_grid.is_empty() {
        return Err(Error::InvalidArgument("array factor grid is empty".into()));
    }
    check_filter(filter, g)?;
    let (np, nq) = (p_grid.len(), q_grid.len());
    let raw = match filter {
        FilterRef::Separable(s) => {
            let fh = subarray_factor(&s.w_h, p_grid)?;
            let fv = subarray_factor(&s.w_v, q_grid)?;
            DMatrix::from_fn(np, nq, |i, j| fh[i] * fv[j])
        }
        FilterRef::Full(b) => {
            let av: Vec<ComplexVector> = q_grid
                .iter()
                .map(|&q| subarray_steering(g.n_v(), q))
                .collect::<Result<_>>()?;
            let w = ComplexMatrix::from_column_slice(g.n_h(), g.n_v(), b.w.as_slice());
            let rows: Vec<Vec<f64>> = p_grid
                .par_iter()
                .map(|&p| {
                    let ah = subarray_steering(g.n_h(), p)?;
                    // w^H (a_v ⊗ a_h) = (W^H a_h)^T a_v, with W = vec⁻¹(w).
                    let t = w.ad_mul(&ah);
                    Ok(av.iter().map(|a| t.dot(a).norm_sqr()).collect())
                })
                .collect::<Result<_>>()?;
            DMatrix::from_fn(np, nq, |i, j| rows[i][j])
        }
    };
    let peak = raw.max();
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::DegenerateOutput);
    }
    Ok(ArrayFactorGrid {
        p_grid: p_grid.to_vec(),
        q_grid: q_grid.to_vec(),
        af: raw / peak,
    })
}

/// Method whose design cost is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlopsMethod {
    MmseSample,
    MmseLemma,
    Tmmse { iterations: usize },
    Kmmse,
}

impl FlopsMethod {
    pub fn label(&self) -> &'static str {
        match self {
            FlopsMethod::MmseSample => "mmse",
            FlopsMethod::MmseLemma => "mmse_lemma",
            FlopsMethod::Tmmse { .. } => "tmmse",
            FlopsMethod::Kmmse => "kmmse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopsModel {
    pub method: FlopsMethod,
    pub geometry: UraGeometry,
    pub r: usize,
    pub k: usize,
}

/// Design cost split into statistics formation and linear solves.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlopsBreakdown {
    pub statistics: f64,
    pub inversion: f64,
}

impl FlopsBreakdown {
    pub fn total(&self) -> f64 {
        self.statistics + self.inversion
    }
}

const CMAC: f64 = 8.0;

/// Real flops of an `n x n` Hermitian solve.
pub fn solve_flops(n: usize) -> f64 {
    let n = n as f64;
    8.0 / 3.0 * n.powi(3) + CMAC * n * n
}

/// Real flops of a sample covariance plus cross-covariance of dimension `n`.
pub fn sample_stats_flops(n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    CMAC * n * n * k + CMAC * n * k
}

pub fn flops_breakdown(fm: &FlopsModel) -> FlopsBreakdown {
    let (n_h, n_v, n) = (fm.geometry.n_h(), fm.geometry.n_v(), fm.geometry.n());
    let (r, k) = (fm.r, fm.k);
    match fm.method {
        FlopsMethod::MmseSample => FlopsBreakdown {
            statistics: sample_stats_flops(n, k),
            inversion: solve_flops(n),
        },
        FlopsMethod::MmseLemma => FlopsBreakdown {
            statistics: CMAC * (r * r * n) as f64 + CMAC * (n * r) as f64,
            inversion: solve_flops(r),
        },
        FlopsMethod::Kmmse => FlopsBreakdown {
            statistics: sample_stats_flops(n_h, k) + sample_stats_flops(n_v, k),
            inversion: solve_flops(n_h) + solve_flops(n_v),
        },
        FlopsMethod::Tmmse { iterations } => {
            let it = iterations as f64;
            let inputs = 2.0 * CMAC * (n * k) as f64;
            FlopsBreakdown {
                statistics: it * (inputs + sample_stats_flops(n_h, k) + sample_stats_flops(n_v, k)),
                inversion: it * (solve_flops(n_h) + solve_flops(n_v)),
            }
        }
    }
}

/// Total design flops, rounded to an integer count.
pub fn flops(fm: &FlopsModel) -> Result<u64> {
    if fm.k == 0 || fm.r == 0 {
        return Err(Error::InvalidArgument(
            "flops model needs r >= 1 and k >= 1".into(),
        ));
    }
    if let FlopsMethod::Tmmse { iterations: 0 } = fm.method {
        return Err(Error::InvalidArgument(
            "tmmse flops need at least one iteration".into(),
        ));
    }
    Ok(flops_breakdown(fm).total().round() as u64)
}

/// `cond_2(R + ρ I)` for each `ρ`.
pub fn condition_sweep_cov(cov: &ComplexMatrix, rho_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    rho_list
        .iter()
        .map(|&rho| {
            let n = cov.nrows();
            let shifted = cov + ComplexMatrix::identity(n, n) * Complex64::new(rho, 0.0);
            Ok((rho, condition_number_2(&shifted)?))
        })
        .collect()
}

/// Conditioning of the analytic sub-array covariance over `ρ`.
pub fn condition_sweep(sc: &Scenario, axis: Axis, rho_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    condition_sweep_cov(&analytic_subarray_stats(sc, axis).cov, rho_list)
}
