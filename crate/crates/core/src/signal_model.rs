//! Source scenarios, QPSK/AWGN snapshot synthesis and second-order
//! statistics (analytic and sample-estimated).

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array_model::{DirectionCosines, ManifoldSet, UraGeometry};
use crate::error::{Error, Result};
use crate::kron_algebra::{ComplexMatrix, ComplexVector};

/// Range of the uniformly drawn direction cosines.
pub const DIRECTION_RANGE: f64 = 0.9;

/// Sources impinging on the array, the desired one among them, and the
/// signal and noise powers. `desired_index` is 0-based.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub manifolds: ManifoldSet,
    pub desired_index: usize,
    pub sigma_s2: f64,
    pub sigma_b2: f64,
}

impl Scenario {
    pub fn new(
        manifolds: ManifoldSet,
        desired_index: usize,
        sigma_s2: f64,
        sigma_b2: f64,
    ) -> Result<Self> {
        if desired_index >= manifolds.r() {
            return Err(Error::InvalidArgument(format!(
                "desired index {desired_index} out of range for {} sources",
                manifolds.r()
            )));
        }
        if !(sigma_s2 > 0.0 && sigma_s2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "signal variance must be positive, got {sigma_s2}"
            )));
        }
        if !(sigma_b2 > 0.0 && sigma_b2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {sigma_b2}"
            )));
        }
        Ok(Self {
            manifolds,
            desired_index,
            sigma_s2,
            sigma_b2,
        })
    }

    /// Unit-power sources with noise variance set from an SNR in dB.
    pub fn with_snr_db(manifolds: ManifoldSet, desired_index: usize, snr_db: f64) -> Result<Self> {
        Self::new(manifolds, desired_index, 1.0, 10f64.powf(-snr_db / 10.0))
    }

    pub fn geometry(&self) -> UraGeometry {
        self.manifolds.geometry
    }

    pub fn r(&self) -> usize {
        self.manifolds.r()
    }

    pub fn snr(&self) -> f64 {
        self.sigma_s2 / self.sigma_b2
    }
}

/// Which one-dimensional sub-array a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[serde(rename = "h")]
    Horizontal,
    #[serde(rename = "v")]
    Vertical,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::Horizontal => "h",
            Axis::Vertical => "v",
        }
    }
}

/// `K` received snapshots (`N x K`) together with the transmitted symbols
/// (`R x K`) that produced them.
#[derive(Debug, Clone)]
pub struct SnapshotBlock {
    pub geometry: UraGeometry,
    pub x: ComplexMatrix,
    pub s: ComplexMatrix,
}

impl SnapshotBlock {
    pub fn new(geometry: UraGeometry, x: ComplexMatrix, s: ComplexMatrix) -> Result<Self> {
        if x.nrows() != geometry.n() {
            return Err(Error::DimensionMismatch {
                context: "snapshot rows",
                expected: geometry.n(),
                actual: x.nrows(),
            });
        }
        if x.ncols() != s.ncols() {
            return Err(Error::DimensionMismatch {
                context: "snapshot count",
                expected: s.ncols(),
                actual: x.ncols(),
            });
        }
        Ok(Self { geometry, x, s })
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    /// Snapshot `k` as the `N_h x N_v` matrix `X[k]`.
    pub fn snapshot_matrix(&self, k: usize) -> ComplexMatrix {
        let g = self.geometry;
        ComplexMatrix::from_column_slice(g.n_h(), g.n_v(), self.x.column(k).as_slice())
    }

    pub fn desired_symbols(&self, desired_index: usize) -> Vec<Complex64> {
        self.s.row(desired_index).iter().cloned().collect()
    }
}

/// Kind of estimate held by a [`SecondOrderStats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsKind {
    Analytic,
    Sample,
}

/// Covariance matrix and cross-covariance with the desired symbol.
#[derive(Debug, Clone)]
pub struct SecondOrderStats {
    pub cov: ComplexMatrix,
    pub cross: ComplexVector,
    pub kind: StatsKind,
}

/// I.i.d. uniform direction cosines on `[-0.9, 0.9]`.
pub fn draw_directions(r: usize, rng: &mut impl Rng) -> Vec<DirectionCosines> {
    (0..r)
        .map(|_| DirectionCosines {
            p: rng.gen_range(-DIRECTION_RANGE..=DIRECTION_RANGE),
            q: rng.gen_range(-DIRECTION_RANGE..=DIRECTION_RANGE),
        })
        .collect()
}

/// Gray-mapped QPSK point for the bit pair `(b1, b0)`:
/// `((1 − 2 b1) + j (1 − 2 b0)) · σ_s/√2`.
#[inline]
pub fn qpsk_map(b1: bool, b0: bool, sigma_s: f64) -> Complex64 {
    let a = sigma_s * FRAC_1_SQRT_2;
    Complex64::new(if b1 { -a } else { a }, if b0 { -a } else { a })
}

/// Quadrant hard decision, the inverse of [`qpsk_map`].
#[inline]
pub fn qpsk_decide(y: Complex64) -> (bool, bool) {
    (y.re < 0.0, y.im < 0.0)
}

/// `R x K` matrix of independent QPSK symbols of power `sigma_s2`.
pub fn qpsk_symbols(r: usize, k: usize, sigma_s2: f64, rng: &mut impl Rng) -> ComplexMatrix {
    let sigma_s = sigma_s2.sqrt();
    ComplexMatrix::from_fn(r, k, |_, _| {
        let bits: u8 = rng.gen_range(0..4);
        qpsk_map(bits & 2 != 0, bits & 1 != 0, sigma_s)
    })
}

/// Circularly-symmetric complex Gaussian samples of total variance `var`.
pub fn complex_noise(rows: usize, cols: usize, var: f64, rng: &mut impl Rng) -> ComplexMatrix {
    let scale = (var / 2.0).sqrt();
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(scale * re, scale * im)
    })
}

/// Pass given symbols through the array: `x[k] = A s[k] + b[k]`.
pub fn receive(sc: &Scenario, s: ComplexMatrix, rng: &mut impl Rng) -> Result<SnapshotBlock> {
    if s.nrows() != sc.r() {
        return Err(Error::DimensionMismatch {
            context: "symbol rows",
            expected: sc.r(),
            actual: s.nrows(),
        });
    }
    let n = sc.geometry().n();
    let mut x = &sc.manifolds.a_full * &s;
    x += complex_noise(n, s.ncols(), sc.sigma_b2, rng);
    SnapshotBlock::new(sc.geometry(), x, s)
}

/// Draw `k` QPSK snapshots for every source and receive them in noise.
pub fn synthesize(sc: &Scenario, k: usize, rng: &mut impl Rng) -> Result<SnapshotBlock> {
    let s = qpsk_symbols(sc.r(), k, sc.sigma_s2, rng);
    receive(sc, s, rng)
}

fn check_desired(blk: &SnapshotBlock, desired_index: usize) -> Result<()> {
    if desired_index >= blk.s.nrows() {
        return Err(Error::InvalidArgument(format!(
            "desired index {desired_index} out of range for {} sources",
            blk.s.nrows()
        )));
    }
    if blk.k() == 0 {
        return Err(Error::InvalidArgument("snapshot block is empty".into()));
    }
    Ok(())
}

/// `(1/K) Σ u[k] u[k]^H` and `(1/K) Σ u[k] d*[k]` over the columns of `u`.
///
/// The covariance is Hermitian by construction (upper triangle mirrored,
/// real diagonal).
pub(crate) fn sample_stats_of(u: &ComplexMatrix, desired: &[Complex64]) -> SecondOrderStats {
    let (n, k) = u.shape();
    debug_assert_eq!(desired.len(), k);
    let inv_k = 1.0 / k as f64;
    // Rows of u become contiguous columns of ut.
    let ut = u.transpose();
    let mut cov = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let ci = ut.column(i);
        cov[(i, i)] = Complex64::new(ci.iter().map(|z| z.norm_sqr()).sum::<f64>() * inv_k, 0.0);
        for j in i + 1..n {
            let cj = ut.column(j);
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in ci.iter().zip(cj.iter()) {
                acc += a * b.conj();
            }
            acc *= inv_k;
            cov[(i, j)] = acc;
            cov[(j, i)] = acc.conj();
        }
    }
    let mut cross = ComplexVector::zeros(n);
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, d) in ut.column(i).iter().zip(desired) {
            acc += a * d.conj();
        }
        cross[i] = acc * inv_k;
    }
    SecondOrderStats {
        cov,
        cross,
        kind: StatsKind::Sample,
    }
}

fn analytic_stats_of(a: &ComplexMatrix, sc: &Scenario) -> SecondOrderStats {
    let n = a.nrows();
    let s2 = Complex64::new(sc.sigma_s2, 0.0);
    let mut cov = a * a.adjoint() * s2;
    for i in 0..n {
        cov[(i, i)] += sc.sigma_b2;
    }
    // Enforce exact Hermitian symmetry against rounding in the product.
    let cov = (&cov + cov.adjoint()) * Complex64::new(0.5, 0.0);
    let cross = a.column(sc.desired_index) * s2;
    SecondOrderStats {
        cov,
        cross,
        kind: StatsKind::Analytic,
    }
}

/// `R_xx = σ_s² A A^H + σ_b² I`, `p_xs = σ_s² A e_d`.
pub fn analytic_full_stats(sc: &Scenario) -> SecondOrderStats {
    analytic_stats_of(&sc.manifolds.a_full, sc)
}

pub fn sample_full_stats(blk: &SnapshotBlock, desired_index: usize) -> Result<SecondOrderStats> {
    check_desired(blk, desired_index)?;
    Ok(sample_stats_of(&blk.x, &blk.desired_symbols(desired_index)))
}

/// Rows of `x` belonging to the first physical row (`Horizontal`, `n_v = 0`)
/// or the first physical column (`Vertical`, `n_h = 0`). Both share the
/// corner element, linear index 0.
pub fn subarray_received(blk: &SnapshotBlock, axis: Axis) -> ComplexMatrix {
    let g = blk.geometry;
    match axis {
        Axis::Horizontal => blk.x.rows(0, g.n_h()).into_owned(),
        Axis::Vertical => {
            let idx: Vec<usize> = (0..g.n_v()).map(|nv| g.linear_index(0, nv)).collect();
            blk.x.select_rows(idx.iter())
        }
    }
}

pub fn subarray_manifold(ms: &ManifoldSet, axis: Axis) -> &ComplexMatrix {
    match axis {
        Axis::Horizontal => &ms.a_h,
        Axis::Vertical => &ms.a_v,
    }
}

/// `R_m = σ_s² A_m A_m^H + σ_b² I`, `p_m = σ_s² A_m e_d`.
pub fn analytic_subarray_stats(sc: &Scenario, axis: Axis) -> SecondOrderStats {
    analytic_stats_of(subarray_manifold(&sc.manifolds, axis), sc)
}

pub fn sample_subarray_stats(
    blk: &SnapshotBlock,
    axis: Axis,
    desired_index: usize,
) -> Result<SecondOrderStats> {
    check_desired(blk, desired_index)?;
    let rows = subarray_received(blk, axis);
    Ok(sample_stats_of(&rows, &blk.desired_symbols(desired_index)))
}

/// Mean of `|s|²` over a symbol stream.
pub fn mean_power(s: &[Complex64]) -> f64 {
    s.iter().map(|z| z.norm_sqr()).sum::<f64>() / s.len() as f64
}

/// Canonical basis vector `e_i` of length `n`.
pub fn basis_vector(n: usize, i: usize) -> ComplexVector {
    let mut e = DVector::zeros(n);
    e[i] = Complex64::new(1.0, 0.0);
    e
}
