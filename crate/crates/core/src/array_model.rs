//! Uniform rectangular array geometry and its separable manifold.
//!
//! Elements sit on a half-wavelength grid in the y-z plane. Antenna
//! `(n_h, n_v)` (0-based) maps to the linear index `n_h + n_v * N_h`, so the
//! horizontal index varies fastest and `vec(X) = x` for the `N_h x N_v`
//! matrix view of a snapshot.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kron_algebra::{khatri_rao, kron_vec, ComplexMatrix, ComplexVector, Tensor3};

/// Antenna counts along the horizontal and vertical axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UraGeometry {
    n_h: usize,
    n_v: usize,
}

impl UraGeometry {
    pub fn new(n_h: usize, n_v: usize) -> Result<Self> {
        if n_h == 0 || n_v == 0 {
            return Err(Error::InvalidArgument(format!(
                "array dimensions must be positive, got {n_h}x{n_v}"
            )));
        }
        Ok(Self { n_h, n_v })
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    /// Total element count `N = N_h · N_v`.
    pub fn n(&self) -> usize {
        self.n_h * self.n_v
    }

    /// Linear antenna index of element `(n_h, n_v)`.
    #[inline]
    pub fn linear_index(&self, n_h: usize, n_v: usize) -> usize {
        n_h + n_v * self.n_h
    }
}

/// Direction cosines of a plane wave: `p = sinφ sinθ`, `q = cosθ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionCosines {
    pub p: f64,
    pub q: f64,
}

impl DirectionCosines {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        check_cosine(p)?;
        check_cosine(q)?;
        Ok(Self { p, q })
    }
}

fn check_cosine(c: f64) -> Result<()> {
    if !(c.abs() <= 1.0) {
        return Err(Error::CosineOutOfRange(c));
    }
    Ok(())
}

/// Steering vector of an `n`-element half-wavelength line array:
/// entry `k` is `exp(jπ k c)`.
pub fn subarray_steering(n: usize, c: f64) -> Result<ComplexVector> {
    check_cosine(c)?;
    Ok(ComplexVector::from_fn(n, |k, _| {
        Complex64::from_polar(1.0, PI * k as f64 * c)
    }))
}

/// Full-array steering vector `a_v(q) ⊗ a_h(p)`.
pub fn full_steering(g: &UraGeometry, d: &DirectionCosines) -> Result<ComplexVector> {
    let ah = subarray_steering(g.n_h, d.p)?;
    let av = subarray_steering(g.n_v, d.q)?;
    Ok(kron_vec(&av, &ah))
}

/// Horizontal, vertical and full manifold matrices for a set of sources.
#[derive(Debug, Clone)]
pub struct ManifoldSet {
    pub geometry: UraGeometry,
    pub directions: Vec<DirectionCosines>,
    /// `N_h x R`
    pub a_h: ComplexMatrix,
    /// `N_v x R`
    pub a_v: ComplexMatrix,
    /// `N x R`, equal to `a_v ⋄ a_h`
    pub a_full: ComplexMatrix,
}

impl ManifoldSet {
    pub fn r(&self) -> usize {
        self.directions.len()
    }
}

pub fn build_manifolds(g: &UraGeometry, dirs: &[DirectionCosines]) -> Result<ManifoldSet> {
    if dirs.is_empty() {
        return Err(Error::EmptyDirections);
    }
    let r = dirs.len();
    let mut a_h = ComplexMatrix::zeros(g.n_h, r);
    let mut a_v = ComplexMatrix::zeros(g.n_v, r);
    for (col, d) in dirs.iter().enumerate() {
        a_h.set_column(col, &subarray_steering(g.n_h, d.p)?);
        a_v.set_column(col, &subarray_steering(g.n_v, d.q)?);
    }
    let a_full = khatri_rao(&a_v, &a_h)?;
    Ok(ManifoldSet {
        geometry: *g,
        directions: dirs.to_vec(),
        a_h,
        a_v,
        a_full,
    })
}

/// Array manifold tensor, `N_h x N_v x R`, with entry
/// `(n_h, n_v, r) = [a_h(p_r)]_{n_h} [a_v(q_r)]_{n_v}`.
pub fn manifold_tensor(ms: &ManifoldSet) -> Tensor3 {
    let g = ms.geometry;
    Tensor3::from_fn(g.n_h, g.n_v, ms.r(), |i, j, r| {
        ms.a_h[(i, r)] * ms.a_v[(j, r)]
    })
}
