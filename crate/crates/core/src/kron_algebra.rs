//! Dense complex linear and multilinear algebra kernels.
//!
//! Matrices and vectors are `nalgebra` dynamic types over `Complex64`
//! (column-major storage). Kronecker and Khatri-Rao products, the
//! third-order tensor with its unfoldings and mode-3 product, and the
//! Hermitian solver are written here; singular value decompositions
//! (pseudo-inverse, 2-norm condition number) come from `nalgebra`.
//!
//! # Unfolding convention
//!
//! A [`Tensor3`] of dimensions `d1 x d2 x d3` stores entry `(i, j, r)` at
//! linear offset `i + j*d1 + r*d1*d2` (first index fastest). The mode-n
//! unfolding places index n on the rows; the remaining two indices are
//! merged into the column index with the lower-numbered one varying fastest:
//!
//! | mode | shape           | column of `(i, j, r)` |
//! |------|-----------------|-----------------------|
//! | 1    | `d1 x (d2*d3)`  | `j + r*d2`            |
//! | 2    | `d2 x (d1*d3)`  | `i + r*d1`            |
//! | 3    | `d3 x (d1*d2)`  | `i + j*d1`            |
//!
//! Worked 2x2x2 example, writing `t_ijr` for the entry (0-based):
//!
//! ```text
//! mode 1: [ t000 t010 t001 t011 ]    mode 2: [ t000 t100 t001 t101 ]
//!         [ t100 t110 t101 t111 ]            [ t010 t110 t011 t111 ]
//!
//! mode 3: [ t000 t100 t010 t110 ]
//!         [ t001 t101 t011 t111 ]
//! ```
//!
//! For the array manifold tensor (`d1 = N_h`, `d2 = N_v`, `d3 = R`), mode 1
//! is the block row `[a_h(p_1) a_v(q_1)^T, ..., a_h(p_R) a_v(q_R)^T]`, mode 2
//! is `[a_v(q_1) a_h(p_1)^T, ...]` and mode 3 is `(A_v ⋄ A_h)^T`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative pivot size below which a factorization is declared singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-14;

/// Relative tolerance of the Hermitian check in [`hermitian_solve`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let aij = a[(i, j)];
            if aij == Complex64::new(0.0, 0.0) {
                continue;
            }
            for l in 0..bc {
                for k in 0..br {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of two column vectors, `a ⊗ b`.
pub fn kron_vec(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    let mut out = ComplexVector::zeros(a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        for (k, &bk) in b.iter().enumerate() {
            out[i * b.len() + k] = ai * bk;
        }
    }
    out
}

/// Column-wise Kronecker (Khatri-Rao) product `a ⋄ b`.
pub fn khatri_rao(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            context: "khatri_rao column count",
            expected: a.ncols(),
            actual: b.ncols(),
        });
    }
    let (ar, br) = (a.nrows(), b.nrows());
    let mut out = ComplexMatrix::zeros(ar * br, a.ncols());
    for r in 0..a.ncols() {
        for i in 0..ar {
            let air = a[(i, r)];
            for k in 0..br {
                out[(i * br + k, r)] = air * b[(k, r)];
            }
        }
    }
    Ok(out)
}

/// Dense third-order complex tensor, first index fastest in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<Complex64>,
}

impl Tensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: (d1, d2, d3),
            data: vec![Complex64::new(0.0, 0.0); d1 * d2 * d3],
        }
    }

    pub fn from_fn(
        d1: usize,
        d2: usize,
        d3: usize,
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(d1 * d2 * d3);
        for r in 0..d3 {
            for j in 0..d2 {
                for i in 0..d1 {
                    data.push(f(i, j, r));
                }
            }
        }
        Self {
            dims: (d1, d2, d3),
            data,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, r: usize) -> usize {
        let (d1, d2, _) = self.dims;
        i + j * d1 + r * d1 * d2
    }

    pub fn get(&self, i: usize, j: usize, r: usize) -> Complex64 {
        self.data[self.offset(i, j, r)]
    }

    pub fn set(&mut self, i: usize, j: usize, r: usize, value: Complex64) {
        let o = self.offset(i, j, r);
        self.data[o] = value;
    }

    /// Frontal slice `t[:, :, r]`.
    pub fn slice3(&self, r: usize) -> ComplexMatrix {
        let (d1, d2, _) = self.dims;
        let start = r * d1 * d2;
        ComplexMatrix::from_column_slice(d1, d2, &self.data[start..start + d1 * d2])
    }

    /// Inverse of [`unfold`]: rebuild a tensor of the given dimensions from
    /// its mode-`mode` unfolding.
    pub fn fold(m: &ComplexMatrix, mode: usize, dims: (usize, usize, usize)) -> Result<Self> {
        let (d1, d2, d3) = dims;
        let expected = match mode {
            1 => (d1, d2 * d3),
            2 => (d2, d1 * d3),
            3 => (d3, d1 * d2),
            other => return Err(Error::InvalidMode(other)),
        };
        if m.shape() != expected {
            return Err(Error::DimensionMismatch {
                context: "fold shape",
                expected: expected.0 * expected.1,
                actual: m.nrows() * m.ncols(),
            });
        }
        Ok(Self::from_fn(d1, d2, d3, |i, j, r| {
            let (row, col) = unfold_index(mode, dims, i, j, r);
            m[(row, col)]
        }))
    }
}

fn unfold_index(
    mode: usize,
    (d1, d2, _): (usize, usize, usize),
    i: usize,
    j: usize,
    r: usize,
) -> (usize, usize) {
    match mode {
        1 => (i, j + r * d2),
        2 => (j, i + r * d1),
        _ => (r, i + j * d1),
    }
}

/// Mode-`mode` matricization of `t` (see the module docs for the index map).
pub fn unfold(t: &Tensor3, mode: usize) -> Result<ComplexMatrix> {
    let (d1, d2, d3) = t.dims;
    let (rows, cols) = match mode {
        1 => (d1, d2 * d3),
        2 => (d2, d1 * d3),
        3 => (d3, d1 * d2),
        other => return Err(Error::InvalidMode(other)),
    };
    let mut out = ComplexMatrix::zeros(rows, cols);
    for r in 0..d3 {
        for j in 0..d2 {
            for i in 0..d1 {
                let (row, col) = unfold_index(mode, t.dims, i, j, r);
                out[(row, col)] = t.get(i, j, r);
            }
        }
    }
    Ok(out)
}

/// Mode-3 product `t ×_3 v^T = Σ_r v_r t[:, :, r]`.
pub fn mode3_product(t: &Tensor3, v: &ComplexVector) -> Result<ComplexMatrix> {
    let (d1, d2, d3) = t.dims;
    if v.len() != d3 {
        return Err(Error::DimensionMismatch {
            context: "mode3_product vector length",
            expected: d3,
            actual: v.len(),
        });
    }
    let mut out = ComplexMatrix::zeros(d1, d2);
    let slab = d1 * d2;
    for (r, &vr) in v.iter().enumerate() {
        let src = &t.data[r * slab..(r + 1) * slab];
        for (dst, &x) in out.as_mut_slice().iter_mut().zip(src) {
            *dst += vr * x;
        }
    }
    Ok(out)
}

/// Relative Hermitian asymmetry `‖m − m^H‖_F / ‖m‖_F`.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / norm
}

/// Solve `m x = rhs` for Hermitian `m`.
///
/// Uses a diagonally pivoted Cholesky factorization; if a pivot is not
/// positive or falls below [`SINGULAR_PIVOT_TOL`] times the largest diagonal
/// entry, falls back to LU with partial pivoting, which reports
/// [`Error::Singular`] under the same relative pivot threshold.
pub fn hermitian_solve(m: &ComplexMatrix, rhs: &ComplexVector) -> Result<ComplexVector> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::NotSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            context: "hermitian_solve rhs length",
            expected: n,
            actual: rhs.len(),
        });
    }
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    match pivoted_cholesky_solve(m, rhs) {
        Some(x) => Ok(x),
        None => lu_solve(m, rhs),
    }
}

fn pivoted_cholesky_solve(m: &ComplexMatrix, rhs: &ComplexVector) -> Option<ComplexVector> {
    let n = m.nrows();
    let max_diag = (0..n).map(|i| m[(i, i)].re).fold(0.0_f64, f64::max);
    if max_diag <= 0.0 {
        return None;
    }
    let threshold = SINGULAR_PIVOT_TOL * max_diag;

    // Work on the lower triangle of a permuted copy: a[perm] = L L^H.
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (p, pivot) =
            (k..n)
                .map(|i| (i, a[(i, i)].re))
                .fold(
                    (k, f64::NEG_INFINITY),
                    |best, c| if c.1 > best.1 { c } else { best },
                );
        if !(pivot > threshold) {
            return None;
        }
        if p != k {
            a.swap_rows(k, p);
            a.swap_columns(k, p);
            perm.swap(k, p);
        }
        let lkk = a[(k, k)].re.sqrt();
        a[(k, k)] = Complex64::new(lkk, 0.0);
        for i in k + 1..n {
            a[(i, k)] /= lkk;
        }
        // Update the whole trailing block so later symmetric swaps stay valid.
        for j in k + 1..n {
            let ljk = a[(j, k)].conj();
            for i in k + 1..n {
                let lik = a[(i, k)];
                a[(i, j)] -= lik * ljk;
            }
        }
    }

    // Forward: L y = P b; backward: L^H z = y; x = P^T z.
    let mut y: Vec<Complex64> = perm.iter().map(|&p| rhs[p]).collect();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= a[(i, k)] * y[k];
        }
        y[i] = s / a[(i, i)].re;
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= a[(k, i)].conj() * y[k];
        }
        y[i] = s / a[(i, i)].re;
    }
    let mut x = ComplexVector::zeros(n);
    for (k, &p) in perm.iter().enumerate() {
        x[p] = y[k];
    }
    Some(x)
}

fn lu_solve(m: &ComplexMatrix, rhs: &ComplexVector) -> Result<ComplexVector> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Err(Error::Singular);
    }
    let threshold = SINGULAR_PIVOT_TOL * scale;
    let mut a = m.clone();
    let mut b = rhs.clone();
    for k in 0..n {
        let (p, mag) = (k..n)
            .map(|i| (i, a[(i, k)].norm()))
            .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if !(mag > threshold) {
            return Err(Error::Singular);
        }
        if p != k {
            a.swap_rows(k, p);
            b.swap_rows(k, p);
        }
        let pivot = a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / pivot;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let akj = a[(k, j)];
                a[(i, j)] -= f * akj;
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[(i, j)] * b[j];
        }
        b[i] = s / a[(i, i)];
    }
    Ok(b)
}

/// Moore-Penrose pseudo-inverse via SVD; singular values below
/// `max(rows, cols) · ε · σ_max` are treated as zero.
pub fn pseudo_inverse(m: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = m.shape();
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let tol = rows.max(cols) as f64 * f64::EPSILON * smax;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut out = ComplexMatrix::zeros(cols, rows);
    for (idx, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let vcol = v_t.row(idx).adjoint();
            let urow = u.column(idx).adjoint();
            out += (vcol * urow) * Complex64::new(1.0 / s, 0.0);
        }
    }
    out
}

/// Singular values of `m` in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral condition number `σ_max / σ_min`; `+∞` when `σ_min` is zero.
pub fn condition_number_2(m: &ComplexMatrix) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let s = singular_values(m);
    let (smax, smin) = (s[0], s[s.len() - 1]);
    if smax == 0.0 || smin == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute difference norm when `b` is zero.
pub fn rel_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let d = (a - b).norm();
    let nb = b.norm();
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

/// Vector flavour of [`rel_diff`].
pub fn rel_diff_vec(a: &ComplexVector, b: &ComplexVector) -> f64 {
    let d = (a - b).norm();
    let nb = b.norm();
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

#[cfg(test)]
pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
