//! Filter designs: the full-array Wiener filter, the alternating Tensor MMSE
//! (TMMSE) and the closed-form regularized Kronecker MMSE (KMMSE), plus the
//! asymptotic separable limits and filter application.
//!
//! All filters act as `y[k] = w^H x[k]`. A separable filter composes as
//! `w = w_v ⊗ w_h`, so `y[k] = w_h^H X[k] w_v^*` on the `N_h x N_v` view.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::array_model::{manifold_tensor, ManifoldSet, UraGeometry};
use crate::error::{Error, Result};
use crate::kron_algebra::{
    hermitian_solve, kron, kron_vec, pseudo_inverse, singular_values, unfold, ComplexMatrix,
    ComplexVector,
};
use crate::metrics::mse_eval;
use crate::signal_model::{
    basis_vector, mean_power, sample_stats_of, subarray_manifold, Axis, Scenario, SecondOrderStats,
    SnapshotBlock, StatsKind,
};

/// Default TMMSE stopping tolerance on the normalized filter residual.
pub const DEFAULT_EPS: f64 = 1e-3;
/// Default TMMSE iteration cap.
pub const DEFAULT_MAX_ITER: usize = 50;
/// Default KMMSE Tikhonov weight.
pub const DEFAULT_RHO: f64 = 0.5;

/// Smallest `σ_min/σ_max` of a sub-array manifold accepted as full rank.
const RANK_TOL: f64 = 1e-10;

/// Unstructured `N`-element filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub w: ComplexVector,
}

/// Kronecker-factored filter `w = w_v ⊗ w_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableBeamformer {
    pub w_h: ComplexVector,
    pub w_v: ComplexVector,
}

impl SeparableBeamformer {
    pub fn composed(&self) -> ComplexVector {
        kron_vec(&self.w_v, &self.w_h)
    }

    pub fn to_beamformer(&self) -> Beamformer {
        Beamformer { w: self.composed() }
    }

    pub fn factor(&self, axis: Axis) -> &ComplexVector {
        match axis {
            Axis::Horizontal => &self.w_h,
            Axis::Vertical => &self.w_v,
        }
    }

    /// Unit-norm factors drawn from a circularly-symmetric Gaussian.
    pub fn random_unit(g: &UraGeometry, rng: &mut impl Rng) -> Self {
        let mut draw = |n: usize| {
            let v = ComplexVector::from_fn(n, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            });
            let norm = v.norm();
            v / Complex64::new(norm, 0.0)
        };
        let w_h = draw(g.n_h());
        let w_v = draw(g.n_v());
        Self { w_h, w_v }
    }
}

/// Borrowed view over either filter kind.
#[derive(Debug, Clone, Copy)]
pub enum FilterRef<'a> {
    Full(&'a Beamformer),
    Separable(&'a SeparableBeamformer),
}

impl FilterRef<'_> {
    pub fn composed(&self) -> ComplexVector {
        match self {
            FilterRef::Full(b) => b.w.clone(),
            FilterRef::Separable(s) => s.composed(),
        }
    }
}

impl<'a> From<&'a Beamformer> for FilterRef<'a> {
    fn from(b: &'a Beamformer) -> Self {
        FilterRef::Full(b)
    }
}

impl<'a> From<&'a SeparableBeamformer> for FilterRef<'a> {
    fn from(s: &'a SeparableBeamformer) -> Self {
        FilterRef::Separable(s)
    }
}

/// Wiener filter `w = R^{-1} p`.
pub fn mmse_direct(stats: &SecondOrderStats) -> Result<Beamformer> {
    Ok(Beamformer {
        w: hermitian_solve(&stats.cov, &stats.cross)?,
    })
}

/// Wiener filter through the matrix inversion lemma, solving an `R x R`
/// system: `w = A ((σ_b²/σ_s²) I_R + A^H A)^{-1} e_d`.
pub fn mmse_lemma(sc: &Scenario) -> Result<Beamformer> {
    let a = &sc.manifolds.a_full;
    let r = a.ncols();
    let mut m = a.adjoint() * a;
    let shift = sc.sigma_b2 / sc.sigma_s2;
    for i in 0..r {
        m[(i, i)] += shift;
    }
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let z = hermitian_solve(&m, &basis_vector(r, sc.desired_index))?;
    Ok(Beamformer { w: a * z })
}

fn check_co_filter(fixed: &ComplexVector, expected: usize) -> Result<()> {
    if fixed.len() != expected {
        return Err(Error::DimensionMismatch {
            context: "co-filter length",
            expected,
            actual: fixed.len(),
        });
    }
    if fixed.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroCoFilter);
    }
    Ok(())
}

fn co_filter_len(g: &UraGeometry, axis: Axis) -> usize {
    match axis {
        Axis::Horizontal => g.n_v(),
        Axis::Vertical => g.n_h(),
    }
}

/// Conditional sub-array statistics for TMMSE given the co-filter
/// (`w_v` when `axis` is horizontal, `w_h` when vertical):
///
/// `R_hh = [𝒜]_(1) (R_ss ⊗ w_v^* w_v^T) [𝒜]_(1)^H + σ_b² ‖w_v‖² I`,
/// `p_hs = [𝒜]_(1) (R_ss e_d ⊗ w_v^*)`, and the vertical analogue on the
/// mode-2 unfolding.
pub fn tmmse_stats_analytic(
    sc: &Scenario,
    fixed: &ComplexVector,
    axis: Axis,
) -> Result<SecondOrderStats> {
    let g = sc.geometry();
    check_co_filter(fixed, co_filter_len(&g, axis))?;
    let mode = match axis {
        Axis::Horizontal => 1,
        Axis::Vertical => 2,
    };
    let unf = unfold(&manifold_tensor(&sc.manifolds), mode)?;
    let r = sc.r();
    let s2 = Complex64::new(sc.sigma_s2, 0.0);
    let r_ss = ComplexMatrix::identity(r, r) * s2;
    let wc = fixed.map(|z| z.conj());
    let outer = &wc * fixed.transpose();
    let inner = kron(&r_ss, &outer);
    let mut cov = &unf * inner * unf.adjoint();
    let noise = sc.sigma_b2 * fixed.norm_squared();
    for i in 0..cov.nrows() {
        cov[(i, i)] += noise;
    }
    let cov = (&cov + cov.adjoint()) * Complex64::new(0.5, 0.0);
    let rse = basis_vector(r, sc.desired_index) * s2;
    let cross = &unf * kron_vec(&rse, &wc);
    Ok(SecondOrderStats {
        cov,
        cross,
        kind: StatsKind::Analytic,
    })
}

/// Sub-array inputs `u_h[k] = X[k] w_v^*` (horizontal) or
/// `u_v[k] = X[k]^T w_h^*` (vertical), one snapshot per column.
pub fn subarray_inputs(
    blk: &SnapshotBlock,
    fixed: &ComplexVector,
    axis: Axis,
) -> Result<ComplexMatrix> {
    let g = blk.geometry;
    let (n_h, n_v, k) = (g.n_h(), g.n_v(), blk.k());
    check_co_filter(fixed, co_filter_len(&g, axis))?;
    let out = match axis {
        Axis::Horizontal => {
            let mut u = ComplexMatrix::zeros(n_h, k);
            for (j, w) in fixed.iter().enumerate() {
                u += blk.x.rows(j * n_h, n_h) * w.conj();
            }
            u
        }
        Axis::Vertical => {
            let mut u = ComplexMatrix::zeros(n_v, k);
            let wc: Vec<Complex64> = fixed.iter().map(|z| z.conj()).collect();
            for col in 0..k {
                let x = blk.x.column(col);
                for j in 0..n_v {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (i, w) in wc.iter().enumerate() {
                        acc += w * x[i + j * n_h];
                    }
                    u[(j, col)] = acc;
                }
            }
            u
        }
    };
    Ok(out)
}

/// Sample-estimated TMMSE sub-array statistics from the sub-array inputs.
pub fn tmmse_stats_sample(
    blk: &SnapshotBlock,
    fixed: &ComplexVector,
    axis: Axis,
    desired_index: usize,
) -> Result<SecondOrderStats> {
    if desired_index >= blk.s.nrows() {
        return Err(Error::InvalidArgument(format!(
            "desired index {desired_index} out of range"
        )));
    }
    let u = subarray_inputs(blk, fixed, axis)?;
    Ok(sample_stats_of(&u, &blk.desired_symbols(desired_index)))
}

/// Where TMMSE obtains its conditional statistics.
#[derive(Debug, Clone, Copy)]
pub enum StatsProvider<'a> {
    Analytic(&'a Scenario),
    Sample {
        block: &'a SnapshotBlock,
        desired_index: usize,
    },
}

impl StatsProvider<'_> {
    pub fn geometry(&self) -> UraGeometry {
        match self {
            StatsProvider::Analytic(sc) => sc.geometry(),
            StatsProvider::Sample { block, .. } => block.geometry,
        }
    }

    pub fn conditional(&self, fixed: &ComplexVector, axis: Axis) -> Result<SecondOrderStats> {
        match *self {
            StatsProvider::Analytic(sc) => tmmse_stats_analytic(sc, fixed, axis),
            StatsProvider::Sample {
                block,
                desired_index,
            } => tmmse_stats_sample(block, fixed, axis, desired_index),
        }
    }

    /// Power of the desired symbol (`σ_s²`, or its sample mean).
    pub fn desired_power(&self) -> f64 {
        match *self {
            StatsProvider::Analytic(sc) => sc.sigma_s2,
            StatsProvider::Sample {
                block,
                desired_index,
            } => mean_power(&block.desired_symbols(desired_index)),
        }
    }
}

/// Outcome of a TMMSE run.
#[derive(Debug, Clone)]
pub struct TmmseReport {
    pub filter: SeparableBeamformer,
    pub iterations: usize,
    /// Normalized composed-filter change, one entry per iteration.
    pub residual_history: Vec<f64>,
    /// MSE after every half-update (two entries per iteration).
    pub mse_history: Vec<f64>,
    pub converged: bool,
    /// Seed of the random initialization, when drawn by [`tmmse_seeded`].
    pub init_seed: Option<u64>,
}

fn normalized(v: &ComplexVector) -> ComplexVector {
    v / Complex64::new(v.norm(), 0.0)
}

/// Alternating MMSE over the Kronecker factors.
///
/// Each iteration solves `w_h = R_hh^{-1} p_hs` given `w_v`, then
/// `w_v = R_vv^{-1} p_vs` given the new `w_h`, and stops once
/// `‖w_i/‖w_i‖ − w_{i−1}/‖w_{i−1}‖‖ < eps` on the composed filter. Hitting
/// `max_iter` returns the last iterate with `converged == false`.
pub fn tmmse(
    provider: StatsProvider<'_>,
    init: SeparableBeamformer,
    eps: f64,
    max_iter: usize,
) -> Result<TmmseReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let g = provider.geometry();
    if init.w_h.len() != g.n_h() || init.w_v.len() != g.n_v() {
        return Err(Error::DimensionMismatch {
            context: "tmmse initial factors",
            expected: g.n(),
            actual: init.w_h.len() * init.w_v.len(),
        });
    }
    let composed = init.composed();
    if composed.norm() == 0.0 {
        return Err(Error::ZeroCoFilter);
    }
    let power = provider.desired_power();
    let mut filter = init;
    let mut prev = normalized(&composed);
    let mut residual_history = Vec::new();
    let mut mse_history = Vec::new();
    let mut converged = false;

    for _ in 0..max_iter {
        let stats_h = provider.conditional(&filter.w_v, Axis::Horizontal)?;
        filter.w_h = hermitian_solve(&stats_h.cov, &stats_h.cross)?;
        mse_history.push(mse_eval(&filter.w_h, &stats_h, power)?);

        let stats_v = provider.conditional(&filter.w_h, Axis::Vertical)?;
        filter.w_v = hermitian_solve(&stats_v.cov, &stats_v.cross)?;
        mse_history.push(mse_eval(&filter.w_v, &stats_v, power)?);

        let composed = filter.composed();
        let norm = composed.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateOutput);
        }
        let cur = composed / Complex64::new(norm, 0.0);
        let residual = (&cur - &prev).norm();
        residual_history.push(residual);
        prev = cur;
        if residual < eps {
            converged = true;
            break;
        }
    }

    Ok(TmmseReport {
        filter,
        iterations: residual_history.len(),
        residual_history,
        mse_history,
        converged,
        init_seed: None,
    })
}

/// [`tmmse`] from unit-norm Gaussian factors drawn with `seed`.
pub fn tmmse_seeded(
    provider: StatsProvider<'_>,
    seed: u64,
    eps: f64,
    max_iter: usize,
) -> Result<TmmseReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = SeparableBeamformer::random_unit(&provider.geometry(), &mut rng);
    let mut report = tmmse(provider, init, eps, max_iter)?;
    report.init_seed = Some(seed);
    Ok(report)
}

/// Regularized sub-array MMSE filters `w_m = (R_m + ρ I)^{-1} p_m`.
pub fn kmmse(
    stats_h: &SecondOrderStats,
    stats_v: &SecondOrderStats,
    rho: f64,
) -> Result<SeparableBeamformer> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "regularization must be non-negative, got {rho}"
        )));
    }
    let solve = |st: &SecondOrderStats| {
        let mut m = st.cov.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += rho;
        }
        hermitian_solve(&m, &st.cross)
    };
    Ok(SeparableBeamformer {
        w_h: solve(stats_h)?,
        w_v: solve(stats_v)?,
    })
}

/// Beamformer output `w^H x[k]` for every snapshot of the block.
pub fn apply<'a>(filter: impl Into<FilterRef<'a>>, blk: &SnapshotBlock) -> Result<ComplexVector> {
    let g = blk.geometry;
    match filter.into() {
        FilterRef::Full(b) => {
            if b.w.len() != g.n() {
                return Err(Error::DimensionMismatch {
                    context: "filter length",
                    expected: g.n(),
                    actual: b.w.len(),
                });
            }
            Ok(blk.x.tr_mul(&b.w.map(|z| z.conj())))
        }
        FilterRef::Separable(s) => {
            if s.w_h.len() != g.n_h() || s.w_v.len() != g.n_v() {
                return Err(Error::DimensionMismatch {
                    context: "separable filter factors",
                    expected: g.n(),
                    actual: s.w_h.len() * s.w_v.len(),
                });
            }
            if s.w_v.iter().all(|z| z.norm_sqr() == 0.0) {
                return Ok(ComplexVector::zeros(blk.k()));
            }
            let u = subarray_inputs(blk, &s.w_v, Axis::Horizontal)?;
            Ok(u.tr_mul(&s.w_h.map(|z| z.conj())))
        }
    }
}

/// KMMSE output rescaled to the desired power:
/// `y[k] = (σ_s/σ_p) p[k]`, `σ_p² = Σ|p[k]|² / (K − 1)`.
pub fn kmmse_output(
    filter: &SeparableBeamformer,
    blk: &SnapshotBlock,
    sigma_s: f64,
) -> Result<ComplexVector> {
    let k = blk.k();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "output scaling needs at least two snapshots".into(),
        ));
    }
    let p = apply(filter, blk)?;
    let sigma_p = (p.iter().map(|z| z.norm_sqr()).sum::<f64>() / (k - 1) as f64).sqrt();
    if sigma_p == 0.0 {
        return Err(Error::DegenerateOutput);
    }
    Ok(p * Complex64::new(sigma_s / sigma_p, 0.0))
}

/// High-SNR limit of KMMSE: `w_m^H = e_d^T A_m^†` on each sub-array.
pub fn zf_separable_limit(ms: &ManifoldSet, desired_index: usize) -> Result<SeparableBeamformer> {
    if desired_index >= ms.r() {
        return Err(Error::InvalidArgument(format!(
            "desired index {desired_index} out of range"
        )));
    }
    let zf = |axis: Axis| -> Result<ComplexVector> {
        let a = subarray_manifold(ms, axis);
        if a.ncols() > a.nrows() {
            return Err(Error::RankDeficient);
        }
        let s = singular_values(a);
        if !(s[s.len() - 1] > RANK_TOL * s[0]) {
            return Err(Error::RankDeficient);
        }
        let pinv = pseudo_inverse(a);
        Ok(pinv.row(desired_index).adjoint())
    };
    Ok(SeparableBeamformer {
        w_h: zf(Axis::Horizontal)?,
        w_v: zf(Axis::Vertical)?,
    })
}

/// Low-SNR limit of KMMSE: `w_m = (σ_s²/σ_b²) a_m(d)`, so the composed filter
/// is `(σ_s⁴/σ_b⁴) a_v(d) ⊗ a_h(d)`.
pub fn matched_separable_limit(
    ms: &ManifoldSet,
    desired_index: usize,
    sc: &Scenario,
) -> Result<SeparableBeamformer> {
    if desired_index >= ms.r() {
        return Err(Error::InvalidArgument(format!(
            "desired index {desired_index} out of range"
        )));
    }
    let gain = Complex64::new(sc.sigma_s2 / sc.sigma_b2, 0.0);
    Ok(SeparableBeamformer {
        w_h: ms.a_h.column(desired_index) * gain,
        w_v: ms.a_v.column(desired_index) * gain,
    })
}

/// Angle in radians between two complex vectors, ignoring scale and phase.
pub fn subspace_angle(a: &ComplexVector, b: &ComplexVector) -> f64 {
    let cos = a.dotc(b).norm() / (a.norm() * b.norm());
    cos.min(1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{build_manifolds, DirectionCosines};
    use crate::kron_algebra::{rel_diff, rel_diff_vec};
    use crate::signal_model::{
        analytic_full_stats, analytic_subarray_stats, draw_directions, qpsk_symbols,
        sample_full_stats, sample_subarray_stats, synthesize,
    };
    use rand::SeedableRng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scenario(n_h: usize, n_v: usize, dirs: &[(f64, f64)], s2: f64, b2: f64) -> Scenario {
        let g = UraGeometry::new(n_h, n_v).unwrap();
        let dirs: Vec<_> = dirs
            .iter()
            .map(|&(p, q)| DirectionCosines::new(p, q).unwrap())
            .collect();
        Scenario::new(build_manifolds(&g, &dirs).unwrap(), 0, s2, b2).unwrap()
    }

    fn random_scenario(seed: u64, n_h: usize, n_v: usize, r: usize, snr_db: f64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = UraGeometry::new(n_h, n_v).unwrap();
        let ms = build_manifolds(&g, &draw_directions(r, &mut rng)).unwrap();
        Scenario::with_snr_db(ms, 0, snr_db).unwrap()
    }

    #[test]
    fn scalar_wiener() {
        let st = SecondOrderStats {
            cov: ComplexMatrix::from_element(1, 1, c(2.0)),
            cross: ComplexVector::from_element(1, c(1.0)),
            kind: StatsKind::Analytic,
        };
        assert!((mmse_direct(&st).unwrap().w[0] - c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn rank_one_wiener_closed_form() {
        // One broadside source on a 2x2 array, unit powers: w = a / (N + 1).
        let sc = scenario(2, 2, &[(0.0, 0.0)], 1.0, 1.0);
        let st = analytic_full_stats(&sc);
        let w = mmse_direct(&st).unwrap();
        assert!(rel_diff_vec(&w.w, &ComplexVector::repeat(4, c(0.2))) < 1e-14);
        let mse = mse_eval(&w.w, &st, 1.0).unwrap();
        assert!((mse - 0.2).abs() < 1e-14);
    }

    #[test]
    fn lemma_matches_direct() {
        for seed in 0..10 {
            let sc = random_scenario(seed, 8, 8, 4, 5.0);
            let direct = mmse_direct(&analytic_full_stats(&sc)).unwrap();
            let lemma = mmse_lemma(&sc).unwrap();
            assert!(rel_diff_vec(&lemma.w, &direct.w) < 1e-8);
        }
    }

    #[test]
    fn lemma_rank_one_is_scaled_matched_filter() {
        let sc = scenario(3, 2, &[(0.3, -0.6)], 2.0, 0.5);
        let a = sc.manifolds.a_full.column(0).into_owned();
        let expected = &a * c(2.0 / (0.5 + 6.0 * 2.0));
        assert!(rel_diff_vec(&mmse_lemma(&sc).unwrap().w, &expected) < 1e-14);
    }

    #[test]
    fn sample_wiener_converges() {
        let sc = random_scenario(3, 4, 4, 2, 0.0);
        let blk = synthesize(&sc, 100_000, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let ws = mmse_direct(&sample_full_stats(&blk, 0).unwrap()).unwrap();
        let wa = mmse_direct(&analytic_full_stats(&sc)).unwrap();
        assert!(rel_diff_vec(&ws.w, &wa.w) < 0.05);
    }

    #[test]
    fn tmmse_analytic_selection_reduces_to_first_row() {
        // w_v = e_1 selects the first physical row, i.e. the horizontal sub-array.
        let sc = random_scenario(4, 5, 4, 3, 3.0);
        let e1 = basis_vector(4, 0);
        let st = tmmse_stats_analytic(&sc, &e1, Axis::Horizontal).unwrap();
        let sub = analytic_subarray_stats(&sc, Axis::Horizontal);
        assert!(rel_diff(&st.cov, &sub.cov) < 1e-14);
        assert!(rel_diff_vec(&st.cross, &sub.cross) < 1e-14);

        let e1 = basis_vector(5, 0);
        let st = tmmse_stats_analytic(&sc, &e1, Axis::Vertical).unwrap();
        let sub = analytic_subarray_stats(&sc, Axis::Vertical);
        assert!(rel_diff(&st.cov, &sub.cov) < 1e-14);
    }

    #[test]
    fn tmmse_analytic_rank_one_expansion() {
        let sc = scenario(4, 3, &[(0.2, -0.4)], 1.5, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let init = SeparableBeamformer::random_unit(&sc.geometry(), &mut rng);
        let wv = &init.w_v;
        let st = tmmse_stats_analytic(&sc, wv, Axis::Horizontal).unwrap();
        let ah = sc.manifolds.a_h.column(0).into_owned();
        let av = sc.manifolds.a_v.column(0).into_owned();
        let gain = wv.dotc(&av).norm_sqr();
        let mut expected = &ah * ah.adjoint() * c(1.5 * gain);
        for i in 0..4 {
            expected[(i, i)] += 0.3 * wv.norm_squared();
        }
        assert!(rel_diff(&st.cov, &expected) < 1e-13);
        // cross = σ_s² a_h (a_v^T w_v^*)
        let expected_cross = &ah * (av.transpose() * wv.map(|z| z.conj()))[0] * c(1.5);
        assert!(rel_diff_vec(&st.cross, &expected_cross) < 1e-13);
    }

    #[test]
    fn tmmse_stats_reject_zero_co_filter() {
        let sc = random_scenario(6, 3, 3, 2, 0.0);
        let z = ComplexVector::zeros(3);
        assert!(matches!(
            tmmse_stats_analytic(&sc, &z, Axis::Horizontal),
            Err(Error::ZeroCoFilter)
        ));
        let blk = synthesize(&sc, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(matches!(
            tmmse_stats_sample(&blk, &z, Axis::Vertical, 0),
            Err(Error::ZeroCoFilter)
        ));
    }

    #[test]
    fn tmmse_sample_single_snapshot_rank_one() {
        let sc = random_scenario(7, 3, 3, 2, 0.0);
        let blk = synthesize(&sc, 1, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let w = basis_vector(3, 1);
        let st = tmmse_stats_sample(&blk, &w, Axis::Horizontal, 0).unwrap();
        let u = subarray_inputs(&blk, &w, Axis::Horizontal).unwrap();
        assert!(rel_diff(&st.cov, &(&u * u.adjoint())) < 1e-14);
    }

    #[test]
    fn subarray_inputs_match_matrix_view() {
        let sc = random_scenario(8, 4, 3, 2, 0.0);
        let blk = synthesize(&sc, 6, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = SeparableBeamformer::random_unit(&sc.geometry(), &mut rng);
        let uh = subarray_inputs(&blk, &f.w_v, Axis::Horizontal).unwrap();
        let uv = subarray_inputs(&blk, &f.w_h, Axis::Vertical).unwrap();
        for k in 0..6 {
            let xk = blk.snapshot_matrix(k);
            let eh = &xk * f.w_v.map(|z| z.conj());
            let ev = xk.transpose() * f.w_h.map(|z| z.conj());
            assert!(rel_diff_vec(&uh.column(k).into_owned(), &eh) < 1e-14);
            assert!(rel_diff_vec(&uv.column(k).into_owned(), &ev) < 1e-14);
        }
    }

    #[test]
    fn tmmse_sample_noiseless_cross() {
        let sc = scenario(4, 3, &[(0.2, -0.4)], 1.0, 1e-30);
        let blk = synthesize(&sc, 200, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let wv = basis_vector(3, 2) + basis_vector(3, 0);
        let st = tmmse_stats_sample(&blk, &wv, Axis::Horizontal, 0).unwrap();
        let ah = sc.manifolds.a_h.column(0).into_owned();
        let av = sc.manifolds.a_v.column(0).into_owned();
        let expected = ah * wv.dotc(&av);
        assert!(rel_diff_vec(&st.cross, &expected) < 1e-12);
    }

    #[test]
    fn tmmse_rank_one_reaches_wiener() {
        let sc = scenario(2, 2, &[(0.0, 0.0)], 1.0, 1.0);
        let report = tmmse_seeded(
            StatsProvider::Analytic(&sc),
            7,
            DEFAULT_EPS,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert!(report.converged);
        assert_eq!(report.init_seed, Some(7));
        let mse = mse_eval(&report.filter.composed(), &analytic_full_stats(&sc), 1.0).unwrap();
        assert!((mse - 0.2).abs() < 1e-10);
    }

    #[test]
    fn tmmse_history_lengths_and_monotone() {
        let sc = random_scenario(9, 8, 8, 4, 10.0);
        let report = tmmse_seeded(
            StatsProvider::Analytic(&sc),
            1,
            DEFAULT_EPS,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert_eq!(report.residual_history.len(), report.iterations);
        assert_eq!(report.mse_history.len(), 2 * report.iterations);
        for w in report.mse_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        // The last recorded MSE is the MSE of the composed filter.
        let full = analytic_full_stats(&sc);
        let mse = mse_eval(&report.filter.composed(), &full, 1.0).unwrap();
        assert!((mse - report.mse_history.last().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn tmmse_sample_mode_runs() {
        let sc = random_scenario(10, 4, 4, 2, 10.0);
        let blk = synthesize(&sc, 500, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let provider = StatsProvider::Sample {
            block: &blk,
            desired_index: 0,
        };
        let report = tmmse_seeded(provider, 3, DEFAULT_EPS, DEFAULT_MAX_ITER).unwrap();
        assert!(report.converged);
        for w in report.mse_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }

    #[test]
    fn tmmse_flags_non_convergence_and_validates() {
        let sc = random_scenario(12, 8, 8, 4, 10.0);
        let report = tmmse_seeded(StatsProvider::Analytic(&sc), 1, 1e-300, 2).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 2);
        let init = SeparableBeamformer {
            w_h: ComplexVector::zeros(8),
            w_v: ComplexVector::zeros(8),
        };
        assert!(tmmse(StatsProvider::Analytic(&sc), init.clone(), 1e-3, 5).is_err());
        assert!(tmmse(StatsProvider::Analytic(&sc), init, 0.0, 5).is_err());
    }

    #[test]
    fn kmmse_joint_kronecker_form() {
        let sc = random_scenario(13, 4, 3, 3, 5.0);
        let sh = analytic_subarray_stats(&sc, Axis::Horizontal);
        let sv = analytic_subarray_stats(&sc, Axis::Vertical);
        let rho = 0.5;
        let f = kmmse(&sh, &sv, rho).unwrap();
        let reg = |m: &ComplexMatrix| {
            let n = m.nrows();
            m + ComplexMatrix::identity(n, n) * c(rho)
        };
        let joint = kron(&reg(&sv.cov), &reg(&sh.cov));
        let rhs = kron_vec(&sv.cross, &sh.cross);
        let w_joint = hermitian_solve(&joint, &rhs).unwrap();
        assert!(rel_diff_vec(&f.composed(), &w_joint) < 1e-10);
        assert!(kmmse(&sh, &sv, -1.0).is_err());
    }

    #[test]
    fn kmmse_rank_one_high_snr_is_zero_forcing() {
        let sc = scenario(4, 4, &[(0.3, -0.2)], 1.0, 1e-6);
        let sh = analytic_subarray_stats(&sc, Axis::Horizontal);
        let sv = analytic_subarray_stats(&sc, Axis::Vertical);
        let f = kmmse(&sh, &sv, 0.0).unwrap();
        let zf = zf_separable_limit(&sc.manifolds, 0).unwrap();
        assert!(subspace_angle(&f.composed(), &zf.composed()) < 1e-6);
        // For one source the ZF row is the matched filter a_m / N_m.
        let ah = sc.manifolds.a_h.column(0).into_owned();
        assert!(rel_diff_vec(&zf.w_h, &(ah * c(0.25))) < 1e-12);
    }

    #[test]
    fn zf_limit_recovers_desired_noiselessly() {
        let sc = scenario(4, 4, &[(0.5, -0.5), (-0.5, 0.5)], 1.0, 1.0);
        let zf = zf_separable_limit(&sc.manifolds, 0).unwrap();
        let s = qpsk_symbols(2, 30, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        let x = &sc.manifolds.a_full * &s;
        let blk = SnapshotBlock::new(sc.geometry(), x, s.clone()).unwrap();
        let y = apply(&zf, &blk).unwrap();
        let sd = s.row(0).transpose();
        assert!(rel_diff_vec(&y, &sd) < 1e-10);

        let dup = scenario(4, 4, &[(0.5, -0.5), (0.5, 0.5)], 1.0, 1.0);
        assert!(matches!(
            zf_separable_limit(&dup.manifolds, 0),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn matched_limit_direction() {
        let sc = scenario(4, 3, &[(0.1, 0.7), (-0.3, 0.2)], 1.0, 1e3);
        let m = matched_separable_limit(&sc.manifolds, 0, &sc).unwrap();
        let a = sc.manifolds.a_full.column(0).into_owned();
        assert!(subspace_angle(&m.composed(), &a) < 1e-12);
        let scale = (sc.sigma_s2 / sc.sigma_b2).powi(2);
        assert!(rel_diff_vec(&m.composed(), &(a * c(scale))) < 1e-14);
    }

    #[test]
    fn matched_limit_orthogonal_sources_recover_desired() {
        // Cosines spaced by 2/N_m make the sub-array steering vectors orthogonal.
        let sc = scenario(4, 4, &[(0.0, 0.5), (0.5, -0.5), (-0.5, 0.0)], 1.0, 1.0);
        let m = matched_separable_limit(&sc.manifolds, 0, &sc).unwrap();
        let s = qpsk_symbols(3, 20, 1.0, &mut ChaCha8Rng::seed_from_u64(2));
        let blk = SnapshotBlock::new(sc.geometry(), &sc.manifolds.a_full * &s, s.clone()).unwrap();
        let y = apply(&m, &blk).unwrap();
        let expected = s.row(0).transpose() * c(16.0);
        assert!(rel_diff_vec(&y, &expected) < 1e-12);
    }

    #[test]
    fn apply_selection_and_separable_consistency() {
        let sc = random_scenario(14, 4, 3, 2, 0.0);
        let blk = synthesize(&sc, 25, &mut ChaCha8Rng::seed_from_u64(15)).unwrap();
        let e1 = Beamformer {
            w: basis_vector(12, 0),
        };
        let y = apply(&e1, &blk).unwrap();
        assert!(rel_diff_vec(&y, &blk.x.row(0).transpose()) < 1e-15);

        let f =
            SeparableBeamformer::random_unit(&sc.geometry(), &mut ChaCha8Rng::seed_from_u64(16));
        let ys = apply(&f, &blk).unwrap();
        let yc = apply(&f.to_beamformer(), &blk).unwrap();
        assert!((ys - yc).norm() <= 1e-12 * blk.x.norm());

        let bad = Beamformer {
            w: ComplexVector::zeros(5),
        };
        assert!(apply(&bad, &blk).is_err());
    }

    #[test]
    fn matched_filter_single_source_passes_symbols() {
        let sc = scenario(3, 3, &[(0.4, -0.1)], 1.0, 1.0);
        let s = qpsk_symbols(1, 10, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        let blk = SnapshotBlock::new(sc.geometry(), &sc.manifolds.a_full * &s, s.clone()).unwrap();
        let w = Beamformer {
            w: sc.manifolds.a_full.column(0) / c(9.0),
        };
        let y = apply(&w, &blk).unwrap();
        assert!(rel_diff_vec(&y, &s.row(0).transpose()) < 1e-14);
    }

    #[test]
    fn kmmse_output_scaling() {
        let sc = random_scenario(17, 4, 4, 3, 10.0);
        let blk = synthesize(&sc, 400, &mut ChaCha8Rng::seed_from_u64(18)).unwrap();
        let sh = sample_subarray_stats(&blk, Axis::Horizontal, 0).unwrap();
        let sv = sample_subarray_stats(&blk, Axis::Vertical, 0).unwrap();
        let f = kmmse(&sh, &sv, 0.5).unwrap();
        let y = kmmse_output(&f, &blk, 1.0).unwrap();
        let power = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / (blk.k() - 1) as f64;
        assert!((power - 1.0).abs() < 1e-10);

        let doubled = SeparableBeamformer {
            w_h: &f.w_h * c(2.0),
            w_v: f.w_v.clone(),
        };
        let y2 = kmmse_output(&doubled, &blk, 1.0).unwrap();
        assert!(rel_diff_vec(&y2, &y) < 1e-12);

        let zero = SeparableBeamformer {
            w_h: ComplexVector::zeros(4),
            w_v: f.w_v.clone(),
        };
        assert!(matches!(
            kmmse_output(&zero, &blk, 1.0),
            Err(Error::DegenerateOutput)
        ));
    }

    #[test]
    fn kmmse_output_near_unity_for_power_correct_filter() {
        // Single source, matched sub-filters normalized so |AF| = 1: the
        // output already has the desired power up to the noise contribution.
        let sc = scenario(4, 4, &[(0.2, 0.3)], 1.0, 1e-4);
        let blk = synthesize(&sc, 2000, &mut ChaCha8Rng::seed_from_u64(19)).unwrap();
        let f = SeparableBeamformer {
            w_h: sc.manifolds.a_h.column(0) / c(4.0),
            w_v: sc.manifolds.a_v.column(0) / c(4.0),
        };
        let raw = apply(&f, &blk).unwrap();
        let y = kmmse_output(&f, &blk, 1.0).unwrap();
        let scale = y.norm() / raw.norm();
        assert!((scale - 1.0).abs() < 0.01);
    }

    #[test]
    fn gauge_freedom_leaves_composition_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let g = UraGeometry::new(3, 5).unwrap();
        let f = SeparableBeamformer::random_unit(&g, &mut rng);
        let alpha = Complex64::new(0.3, -1.7);
        let scaled = SeparableBeamformer {
            w_h: &f.w_h * alpha,
            w_v: &f.w_v / alpha,
        };
        assert!(rel_diff_vec(&scaled.composed(), &f.composed()) < 1e-14);
    }
}
