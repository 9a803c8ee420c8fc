//! C ABI over the `sepbeam` beamformers.
//!
//! Every fallible function returns an [`SbStatus`]. On failure a message is
//! kept per thread and can be read with [`sb_last_error`]. Scenario and block
//! handles are opaque, created by `sb_scenario_new` and `sb_block_synthesize`
//! and released with the matching `*_free`. Filters and outputs are written into
//! caller-owned [`SbComplex`] buffers whose lengths are passed explicitly.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sepbeam::array_model::{build_manifolds, DirectionCosines, UraGeometry};
use sepbeam::beamformers::{
    apply, kmmse, mmse_direct, tmmse_seeded, Beamformer, SeparableBeamformer, StatsProvider,
};
use sepbeam::metrics::{flops, FlopsMethod, FlopsModel};
use sepbeam::signal_model::{
    analytic_full_stats, sample_full_stats, sample_subarray_stats, synthesize, Axis, Scenario,
    SnapshotBlock,
};
use sepbeam::{ComplexVector, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Singular = 4,
    RankDeficient = 5,
    Degenerate = 6,
    Internal = 7,
    Panic = 8,
}

/// Complex number laid out as two doubles, real part first.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SbComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for SbComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<SbComplex> for Complex64 {
    fn from(z: SbComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Values accepted by the `method` argument of [`sb_flops`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbFlopsMethod {
    MmseSample = 0,
    MmseLemma = 1,
    Tmmse = 2,
    Kmmse = 3,
}

/// Opaque source layout with signal and noise powers.
pub struct SbScenario {
    inner: Scenario,
}

/// Opaque block of received snapshots with the transmitted symbols.
pub struct SbBlock {
    inner: SnapshotBlock,
    desired_index: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SbStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::NotSquare { .. } => SbStatus::DimensionMismatch,
        Error::Singular | Error::NotHermitian(_) => SbStatus::Singular,
        Error::RankDeficient => SbStatus::RankDeficient,
        Error::DegenerateOutput | Error::ZeroCoFilter => SbStatus::Degenerate,
        Error::InvalidArgument(_)
        | Error::InvalidMode(_)
        | Error::CosineOutOfRange(_)
        | Error::EmptyDirections
        | Error::Config { .. } => SbStatus::InvalidArgument,
        _ => SbStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SbStatus, String)>) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sepbeam".into());
            SbStatus::Panic
        }
    }
}

fn lib(e: Error) -> (SbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (SbStatus, String) {
    (SbStatus::NullPointer, format!("`{name}` is null"))
}

fn check_len(name: &str, got: usize, want: usize) -> Result<(), (SbStatus, String)> {
    if got == want {
        Ok(())
    } else {
        Err((
            SbStatus::DimensionMismatch,
            format!("`{name}` has length {got}, expected {want}"),
        ))
    }
}

unsafe fn reference<'a, T>(p: *const T, name: &str) -> Result<&'a T, (SbStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out(
    v: &ComplexVector,
    out: *mut SbComplex,
    len: usize,
    name: &str,
) -> Result<(), (SbStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    check_len(name, len, v.len())?;
    let dst = slice::from_raw_parts_mut(out, len);
    for (d, s) in dst.iter_mut().zip(v.iter()) {
        *d = (*s).into();
    }
    Ok(())
}

/// Message describing the last failure on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a scenario of `r` sources with direction cosines `p[i]`, `q[i]` on
/// an `n_h x n_v` array. Source powers are 1; noise power follows `snr_db`.
///
/// # Safety
/// `p` and `q` must point to `r` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_scenario_new(
    n_h: usize,
    n_v: usize,
    p: *const f64,
    q: *const f64,
    r: usize,
    desired_index: usize,
    snr_db: f64,
    out: *mut *mut SbScenario,
) -> SbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if p.is_null() || q.is_null() {
            return Err(null("p/q"));
        }
        let (p, q) = (slice::from_raw_parts(p, r), slice::from_raw_parts(q, r));
        let dirs = p
            .iter()
            .zip(q)
            .map(|(&p, &q)| DirectionCosines::new(p, q))
            .collect::<sepbeam::Result<Vec<_>>>()
            .map_err(lib)?;
        let g = UraGeometry::new(n_h, n_v).map_err(lib)?;
        let ms = build_manifolds(&g, &dirs).map_err(lib)?;
        let inner = Scenario::with_snr_db(ms, desired_index, snr_db).map_err(lib)?;
        *out = Box::into_raw(Box::new(SbScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`sb_scenario_new`] and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sb_scenario_free(s: *mut SbScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of array elements `n_h * n_v`.
///
/// # Safety
/// `s` must be a live scenario handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sb_scenario_elements(s: *const SbScenario) -> usize {
    s.as_ref().map_or(0, |s| s.inner.geometry().n())
}

/// Draws `k` QPSK snapshots for the scenario with a seeded generator.
///
/// # Safety
/// `s` must be a live scenario handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_block_synthesize(
    s: *const SbScenario,
    k: usize,
    seed: u64,
    out: *mut *mut SbBlock,
) -> SbStatus {
    guard(|| {
        let s = reference(s, "scenario")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = synthesize(&s.inner, k, &mut rng).map_err(lib)?;
        *out = Box::into_raw(Box::new(SbBlock {
            inner,
            desired_index: s.inner.desired_index,
        }));
        Ok(())
    })
}

/// # Safety
/// `b` must come from [`sb_block_synthesize`] and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sb_block_free(b: *mut SbBlock) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Number of snapshots in the block.
///
/// # Safety
/// `b` must be a live block handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sb_block_snapshots(b: *const SbBlock) -> usize {
    b.as_ref().map_or(0, |b| b.inner.k())
}

/// Copies the desired source's transmitted symbols into `out` (length K).
///
/// # Safety
/// `b` must be a live block handle; `out` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn sb_block_desired_symbols(
    b: *const SbBlock,
    out: *mut SbComplex,
    len: usize,
) -> SbStatus {
    guard(|| {
        let b = reference(b, "block")?;
        let s = ComplexVector::from_vec(b.inner.desired_symbols(b.desired_index));
        write_out(&s, out, len, "out")
    })
}

/// Wiener filter from the scenario's exact statistics (length `n_h * n_v`).
///
/// # Safety
/// `s` must be a live scenario handle; `w` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn sb_mmse_analytic(
    s: *const SbScenario,
    w: *mut SbComplex,
    len: usize,
) -> SbStatus {
    guard(|| {
        let s = reference(s, "scenario")?;
        let bf = mmse_direct(&analytic_full_stats(&s.inner)).map_err(lib)?;
        write_out(&bf.w, w, len, "w")
    })
}

/// Wiener filter from the block's sample statistics (length `n_h * n_v`).
///
/// # Safety
/// `b` must be a live block handle; `w` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn sb_mmse_sample(
    b: *const SbBlock,
    w: *mut SbComplex,
    len: usize,
) -> SbStatus {
    guard(|| {
        let b = reference(b, "block")?;
        let st = sample_full_stats(&b.inner, b.desired_index).map_err(lib)?;
        let bf = mmse_direct(&st).map_err(lib)?;
        write_out(&bf.w, w, len, "w")
    })
}

/// Regularized sub-array filters from the block's sample statistics.
///
/// # Safety
/// `b` must be a live block handle; `w_h` and `w_v` must hold `n_h` and `n_v`
/// elements.
#[no_mangle]
pub unsafe extern "C" fn sb_kmmse(
    b: *const SbBlock,
    rho: f64,
    w_h: *mut SbComplex,
    n_h: usize,
    w_v: *mut SbComplex,
    n_v: usize,
) -> SbStatus {
    guard(|| {
        let b = reference(b, "block")?;
        let sh = sample_subarray_stats(&b.inner, Axis::Horizontal, b.desired_index).map_err(lib)?;
        let sv = sample_subarray_stats(&b.inner, Axis::Vertical, b.desired_index).map_err(lib)?;
        let f = kmmse(&sh, &sv, rho).map_err(lib)?;
        write_out(&f.w_h, w_h, n_h, "w_h")?;
        write_out(&f.w_v, w_v, n_v, "w_v")
    })
}

/// Alternating sub-array MMSE on the block's sample statistics from a
/// seeded random start. `iterations` and `converged` may be NULL.
///
/// # Safety
/// `b` must be a live block handle; `w_h` and `w_v` must hold `n_h` and `n_v`
/// elements; non-NULL `iterations` and `converged` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_tmmse(
    b: *const SbBlock,
    seed: u64,
    eps: f64,
    max_iter: usize,
    w_h: *mut SbComplex,
    n_h: usize,
    w_v: *mut SbComplex,
    n_v: usize,
    iterations: *mut usize,
    converged: *mut bool,
) -> SbStatus {
    guard(|| {
        let b = reference(b, "block")?;
        let provider = StatsProvider::Sample {
            block: &b.inner,
            desired_index: b.desired_index,
        };
        let rep = tmmse_seeded(provider, seed, eps, max_iter).map_err(lib)?;
        write_out(&rep.filter.w_h, w_h, n_h, "w_h")?;
        write_out(&rep.filter.w_v, w_v, n_v, "w_v")?;
        if let Some(it) = iterations.as_mut() {
            *it = rep.iterations;
        }
        if let Some(c) = converged.as_mut() {
            *c = rep.converged;
        }
        Ok(())
    })
}

/// Beamformer output `y[k] = w^H x[k]` for every snapshot. Pass the full
/// filter in `w` (length `n_h * n_v`) or a separable one as `w_h` then `w_v`
/// concatenated (length `n_h + n_v`) with `separable` set.
///
/// # Safety
/// `b` must be a live block handle; `w` must hold `w_len` elements and `y`
/// must hold `y_len` elements.
#[no_mangle]
pub unsafe extern "C" fn sb_apply(
    b: *const SbBlock,
    w: *const SbComplex,
    w_len: usize,
    separable: bool,
    y: *mut SbComplex,
    y_len: usize,
) -> SbStatus {
    guard(|| {
        let b = reference(b, "block")?;
        if w.is_null() {
            return Err(null("w"));
        }
        let g = b.inner.geometry;
        let w: Vec<Complex64> = slice::from_raw_parts(w, w_len)
            .iter()
            .map(|&z| z.into())
            .collect();
        let out = if separable {
            check_len("w", w_len, g.n_h() + g.n_v())?;
            let f = SeparableBeamformer {
                w_h: ComplexVector::from_column_slice(&w[..g.n_h()]),
                w_v: ComplexVector::from_column_slice(&w[g.n_h()..]),
            };
            apply(&f, &b.inner)
        } else {
            check_len("w", w_len, g.n())?;
            apply(
                &Beamformer {
                    w: ComplexVector::from_vec(w),
                },
                &b.inner,
            )
        }
        .map_err(lib)?;
        write_out(&out, y, y_len, "y")
    })
}

/// Modelled real flops of one design. `method` is an [`SbFlopsMethod`]
/// value; `iterations` is used by TMMSE only.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_flops(
    method: u32,
    n_h: usize,
    n_v: usize,
    r: usize,
    k: usize,
    iterations: usize,
    out: *mut u64,
) -> SbStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let method = match method {
            m if m == SbFlopsMethod::MmseSample as u32 => FlopsMethod::MmseSample,
            m if m == SbFlopsMethod::MmseLemma as u32 => FlopsMethod::MmseLemma,
            m if m == SbFlopsMethod::Tmmse as u32 => FlopsMethod::Tmmse { iterations },
            m if m == SbFlopsMethod::Kmmse as u32 => FlopsMethod::Kmmse,
            m => {
                return Err((
                    SbStatus::InvalidArgument,
                    format!("unknown flops method {m}"),
                ))
            }
        };
        let geometry = UraGeometry::new(n_h, n_v).map_err(lib)?;
        *out = flops(&FlopsModel {
            method,
            geometry,
            r,
            k,
        })
        .map_err(lib)?;
        Ok(())
    })
}
