//! Per-trial simulation for every experiment kind.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, trial, purpose, point)`, so a trial's record does not depend on
//! which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Method, StatsMode};
use super::records::{MethodOutcome, TrialRecord};
use crate::array_model::{build_manifolds, DirectionCosines, UraGeometry};
use crate::beamformers::{
    apply, kmmse, kmmse_output, mmse_direct, mmse_lemma, tmmse, Beamformer, SeparableBeamformer,
    StatsProvider, TmmseReport,
};
use crate::error::{Error, Result};
use crate::kron_algebra::ComplexMatrix;
use crate::metrics::{
    array_factor, ber, condition_sweep_cov, cosine_grid, flops, qpsk_bits, ArrayFactorGrid,
    FlopsMethod, FlopsModel,
};
use crate::signal_model::{
    analytic_full_stats, analytic_subarray_stats, basis_vector, draw_directions, qpsk_symbols,
    receive, sample_full_stats, sample_subarray_stats, Axis, Scenario, SecondOrderStats,
    SnapshotBlock,
};

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Directions = 0,
    Symbols = 1,
    Noise = 2,
    TmmseInit = 3,
}

/// Independent stream for `(trial, purpose, point)` under `seed`.
pub fn stream(seed: u64, trial: usize, purpose: Purpose, point: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 32) | ((purpose as u64) << 24) | point as u64);
    rng
}

/// Numerical design failures that are recorded rather than propagated.
fn is_design_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::Singular | Error::RankDeficient | Error::DegenerateOutput | Error::NotHermitian(_)
    )
}

/// Source layout and transmitted symbols of a trial; fixed across SNR points.
pub fn trial_sources(
    cfg: &ExperimentConfig,
    trial: usize,
) -> Result<(Vec<DirectionCosines>, ComplexMatrix)> {
    let dirs = draw_directions(cfg.r, &mut stream(cfg.seed, trial, Purpose::Directions, 0));
    let s = qpsk_symbols(
        cfg.r,
        cfg.k,
        1.0,
        &mut stream(cfg.seed, trial, Purpose::Symbols, 0),
    );
    Ok((dirs, s))
}

/// Scenario (desired source 0, unit power) and received block for a trial.
pub fn trial_block(
    cfg: &ExperimentConfig,
    g: &UraGeometry,
    dirs: &[DirectionCosines],
    symbols: ComplexMatrix,
    trial: usize,
    point: usize,
    snr_db: f64,
) -> Result<(Scenario, SnapshotBlock)> {
    let sc = Scenario::with_snr_db(build_manifolds(g, dirs)?, 0, snr_db)?;
    let blk = receive(
        &sc,
        symbols,
        &mut stream(cfg.seed, trial, Purpose::Noise, point),
    )?;
    Ok((sc, blk))
}

fn full_stats(
    cfg: &ExperimentConfig,
    sc: &Scenario,
    blk: &SnapshotBlock,
) -> Result<SecondOrderStats> {
    match cfg.stats_mode {
        StatsMode::Analytic => Ok(analytic_full_stats(sc)),
        StatsMode::Sample => sample_full_stats(blk, sc.desired_index),
    }
}

fn sub_stats(
    cfg: &ExperimentConfig,
    sc: &Scenario,
    blk: &SnapshotBlock,
    axis: Axis,
) -> Result<SecondOrderStats> {
    match cfg.stats_mode {
        StatsMode::Analytic => Ok(analytic_subarray_stats(sc, axis)),
        StatsMode::Sample => sample_subarray_stats(blk, axis, sc.desired_index),
    }
}

/// TMMSE from a random start drawn on the `(trial, point)` stream.
pub fn design_tmmse(
    cfg: &ExperimentConfig,
    sc: &Scenario,
    blk: &SnapshotBlock,
    trial: usize,
    point: usize,
) -> Result<TmmseReport> {
    let provider = match cfg.stats_mode {
        StatsMode::Analytic => StatsProvider::Analytic(sc),
        StatsMode::Sample => StatsProvider::Sample {
            block: blk,
            desired_index: sc.desired_index,
        },
    };
    let mut rng = stream(cfg.seed, trial, Purpose::TmmseInit, point);
    let init = SeparableBeamformer::random_unit(&sc.geometry(), &mut rng);
    tmmse(provider, init, cfg.eps, cfg.max_iter)
}

pub fn design_mmse(
    cfg: &ExperimentConfig,
    sc: &Scenario,
    blk: &SnapshotBlock,
) -> Result<Beamformer> {
    mmse_direct(&full_stats(cfg, sc, blk)?)
}

pub fn design_kmmse(
    cfg: &ExperimentConfig,
    sc: &Scenario,
    blk: &SnapshotBlock,
    rho: f64,
) -> Result<SeparableBeamformer> {
    kmmse(
        &sub_stats(cfg, sc, blk, Axis::Horizontal)?,
        &sub_stats(cfg, sc, blk, Axis::Vertical)?,
        rho,
    )
}

fn outcome(
    method: Method,
    rho: Option<f64>,
    result: Result<(Vec<num_complex::Complex64>, Option<&TmmseReport>)>,
    reference: &[bool],
) -> Result<MethodOutcome> {
    let mut out = MethodOutcome {
        method: method.name().to_string(),
        rho,
        ber: None,
        iterations: None,
        converged: None,
    };
    match result {
        Ok((y, report)) => {
            out.ber = Some(ber(&qpsk_bits(&y), reference)?);
            if let Some(r) = report {
                out.iterations = Some(r.iterations);
                out.converged = Some(r.converged);
            }
            Ok(out)
        }
        Err(e) if is_design_failure(&e) => Ok(out),
        Err(e) => Err(e),
    }
}

/// One BER trial at one SNR point. KMMSE is evaluated at every `rhos` entry.
pub fn ber_trial(
    cfg: &ExperimentConfig,
    g: &UraGeometry,
    methods: &[Method],
    rhos: &[f64],
    trial: usize,
    point: usize,
    snr_db: f64,
) -> Result<TrialRecord> {
    let (dirs, s) = trial_sources(cfg, trial)?;
    let (sc, blk) = trial_block(cfg, g, &dirs, s, trial, point, snr_db)?;
    let desired = blk.desired_symbols(sc.desired_index);
    let reference = qpsk_bits(&desired);
    let sigma_s = sc.sigma_s2.sqrt();
    let to_vec = |v: crate::ComplexVector| v.iter().copied().collect::<Vec<_>>();

    let mut outcomes = Vec::new();
    for &m in methods {
        match m {
            Method::Mmse => {
                let r = design_mmse(cfg, &sc, &blk).and_then(|w| apply(&w, &blk));
                outcomes.push(outcome(m, None, r.map(|y| (to_vec(y), None)), &reference)?);
            }
            Method::MmseLemma => {
                let r = mmse_lemma(&sc).and_then(|w| apply(&w, &blk));
                outcomes.push(outcome(m, None, r.map(|y| (to_vec(y), None)), &reference)?);
            }
            Method::Tmmse => match design_tmmse(cfg, &sc, &blk, trial, point) {
                Ok(rep) => {
                    let r = apply(&rep.filter, &blk).map(|y| (to_vec(y), Some(&rep)));
                    outcomes.push(outcome(m, None, r, &reference)?);
                }
                Err(e) => outcomes.push(outcome(m, None, Err(e), &reference)?),
            },
            Method::Kmmse => {
                let sh = sub_stats(cfg, &sc, &blk, Axis::Horizontal)?;
                let sv = sub_stats(cfg, &sc, &blk, Axis::Vertical)?;
                for &rho in rhos {
                    let r = kmmse(&sh, &sv, rho).and_then(|w| kmmse_output(&w, &blk, sigma_s));
                    outcomes.push(outcome(
                        m,
                        Some(rho),
                        r.map(|y| (to_vec(y), None)),
                        &reference,
                    )?);
                }
            }
        }
    }
    Ok(TrialRecord {
        trial,
        snr_db,
        directions: dirs,
        outcomes,
    })
}

/// Condition numbers of `R_m + ρI` for both axes: `(axis, ρ, cond)`.
pub fn cond_trial(
    cfg: &ExperimentConfig,
    g: &UraGeometry,
    trial: usize,
    point: usize,
    snr_db: f64,
) -> Result<Vec<(Axis, f64, f64)>> {
    let (dirs, s) = trial_sources(cfg, trial)?;
    let (sc, blk) = trial_block(cfg, g, &dirs, s, trial, point, snr_db)?;
    let mut out = Vec::new();
    for axis in [Axis::Horizontal, Axis::Vertical] {
        let st = sub_stats(cfg, &sc, &blk, axis)?;
        for (rho, cond) in condition_sweep_cov(&st.cov, &cfg.rho_values())? {
            out.push((axis, rho, cond));
        }
    }
    Ok(out)
}

/// `(n_h, n_v, method label, flops)` rows over the configured sizes.
pub fn flops_rows(cfg: &ExperimentConfig) -> Result<Vec<(usize, usize, &'static str, u64)>> {
    let mut rows = Vec::new();
    for &n in &cfg.flops.sizes {
        let geometry = UraGeometry::new(n, n)?;
        for &m in &cfg.methods {
            let method = match m {
                Method::Mmse => FlopsMethod::MmseSample,
                Method::MmseLemma => FlopsMethod::MmseLemma,
                Method::Tmmse => FlopsMethod::Tmmse {
                    iterations: cfg.flops.tmmse_iterations,
                },
                Method::Kmmse => FlopsMethod::Kmmse,
            };
            let count = flops(&FlopsModel {
                method,
                geometry,
                r: cfg.r,
                k: cfg.k,
            })?;
            rows.push((n, n, m.name(), count));
        }
    }
    Ok(rows)
}

/// Filters designed for the array-factor experiment.
#[derive(Debug, Clone)]
pub struct AfDesign {
    pub scenario: Scenario,
    pub mmse: Beamformer,
    pub tmmse: TmmseReport,
    pub kmmse: SeparableBeamformer,
}

/// Designs MMSE, TMMSE and KMMSE for the configured layout (trial 0 streams).
pub fn af_design(cfg: &ExperimentConfig) -> Result<AfDesign> {
    let g = cfg.geometry()?;
    let dirs = match cfg.af_directions() {
        Some(d) => d?,
        None => trial_sources(cfg, 0)?.0,
    };
    let s = qpsk_symbols(
        cfg.r,
        cfg.k,
        1.0,
        &mut stream(cfg.seed, 0, Purpose::Symbols, 0),
    );
    let (sc, blk) = trial_block(cfg, &g, &dirs, s, 0, 0, cfg.array_factor.snr_db)?;
    Ok(AfDesign {
        mmse: design_mmse(cfg, &sc, &blk)?,
        tmmse: design_tmmse(cfg, &sc, &blk, 0, 0)?,
        kmmse: design_kmmse(cfg, &sc, &blk, cfg.rho_primary())?,
        scenario: sc,
    })
}

/// The five surfaces: full filters, then the KMMSE sub-array factors
/// (constant along the other axis).
pub fn af_maps(
    cfg: &ExperimentConfig,
    d: &AfDesign,
) -> Result<Vec<(&'static str, ArrayFactorGrid)>> {
    let g = d.scenario.geometry();
    let grid = cosine_grid(cfg.array_factor.grid_points);
    let h_only = SeparableBeamformer {
        w_h: d.kmmse.w_h.clone(),
        w_v: basis_vector(g.n_v(), 0),
    };
    let v_only = SeparableBeamformer {
        w_h: basis_vector(g.n_h(), 0),
        w_v: d.kmmse.w_v.clone(),
    };
    Ok(vec![
        ("mmse", array_factor((&d.mmse).into(), &g, &grid, &grid)?),
        (
            "tmmse",
            array_factor((&d.tmmse.filter).into(), &g, &grid, &grid)?,
        ),
        ("kmmse", array_factor((&d.kmmse).into(), &g, &grid, &grid)?),
        ("kmmse_h", array_factor((&h_only).into(), &g, &grid, &grid)?),
        ("kmmse_v", array_factor((&v_only).into(), &g, &grid, &grid)?),
    ])
}
