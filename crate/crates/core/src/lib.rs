//! Separable (Kronecker-structured) MMSE beamforming for uniform rectangular
//! arrays.
//!
//! The crate covers the tensor algebra kernels, the URA array and signal
//! models, three filter designs (full-array Wiener MMSE, the alternating
//! Tensor MMSE and the closed-form regularized Kronecker MMSE), evaluation
//! metrics and a seeded Monte Carlo experiment harness driven by the
//! `sepbeam` binary.
//!
//! ```
//! use rand::SeedableRng;
//! use sepbeam::{array_model::*, beamformers::*, signal_model::*};
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
//! let g = UraGeometry::new(8, 8).unwrap();
//! let ms = build_manifolds(&g, &draw_directions(4, &mut rng)).unwrap();
//! let sc = Scenario::with_snr_db(ms, 0, 10.0).unwrap();
//! let blk = synthesize(&sc, 1000, &mut rng).unwrap();
//!
//! let h = sample_subarray_stats(&blk, Axis::Horizontal, 0).unwrap();
//! let v = sample_subarray_stats(&blk, Axis::Vertical, 0).unwrap();
//! let w = kmmse(&h, &v, DEFAULT_RHO).unwrap();
//! let y = kmmse_output(&w, &blk, 1.0).unwrap();
//! assert_eq!(y.len(), 1000);
//! ```

// `!(x > t)` checks are kept so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_model;
pub mod beamformers;
pub mod error;
pub mod harness;
pub mod kron_algebra;
pub mod metrics;
pub mod signal_model;

pub use error::{Error, Result};
pub use kron_algebra::{ComplexMatrix, ComplexVector};
