//! Single-pass regression from sufficient statistics.
//!
//! A dataset is streamed once into a fixed-size accumulator (`n`, `Σy²`, `Σxy`,
//! `Σxxᵀ` and variants). Linear, weighted, Box-Cox and ridge models, and any
//! number of grid variants of them, are then fitted from the accumulator alone.
//! Accumulators over disjoint shards merge by addition and un-merge by
//! subtraction.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, with `…32` variants for `f32`.
//! Ingestion, artifacts, the pipeline and the oracle work in `f64`.
//!
//! ```
//! use ssreg::{fit_linear, LinRegSS};
//!
//! let mut ss = LinRegSS::new(2);
//! ss.update_batch(&[1.0, 0.0, 1.0, 1.0, 1.0, 2.0], &[1.0, 3.0, 4.0]).unwrap();
//! let fit = fit_linear(&ss).unwrap();
//! assert!((fit.beta[1] - 1.5).abs() < 1e-12);
//! ```

pub mod error;
pub mod estimators;
pub mod ingest;
pub mod linalg;
pub mod oracle;
pub mod pipeline;
pub mod scalar;
pub mod suffstats;

pub use error::{Error, ErrorCategory, Result};
pub use estimators::{
    fit_boxcox_all, fit_linear, fit_ridge, fit_weighted, inverse_boxcox, loglik_linear, mse, predict, ridge_trace,
    select_boxcox, validate_ridge_grid, BoxCoxFit, FitResult, ModelKind, RidgeTrace, DEFAULT_TRACE_TAU,
    DEGENERATE_REL_TOL,
};
pub use ingest::{DataBatch, DataFormat, Dataset, DatasetSchema, SchemaSpec};
pub use linalg::{
    cholesky_solve, pseudo_inverse, solve_normal, sym_eigen, Cholesky, EigenDecomposition, NormalSolver, SymMatrix,
};
pub use pipeline::{accumulate, accumulate_shards, predict_dataset, AnyStats, ScanMetrics, StatsSpec};
pub use scalar::Scalar;
pub use suffstats::{
    boxcox_transform, validate_power_grid, BoxCoxStats, LinRegStats, RidgeStats, SuffStats, WeightedStats,
    DEFAULT_BATCH_SIZE,
};

pub type SymMatrix64 = SymMatrix<f64>;
pub type LinRegSS = LinRegStats<f64>;
pub type WeightedSS = WeightedStats<f64>;
pub type BoxCoxSS = BoxCoxStats<f64>;
pub type RidgeSS = RidgeStats<f64>;
pub type FitResult64 = FitResult<f64>;
pub type BoxCoxFit64 = BoxCoxFit<f64>;
pub type RidgeTrace64 = RidgeTrace<f64>;

pub type SymMatrix32 = SymMatrix<f32>;
pub type LinRegSS32 = LinRegStats<f32>;
pub type WeightedSS32 = WeightedStats<f32>;
pub type BoxCoxSS32 = BoxCoxStats<f32>;
pub type RidgeSS32 = RidgeStats<f32>;
pub type FitResult32 = FitResult<f32>;
