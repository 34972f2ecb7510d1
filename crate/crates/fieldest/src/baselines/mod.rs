//! Reference interpolators the hybrid estimator is compared against:
//! inverse distance weighting, ordinary kriging over a fitted variogram,
//! and Gaussian process regression.
//!
//! Each baseline is deterministic given its inputs and config, and each is
//! a pure function after fitting, safe to evaluate per query in parallel.

pub mod gp;
pub mod idw;
pub mod kriging;
pub mod variogram;

pub use gp::{gp_predict, GpConfig, GpKernel, HyperparameterFit};
pub use idw::{idw_predict, IdwConfig};
pub use kriging::kriging_predict;
pub use variogram::{fit_variogram, VariogramKind, VariogramModel};
