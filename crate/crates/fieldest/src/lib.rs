//! Spatial field estimation from scattered observations.
//!
//! The centerpiece is a hybrid interpolator: each observation is described by
//! the coordinates and values of its m nearest neighbors, those covariate
//! rows are compressed to a low-dimensional embedding that preserves the
//! neighborhood structure, and a small Takagi–Sugeno fuzzy rule system is
//! trained on the embedding to predict the field. Classical baselines
//! (inverse-distance weighting, ordinary kriging, Gaussian-process
//! regression) and cross-validation tooling ship alongside it so the hybrid
//! can be compared honestly on the same data.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the crate root
//! re-exports `f64`-concrete aliases for the common case.

pub mod anfis;
pub mod baselines;
pub mod config;
pub mod crossval;
pub mod embedding;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod observations;
pub mod pipeline;
pub mod scalar;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;

/// `f64`-concrete aliases for the main types, so typical applications can
/// skip the type parameter entirely.
pub mod f64_types {
    pub type Observation = crate::observations::Observation<f64>;
    pub type ObservationSet = crate::observations::ObservationSet<f64>;
    pub type NeighborGraph = crate::observations::NeighborGraph<f64>;
    pub type CovariateMatrix = crate::observations::CovariateMatrix<f64>;
    pub type FuzzyGraph = crate::embedding::FuzzyGraph<f64>;
    pub type EmbeddingConfig = crate::embedding::EmbeddingConfig<f64>;
    pub type SdbModel = crate::embedding::SdbModel<f64>;
    pub type RuleBase = crate::anfis::RuleBase<f64>;
    pub type TrainConfig = crate::anfis::TrainConfig<f64>;
    pub type FitReport = crate::anfis::FitReport<f64>;
    pub type MetricsReport = crate::metrics::MetricsReport<f64>;
    pub type CvResult = crate::crossval::CvResult<f64>;
    pub type ComparisonTable = crate::crossval::ComparisonTable<f64>;
    pub type IdwConfig = crate::baselines::IdwConfig<f64>;
    pub type GpConfig = crate::baselines::GpConfig<f64>;
    pub type VariogramModel = crate::baselines::VariogramModel<f64>;
    pub type GridSpec = crate::grid::GridSpec<f64>;
    pub type FieldGrid = crate::grid::FieldGrid<f64>;
    pub type PipelineConfig = crate::pipeline::PipelineConfig<f64>;
    pub type HybridModelArtifact = crate::pipeline::HybridModelArtifact<f64>;
}

pub use f64_types::{
    FieldGrid, GridSpec, HybridModelArtifact, MetricsReport, ObservationSet, PipelineConfig,
};
