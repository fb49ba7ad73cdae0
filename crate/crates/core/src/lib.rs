//! Calibration and cross-validation of logistic prediction rules when
//! predictors have missing values.
//!
//! The crate combines chained-equations multiple imputation with L-fold
//! cross-validation in three ways (prediction pooling, coefficient pooling,
//! and coefficient pooling over averaged imputations), and measures accuracy
//! (Brier score) and imputation-induced spread (R) of the resulting
//! predictions.

pub mod cv;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod glm;
pub mod impute;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod sim;

pub use cv::{approach1, approach2, approach3, Approach, FoldAssignment, PredictionMatrix, SummaryKind};
pub use dataset::{Column, ColumnKind, Dataset, ImputedDataset};
pub use error::{Error, Location, Result};
pub use glm::{CoefficientVector, DesignMatrix, FitDiagnostics};
pub use impute::{ContinuousMethod, ImputationConfig};
pub use metrics::{MetricsReport, ReplicateMatrix, Stratum};
pub use rng::StreamSeed;
pub use sim::SimulationScenario;
