//! Estimation of the arc-length divergence of the optimal ROC curve.
//!
//! The arc length of the ROC curve of a likelihood-ratio score is an
//! f-divergence between the positive and negative data distributions
//! (generator `g(s) = sqrt(s^2 + 1) - sqrt(2)`). This crate estimates that
//! arc length from two samples via a constrained convex kernel objective
//! whose minimizer is the arctangent likelihood ratio
//! `v*(x) = atan(p+(x)/p-(x))`, derives total-variation bounds from it, and
//! runs a two-step weighted refit that approximately lower-bounds the
//! maximal AUC. Classical pairwise AUC maximization and logistic regression
//! are included as baselines.
//!
//! Module map:
//! - [`data`]: sample containers, CSV ingestion, Gaussian generators, splits
//! - [`kernel`]: Gaussian kernel, Gram matrices, score models, bandwidth
//! - [`estimator`]: the constrained convex fit, cross-validation, log-ratio variant
//! - [`rocgeom`]: ECDFs, empirical ROC curves, WMW AUC, mixture surfaces
//! - [`divergence`]: plug-in arc-length estimates, quadrature oracle, TV bounds
//! - [`twostep`]: the two-step approximate maximal-AUC procedure
//! - [`baselines`]: pairwise-surrogate AUC maximization and logistic regression

pub mod baselines;
pub mod data;
pub mod divergence;
pub mod estimator;
pub mod kernel;
pub mod rocgeom;
pub mod twostep;

pub use baselines::{BenchmarkSpec, BenchmarkTable, LinearModel, Method};
pub use data::{GaussianSpec, SampleSet};
pub use divergence::{DivergenceReport, GaussianDivergences, TvBounds};
pub use estimator::{BandwidthSpec, FitDiagnostics, FitWeights, LambdaSpec, SolverConfig};
pub use kernel::{KernelParams, KernelScoreModel};
pub use rocgeom::{Ecdf, RocCurve};
pub use twostep::TwoStepModel;
