//! Estimation of the hyperuniformity exponent of stationary point processes
//! from a single observed pattern, by multi-scale, multi-taper truncated
//! wavelet transforms, with Monte Carlo confidence intervals and reference
//! simulators.
//!
//! Geometry, tapers, transforms and the estimator are generic over the
//! coordinate type ([`Real`], `f32` or `f64`); covariance assembly and
//! inference always run in `f64`. The aliases below fix the coordinate type
//! to `f64`.

pub mod covariance;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod inference;
pub mod numerics;
pub mod scalar;
pub mod simulate;
pub mod tapers;
pub mod transforms;

pub use covariance::{sigma_asymptotic, sigma_entry_d2, sigma_transient, CovBlockMatrix, CovCache};
pub use error::{Error, Result};
pub use estimator::{
    calibrate_jmax, calibrate_jmax_poisson, default_scale_plan, estimate_alpha, estimate_pattern, least_squares_weights,
    pooled_estimate, select_jmin, EstimateReport, ScalePlan, ScalePolicy,
};
pub use inference::{confidence_interval, quantile, sample_z, CiOptions, ConfidenceInterval, ZSample};
pub use scalar::Real;
pub use simulate::{SimSpec, SimVariant};
pub use tapers::{TaperConfig, TaperIndex};
pub use transforms::CurveC;

pub type PointPattern = geometry::PointPattern<f64>;
pub type Window = geometry::Window<f64>;
pub type TaperSet = tapers::TaperSet<f64>;
pub type TransformGrid = transforms::TransformGrid<f64>;
pub type NormalizationRecord = geometry::NormalizationRecord<f64>;
