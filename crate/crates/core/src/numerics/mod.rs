//! Numerical building blocks shared by the rest of the crate.

pub mod gaussian;
pub mod quadrature;
pub mod rng;
pub mod signed_log;
pub mod special;

pub use gaussian::{mvn_sample, psd_factor, PsdFactor};
pub use quadrature::{quad_radial, quad_radial_scaled};
pub use signed_log::{LogSumAccumulator, SignedLogValue};
pub use special::{angular_moment, hermite_coeffs, hermite_functions, log_gamma, trigamma};
