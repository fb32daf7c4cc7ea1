//! Reference point processes with known or conjectured exponent: Poisson
//! (α = 0), cloaked perturbed lattices (prescribed α), the matched process
//! (conjectured α = 2) and random sequential adsorption (α = 0).
//!
//! Simulators run in `f64` and convert on output. They are sequential per
//! pattern; batch code parallelizes across replicates with
//! [`child_seed`](crate::numerics::rng::child_seed).

mod grid;
mod lattice;
mod matching;
mod rsa;
mod stable;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OutsidePolicy, PointPattern, Window};
use crate::numerics::rng::{stream_rng, StreamRng};
use crate::scalar::Real;

pub use lattice::cloaked_lattice;
pub use matching::matched_process;
pub use rsa::rsa;
pub use stable::{one_sided_stable, StableSampler};

/// A simulator and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SimVariant {
    Poisson { lambda: f64 },
    CloakedLattice { alpha: f64, sigma: f64 },
    Matched { lambda_p: f64 },
    Rsa { lambda_prop: f64, r: f64 },
}

/// Everything needed to reproduce a simulated pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(flatten)]
    pub variant: SimVariant,
    pub half_width: f64,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(variant: SimVariant, half_width: f64, seed: u64) -> Result<Self> {
        let spec = Self { variant, half_width, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain("simulate", format!("{name} must be positive, got {v}")))
            }
        };
        positive("half-width", self.half_width)?;
        match self.variant {
            SimVariant::Poisson { lambda } => positive("lambda", lambda),
            SimVariant::CloakedLattice { alpha, sigma } => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(Error::domain("simulate", format!("cloaked lattice alpha must lie in (0, 2], got {alpha}")));
                }
                positive("sigma", sigma)
            }
            SimVariant::Matched { lambda_p } => {
                if lambda_p > 1.0 && lambda_p.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain("simulate", format!("matched process needs lambda_p > 1, got {lambda_p}")))
                }
            }
            SimVariant::Rsa { lambda_prop, r } => {
                positive("lambda_prop", lambda_prop)?;
                positive("r", r)
            }
        }
    }

    /// Planar pattern for this spec.
    pub fn simulate<T: Real>(&self) -> Result<PointPattern<T>> {
        self.validate()?;
        let (r, s) = (self.half_width, self.seed);
        match self.variant {
            SimVariant::Poisson { lambda } => poisson(2, lambda, r, s),
            SimVariant::CloakedLattice { alpha, sigma } => cloaked_lattice(alpha, sigma, r, s),
            SimVariant::Matched { lambda_p } => matched_process(lambda_p, r, s),
            SimVariant::Rsa { lambda_prop, r: excl } => rsa(lambda_prop, excl, r, s),
        }
    }
}

pub(crate) fn poisson_count(rng: &mut StreamRng, mean: f64) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::domain("poisson", e.to_string()))?;
    Ok(dist.sample(rng) as usize)
}

/// `n` uniform points in `[-h, h)^dim`, flattened.
pub(crate) fn uniform_points(rng: &mut StreamRng, dim: usize, n: usize, h: f64) -> Vec<f64> {
    (0..n * dim).map(|_| rng.gen_range(-h..h)).collect()
}

pub(crate) fn to_pattern<T: Real>(dim: usize, coords: Vec<f64>, half_width: f64) -> Result<PointPattern<T>> {
    let h = T::lit(half_width);
    // conversion to a narrower type may round a coordinate onto the border
    let coords = coords.into_iter().map(|c| T::lit(c).max(-h).min(h)).collect();
    PointPattern::new(dim, coords, Window::cube(h)?, OutsidePolicy::Drop)
}

/// Homogeneous Poisson process of intensity `lambda` in `[-R, R]^dim`.
pub fn poisson<T: Real>(dim: usize, lambda: f64, half_width: f64, seed: u64) -> Result<PointPattern<T>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain("poisson", format!("intensity must be positive, got {lambda}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) || dim == 0 {
        return Err(Error::domain("poisson", format!("bad window half-width {half_width} or dimension {dim}")));
    }
    let mut rng = stream_rng(seed, 0);
    let n = poisson_count(&mut rng, lambda * (2.0 * half_width).powi(dim as i32))?;
    to_pattern(dim, uniform_points(&mut rng, dim, n, half_width), half_width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_counts() {
        let mean = 50f64 * 50.0;
        let counts: Vec<f64> = (0..200).map(|s| poisson::<f64>(2, 1.0, 25.0, s).unwrap().len() as f64).collect();
        let avg = counts.iter().sum::<f64>() / 200.0;
        // standard error of the mean is √(mean/200)
        assert!((avg - mean).abs() < 4.0 * (mean / 200.0).sqrt(), "{avg}");
        assert!(counts.iter().all(|c| (c - mean).abs() < 6.0 * mean.sqrt()));
    }

    #[test]
    fn poisson_is_deterministic() {
        let a = poisson::<f64>(2, 1.3, 10.0, 9).unwrap();
        let b = poisson::<f64>(2, 1.3, 10.0, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, poisson::<f64>(2, 1.3, 10.0, 10).unwrap());
        assert!(poisson::<f64>(2, 0.0, 10.0, 9).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let spec = SimSpec::new(SimVariant::CloakedLattice { alpha: 1.0, sigma: 0.25 }, 40.0, 3).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"variant\":\"cloaked_lattice\""));
        assert_eq!(serde_json::from_str::<SimSpec>(&json).unwrap(), spec);
        assert!(SimSpec::new(SimVariant::CloakedLattice { alpha: 2.5, sigma: 0.25 }, 40.0, 3).is_err());
        assert!(SimSpec::new(SimVariant::Matched { lambda_p: 1.0 }, 40.0, 3).is_err());
    }
}
