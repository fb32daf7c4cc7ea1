//! Point patterns observed in centered cubic windows, intensity estimation
//! and the rescaling to unit intensity that the rest of the pipeline assumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Centered cube `[-R, R]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Window<T: Real> {
    half_width: T,
}

impl<T: Real> Window<T> {
    pub fn cube(half_width: T) -> Result<Self> {
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidInput(format!(
                "window half-width must be positive and finite, got {half_width}"
            )));
        }
        Ok(Self { half_width })
    }

    /// Ball `B(0, radius)`, replaced by its bounding cube.
    pub fn ball(radius: T) -> Result<Self> {
        log::warn!("ball window of radius {radius} converted to its bounding cube");
        Self::cube(radius)
    }

    #[inline]
    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn volume(&self, dim: usize) -> T {
        (T::lit(2.0) * self.half_width).powi(dim as i32)
    }

    /// Closed membership: `|x|_inf <= R`.
    #[inline]
    pub fn contains(&self, x: &[T]) -> bool {
        x.iter().all(|c| c.abs() <= self.half_width)
    }
}

/// What to do with input points that fall outside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutsidePolicy {
    #[default]
    Reject,
    Drop,
}

/// A finite set of `d`-dimensional points inside its observation window.
///
/// Coordinates are stored row-major in one flat buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PointPattern<T: Real> {
    dim: usize,
    coords: Vec<T>,
    window: Window<T>,
}

impl<T: Real> PointPattern<T> {
    pub fn new(dim: usize, coords: Vec<T>, window: Window<T>, policy: OutsidePolicy) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coordinate in point {}", bad / dim)));
        }
        let coords = match policy {
            OutsidePolicy::Reject => {
                if let Some((k, _)) = coords.chunks_exact(dim).enumerate().find(|(_, x)| !window.contains(x)) {
                    return Err(Error::InvalidInput(format!(
                        "point {k} lies outside the window of half-width {}",
                        window.half_width
                    )));
                }
                coords
            }
            OutsidePolicy::Drop => coords
                .chunks_exact(dim)
                .filter(|x| window.contains(x))
                .flatten()
                .copied()
                .collect(),
        };
        Ok(Self { dim, coords, window })
    }

    pub fn from_points(dim: usize, points: &[Vec<T>], window: Window<T>, policy: OutsidePolicy) -> Result<Self> {
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("points have inconsistent dimensions".into()));
        }
        Self::new(dim, points.concat(), window, policy)
    }

    pub fn empty(dim: usize, window: Window<T>) -> Self {
        Self { dim, coords: Vec::new(), window }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn window(&self) -> Window<T> {
        self.window
    }

    #[inline]
    pub fn half_width(&self) -> T {
        self.window.half_width
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[T] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, T> {
        self.coords.chunks_exact(self.dim)
    }

    /// Union with another pattern observed in the same window.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim || self.window != other.window {
            return Err(Error::InvalidInput("patterns differ in dimension or window".into()));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(Self { dim: self.dim, coords, window: self.window })
    }

    /// Same points with every coordinate (and the window) multiplied by `factor`.
    pub fn rescaled(&self, factor: T) -> Result<Self> {
        let window = Window::cube(self.window.half_width * factor)?;
        let coords = self.coords.iter().map(|&c| c * factor).collect();
        Ok(Self { dim: self.dim, coords, window })
    }
}

/// Record of the unit-intensity rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormalizationRecord<T: Real> {
    pub lambda_hat: T,
    pub scale_factor: T,
}

/// `n / (2R)^d`.
pub fn estimate_intensity<T: Real>(p: &PointPattern<T>) -> T {
    T::from_usize_lossy(p.len()) / p.window.volume(p.dim)
}

/// Multiplies coordinates and window by `lambda_hat^(1/d)` so the output has
/// unit intensity.
pub fn normalize_intensity<T: Real>(p: &PointPattern<T>) -> Result<(PointPattern<T>, NormalizationRecord<T>)> {
    if p.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let lambda_hat = estimate_intensity(p);
    let scale_factor = lambda_hat.powf(T::one() / T::from_usize_lossy(p.dim));
    let out = p.rescaled(scale_factor)?;
    Ok((out, NormalizationRecord { lambda_hat, scale_factor }))
}

/// `Phi ∩ [-R, R]^d` with closed boundary.
///
/// The window never grows: asking for a larger `R` than observed keeps the
/// current window.
pub fn restrict<T: Real>(p: &PointPattern<T>, half_width: T) -> Result<PointPattern<T>> {
    let r = half_width.min(p.window.half_width);
    let window = Window::cube(r)?;
    let coords = p.iter().filter(|x| window.contains(x)).flatten().copied().collect();
    Ok(PointPattern { dim: p.dim, coords, window })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(points: &[[f64; 2]], r: f64) -> PointPattern<f64> {
        let pts: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        PointPattern::from_points(2, &pts, Window::cube(r).unwrap(), OutsidePolicy::Reject).unwrap()
    }

    #[test]
    fn intensity_examples() {
        let p = pat(&[[0.5, 0.5], [-0.5, 0.5], [0.5, -0.5], [-0.5, -0.5]], 1.0);
        assert_eq!(estimate_intensity(&p), 1.0);
        assert_eq!(estimate_intensity(&PointPattern::<f64>::empty(2, Window::cube(3.0).unwrap())), 0.0);
        let n = 19600;
        let big = PointPattern::new(2, vec![0.0; 2 * n], Window::cube(70.0).unwrap(), OutsidePolicy::Reject).unwrap();
        assert_eq!(estimate_intensity(&big), 1.0);
    }

    #[test]
    fn normalization_examples() {
        let p = pat(&[[0.5, 0.5], [-0.5, 0.5], [0.5, -0.5], [-0.5, -0.5]], 1.0);
        let (q, rec) = normalize_intensity(&p).unwrap();
        assert_eq!(q, p);
        assert_eq!(rec.lambda_hat, 1.0);

        let pts: Vec<Vec<f64>> = (0..16).map(|k| vec![-0.75 + 0.5 * (k % 4) as f64, -0.75 + 0.5 * (k / 4) as f64]).collect();
        let p = PointPattern::from_points(2, &pts, Window::cube(1.0).unwrap(), OutsidePolicy::Reject).unwrap();
        let (q, rec) = normalize_intensity(&p).unwrap();
        assert_eq!(rec.lambda_hat, 4.0);
        assert_eq!(rec.scale_factor, 2.0);
        assert_eq!(q.half_width(), 2.0);
        assert_eq!(q.point(0), &[-1.5, -1.5]);
        assert_eq!(estimate_intensity(&q), 1.0);

        let p = pat(&[[3.0, 0.0]], 6.0);
        let (q, rec) = normalize_intensity(&p).unwrap();
        assert!((rec.lambda_hat - 1.0 / 144.0).abs() < 1e-18);
        assert!((q.point(0)[0] - 0.25).abs() < 1e-15);
        assert!((q.half_width() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalize_empty_is_an_error() {
        let p = PointPattern::<f64>::empty(2, Window::cube(1.0).unwrap());
        assert_eq!(normalize_intensity(&p).unwrap_err(), Error::EmptyPattern);
    }

    #[test]
    fn normalization_is_idempotent() {
        let pts: Vec<Vec<f64>> = (0..37).map(|k| vec![(k as f64 * 0.731).sin() * 4.9, (k as f64 * 1.37).cos() * 4.9]).collect();
        let p = PointPattern::from_points(2, &pts, Window::cube(5.0).unwrap(), OutsidePolicy::Reject).unwrap();
        let (q, _) = normalize_intensity(&p).unwrap();
        let (q2, _) = normalize_intensity(&q).unwrap();
        for (a, b) in q.coords().iter().zip(q2.coords()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
        assert!((estimate_intensity(&q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restrict_examples() {
        let p = pat(&[[0.0, 0.0], [5.0, 5.0]], 10.0);
        let q = restrict(&p, 1.0).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.point(0), &[0.0, 0.0]);
        assert_eq!(q.half_width(), 1.0);

        let e = PointPattern::<f64>::empty(2, Window::cube(3.0).unwrap());
        assert!(restrict(&e, 1.0).unwrap().is_empty());

        let b = pat(&[[1.0, 0.0]], 2.0);
        assert_eq!(restrict(&b, 1.0).unwrap().len(), 1);
    }

    #[test]
    fn construction_policies() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
        let w = Window::cube(1.0).unwrap();
        assert!(PointPattern::from_points(2, &pts, w, OutsidePolicy::Reject).is_err());
        assert_eq!(PointPattern::from_points(2, &pts, w, OutsidePolicy::Drop).unwrap().len(), 1);
        assert!(Window::<f64>::cube(0.0).is_err());
        assert_eq!(Window::<f64>::ball(2.0).unwrap().half_width(), 2.0);
    }

    #[test]
    fn works_in_single_precision() {
        let p = PointPattern::<f32>::new(1, vec![0.5, -0.25, 0.75, 0.0], Window::cube(1.0).unwrap(), OutsidePolicy::Reject).unwrap();
        assert_eq!(estimate_intensity(&p), 2.0);
        let (q, _) = normalize_intensity(&p).unwrap();
        assert_eq!(q.half_width(), 2.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nested_restriction(xs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 0..60),
                                  r1 in 0.1f64..12.0, r2 in 0.1f64..12.0) {
                let pts: Vec<Vec<f64>> = xs.iter().map(|&(a, b)| vec![a, b]).collect();
                let p = PointPattern::from_points(2, &pts, Window::cube(10.0).unwrap(), OutsidePolicy::Reject).unwrap();
                let a = restrict(&restrict(&p, r1).unwrap(), r2).unwrap();
                let b = restrict(&p, r1.min(r2)).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
