use rand::Rng;
use rand_distr::StandardNormal;

use super::stable::StableSampler;
use super::to_pattern;
use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::numerics::rng::stream_rng;
use crate::scalar::Real;

/// Whole number of lattice rows beyond the window: about `6σ` for Gaussian
/// perturbations, widened for stable tails, capped near the half-width.
fn margin(alpha: f64, sigma: f64, half_width: f64) -> i64 {
    let delta = alpha / 2.0;
    let m = if delta >= 1.0 { 6.0 * sigma } else { 6.0 * sigma / delta };
    (m.round() + 1.0).min(half_width.ceil().max(1.0)) as i64
}

/// Cloaked perturbed unit lattice `{q + U + U_q + ξ_q}` in `[-R, R]²`.
///
/// `U` is one uniform shift of the lattice, `U_q` are i.i.d. uniform on
/// `[-1/2, 1/2]²` and `ξ_q = √Y · σ Z` with `Y` positive `α/2`-stable and `Z`
/// standard bivariate normal (`Y = 1` when `α = 2`).
///
/// Sites fill a periodic square `[-N, N)²` with `N ≥ R` plus a margin, and
/// displaced points are wrapped back into it. Far jumps therefore re-enter
/// the square instead of being lost, which keeps the pattern exactly one
/// point per site even for the heaviest tails.
pub fn cloaked_lattice<T: Real>(alpha: f64, sigma: f64, half_width: f64, seed: u64) -> Result<PointPattern<T>> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain("cloaked_lattice", format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::domain("cloaked_lattice", format!("bad sigma {sigma} or half-width {half_width}")));
    }
    let stable = StableSampler::new(alpha / 2.0)?;
    let n = half_width.ceil() as i64 + margin(alpha, sigma, half_width);
    let side = 2.0 * n as f64;
    let wrap = |x: f64| (x + n as f64).rem_euclid(side) - n as f64;
    let mut rng = stream_rng(seed, 0);
    let shift: [f64; 2] = [rng.gen(), rng.gen()];
    let mut coords = Vec::with_capacity(((2.0 * half_width + 2.0).powi(2)) as usize * 2);
    for qy in -n..n {
        for qx in -n..n {
            let scale = sigma * stable.sample(&mut rng).sqrt();
            let mut p = [0.0; 2];
            for (k, q) in [qx, qy].into_iter().enumerate() {
                let cloak: f64 = rng.gen_range(-0.5..0.5);
                let z: f64 = rng.sample(StandardNormal);
                p[k] = wrap(q as f64 + shift[k] + cloak + scale * z);
            }
            if p.iter().all(|c| c.abs() <= half_width) {
                coords.extend_from_slice(&p);
            }
        }
    }
    to_pattern(2, coords, half_width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intensity_is_one() {
        let counts: Vec<f64> = (0..20).map(|s| cloaked_lattice::<f64>(1.0, 0.25, 40.0, s).unwrap().len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        assert!((mean - 6400.0).abs() < 4.0 * 80.0 / (20f64).sqrt(), "{mean}");
    }

    #[test]
    fn unperturbed_limit_is_cloaked_lattice() {
        // σ = 0 gives Φ₀ itself; the same seed draws the same cloaking
        let p = cloaked_lattice::<f64>(2.0, 0.0, 10.0, 7).unwrap();
        let q = cloaked_lattice::<f64>(2.0, 1e-9, 10.0, 7).unwrap();
        assert_eq!(p.len(), q.len());
        for (a, b) in p.iter().zip(q.iter()) {
            assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_and_in_window() {
        let a = cloaked_lattice::<f64>(0.5, 0.15, 12.0, 1).unwrap();
        assert_eq!(a, cloaked_lattice::<f64>(0.5, 0.15, 12.0, 1).unwrap());
        assert!(a.iter().all(|x| x[0].abs() <= 12.0 && x[1].abs() <= 12.0));
        assert!(cloaked_lattice::<f64>(0.0, 0.15, 12.0, 1).is_err());
    }
}
