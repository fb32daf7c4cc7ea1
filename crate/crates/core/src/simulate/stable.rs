use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::numerics::rng::{stream_rng, StreamRng};

/// Positive `δ`-stable law with Laplace transform `E e^{−sY} = e^{−s^δ}`,
/// sampled with Kanter's representation. `δ = 1` is the point mass at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSampler {
    delta: f64,
}

impl StableSampler {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::domain("one_sided_stable", format!("delta must lie in (0, 1], got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let d = self.delta;
        if d == 1.0 {
            return 1.0;
        }
        loop {
            // open interval so that none of the sines vanish
            let v: f64 = rng.gen_range(f64::EPSILON..1.0);
            let w: f64 = rng.sample(Exp1);
            let a = ((1.0 - d) * PI * v).sin() * (d * PI * v).sin().powf(d / (1.0 - d)) / (PI * v).sin().powf(1.0 / (1.0 - d));
            let y = (a / w).powf((1.0 - d) / d);
            if y > 0.0 && y.is_finite() {
                return y;
            }
        }
    }
}

/// One draw of the positive `δ`-stable law, `0 < δ < 1`.
pub fn one_sided_stable(delta: f64, seed: u64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("one_sided_stable", format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut rng: StreamRng = stream_rng(seed, 0);
    Ok(StableSampler::new(delta)?.sample(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace(delta: f64, s: f64, n: usize, seed: u64) -> f64 {
        let sampler = StableSampler::new(delta).unwrap();
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| (-s * sampler.sample(&mut rng)).exp()).sum::<f64>() / n as f64
    }

    #[test]
    fn laplace_transform_at_half() {
        assert!((laplace(0.5, 1.0, 100_000, 1) - (-1f64).exp()).abs() < 0.005);
        assert!((laplace(0.5, 4.0, 100_000, 2) - (-2f64).exp()).abs() < 0.005);
    }

    #[test]
    fn positive_and_domain() {
        let s = StableSampler::new(0.25).unwrap();
        let mut rng = stream_rng(3, 0);
        assert!((0..10_000).all(|_| s.sample(&mut rng) > 0.0));
        assert_eq!(StableSampler::new(1.0).unwrap().sample(&mut rng), 1.0);
        assert!(one_sided_stable(1.0, 0).is_err());
        assert!(one_sided_stable(0.0, 0).is_err());
        assert_eq!(one_sided_stable(0.3, 5).unwrap(), one_sided_stable(0.3, 5).unwrap());
    }
}
