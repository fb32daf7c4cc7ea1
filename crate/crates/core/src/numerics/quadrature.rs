//! Adaptive Gauss–Kronrod quadrature on intervals and half-lines, and the
//! polar/radial integrator used as an oracle for covariance entries.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default absolute tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

const MAX_INTERVALS: usize = 4000;
const MAX_ANGLES: usize = 8192;

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    abs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x), f(c + x));
        k += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    Segment { a, b, value: k * h, err: ((k - g) * h).abs(), abs: abs * h.abs() }
}

/// Globally adaptive integral of `f` over `[a, b]`; returns `(value, error)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let mut heap = BinaryHeap::new();
    let first = kronrod15(&f, a, b);
    let (mut err, mut abs) = (first.err, first.abs);
    heap.push(first);
    while err > tol.max(50.0 * f64::EPSILON * abs) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::NoConvergence { estimate: err, tol });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-3 * f64::EPSILON * worst.b.abs().max(worst.a.abs()) {
            return Err(Error::NoConvergence { estimate: err, tol });
        }
        let left = kronrod15(&f, worst.a, mid);
        let right = kronrod15(&f, mid, worst.b);
        err += left.err + right.err - worst.err;
        abs += left.abs + right.abs - worst.abs;
        heap.push(left);
        heap.push(right);
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let err: f64 = heap.iter().map(|s| s.err).sum();
    if !value.is_finite() || !err.is_finite() {
        return Err(Error::NoConvergence { estimate: err, tol });
    }
    Ok((value, err))
}

/// `∫_0^∞ f(r) dr` through the map `r = scale · t / (1 - t)`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, scale: f64, tol: f64) -> Result<(f64, f64)> {
    let g = |t: f64| {
        let u = 1.0 - t;
        let v = f(scale * t / u) * scale / (u * u);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, tol)
}

/// `∫_{R^d} f(k) dk` for `d ∈ {1, 2}` with unit length scale.
pub fn quad_radial<F: Fn(&[f64]) -> f64>(f: F, d: usize, tol: f64) -> Result<f64> {
    quad_radial_scaled(f, d, 1.0, tol)
}

/// Same as [`quad_radial`], with the radial map adapted to features near
/// `|k| ≈ scale`.
///
/// `d = 1` integrates both half-lines; `d = 2` uses the polar decomposition
/// with a trapezoid rule in angle (doubled until stable) and adaptive
/// Gauss–Kronrod in radius.
pub fn quad_radial_scaled<F: Fn(&[f64]) -> f64>(f: F, d: usize, scale: f64, tol: f64) -> Result<f64> {
    match d {
        1 => {
            let (v, _) = integrate_half_line(|r| f(&[r]) + f(&[-r]), scale, tol)?;
            Ok(v)
        }
        2 => {
            let polar = |n: usize| -> Result<f64> {
                let (cs, sn): (Vec<f64>, Vec<f64>) =
                    (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin_cos()).map(|(s, c)| (c, s)).unzip();
                let w = 2.0 * PI / n as f64;
                let ring = |r: f64| -> f64 {
                    let s: f64 = cs.iter().zip(&sn).map(|(&c, &s)| f(&[r * c, r * s])).sum();
                    r * w * s
                };
                Ok(integrate_half_line(ring, scale, tol / 4.0)?.0)
            };
            let mut n = 16;
            let mut prev = polar(n)?;
            loop {
                n *= 2;
                let next = polar(n)?;
                if (next - prev).abs() <= tol / 2.0 {
                    return Ok(next);
                }
                if n >= MAX_ANGLES {
                    return Err(Error::NoConvergence { estimate: (next - prev).abs(), tol });
                }
                prev = next;
            }
        }
        _ => Err(Error::domain("quad_radial", format!("dimension {d} not supported"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::hermite_function;

    fn psi(i: (usize, usize), k: &[f64]) -> f64 {
        hermite_function(i.0, k[0]) * hermite_function(i.1, k[1])
    }

    #[test]
    fn interval_integrals() {
        let (v, _) = integrate(|x: f64| x.sin(), 0.0, PI, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        // integrable endpoint singularity
        let (v, _) = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn half_line_gaussian() {
        let (v, _) = integrate_half_line(|r| (-r * r).exp(), 1.0, 1e-13).unwrap();
        assert!((v - PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn radial_examples() {
        let tol = 1e-10;
        let norm = quad_radial(|k| psi((0, 0), k).powi(2), 2, tol).unwrap();
        assert!((norm - 1.0).abs() < tol);
        let second = quad_radial(|k| psi((0, 0), k).powi(2) * (k[0] * k[0] + k[1] * k[1]), 2, tol).unwrap();
        assert!((second - 1.0).abs() < tol);
        let odd = quad_radial(|k| psi((0, 0), k) * psi((1, 0), k), 2, tol).unwrap();
        assert!(odd.abs() < tol);
    }

    #[test]
    fn one_dimensional_radial() {
        let v = quad_radial(|k| hermite_function(3, k[0]).powi(2), 1, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unsupported_dimension() {
        assert!(quad_radial(|_| 1.0, 3, 1e-9).is_err());
    }

    #[test]
    fn budget_exhaustion_reports_no_convergence() {
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }
}
