//! Truncated wavelet transforms `T_j(f, R) = Σ_{x ∈ Φ_R} f(x / R^j)`, the
//! diagnostic curve `C(j) = log(Σ_i T_j²) / log R`, and the scattering
//! intensity baseline.
//!
//! Sums run over points in a canonical (lexicographic) order, accumulated in
//! fixed blocks of [`SUM_BLOCK`] points and then combined pairwise, so results
//! do not depend on input order or thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::scalar::Real;
use crate::tapers::{TaperConfig, TaperIndex, TaperSet};

pub const SUM_BLOCK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TransformValue<T: Real> {
    pub j: T,
    pub taper: TaperIndex,
    pub value: T,
}

/// All transforms of a pattern: `values[s * n_tapers + t]` is taper `t` at
/// scale `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TransformGrid<T: Real> {
    pub scales: Vec<T>,
    pub n_tapers: usize,
    pub values: Vec<T>,
}

impl<T: Real> TransformGrid<T> {
    pub fn get(&self, scale: usize, taper: usize) -> T {
        self.values[scale * self.n_tapers + taper]
    }

    pub fn row(&self, scale: usize) -> &[T] {
        &self.values[scale * self.n_tapers..(scale + 1) * self.n_tapers]
    }

    /// `Σ_i T_j(f_i)²` for each scale.
    pub fn sum_squares(&self) -> Vec<T> {
        (0..self.scales.len()).map(|s| self.row(s).iter().map(|&v| v * v).sum()).collect()
    }

    pub fn entries(&self, set: &TaperSet<T>) -> Vec<TransformValue<T>> {
        self.scales
            .iter()
            .enumerate()
            .flat_map(|(s, &j)| {
                set.indices().iter().enumerate().map(move |(t, i)| TransformValue { j, taper: i.clone(), value: self.get(s, t) })
            })
            .collect()
    }
}

/// Diagnostic curve over a grid of scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveC {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub half_width: f64,
    pub tapers: TaperConfig,
}

impl CurveC {
    /// `j,C` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,C\n");
        for (j, c) in self.grid.iter().zip(&self.values) {
            s.push_str(&format!("{j},{c}\n"));
        }
        s
    }
}

// |y| beyond which e^{-y²/2} is exactly zero in T
fn underflow_cutoff<T: Real>() -> T {
    let mut y = (-T::lit(2.0) * T::min_positive_value().ln()).sqrt();
    let half = T::lit(0.5);
    while (-(y * y) * half).exp() > T::zero() {
        y = y + half;
    }
    y
}

fn check_scale<T: Real>(p: &PointPattern<T>, j: T) -> Result<()> {
    if !(p.half_width() > T::one()) {
        return Err(Error::WindowTooSmall { detail: format!("half-width {} must exceed 1", p.half_width()) });
    }
    if !(j > T::zero()) || !j.is_finite() {
        return Err(Error::domain("wavelet_transform", format!("scale j = {j} must be positive")));
    }
    Ok(())
}

/// Point indices in lexicographic coordinate order.
fn canonical_order<T: Real>(p: &PointPattern<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        p.point(a)
            .iter()
            .zip(p.point(b))
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

fn pairwise_reduce<T: Real>(mut blocks: Vec<Vec<T>>, width: usize) -> Vec<T> {
    if blocks.is_empty() {
        return vec![T::zero(); width];
    }
    while blocks.len() > 1 {
        let mut next = Vec::with_capacity(blocks.len().div_ceil(2));
        let mut it = blocks.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(&b).for_each(|(x, &y)| *x = *x + y);
            }
            next.push(a);
        }
        blocks = next;
    }
    blocks.pop().expect("one block")
}

fn transforms_at_scale<T: Real>(p: &PointPattern<T>, order: &[usize], set: &TaperSet<T>, j: T) -> Vec<T> {
    let d = p.dim();
    let n_tapers = set.len();
    let inv = T::one() / p.half_width().powf(j);
    let cutoff = underflow_cutoff::<T>() / set.scale();
    let blocks: Vec<Vec<T>> = order
        .chunks(SUM_BLOCK)
        .map(|chunk| {
            let mut acc = vec![T::zero(); n_tapers];
            let mut work = vec![T::zero(); d * set.i_max()];
            let mut vals = vec![T::zero(); n_tapers];
            let mut y = vec![T::zero(); d];
            for &k in chunk {
                let x = p.point(k);
                let mut far = false;
                for l in 0..d {
                    y[l] = x[l] * inv;
                    far |= y[l].abs() > cutoff;
                }
                if far {
                    continue;
                }
                set.eval_all(&y, &mut work, &mut vals);
                acc.iter_mut().zip(&vals).for_each(|(a, &v)| *a = *a + v);
            }
            acc
        })
        .collect();
    pairwise_reduce(blocks, n_tapers)
}

/// `T_j(f_i, R)` for a single taper and scale; `R` is the window half-width.
pub fn wavelet_transform<T: Real>(p: &PointPattern<T>, set: &TaperSet<T>, i: &TaperIndex, j: T) -> Result<T> {
    check_scale(p, j)?;
    let inv = T::one() / p.half_width().powf(j);
    let order = canonical_order(p);
    let mut y = vec![T::zero(); p.dim()];
    let blocks: Vec<Vec<T>> = order
        .chunks(SUM_BLOCK)
        .map(|chunk| {
            let mut acc = T::zero();
            for &k in chunk {
                for (yl, &xl) in y.iter_mut().zip(p.point(k)) {
                    *yl = xl * inv;
                }
                acc = acc + set.eval(i, &y);
            }
            vec![acc]
        })
        .collect();
    Ok(pairwise_reduce(blocks, 1)[0])
}

/// Every `(scale, taper)` transform in one pass per scale.
pub fn transform_grid<T: Real>(p: &PointPattern<T>, set: &TaperSet<T>, scales: &[T]) -> Result<TransformGrid<T>> {
    if p.dim() != set.dim() {
        return Err(Error::InvalidInput(format!("pattern dimension {} differs from taper dimension {}", p.dim(), set.dim())));
    }
    for &j in scales {
        check_scale(p, j)?;
    }
    let order = canonical_order(p);
    let rows: Vec<Vec<T>> = scales.par_iter().map(|&j| transforms_at_scale(p, &order, set, j)).collect();
    Ok(TransformGrid { scales: scales.to_vec(), n_tapers: set.len(), values: rows.concat() })
}

/// `C(j) = log(Σ_i T_j(f_i, R)²) / log R` on `grid`.
pub fn curve_c<T: Real>(p: &PointPattern<T>, set: &TaperSet<T>, grid: &[T]) -> Result<CurveC> {
    let tg = transform_grid(p, set, grid)?;
    curve_from_grid(&tg, p.half_width(), set)
}

pub(crate) fn curve_from_grid<T: Real>(tg: &TransformGrid<T>, half_width: T, set: &TaperSet<T>) -> Result<CurveC> {
    let log_r = half_width.as_f64().ln();
    let values = tg
        .sum_squares()
        .into_iter()
        .zip(&tg.scales)
        .map(|(s, &j)| {
            let s = s.as_f64();
            if s > 0.0 && s.is_finite() {
                Ok(s.ln() / log_r)
            } else {
                Err(Error::ZeroTransformSum { j: j.as_f64() })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveC { grid: tg.scales.iter().map(|j| j.as_f64()).collect(), values, half_width: log_r.exp(), tapers: *set.config() })
}

/// Normalization of the scattering intensity: `|W|^{-exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ScatteringNorm {
    /// Divide by `|W|` (standard).
    #[default]
    Volume,
    /// Divide by `|W|²`.
    VolumeSquared,
}

/// `|Σ_x e^{-i k·x}|² / |W|^p`.
pub fn scattering_intensity<T: Real>(p: &PointPattern<T>, k: &[T], norm: ScatteringNorm) -> Result<T> {
    if k.len() != p.dim() {
        return Err(Error::InvalidInput("frequency has the wrong dimension".into()));
    }
    if k.iter().all(|&v| v == T::zero()) {
        return Err(Error::ZeroFrequency);
    }
    let (mut re, mut im) = (T::zero(), T::zero());
    for x in p.iter() {
        let phase = x.iter().zip(k).fold(T::zero(), |a, (&xl, &kl)| a + xl * kl);
        re = re + phase.cos();
        im = im - phase.sin();
    }
    let vol = p.window().volume(p.dim());
    let denom = match norm {
        ScatteringNorm::Volume => vol,
        ScatteringNorm::VolumeSquared => vol * vol,
    };
    Ok((re * re + im * im) / denom)
}
