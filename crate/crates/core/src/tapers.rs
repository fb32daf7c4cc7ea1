//! Scaled Hermite-wavelet tapers `f_i(x) = ψ_i(c·x)` with
//! `ψ_i(x) = e^{-|x|²/2} ∏_l H_{i_l}(x_l)`.
//!
//! The default family keeps every multi-index with `|i|_∞ < i_max` that has at
//! least one odd component, so each taper integrates to zero and vanishes at
//! the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::signed_log::SignedLogValue;
use crate::numerics::special::{hermite_coeffs, hermite_functions};
use crate::scalar::Real;

/// Default spatial scale `c`.
pub const DEFAULT_TAPER_SCALE: f64 = 5.0;
/// Default order bound (75 tapers in the plane).
pub const DEFAULT_I_MAX: usize = 10;
/// Default threshold for numerical supports: single-precision machine
/// epsilon, which places the largest support of the default family near 1.5
/// length units.
pub const DEFAULT_SUPPORT_EPS: f64 = f32::EPSILON as f64;
/// Step of the outward support scan, in length units.
pub const SUPPORT_SCAN_STEP: f64 = 0.01;

/// Multi-index `i = (i_1, ..., i_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaperIndex(pub Vec<usize>);

impl TaperIndex {
    pub fn new(orders: &[usize]) -> Self {
        Self(orders.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn orders(&self) -> &[usize] {
        &self.0
    }

    pub fn max_order(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// `|i|_1`.
    pub fn total_order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn has_odd_component(&self) -> bool {
        self.0.iter().any(|o| o % 2 == 1)
    }
}

impl std::fmt::Display for TaperIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Serializable description of a taper family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaperConfig {
    pub dim: usize,
    pub i_max: usize,
    pub scale: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    DEFAULT_SUPPORT_EPS
}

impl TaperConfig {
    pub fn new(dim: usize, i_max: usize, scale: f64) -> Self {
        Self { dim, i_max, scale, eps: DEFAULT_SUPPORT_EPS }
    }

    /// 75 tapers in the plane, `c = 5`.
    pub fn default_for(dim: usize) -> Self {
        Self::new(dim, DEFAULT_I_MAX, DEFAULT_TAPER_SCALE)
    }

    /// The small family used for confidence intervals by default.
    pub fn reduced_for(dim: usize) -> Self {
        Self::new(dim, 4, DEFAULT_TAPER_SCALE)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("taper preset: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct TaperSet<T: Real> {
    config: TaperConfig,
    scale: T,
    indices: Vec<TaperIndex>,
    // flat row-major copy of `indices`
    flat: Vec<usize>,
    coeffs: Vec<Vec<SignedLogValue>>,
    supports: Vec<T>,
}

/// Filtered family with default support threshold.
pub fn build_taper_set<T: Real>(d: usize, i_max: usize, c: T) -> Result<TaperSet<T>> {
    TaperSet::build(TaperConfig::new(d, i_max, c.as_f64()))
}

impl<T: Real> TaperSet<T> {
    pub fn build(config: TaperConfig) -> Result<Self> {
        let indices = odd_filtered_indices(config.dim, config.i_max)?;
        Self::with_indices(config, indices)
    }

    /// Arbitrary index list (e.g. to include all-even indices in tests).
    pub fn with_indices(config: TaperConfig, indices: Vec<TaperIndex>) -> Result<Self> {
        if !(1..=2).contains(&config.dim) {
            return Err(Error::domain("build_taper_set", format!("dimension {} not in {{1, 2}}", config.dim)));
        }
        if config.i_max < 1 {
            return Err(Error::domain("build_taper_set", "i_max must be at least 1"));
        }
        if !(config.scale > 0.0) || !config.scale.is_finite() {
            return Err(Error::domain("build_taper_set", format!("scale {} must be positive", config.scale)));
        }
        if !(config.eps > 0.0) {
            return Err(Error::domain("build_taper_set", "support threshold must be positive"));
        }
        if let Some(bad) = indices.iter().find(|i| i.dim() != config.dim || i.max_order() >= config.i_max) {
            return Err(Error::InvalidInput(format!("taper index {bad} does not fit dimension/i_max")));
        }
        let coeffs = (0..config.i_max).map(hermite_coeffs).collect::<Result<Vec<_>>>()?;
        let flat = indices.iter().flat_map(|i| i.0.iter().copied()).collect();
        let mut set = Self { config, scale: T::lit(config.scale), indices, flat, coeffs, supports: Vec::new() };
        set.supports = set.indices.iter().map(|i| set.numerical_support(i, config.eps)).collect();
        Ok(set)
    }

    pub fn config(&self) -> &TaperConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn i_max(&self) -> usize {
        self.config.i_max
    }

    /// Spatial scale `c`.
    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[TaperIndex] {
        &self.indices
    }

    pub fn position(&self, i: &TaperIndex) -> Option<usize> {
        self.indices.iter().position(|k| k == i)
    }

    /// Monomial coefficients of `H_n` for `n < i_max`.
    pub fn coeffs(&self, order: usize) -> &[SignedLogValue] {
        &self.coeffs[order]
    }

    /// Numerical supports `σ_i`, in the order of [`indices`](Self::indices).
    pub fn supports(&self) -> &[T] {
        &self.supports
    }

    pub fn max_support(&self) -> T {
        self.supports.iter().copied().fold(T::zero(), T::max)
    }

    /// `ψ_i(c·x)`.
    pub fn eval(&self, i: &TaperIndex, x: &[T]) -> T {
        let mut buf = vec![T::zero(); i.max_order() + 1];
        let mut out = T::one();
        for (&order, &xl) in i.0.iter().zip(x) {
            hermite_functions(self.scale * xl, &mut buf[..=order]);
            out = out * buf[order];
        }
        out
    }

    /// Evaluates every taper of the set at `x` (already divided by any
    /// transform scale). `work` must hold `dim * i_max` values.
    #[inline]
    pub fn eval_all(&self, x: &[T], work: &mut [T], out: &mut [T]) {
        let m = self.config.i_max;
        for (l, &xl) in x.iter().enumerate() {
            hermite_functions(self.scale * xl, &mut work[l * m..(l + 1) * m]);
        }
        let d = self.config.dim;
        for (k, o) in out.iter_mut().enumerate() {
            let orders = &self.flat[k * d..(k + 1) * d];
            let mut v = work[orders[0]];
            for l in 1..d {
                v = v * work[l * m + orders[l]];
            }
            *o = v;
        }
    }

    /// Smallest `σ` on a grid of step 0.01 with `|ψ_i(c·x)| ≤ eps` whenever
    /// `|x|_∞ ≥ σ`.
    ///
    /// Uses the separable bound: for `|x_l| ≥ σ`, `|ψ_i(c·x)|` is at most the
    /// tail supremum of `φ_{i_l}` beyond `cσ` times the global suprema of the
    /// other factors.
    pub fn numerical_support(&self, i: &TaperIndex, eps: f64) -> T {
        let c = self.config.scale;
        let top = i.max_order();
        let limit = 4.0 * ((2.0 * top as f64).sqrt() + 6.0) / c;
        let steps = (limit / SUPPORT_SCAN_STEP).ceil() as usize;
        let mut buf = vec![0.0f64; top + 1];
        // |φ_n(c x_k)| on the grid, for every order in use
        let mut table = vec![vec![0.0f64; steps + 1]; top + 1];
        for k in 0..=steps {
            hermite_functions(c * SUPPORT_SCAN_STEP * k as f64, &mut buf);
            for n in 0..=top {
                table[n][k] = buf[n].abs();
            }
        }
        let sup: Vec<f64> = table.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).collect();
        let mut tails = table;
        for row in tails.iter_mut() {
            for k in (0..steps).rev() {
                row[k] = row[k].max(row[k + 1]);
            }
        }
        let orders = i.orders();
        let bound = |k: usize| -> f64 {
            (0..orders.len())
                .map(|l| {
                    let others: f64 = orders.iter().enumerate().filter(|&(m, _)| m != l).map(|(_, &o)| sup[o]).product();
                    tails[orders[l]][k] * others
                })
                .fold(0.0, f64::max)
        };
        let k = (0..=steps).find(|&k| bound(k) <= eps).unwrap_or(steps);
        T::lit(k as f64 * SUPPORT_SCAN_STEP)
    }
}

/// `{ i : |i|_∞ < i_max, some component odd }` in lexicographic order.
pub fn odd_filtered_indices(d: usize, i_max: usize) -> Result<Vec<TaperIndex>> {
    if !(1..=2).contains(&d) {
        return Err(Error::domain("build_taper_set", format!("dimension {d} not in {{1, 2}}")));
    }
    Ok(all_indices(d, i_max).into_iter().filter(TaperIndex::has_odd_component).collect())
}

/// Every multi-index with `|i|_∞ < i_max`.
pub fn all_indices(d: usize, i_max: usize) -> Vec<TaperIndex> {
    let total = i_max.pow(d as u32);
    (0..total)
        .map(|mut code| {
            let mut v = vec![0; d];
            for slot in v.iter_mut().rev() {
                *slot = code % i_max;
                code /= i_max;
            }
            TaperIndex(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn family_sizes() {
        let s = build_taper_set::<f64>(2, 10, 5.0).unwrap();
        assert_eq!(s.len(), 75);
        let s = build_taper_set::<f64>(2, 2, 5.0).unwrap();
        let got: Vec<_> = s.indices().to_vec();
        assert_eq!(got, vec![TaperIndex::new(&[0, 1]), TaperIndex::new(&[1, 0]), TaperIndex::new(&[1, 1])]);
        let s = build_taper_set::<f64>(1, 3, 5.0).unwrap();
        assert_eq!(s.indices(), &[TaperIndex::new(&[1])]);
        for i_max in 1..12 {
            let s = build_taper_set::<f64>(2, i_max, 5.0).unwrap();
            let half = i_max.div_ceil(2);
            assert_eq!(s.len(), i_max * i_max - half * half);
            assert!(s.indices().iter().all(TaperIndex::has_odd_component));
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(build_taper_set::<f64>(3, 4, 5.0).is_err());
        assert!(build_taper_set::<f64>(2, 0, 5.0).is_err());
        assert!(build_taper_set::<f64>(2, 4, 0.0).is_err());
    }

    #[test]
    fn eval_examples() {
        let cfg = TaperConfig::new(2, 3, 1.0);
        let all = TaperSet::<f64>::with_indices(cfg, all_indices(2, 3)).unwrap();
        assert_eq!(all.eval(&TaperIndex::new(&[1, 0]), &[0.0, 0.0]), 0.0);
        assert!((all.eval(&TaperIndex::new(&[0, 0]), &[0.0, 0.0]) - PI.powf(-0.5)).abs() < 1e-15);
        let expect = 2f64.sqrt() * PI.powf(-0.5) * (-0.5f64).exp();
        assert!((all.eval(&TaperIndex::new(&[1, 0]), &[1.0, 0.0]) - expect).abs() < 1e-15);
    }

    #[test]
    fn eval_all_matches_eval() {
        let s = build_taper_set::<f64>(2, 6, 5.0).unwrap();
        let x = [0.13, -0.21];
        let mut work = vec![0.0; 12];
        let mut out = vec![0.0; s.len()];
        s.eval_all(&x, &mut work, &mut out);
        for (k, i) in s.indices().iter().enumerate() {
            assert!((out[k] - s.eval(i, &x)).abs() < 1e-15);
        }
    }

    #[test]
    fn filtered_tapers_vanish_at_origin() {
        let s = build_taper_set::<f64>(2, 10, 5.0).unwrap();
        let mut work = vec![0.0; 20];
        let mut out = vec![1.0; s.len()];
        s.eval_all(&[0.0, 0.0], &mut work, &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn support_examples() {
        let s = build_taper_set::<f64>(2, 10, 5.0).unwrap();
        let i9 = TaperIndex::new(&[9, 0]);
        let sigma = s.numerical_support(&i9, f64::EPSILON);
        assert!((sigma - 1.9).abs() <= 0.2, "sigma = {sigma}");
        let a = s.numerical_support(&TaperIndex::new(&[0, 1]), f64::EPSILON);
        let b = s.numerical_support(&TaperIndex::new(&[1, 0]), f64::EPSILON);
        assert_eq!(a, b);
        for i in s.indices() {
            let tight = s.numerical_support(i, 1e-14);
            let loose = s.numerical_support(i, 1e-6);
            assert!(loose <= tight);
        }
        // default threshold: largest support of the default family
        assert!(s.max_support() > 1.3 && s.max_support() < 1.7, "{}", s.max_support());
    }

    #[test]
    fn support_bound_holds_off_grid() {
        let s = build_taper_set::<f64>(2, 6, 5.0).unwrap();
        for (i, &sigma) in s.indices().iter().zip(s.supports()) {
            for k in 0..200 {
                let t = k as f64 * 0.037;
                let x = [sigma + 0.011 + t, (k as f64 * 0.71).sin() * 3.0];
                assert!(s.eval(i, &x).abs() <= 1.5 * s.config().eps, "{i} at {x:?}");
            }
        }
    }

    #[test]
    fn preset_json_round_trip() {
        let cfg = TaperConfig::default_for(2);
        let back = TaperConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
        let partial = TaperConfig::from_json(r#"{"dim":2,"i_max":4,"scale":5.0}"#).unwrap();
        assert_eq!(partial.eps, DEFAULT_SUPPORT_EPS);
    }

    #[test]
    fn single_precision_set() {
        let s = build_taper_set::<f32>(2, 4, 5.0).unwrap();
        let v = s.eval(&TaperIndex::new(&[1, 0]), &[0.1, 0.0]);
        let w = build_taper_set::<f64>(2, 4, 5.0).unwrap().eval(&TaperIndex::new(&[1, 0]), &[0.1, 0.0]);
        assert!((f64::from(v) - w).abs() < 1e-6);
    }
}
