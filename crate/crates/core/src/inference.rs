//! Monte Carlo law of the pivot `Z_R(β) = Σ_j w_j log(Σ_i N_ij²)` with
//! `N ~ N(0, Σ_R(β))`, its quantiles, and confidence intervals for `α`.

use serde::{Deserialize, Serialize};

use crate::covariance::{sigma_transient, CovBlockMatrix, CovCache};
use crate::error::{Error, Result};
use crate::estimator::{calibrate_jmax, diagnostic_grid, estimate_alpha, scale_plan, select_jmin, EstimateReport, ScalePlan};
use crate::geometry::{normalize_intensity, PointPattern};
use crate::numerics::rng::child_seed;
use crate::simulate::{SimSpec, SimVariant};
use crate::tapers::{TaperConfig, DEFAULT_I_MAX};
use crate::transforms::{curve_c, CurveC};
use crate::numerics::gaussian::{mvn_blocks, psd_factor, PsdFactor};
use crate::scalar::Real;
use crate::tapers::TaperSet;

/// Default number of Monte Carlo draws of `Z`.
pub const DEFAULT_CI_DRAWS: usize = 20_000;
/// Smallest sample accepted for quantiles.
pub const MIN_QUANTILE_DRAWS: usize = 1000;
/// Scales used with the reduced confidence-interval preset.
pub const REDUCED_CI_SCALES: usize = 25;
/// Covariance dimension above which assembly is announced as slow.
pub const LARGE_COVARIANCE: usize = 1000;

/// I.i.d. draws of `Z_R(β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZSample {
    pub values: Vec<f64>,
    pub beta: f64,
    pub half_width: Option<f64>,
    pub seed: u64,
}

impl ZSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|z| (z - m) * (z - m)).sum::<f64>() / (self.values.len() - 1) as f64
    }
}

/// `Z` for each column of a block of Gaussian draws.
fn z_of_columns(x: &nalgebra::DMatrix<f64>, n_tapers: usize, weights: &[f64]) -> Vec<f64> {
    x.column_iter()
        .map(|col| {
            weights
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let ss: f64 = col.rows(j * n_tapers, n_tapers).iter().map(|v| v * v).sum();
                    w * ss.ln()
                })
                .sum()
        })
        .collect()
}

/// Draws `count` values of `Z` from an already factored covariance.
pub fn sample_z_factored(f: &PsdFactor, n_tapers: usize, plan: &ScalePlan, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::EmptyInput("draw count"));
    }
    if f.dim() != n_tapers * plan.len() {
        return Err(Error::InvalidInput(format!("covariance of size {} does not match {} tapers × {} scales", f.dim(), n_tapers, plan.len())));
    }
    let blocks = mvn_blocks(f, count, seed, |x| z_of_columns(x, n_tapers, plan.weights()));
    let values: Vec<f64> = blocks.into_iter().flatten().collect();
    if let Some(bad) = values.iter().find(|z| !z.is_finite()) {
        return Err(Error::domain("sample_z", format!("non-finite draw {bad}: a scale block of the covariance is zero")));
    }
    Ok(values)
}

/// I.i.d. draws of `Z` for covariance `m` laid out on `plan`'s scales.
pub fn sample_z(m: &CovBlockMatrix, plan: &ScalePlan, count: usize, seed: u64) -> Result<ZSample> {
    if m.scales().len() != plan.len() || m.scales().iter().zip(plan.scales()).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::InvalidInput("covariance and plan use different scales".into()));
    }
    let f = psd_factor(m.matrix())?;
    if f.clipped() > 0 {
        log::debug!("clipped {} tiny negative eigenvalues", f.clipped());
    }
    let values = sample_z_factored(&f, m.indices().len(), plan, count, seed)?;
    Ok(ZSample { values, beta: m.beta(), half_width: m.half_width(), seed })
}

/// Empirical quantile with linear interpolation between order statistics
/// (position `(n − 1) q` in the sorted sample).
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sample"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain("quantile", format!("q must lie in (0, 1), got {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    /// Coverage level `1 − a`.
    pub level: f64,
    pub alpha_hat: f64,
    pub nonempty: bool,
    /// `β` the pivot law was simulated at.
    pub beta: f64,
    pub draws: usize,
    pub seed: u64,
    pub n_tapers: usize,
    pub n_scales: usize,
}

impl ConfidenceInterval {
    pub fn contains(&self, alpha: f64) -> bool {
        self.lo <= alpha && alpha <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Interval `[α̂ − q_{1−a/2}/log R, α̂ − q_{a/2}/log R]` from a sorted pivot
/// sample.
pub fn interval_from_sample(alpha_hat: f64, half_width: f64, a: f64, z: &ZSample) -> Result<(f64, f64)> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::domain("confidence_interval", format!("a must lie in (0, 1), got {a}")));
    }
    if z.len() < MIN_QUANTILE_DRAWS {
        log::warn!("only {} pivot draws; quantiles are coarse", z.len());
    }
    let mut sorted = z.values.clone();
    sorted.sort_by(f64::total_cmp);
    let lr = half_width.ln();
    let lo = alpha_hat - quantile_sorted(&sorted, 1.0 - a / 2.0) / lr;
    let hi = alpha_hat - quantile_sorted(&sorted, a / 2.0) / lr;
    Ok((lo, hi))
}

/// Options for [`confidence_interval`].
#[derive(Debug, Clone)]
pub struct CiOptions<'a> {
    /// `a` in the level `1 − a`.
    pub a: f64,
    pub draws: usize,
    pub seed: u64,
    /// Simulate the pivot at this `β` instead of `max(α̂, 0)`.
    pub beta_override: Option<f64>,
    pub cache: Option<&'a CovCache>,
}

impl Default for CiOptions<'_> {
    fn default() -> Self {
        Self { a: 0.05, draws: DEFAULT_CI_DRAWS, seed: 0, beta_override: None, cache: None }
    }
}

/// Confidence interval for `α` around the estimate in `report`, which must
/// come from the same taper set, plan and window.
pub fn confidence_interval<T: Real>(report: &EstimateReport, set: &TaperSet<T>, plan: &ScalePlan, opts: &CiOptions) -> Result<ConfidenceInterval> {
    if !(opts.a > 0.0 && opts.a < 1.0) {
        return Err(Error::domain("confidence_interval", format!("a must lie in (0, 1), got {}", opts.a)));
    }
    let level = 1.0 - opts.a;
    let beta = opts.beta_override.unwrap_or(report.alpha_hat.max(0.0));
    let empty = ConfidenceInterval {
        lo: 0.0,
        hi: 0.0,
        level,
        alpha_hat: 0.0,
        nonempty: false,
        beta,
        draws: 0,
        seed: opts.seed,
        n_tapers: set.len(),
        n_scales: plan.len(),
    };
    if !report.nonempty {
        return Ok(empty);
    }
    if report.plan.scales() != plan.scales() {
        return Err(Error::InvalidInput("report was computed on a different scale plan".into()));
    }
    let n = set.len() * plan.len();
    if n > LARGE_COVARIANCE {
        log::warn!("assembling a {n}×{n} covariance for the interval; this is slow (the reduced preset keeps it small)");
    }
    let m = match opts.cache {
        Some(c) => c.sigma_transient(set, plan.scales(), beta, report.half_width)?,
        None => sigma_transient(set, plan.scales(), beta, report.half_width)?,
    };
    let z = sample_z(&m, plan, opts.draws, opts.seed)?;
    let (lo, hi) = interval_from_sample(report.alpha_hat, report.half_width, opts.a, &z)?;
    if !(lo <= report.alpha_hat && report.alpha_hat <= hi) {
        log::warn!("interval [{lo:.4}, {hi:.4}] does not contain the estimate {:.4}", report.alpha_hat);
    }
    Ok(ConfidenceInterval { lo, hi, alpha_hat: report.alpha_hat, nonempty: true, draws: opts.draws, ..empty })
}

/// Setup of a coverage study: simulated replicates, one interval each, with
/// the pivot law simulated once at the true exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub variant: SimVariant,
    pub half_width: f64,
    pub true_alpha: f64,
    pub replicates: usize,
    /// `a` in the level `1 − a`.
    pub a: f64,
    pub draws: usize,
    pub tapers: TaperConfig,
    pub n_scales: usize,
    /// Replicates averaged to pick the scale range.
    pub pilot_replicates: usize,
    pub seed: u64,
}

impl CoverageConfig {
    /// Reduced taper preset, 25 scales, 95% level.
    pub fn new(variant: SimVariant, half_width: f64, true_alpha: f64, replicates: usize, seed: u64) -> Self {
        Self {
            variant,
            half_width,
            true_alpha,
            replicates,
            a: 0.05,
            draws: DEFAULT_CI_DRAWS,
            tapers: TaperConfig::reduced_for(2),
            n_scales: REDUCED_CI_SCALES,
            pilot_replicates: 5,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub config: CoverageConfig,
    pub plan: ScalePlan,
    pub covered: usize,
    pub coverage: f64,
    pub mean_alpha_hat: f64,
    pub mean_width: f64,
    pub intervals: Vec<ConfidenceInterval>,
}

/// Fraction of simulated replicates whose interval covers the true `α`.
///
/// The scale range comes from the mean diagnostic curve of pilot replicates,
/// drawn with seeds disjoint from the study and transformed with the
/// full-order taper family, so one `Σ_R` and one pivot sample serve every
/// replicate.
pub fn coverage_study(cfg: &CoverageConfig) -> Result<CoverageReport> {
    use rayon::prelude::*;

    if cfg.replicates == 0 {
        return Err(Error::EmptyInput("replicates"));
    }
    if !(cfg.a > 0.0 && cfg.a < 1.0) {
        return Err(Error::domain("coverage", format!("a must lie in (0, 1), got {}", cfg.a)));
    }
    if !(cfg.true_alpha >= 0.0) {
        return Err(Error::domain("coverage", format!("true alpha must be non-negative, got {}", cfg.true_alpha)));
    }
    let set = TaperSet::<f64>::build(cfg.tapers)?;
    let spec = |seed: u64| SimSpec::new(cfg.variant.clone(), cfg.half_width, seed);
    let normalized = |seed: u64| -> Result<PointPattern<f64>> { Ok(normalize_intensity(&spec(seed)?.simulate::<f64>()?)?.0) };

    let pilot_seed = child_seed(cfg.seed, u64::MAX);
    let pilots: Vec<PointPattern<f64>> =
        (0..cfg.pilot_replicates.max(1) as u64).into_par_iter().map(|k| normalized(child_seed(pilot_seed, k))).collect::<Result<_>>()?;
    let half_width = pilots[0].half_width();
    // the scale range comes from the full-order family, as in estimation; the
    // study's own tapers only enter the interval
    let full = TaperSet::<f64>::build(TaperConfig::new(cfg.tapers.dim, DEFAULT_I_MAX, cfg.tapers.scale))?;
    let j_max = calibrate_jmax(&full, half_width)?;
    let grid: Vec<f64> = diagnostic_grid().into_iter().filter(|&j| j <= j_max + 1e-12).collect();
    let curves: Vec<CurveC> = pilots.par_iter().map(|p| curve_c(p, &full, &grid)).collect::<Result<_>>()?;
    let mut mean = curves[0].clone();
    for (k, v) in mean.values.iter_mut().enumerate() {
        *v = curves.iter().map(|c| c.values[k]).sum::<f64>() / curves.len() as f64;
    }
    let j_min = select_jmin(&mean, j_max)?;
    let plan = scale_plan(j_min, j_max, cfg.n_scales)?;
    log::info!("coverage study: {} tapers, scales [{j_min:.3}, {j_max:.3}] x {}", set.len(), plan.len());

    let m = sigma_transient(&set, plan.scales(), cfg.true_alpha, half_width)?;
    let z = sample_z(&m, &plan, cfg.draws, cfg.seed)?;

    let intervals: Vec<ConfidenceInterval> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|k| {
            let p = normalized(child_seed(cfg.seed, k))?;
            let report = estimate_alpha(&p, &set, &plan)?;
            let (lo, hi) = if report.nonempty { interval_from_sample(report.alpha_hat, report.half_width, cfg.a, &z)? } else { (0.0, 0.0) };
            Ok(ConfidenceInterval {
                lo,
                hi,
                level: 1.0 - cfg.a,
                alpha_hat: report.alpha_hat,
                nonempty: report.nonempty,
                beta: cfg.true_alpha,
                draws: cfg.draws,
                seed: cfg.seed,
                n_tapers: set.len(),
                n_scales: plan.len(),
            })
        })
        .collect::<Result<_>>()?;
    let covered = intervals.iter().filter(|ci| ci.contains(cfg.true_alpha)).count();
    let n = intervals.len() as f64;
    Ok(CoverageReport {
        config: cfg.clone(),
        plan,
        covered,
        coverage: covered as f64 / n,
        mean_alpha_hat: intervals.iter().map(|c| c.alpha_hat).sum::<f64>() / n,
        mean_width: intervals.iter().map(|c| c.width()).sum::<f64>() / n,
        intervals,
    })
}
