//! The multi-scale, multi-taper estimator
//! `α̂ = d − Σ_j w_j log(Σ_i T_j(f_i, R)²) / log R`, its least-squares
//! weights, the scale-range calibration rules and pooling over patterns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{estimate_intensity, normalize_intensity, NormalizationRecord, PointPattern};
use crate::inference::ConfidenceInterval;
use crate::numerics::rng::child_seed;
use crate::scalar::Real;
use crate::simulate;
use crate::tapers::{TaperConfig, TaperSet};
use crate::transforms::{curve_from_grid, transform_grid, CurveC};

/// Number of scales in the default plan.
pub const DEFAULT_N_SCALES: usize = 50;
/// Diagnostic grid: this many points on `(0.1, 1.3]`.
pub const DEFAULT_CURVE_POINTS: usize = 120;
pub const CURVE_GRID_START: f64 = 0.1;
pub const CURVE_GRID_END: f64 = 1.3;
/// Relative RSS gain a two-segment fit needs over a single line.
pub const KNEE_MIN_GAIN: f64 = 0.05;
/// Smallest admissible calibrated `j_max`.
pub const MIN_JMAX: f64 = 0.1;
/// Lower end of the line fitted to the Poisson reference curve.
pub const POISSON_FIT_START: f64 = 0.3;
/// Upper end of the range used to fit the Poisson reference intercept.
pub const POISSON_FIT_END: f64 = 0.6;
/// Half-width of the band around the fitted line, in units of `C`.
pub const POISSON_BAND: f64 = 0.02;
/// Allowed departure of the intensity estimate from 1 before warning.
pub const INTENSITY_WARN_TOL: f64 = 0.05;

/// Scales `J` and weights `w_j` with `Σ w_j = 0` and `Σ j w_j = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalePlan {
    scales: Vec<f64>,
    weights: Vec<f64>,
}

impl ScalePlan {
    /// Plan with caller-supplied weights; the two linear constraints are
    /// checked to 1e-12.
    pub fn with_weights(scales: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        validate_scales(&scales)?;
        if weights.len() != scales.len() {
            return Err(Error::InvalidInput("one weight per scale required".into()));
        }
        let s0: f64 = weights.iter().sum();
        let s1: f64 = scales.iter().zip(&weights).map(|(j, w)| j * w).sum();
        if s0.abs() > 1e-12 || (s1 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights violate constraints: Σw = {s0:e}, Σjw = {s1}")));
        }
        Ok(Self { scales, weights })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn j_min(&self) -> f64 {
        self.scales[0]
    }

    pub fn j_max(&self) -> f64 {
        self.scales[self.scales.len() - 1]
    }

    /// `Σ w_j²`.
    pub fn weight_energy(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

fn validate_scales(scales: &[f64]) -> Result<()> {
    if scales.len() < 2 {
        return Err(Error::DegenerateScales);
    }
    if scales.iter().any(|&j| !(j > 0.0) || !j.is_finite()) {
        return Err(Error::InvalidInput("scales must be positive and finite".into()));
    }
    if scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("scales must be strictly increasing".into()));
    }
    Ok(())
}

/// Ordinary least-squares slope weights
/// `w_j = (|J| j − Σj') / (|J| Σj'² − (Σj')²)`, evaluated in centered form.
pub fn least_squares_weights(scales: &[f64]) -> Result<ScalePlan> {
    if scales.len() < 2 {
        return Err(Error::DegenerateScales);
    }
    let n = scales.len() as f64;
    let mean = scales.iter().sum::<f64>() / n;
    let ss: f64 = scales.iter().map(|j| (j - mean) * (j - mean)).sum();
    if !(ss > 0.0) {
        return Err(Error::DegenerateScales);
    }
    let weights = scales.iter().map(|j| (j - mean) / ss).collect();
    ScalePlan::with_weights(scales.to_vec(), weights)
}

/// `count` uniform scales on `[j_min, j_max]`, endpoints included.
pub fn uniform_scales(j_min: f64, j_max: f64, count: usize) -> Vec<f64> {
    let step = (j_max - j_min) / (count - 1) as f64;
    (0..count).map(|k| if k + 1 == count { j_max } else { j_min + step * k as f64 }).collect()
}

/// 50 uniform scales on `[j_min, j_max]` with least-squares weights.
pub fn default_scale_plan(j_min: f64, j_max: f64) -> Result<ScalePlan> {
    scale_plan(j_min, j_max, DEFAULT_N_SCALES)
}

pub fn scale_plan(j_min: f64, j_max: f64, count: usize) -> Result<ScalePlan> {
    if !(0.0 < j_min && j_min < j_max) {
        return Err(Error::InvalidInput(format!("need 0 < j_min < j_max, got [{j_min}, {j_max}]")));
    }
    if count < 2 {
        return Err(Error::DegenerateScales);
    }
    least_squares_weights(&uniform_scales(j_min, j_max, count))
}

/// The diagnostic grid: `DEFAULT_CURVE_POINTS` scales on `(0.1, 1.3]`.
pub fn diagnostic_grid() -> Vec<f64> {
    let n = DEFAULT_CURVE_POINTS;
    let step = (CURVE_GRID_END - CURVE_GRID_START) / n as f64;
    (1..=n).map(|k| CURVE_GRID_START + step * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub alpha_hat: f64,
    /// Whether the window contained at least one point.
    pub nonempty: bool,
    pub dim: usize,
    pub n_points: usize,
    pub lambda_hat: f64,
    /// Window half-width the estimate was computed in.
    pub half_width: f64,
    pub plan: ScalePlan,
    /// `C(j)` on the plan's scales.
    pub curve: CurveC,
    /// `log Σ_i T_j²` per scale.
    pub log_sums: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci: Option<ConfidenceInterval>,
}

/// `d − Σ_j w_j L_j / log R` for precomputed log-sums `L_j`.
pub fn alpha_from_log_sums(dim: usize, half_width: f64, plan: &ScalePlan, log_sums: &[f64]) -> Result<f64> {
    if !(half_width > 1.0) {
        return Err(Error::WindowTooSmall { detail: format!("half-width {half_width} must exceed 1") });
    }
    if log_sums.len() != plan.len() {
        return Err(Error::InvalidInput("one log-sum per scale required".into()));
    }
    let slope: f64 = plan.weights.iter().zip(log_sums).map(|(w, l)| w * l).sum();
    Ok(dim as f64 - slope / half_width.ln())
}

/// `α̂(I, J, R)` on an intensity-normalized pattern.
pub fn estimate_alpha<T: Real>(p: &PointPattern<T>, set: &TaperSet<T>, plan: &ScalePlan) -> Result<EstimateReport> {
    let half_width = p.half_width().as_f64();
    if !(half_width > 1.0) {
        return Err(Error::WindowTooSmall { detail: format!("half-width {half_width} must exceed 1") });
    }
    let lambda_hat = estimate_intensity(p).as_f64();
    if p.is_empty() {
        return Ok(EstimateReport {
            alpha_hat: 0.0,
            nonempty: false,
            dim: p.dim(),
            n_points: 0,
            lambda_hat,
            half_width,
            plan: plan.clone(),
            curve: CurveC { grid: plan.scales.clone(), values: Vec::new(), half_width, tapers: *set.config() },
            log_sums: Vec::new(),
            ci: None,
        });
    }
    if (lambda_hat - 1.0).abs() > INTENSITY_WARN_TOL {
        log::warn!("estimating on a pattern of intensity {lambda_hat:.4}; normalize it first");
    }
    let scales: Vec<T> = plan.scales.iter().map(|&j| T::lit(j)).collect();
    let grid = transform_grid(p, set, &scales)?;
    let curve = curve_from_grid(&grid, p.half_width(), set)?;
    let log_r = half_width.ln();
    let log_sums: Vec<f64> = curve.values.iter().map(|c| c * log_r).collect();
    let alpha_hat = alpha_from_log_sums(p.dim(), half_width, plan, &log_sums)?;
    Ok(EstimateReport {
        alpha_hat,
        nonempty: true,
        dim: p.dim(),
        n_points: p.len(),
        lambda_hat,
        half_width,
        plan: plan.clone(),
        curve,
        log_sums,
        ci: None,
    })
}

/// `1 − log(max σ) / log R`, capped at 1.
pub fn jmax_from_support(max_support: f64, half_width: f64) -> Result<f64> {
    if !(half_width > 1.0) {
        return Err(Error::WindowTooSmall { detail: format!("half-width {half_width} must exceed 1") });
    }
    let j = (1.0 - max_support.ln() / half_width.ln()).min(1.0);
    if !(j > MIN_JMAX) {
        return Err(Error::WindowTooSmall {
            detail: format!("largest taper support {max_support:.3} leaves j_max = {j:.3} in a window of half-width {half_width}"),
        });
    }
    Ok(j)
}

/// Largest scale at which no taper reaches the window border.
pub fn calibrate_jmax<T: Real>(set: &TaperSet<T>, half_width: f64) -> Result<f64> {
    jmax_from_support(set.max_support().as_f64(), half_width)
}

/// Mean diagnostic curve of `replicates` unit-intensity Poisson patterns.
pub fn poisson_reference_curve<T: Real>(set: &TaperSet<T>, half_width: f64, grid: &[f64], replicates: usize, seed: u64) -> Result<CurveC> {
    if replicates == 0 {
        return Err(Error::EmptyInput("replicates"));
    }
    let grid_t: Vec<T> = grid.iter().map(|&j| T::lit(j)).collect();
    let mut sum = vec![0.0; grid.len()];
    for r in 0..replicates {
        let p = simulate::poisson::<T>(set.dim(), 1.0, half_width, child_seed(seed, r as u64))?;
        let c = crate::transforms::curve_c(&p, set, &grid_t)?;
        sum.iter_mut().zip(&c.values).for_each(|(s, v)| *s += v);
    }
    let values = sum.into_iter().map(|s| s / replicates as f64).collect();
    Ok(CurveC { grid: grid.to_vec(), values, half_width, tapers: *set.config() })
}

/// Largest `j` at which the mean Poisson curve is still within
/// [`POISSON_BAND`] below the line of slope `d` fitted on `[0.3, 0.6]`.
pub fn calibrate_jmax_poisson<T: Real>(set: &TaperSet<T>, half_width: f64, replicates: usize, seed: u64) -> Result<f64> {
    if replicates < 5 {
        return Err(Error::InvalidInput("at least 5 Poisson replicates required".into()));
    }
    let grid: Vec<f64> = diagnostic_grid().into_iter().filter(|&j| j >= POISSON_FIT_START).collect();
    let curve = poisson_reference_curve(set, half_width, &grid, replicates, seed)?;
    Ok(jmax_from_reference(&curve, set.dim() as f64))
}

pub(crate) fn jmax_from_reference(curve: &CurveC, slope: f64) -> f64 {
    let resid: Vec<f64> = curve.grid.iter().zip(&curve.values).map(|(j, c)| c - slope * j).collect();
    let fit: Vec<f64> = curve.grid.iter().zip(&resid).filter(|(&j, _)| j <= POISSON_FIT_END).map(|(_, &r)| r).collect();
    let b = if fit.is_empty() { resid[0] } else { fit.iter().sum::<f64>() / fit.len() as f64 };
    // border losses only pull the curve down and grow with j, so the answer is
    // the last point before the final departure below the band
    let last = resid.iter().rposition(|r| r - b >= -POISSON_BAND).unwrap_or(0);
    curve.grid[last]
}

// least squares fit of a·1 + b·j (+ c·(j − knee)_+) and its residual sum of squares
fn rss_fit(js: &[f64], cs: &[f64], knee: Option<f64>) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let cols = if knee.is_some() { 3 } else { 2 };
    let x = DMatrix::from_fn(js.len(), cols, |r, c| match c {
        0 => 1.0,
        1 => js[r],
        _ => (js[r] - knee.unwrap_or(0.0)).max(0.0),
    });
    let y = DVector::from_column_slice(cs);
    let svd = x.clone().svd(true, true);
    match svd.solve(&y, 1e-12) {
        Ok(beta) => (&x * beta - &y).norm_squared(),
        Err(_) => f64::INFINITY,
    }
}

/// Knee of `C` on `(0, j_max]`: breakpoint of the best continuous
/// two-segment linear fit, or `j_max / 2` when that fit is not at least 5%
/// better than a single line.
pub fn select_jmin(curve: &CurveC, j_max: f64) -> Result<f64> {
    let (js, cs): (Vec<f64>, Vec<f64>) =
        curve.grid.iter().zip(&curve.values).filter(|(&j, _)| j > 0.0 && j <= j_max).map(|(&j, &c)| (j, c)).unzip();
    if js.len() < 10 {
        return Err(Error::InvalidInput(format!("only {} curve points below j_max = {j_max}; need 10", js.len())));
    }
    let fallback = j_max / 2.0;
    let rss1 = rss_fit(&js, &cs, None);
    let scale: f64 = cs.iter().map(|c| c * c).sum::<f64>().max(f64::MIN_POSITIVE);
    if rss1 <= 1e-20 * scale {
        return Ok(fallback);
    }
    // at least three points on each side of the breakpoint
    let (knee, rss2) = (2..js.len() - 3)
        .map(|k| (js[k], rss_fit(&js, &cs, Some(js[k]))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one candidate");
    if rss2 <= (1.0 - KNEE_MIN_GAIN) * rss1 && knee < j_max {
        Ok(knee)
    } else {
        Ok(fallback)
    }
}

/// Arithmetic mean of several estimates.
pub fn pooled_estimate(reports: &[EstimateReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("reports"));
    }
    if reports.iter().any(|r| !r.nonempty) {
        return Err(Error::InvalidInput("cannot pool an estimate from an empty pattern".into()));
    }
    Ok(reports.iter().map(|r| r.alpha_hat).sum::<f64>() / reports.len() as f64)
}

/// How the scale range is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScalePolicy {
    /// Analytic `j_max`, knee-selected `j_min`, `n_scales` uniform scales.
    Auto { n_scales: usize },
    /// Fixed range; either end may be left to the automatic rule.
    Range { j_min: Option<f64>, j_max: Option<f64>, n_scales: usize },
    /// Explicit scale list with least-squares weights.
    List(Vec<f64>),
}

impl Default for ScalePolicy {
    fn default() -> Self {
        ScalePolicy::Auto { n_scales: DEFAULT_N_SCALES }
    }
}

/// Output of [`estimate_pattern`].
#[derive(Debug, Clone)]
pub struct PipelineOutput<T: Real> {
    pub report: EstimateReport,
    pub normalized: PointPattern<T>,
    pub normalization: NormalizationRecord<T>,
    /// `C` on the diagnostic grid points up to `j_max` (or the full grid when
    /// requested).
    pub diagnostic_curve: Option<CurveC>,
    pub j_max: f64,
}

/// Normalize, calibrate, select scales and estimate.
pub fn estimate_pattern<T: Real>(
    raw: &PointPattern<T>,
    set: &TaperSet<T>,
    policy: &ScalePolicy,
    full_diagnostic_grid: bool,
) -> Result<PipelineOutput<T>> {
    let (normalized, normalization) = normalize_intensity(raw)?;
    let half_width = normalized.half_width().as_f64();
    let analytic_jmax = || calibrate_jmax(set, half_width);
    let mut diagnostic_curve = None;
    let curve_upto = |j_max: f64, curve_slot: &mut Option<CurveC>| -> Result<CurveC> {
        let grid: Vec<T> = diagnostic_grid()
            .into_iter()
            .filter(|&j| full_diagnostic_grid || j <= j_max + 1e-12)
            .map(|j| T::lit(j))
            .collect();
        let c = crate::transforms::curve_c(&normalized, set, &grid)?;
        *curve_slot = Some(c.clone());
        Ok(c)
    };
    let (plan, j_max) = match policy {
        ScalePolicy::Auto { n_scales } => {
            let j_max = analytic_jmax()?;
            let c = curve_upto(j_max, &mut diagnostic_curve)?;
            let j_min = select_jmin(&c, j_max)?;
            (scale_plan(j_min, j_max, *n_scales)?, j_max)
        }
        ScalePolicy::Range { j_min, j_max, n_scales } => {
            let j_max = match j_max {
                Some(j) => *j,
                None => analytic_jmax()?,
            };
            let j_min = match j_min {
                Some(j) => *j,
                None => {
                    let c = curve_upto(j_max, &mut diagnostic_curve)?;
                    select_jmin(&c, j_max)?
                }
            };
            (scale_plan(j_min, j_max, *n_scales)?, j_max)
        }
        ScalePolicy::List(js) => {
            let plan = least_squares_weights(js)?;
            let j_max = plan.j_max();
            (plan, j_max)
        }
    };
    if full_diagnostic_grid && diagnostic_curve.is_none() {
        curve_upto(j_max, &mut diagnostic_curve)?;
    }
    let report = estimate_alpha(&normalized, set, &plan)?;
    Ok(PipelineOutput { report, normalized, normalization, diagnostic_curve, j_max })
}

/// Convenience: build the default taper family and run the automatic
/// pipeline on a raw pattern.
pub fn estimate_default<T: Real>(raw: &PointPattern<T>) -> Result<EstimateReport> {
    let set = TaperSet::build(TaperConfig::default_for(raw.dim()))?;
    Ok(estimate_pattern(raw, &set, &ScalePolicy::default(), false)?.report)
}
