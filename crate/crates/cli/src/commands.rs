use crate::args::{CiPreset, CoverageArgs, CurveArgs, EstimateArgs, InputArgs, SimulateArgs};
use crate::error::CliError;
use crate::io::{emit, expand_inputs, pattern_csv, read_points, sibling, to_pattern};
use hyperu_core::estimator::{
    calibrate_jmax_poisson, diagnostic_grid, estimate_alpha, estimate_pattern, poisson_reference_curve, pooled_estimate,
    scale_plan, PipelineOutput, ScalePolicy,
};
use hyperu_core::geometry::normalize_intensity;
use hyperu_core::inference::{coverage_study, CoverageConfig, REDUCED_CI_SCALES};
use hyperu_core::transforms::curve_c;
use hyperu_core::{confidence_interval, CiOptions, ConfidenceInterval, CovCache, CurveC, PointPattern, SimSpec, TaperConfig, TaperSet};
use serde_json::{json, Value};
use std::path::PathBuf;

pub const SCHEMA_VERSION: u32 = 1;

/// How far the Poisson cross-check may drift from the analytic `j_max` before
/// a warning is logged.
const JMAX_AGREEMENT: f64 = 0.1;

fn load(input: &InputArgs) -> Result<Vec<(PathBuf, PointPattern)>, CliError> {
    if input.dim == 0 {
        return Err(CliError::Parse("--dim must be positive".into()));
    }
    expand_inputs(&input.input)?
        .into_iter()
        .map(|path| {
            let raw = read_points(&path, input.dim)?;
            let p = to_pattern(&raw, input.half_width, input.drop_outside, &path)?;
            Ok((path, p))
        })
        .collect()
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialize");
    s.push('\n');
    s
}

fn policy(args: &EstimateArgs) -> ScalePolicy {
    match (&args.scales, args.jmin, args.jmax) {
        (Some(js), _, _) => ScalePolicy::List(js.clone()),
        (None, None, None) => ScalePolicy::Auto { n_scales: args.nscales },
        (None, j_min, j_max) => ScalePolicy::Range { j_min, j_max, n_scales: args.nscales },
    }
}

fn mean_curve(curves: &[CurveC]) -> CurveC {
    let mut out = curves[0].clone();
    for (k, v) in out.values.iter_mut().enumerate() {
        *v = curves.iter().map(|c| c.values[k]).sum::<f64>() / curves.len() as f64;
    }
    out
}

fn interval(args: &EstimateArgs, level: f64, run: &PipelineOutput<f64>, set: &TaperSet) -> Result<ConfidenceInterval, CliError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Parse(format!("--ci-level must lie in (0, 1), got {level}")));
    }
    let cache = args.cache_dir.as_ref().map(CovCache::new).transpose()?;
    let opts = CiOptions { a: 1.0 - level, draws: args.ci_draws, seed: args.seed, beta_override: None, cache: cache.as_ref() };
    let report = &run.report;
    match args.ci_preset {
        CiPreset::Full => Ok(confidence_interval(report, set, &report.plan, &opts)?),
        CiPreset::Reduced => {
            let reduced = TaperSet::build(TaperConfig::new(report.dim, 4, args.tapers.taper_scale))?;
            let plan = scale_plan(report.plan.j_min(), report.plan.j_max(), REDUCED_CI_SCALES)?;
            let r = estimate_alpha(&run.normalized, &reduced, &plan)?;
            Ok(confidence_interval(&r, &reduced, &plan, &opts)?)
        }
    }
}

fn poisson_check(k: usize, set: &TaperSet, half_width: f64, j_max: f64, seed: u64) -> Result<f64, CliError> {
    let jp = calibrate_jmax_poisson(set, half_width, k, seed)?;
    if (jp - j_max).abs() > JMAX_AGREEMENT {
        log::warn!("Poisson reference places j_max at {jp:.3}, analytic rule gives {j_max:.3}");
    }
    Ok(jp)
}

pub fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let patterns = load(&args.input)?;
    let set = TaperSet::build(args.tapers.config(args.input.dim))?;
    let policy = policy(args);
    let curve_path = args.output.as_deref().map(|p| sibling(p, "curve.csv"));

    let runs: Vec<PipelineOutput<f64>> =
        patterns.iter().map(|(_, p)| estimate_pattern(p, &set, &policy, true)).collect::<Result<_, _>>()?;
    let curves: Vec<CurveC> = runs.iter().filter_map(|r| r.diagnostic_curve.clone()).collect();
    if let Some(path) = &curve_path {
        emit(Some(path), &mean_curve(&curves).to_csv())?;
    }
    let config_echo = serde_json::to_value(args).expect("arguments serialize");

    let value = if let [(_, raw)] = patterns.as_slice() {
        let run = &runs[0];
        let report = &run.report;
        let j_max_poisson = match args.poisson_reference {
            Some(k) => Some(poisson_check(k, &set, report.half_width, run.j_max, args.seed)?),
            None => None,
        };
        let ci = match args.ci_level {
            Some(level) => Some(interval(args, level, run, &set)?),
            None => None,
        };
        json!({
            "schema_version": SCHEMA_VERSION,
            "alpha_hat": report.alpha_hat,
            "ci": ci.map(|c| json!({
                "lo": c.lo, "hi": c.hi, "level": c.level, "alpha_hat": c.alpha_hat, "beta": c.beta,
                "draws": c.draws, "seed": c.seed, "n_tapers": c.n_tapers, "n_scales": c.n_scales,
            })),
            "lambda_hat": report.lambda_hat,
            "R": raw.half_width(),
            "R_normalized": report.half_width,
            "j_min": report.plan.j_min(),
            "j_max": report.plan.j_max(),
            "j_max_poisson": j_max_poisson,
            "n_scales": report.plan.len(),
            "n_tapers": set.len(),
            "n_points": report.n_points,
            "curve_path": curve_path,
            "config_echo": config_echo,
        })
    } else {
        if args.ci_level.is_some() {
            return Err(CliError::Parse("--ci-level applies to a single pattern, not a frame sequence".into()));
        }
        let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
        let n = reports.len() as f64;
        let frames: Vec<Value> = patterns
            .iter()
            .zip(&reports)
            .map(|((path, raw), r)| {
                json!({
                    "path": path, "alpha_hat": r.alpha_hat, "lambda_hat": r.lambda_hat, "R": raw.half_width(),
                    "j_min": r.plan.j_min(), "j_max": r.plan.j_max(), "n_points": r.n_points,
                })
            })
            .collect();
        json!({
            "schema_version": SCHEMA_VERSION,
            "alpha_hat": pooled_estimate(&reports)?,
            "ci": null,
            "lambda_hat": reports.iter().map(|r| r.lambda_hat).sum::<f64>() / n,
            "R": patterns.iter().map(|(_, p)| p.half_width()).sum::<f64>() / n,
            "j_min": reports.iter().map(|r| r.plan.j_min()).sum::<f64>() / n,
            "j_max": reports.iter().map(|r| r.plan.j_max()).sum::<f64>() / n,
            "n_points": reports.iter().map(|r| r.n_points).sum::<usize>(),
            "n_frames": reports.len(),
            "frames": frames,
            "curve_path": curve_path,
            "config_echo": config_echo,
        })
    };
    emit(args.output.as_deref(), &json_text(&value))
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let variant = args.process.variant().map_err(CliError::Parse)?;
    let spec = SimSpec::new(variant, args.process.half_width, args.seed)?;
    let p = spec.simulate::<f64>()?;
    emit(args.output.as_deref(), &pattern_csv(&p))?;
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "spec": spec,
        "n_points": p.len(),
        "dim": p.dim(),
    });
    match args.metadata.clone().or_else(|| args.output.as_deref().map(|o| o.with_extension("json"))) {
        Some(path) => emit(Some(&path), &json_text(&meta)),
        None => {
            log::info!("simulated {} points", p.len());
            Ok(())
        }
    }
}

pub fn curve(args: &CurveArgs) -> Result<(), CliError> {
    let patterns = load(&args.input)?;
    let set = TaperSet::build(args.tapers.config(args.input.dim))?;
    let grid = diagnostic_grid();
    let mut half_widths = Vec::new();
    let curves: Vec<CurveC> = patterns
        .iter()
        .map(|(_, p)| {
            let (q, _) = normalize_intensity(p)?;
            half_widths.push(q.half_width());
            curve_c(&q, &set, &grid)
        })
        .collect::<Result<_, _>>()?;
    let mean = mean_curve(&curves);
    let reference = match args.poisson_reference {
        Some(k) => {
            if half_widths.iter().any(|r| (r - half_widths[0]).abs() > 1e-9 * half_widths[0]) {
                log::warn!("frames differ in normalized window size; the reference uses the first");
            }
            Some(poisson_reference_curve(&set, half_widths[0], &grid, k, args.seed)?)
        }
        None => None,
    };
    let mut s = String::from(if reference.is_some() { "j,C,C_poisson\n" } else { "j,C\n" });
    for (k, (j, c)) in mean.grid.iter().zip(&mean.values).enumerate() {
        match &reference {
            Some(r) => s.push_str(&format!("{j},{c},{}\n", r.values[k])),
            None => s.push_str(&format!("{j},{c}\n")),
        }
    }
    emit(args.output.as_deref(), &s)
}

pub fn coverage(args: &CoverageArgs) -> Result<(), CliError> {
    let variant = args.process.variant().map_err(CliError::Parse)?;
    if !(args.ci_level > 0.0 && args.ci_level < 1.0) {
        return Err(CliError::Parse(format!("--ci-level must lie in (0, 1), got {}", args.ci_level)));
    }
    let mut cfg = CoverageConfig::new(variant, args.process.half_width, args.true_alpha, args.replicates, args.seed);
    cfg.a = 1.0 - args.ci_level;
    cfg.draws = args.ci_draws;
    cfg.tapers = TaperConfig::new(2, args.imax, args.taper_scale);
    cfg.n_scales = args.nscales;
    cfg.pilot_replicates = args.pilots;
    let report = coverage_study(&cfg)?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "coverage": report.coverage,
        "covered": report.covered,
        "replicates": report.intervals.len(),
        "true_alpha": args.true_alpha,
        "level": args.ci_level,
        "mean_alpha_hat": report.mean_alpha_hat,
        "mean_width": report.mean_width,
        "j_min": report.plan.j_min(),
        "j_max": report.plan.j_max(),
        "intervals": report.intervals.iter().map(|c| json!({"lo": c.lo, "hi": c.hi, "alpha_hat": c.alpha_hat})).collect::<Vec<_>>(),
        "config_echo": serde_json::to_value(args).expect("arguments serialize"),
    });
    emit(args.output.as_deref(), &json_text(&value))
}
