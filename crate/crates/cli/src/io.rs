use crate::error::CliError;
use hyperu_core::geometry::OutsidePolicy;
use hyperu_core::{PointPattern, Window};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Flat row-major coordinates read from a CSV file.
#[derive(Debug, Clone)]
pub struct RawPoints {
    pub dim: usize,
    pub coords: Vec<f64>,
}

/// Parses `x,y` rows. Lines starting with `#` are skipped, and a first row
/// that does not parse as numbers is taken as a header.
pub fn read_points(path: &Path, dim: usize) -> Result<RawPoints, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let mut coords = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(e) => return Err(CliError::Parse(format!("{}: line {line}: {e}", path.display()))),
        };
        first = false;
        if row.len() != dim {
            return Err(CliError::Parse(format!(
                "{}: line {line}: expected {dim} coordinates, found {}",
                path.display(),
                row.len()
            )));
        }
        if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Parse(format!("{}: line {line}: non-finite coordinate {bad}", path.display())));
        }
        coords.extend(row);
    }
    Ok(RawPoints { dim, coords })
}

/// Builds the pattern in `[-R, R]^d`. Without `R` the points are centred on
/// their bounding box and the tight bounding cube is used.
pub fn to_pattern(raw: &RawPoints, half_width: Option<f64>, drop_outside: bool, source: &Path) -> Result<PointPattern, CliError> {
    let d = raw.dim;
    if raw.coords.is_empty() {
        return Err(CliError::Empty(source.display().to_string()));
    }
    let policy = if drop_outside { OutsidePolicy::Drop } else { OutsidePolicy::Reject };
    let (coords, r) = match half_width {
        Some(r) => (raw.coords.clone(), r),
        None => {
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for p in raw.coords.chunks_exact(d) {
                for k in 0..d {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            let r = (0..d).map(|k| (hi[k] - lo[k]) / 2.0).fold(0.0, f64::max);
            log::warn!(
                "{}: no --half-width given, using the bounding cube of the data (R = {r}); an under-covered window biases the intensity upward",
                source.display()
            );
            let centre: Vec<f64> = (0..d).map(|k| (lo[k] + hi[k]) / 2.0).collect();
            let coords = raw.coords.chunks_exact(d).flat_map(|p| p.iter().zip(&centre).map(|(x, c)| (x - c).clamp(-r, r))).collect();
            (coords, r)
        }
    };
    let window = Window::cube(r).map_err(|e| CliError::Parse(format!("{}: {e}", source.display())))?;
    let p = PointPattern::new(d, coords, window, policy).map_err(|e| CliError::Parse(format!("{}: {e}", source.display())))?;
    if p.is_empty() {
        return Err(CliError::Empty(source.display().to_string()));
    }
    Ok(p)
}

/// Expands globs; plain paths pass through so missing files are reported
/// by the reader.
pub fn expand_inputs(inputs: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for s in inputs {
        if s.contains(['*', '?', '[']) {
            let mut hits: Vec<PathBuf> = glob::glob(s)
                .map_err(|e| CliError::Parse(format!("bad glob {s}: {e}")))?
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Parse(e.to_string()))?;
            if hits.is_empty() {
                return Err(CliError::Parse(format!("glob {s} matched no files")));
            }
            hits.sort();
            out.extend(hits);
        } else {
            out.push(PathBuf::from(s));
        }
    }
    Ok(out)
}

pub fn pattern_csv(p: &PointPattern) -> String {
    let header = if p.dim() == 1 { "x".to_string() } else { ["x", "y", "z"].iter().chain(std::iter::repeat(&"w")).take(p.dim()).cloned().collect::<Vec<_>>().join(",") };
    let mut s = header + "\n";
    for pt in p.iter() {
        let row: Vec<String> = pt.iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Writes to `path`, or stdout when `None`.
pub fn emit(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// `out.json` → `out.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}
