use super::grid::BucketGrid;
use super::{poisson_count, to_pattern, uniform_points};
use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::numerics::rng::{child_seed, stream_rng};
use crate::scalar::Real;

const MAX_ATTEMPTS: u64 = 3;

fn grid_over(ids: &[usize], coords: &[[f64; 2]], half_width: f64) -> BucketGrid {
    let side = 2.0 * half_width;
    let cell = (side * side / ids.len().max(1) as f64).sqrt();
    let mut g = BucketGrid::new(-half_width, side, cell, true);
    for &id in ids {
        g.insert(id, coords[id]);
    }
    g
}

/// Matches every site to a proposal by simultaneous rounds of mutual
/// nearest neighbours on the torus; returns the matched proposal ids.
fn match_rounds(sites: &[[f64; 2]], proposals: &[[f64; 2]], half_width: f64) -> Result<Vec<usize>> {
    let mut open_sites: Vec<usize> = (0..sites.len()).collect();
    let mut open_props: Vec<usize> = (0..proposals.len()).collect();
    let mut matched = Vec::with_capacity(sites.len());
    let mut prop_taken = vec![false; proposals.len()];
    while !open_sites.is_empty() {
        let site_grid = grid_over(&open_sites, sites, half_width);
        let prop_grid = grid_over(&open_props, proposals, half_width);
        let mut site_done = vec![false; sites.len()];
        let mut progress = false;
        for &s in &open_sites {
            let Some((p, _)) = prop_grid.nearest(sites[s], proposals) else { break };
            if prop_taken[p] {
                continue;
            }
            if let Some((back, _)) = site_grid.nearest(proposals[p], sites) {
                if back == s {
                    prop_taken[p] = true;
                    site_done[s] = true;
                    matched.push(p);
                    progress = true;
                }
            }
        }
        if !progress {
            return Err(Error::Unmatchable { proposals: proposals.len(), sites: sites.len() });
        }
        open_sites.retain(|&s| !site_done[s]);
        open_props.retain(|&p| !prop_taken[p]);
        log::trace!("matching round: {} sites left", open_sites.len());
    }
    matched.sort_unstable();
    Ok(matched)
}

/// Poisson points of intensity `lambda_p > 1` thinned by mutual
/// nearest-neighbour matching to the unit lattice on the torus
/// `[-R, R)²`; one proposal survives per lattice site.
///
/// When the proposal count falls short of the site count the draw is
/// repeated with a derived seed, up to three attempts.
pub fn matched_process<T: Real>(lambda_p: f64, half_width: f64, seed: u64) -> Result<PointPattern<T>> {
    if !(lambda_p > 1.0 && lambda_p.is_finite()) {
        return Err(Error::domain("matched_process", format!("lambda_p must exceed 1, got {lambda_p}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::domain("matched_process", format!("bad half-width {half_width}")));
    }
    let per_side = ((2.0 * half_width).round() as usize).max(1);
    let spacing = 2.0 * half_width / per_side as f64;
    let sites: Vec<[f64; 2]> = (0..per_side * per_side)
        .map(|k| {
            let (ix, iy) = (k % per_side, k / per_side);
            [-half_width + spacing * (ix as f64 + 0.5), -half_width + spacing * (iy as f64 + 0.5)]
        })
        .collect();
    let mut last = 0;
    for attempt in 0..MAX_ATTEMPTS {
        let s = if attempt == 0 { seed } else { child_seed(seed, attempt) };
        let mut rng = stream_rng(s, 0);
        let n = poisson_count(&mut rng, lambda_p * (2.0 * half_width).powi(2))?;
        last = n;
        if n < sites.len() {
            log::debug!("matched process: {n} proposals for {} sites, redrawing", sites.len());
            continue;
        }
        let flat = uniform_points(&mut rng, 2, n, half_width);
        let proposals: Vec<[f64; 2]> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let kept = match_rounds(&sites, &proposals, half_width)?;
        let coords = kept.iter().flat_map(|&p| proposals[p]).collect();
        return to_pattern(2, coords, half_width);
    }
    Err(Error::Unmatchable { proposals: last, sites: sites.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_nearest(p: [f64; 2], pts: &[[f64; 2]], open: &[bool], side: f64) -> usize {
        let d2 = |a: [f64; 2], b: [f64; 2]| {
            (0..2)
                .map(|k| {
                    let d = (a[k] - b[k]).abs();
                    let d = d.min(side - d);
                    d * d
                })
                .sum::<f64>()
        };
        (0..pts.len()).filter(|&i| open[i]).min_by(|&a, &b| d2(p, pts[a]).total_cmp(&d2(p, pts[b])).then(a.cmp(&b))).unwrap()
    }

    #[test]
    fn rounds_agree_with_brute_force() {
        // the same simultaneous rounds with exhaustive nearest-neighbour search
        let h = 4.0;
        let mut rng = stream_rng(11, 0);
        let props: Vec<[f64; 2]> = uniform_points(&mut rng, 2, 100, h).chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let sites: Vec<[f64; 2]> = (0..64).map(|k| [-h + 0.5 + (k % 8) as f64, -h + 0.5 + (k / 8) as f64]).collect();
        let fast = match_rounds(&sites, &props, h).unwrap();

        let mut so = vec![true; sites.len()];
        let mut po = vec![true; props.len()];
        let mut slow = Vec::new();
        while so.iter().any(|&b| b) {
            let pairs: Vec<(usize, usize)> = (0..sites.len())
                .filter(|&s| so[s])
                .filter_map(|s| {
                    let p = brute_nearest(sites[s], &props, &po, 2.0 * h);
                    (brute_nearest(props[p], &sites, &so, 2.0 * h) == s).then_some((s, p))
                })
                .collect();
            assert!(!pairs.is_empty());
            for (s, p) in pairs {
                so[s] = false;
                po[p] = false;
                slow.push(p);
            }
        }
        slow.sort_unstable();
        assert_eq!(fast, slow);
    }

    #[test]
    fn one_point_per_site_and_thinning() {
        let p = matched_process::<f64>(2.0, 10.0, 4).unwrap();
        assert_eq!(p.len(), 400);
        let mut rng = stream_rng(4, 0);
        let n = poisson_count(&mut rng, 800.0).unwrap();
        let flat = uniform_points(&mut rng, 2, n, 10.0);
        for x in p.iter() {
            assert!(flat.chunks_exact(2).any(|c| c[0] == x[0] && c[1] == x[1]));
        }
        assert_eq!(p, matched_process::<f64>(2.0, 10.0, 4).unwrap());
    }

    #[test]
    fn needs_excess_proposals() {
        assert!(matched_process::<f64>(1.0, 10.0, 4).is_err());
        assert!(matches!(matched_process::<f64>(1.000_001, 3.0, 1), Ok(_) | Err(Error::Unmatchable { .. })));
    }
}
