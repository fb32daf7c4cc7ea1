use rand::Rng;

use super::grid::BucketGrid;
use super::{poisson_count, to_pattern, uniform_points};
use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::numerics::rng::stream_rng;
use crate::scalar::Real;

/// Random sequential adsorption (Matérn III hard core) in `[-R, R]²`.
///
/// Poisson proposals of intensity `lambda_prop` get i.i.d. uniform marks
/// and are visited in increasing mark order; a proposal is kept unless an
/// already kept point lies within centre distance `r`.
pub fn rsa<T: Real>(lambda_prop: f64, r: f64, half_width: f64, seed: u64) -> Result<PointPattern<T>> {
    if !(lambda_prop > 0.0 && lambda_prop.is_finite() && r > 0.0 && r.is_finite()) {
        return Err(Error::domain("rsa", format!("need lambda_prop > 0 and r > 0, got {lambda_prop}, {r}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::domain("rsa", format!("bad half-width {half_width}")));
    }
    let mut rng = stream_rng(seed, 0);
    let n = poisson_count(&mut rng, lambda_prop * (2.0 * half_width).powi(2))?;
    let flat = uniform_points(&mut rng, 2, n, half_width);
    let props: Vec<[f64; 2]> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let marks: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| marks[a].total_cmp(&marks[b]).then(a.cmp(&b)));

    let mut grid = BucketGrid::new(-half_width, 2.0 * half_width, r, false);
    let mut coords = Vec::new();
    for id in order {
        if !grid.any_within(props[id], r, &props) {
            grid.insert(id, props[id]);
            coords.extend_from_slice(&props[id]);
        }
    }
    to_pattern(2, coords, half_width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_core_holds() {
        let p = rsa::<f64>(3.0, 1.0, 8.0, 2).unwrap();
        let pts: Vec<&[f64]> = p.iter().collect();
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let d = ((pts[a][0] - pts[b][0]).powi(2) + (pts[a][1] - pts[b][1]).powi(2)).sqrt();
                assert!(d >= 1.0, "{d}");
            }
        }
    }

    #[test]
    fn brute_force_agreement() {
        let (lam, r, h) = (2.0, 0.7, 6.0);
        let fast = rsa::<f64>(lam, r, h, 8).unwrap();
        let mut rng = stream_rng(8, 0);
        let n = poisson_count(&mut rng, lam * (2.0 * h) * (2.0 * h)).unwrap();
        let flat = uniform_points(&mut rng, 2, n, h);
        let marks: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| marks[a].total_cmp(&marks[b]));
        let mut kept: Vec<[f64; 2]> = Vec::new();
        for id in order {
            let x = [flat[2 * id], flat[2 * id + 1]];
            if kept.iter().all(|k| (k[0] - x[0]).powi(2) + (k[1] - x[1]).powi(2) >= r * r) {
                kept.push(x);
            }
        }
        let got: Vec<[f64; 2]> = fast.iter().map(|x| [x[0], x[1]]).collect();
        assert_eq!(got, kept);
    }

    #[test]
    fn tiny_radius_keeps_everything() {
        let p = rsa::<f64>(1.0, 1e-12, 10.0, 3).unwrap();
        let mut rng = stream_rng(3, 0);
        assert_eq!(p.len(), poisson_count(&mut rng, 400.0).unwrap());
    }
}
