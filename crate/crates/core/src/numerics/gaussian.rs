//! Square-root factors of covariance matrices and seeded Gaussian sampling.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::rng::stream_rng;

/// Relative threshold below which negative eigenvalues count as round-off.
pub const PSD_CLIP_TOL: f64 = 1e-8;

/// Eigenvalues below this fraction of the largest are set to zero.
pub const EIG_FLOOR: f64 = 1e-10;

/// Draws per random stream; stream `b` produces draws `b*BLOCK..(b+1)*BLOCK`.
pub const SAMPLE_BLOCK: usize = 1024;

/// Symmetric square root `L = V √Λ Vᵀ` of a covariance matrix, with
/// eigenvalues below [`EIG_FLOOR`] relative to the largest set to zero.
///
/// The symmetric root does not depend on the eigenbasis chosen for repeated
/// eigenvalues, so draws vary continuously with the matrix.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    factor: DMatrix<f64>,
    clipped: usize,
}

impl PsdFactor {
    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Number of eigenvalues that were clipped to zero.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }
}

pub fn psd_factor(m: &DMatrix<f64>) -> Result<PsdFactor> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidInput(format!("covariance is {}x{}, not square", n, m.ncols())));
    }
    if n == 0 {
        return Ok(PsdFactor { factor: DMatrix::zeros(0, 0), clipped: 0 });
    }
    let amax = m.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if !amax.is_finite() {
        return Err(Error::InvalidInput("covariance has non-finite entries".into()));
    }
    if amax == 0.0 {
        return Ok(PsdFactor { factor: DMatrix::zeros(n, n), clipped: 0 });
    }
    let asym = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).fold(0.0f64, |a, (i, j)| a.max((m[(i, j)] - m[(j, i)]).abs()));
    if asym > 1e-10 * amax {
        return Err(Error::InvalidInput(format!("covariance is not symmetric (max asymmetry {asym:e})")));
    }
    // Power-of-four prescaling is exact and keeps factor(4^k M) = 2^k factor(M) bitwise.
    let k = (amax.log2() / 2.0).round() as i32;
    let scale = 4f64.powi(k);
    let scaled = m.map(|x| x / scale);
    let eig = SymmetricEigen::new(scaled);
    let max_eig = eig.eigenvalues.max();
    let min_eig = eig.eigenvalues.min();
    if min_eig < -PSD_CLIP_TOL * max_eig.max(0.0) || max_eig < 0.0 {
        return Err(Error::NotPsd { min_eig: min_eig * scale, max_eig: max_eig * scale });
    }
    // √ amplifies round-off near zero, so eigenvalues this small are treated
    // as zero; this keeps the factor stable under rescaling of the input
    let floor = EIG_FLOOR * max_eig;
    let clipped = eig.eigenvalues.iter().filter(|&&l| l < floor).count();
    let roots = eig.eigenvalues.map(|l| if l < floor { 0.0 } else { l.sqrt() });
    let v = &eig.eigenvectors;
    let vs = DMatrix::from_fn(n, n, |i, j| v[(i, j)] * roots[j]);
    let factor = (&vs * v.transpose()).map(|x| x * 2f64.powi(k));
    Ok(PsdFactor { factor, clipped })
}

/// Runs `consume` on successive blocks of Gaussian draws (one draw per
/// column) and returns the per-block results in order.
pub fn mvn_blocks<R, F>(f: &PsdFactor, count: usize, seed: u64, consume: F) -> Vec<R>
where
    R: Send,
    F: Fn(&DMatrix<f64>) -> R + Sync,
{
    let n = f.dim();
    let nblocks = count.div_ceil(SAMPLE_BLOCK);
    (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let len = SAMPLE_BLOCK.min(count - b * SAMPLE_BLOCK);
            let mut rng = stream_rng(seed, b as u64);
            let g = DMatrix::from_fn(n, len, |_, _| StandardNormal.sample(&mut rng));
            let x = f.factor() * g;
            consume(&x)
        })
        .collect()
}

/// `count` i.i.d. draws of `N(0, L Lᵀ)`, one per column.
pub fn mvn_sample(f: &PsdFactor, count: usize, seed: u64) -> DMatrix<f64> {
    let blocks = mvn_blocks(f, count, seed, |x| x.clone());
    let mut out = DMatrix::zeros(f.dim(), count);
    let mut col = 0;
    for b in blocks {
        out.columns_mut(col, b.ncols()).copy_from(&b);
        col += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frob_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn factor_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        let f = psd_factor(&id).unwrap();
        assert!(frob_rel(f.factor(), &id) < 1e-15);

        let d = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        let f = psd_factor(&d).unwrap();
        assert!(frob_rel(f.factor(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])) < 1e-15);

        let r1 = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = psd_factor(&r1).unwrap();
        assert!((f.reconstruct() - &r1).norm() < 1e-10);
    }

    #[test]
    fn clipping_and_rejection() {
        let tiny_neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12]);
        let f = psd_factor(&tiny_neg).unwrap();
        assert_eq!(f.clipped(), 1);
        let clipped = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(frob_rel(&f.reconstruct(), &clipped) < 1e-8);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        assert!(matches!(psd_factor(&bad), Err(Error::NotPsd { .. })));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(psd_factor(&asym).is_err());
    }

    #[test]
    fn power_of_four_scaling_is_exact() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let f1 = psd_factor(&m).unwrap();
        let f2 = psd_factor(&(&m * 16.0)).unwrap();
        assert_eq!(f1.factor() * 4.0, *f2.factor());
    }

    #[test]
    fn identity_covariance_is_recovered() {
        let f = psd_factor(&DMatrix::<f64>::identity(3, 3)).unwrap();
        let n = 100_000;
        let x = mvn_sample(&f, n, 11);
        let cov = &x * x.transpose() / n as f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - target).abs() < 0.02, "{i},{j}: {}", cov[(i, j)]);
            }
        }
    }

    #[test]
    fn zero_factor_and_determinism() {
        let f = psd_factor(&DMatrix::<f64>::zeros(2, 2)).unwrap();
        assert!(mvn_sample(&f, 50, 3).iter().all(|&x| x == 0.0));

        let f = psd_factor(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0])).unwrap();
        assert_eq!(mvn_sample(&f, 3000, 5), mvn_sample(&f, 3000, 5));
        assert_ne!(mvn_sample(&f, 10, 5), mvn_sample(&f, 10, 6));
    }
}
