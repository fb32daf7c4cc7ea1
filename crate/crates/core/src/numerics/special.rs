//! Special functions: log-Gamma, trigamma, angular moments of `cos^p sin^q`
//! and the normalized Hermite family.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::signed_log::SignedLogValue;
use crate::scalar::Real;

/// Highest Hermite order for which monomial coefficients are produced.
pub const MAX_HERMITE_ORDER: usize = 64;

/// `ln Γ(z)` for `z > 0`.
pub fn log_gamma(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain("log_gamma", format!("z = {z}")));
    }
    Ok(statrs::function::gamma::ln_gamma(z))
}

/// Trigamma `ψ¹(m)` at a positive integer.
pub fn trigamma(m: u32) -> Result<f64> {
    if m < 1 {
        return Err(Error::domain("trigamma", "m must be at least 1"));
    }
    Ok(trigamma_real(f64::from(m)))
}

// Upward shift to x >= 20, then the asymptotic series; truncation error at
// x = 20 is below 1e-17.
fn trigamma_real(x: f64) -> f64 {
    const SHIFT: f64 = 20.0;
    let mut x = x;
    let mut head = 0.0;
    while x < SHIFT {
        head += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_{2k} / x^{2k+1}
    let series = inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0 + inv2 * (-691.0 / 2730.0))))));
    // sum the small tail first
    series + head
}

/// `B(p, q) = ∫_0^{2π} cos^p θ sin^q θ dθ`, exact via the even-power recursion.
pub fn angular_moment(p: u32, q: u32) -> f64 {
    if p % 2 == 1 || q % 2 == 1 {
        return 0.0;
    }
    let (mut p, mut q) = (p, q);
    let mut factor = 1.0;
    while p >= 2 && q >= 2 {
        let (pf, qf) = (f64::from(p), f64::from(q));
        factor *= (pf - 1.0) * (qf - 1.0) / ((pf + qf) * (pf + qf - 2.0));
        p -= 2;
        q -= 2;
    }
    let rest = p.max(q);
    let single: f64 = (1..=rest / 2).map(|l| 1.0 - 1.0 / (2.0 * f64::from(l))).product();
    2.0 * PI * factor * single
}

/// Monomial coefficients `c_{n,m}` of the L²-normalized Hermite polynomial
/// `H_n(y) = (-1)^n (2^n n! √π)^{-1/2} e^{y²} dⁿ/dyⁿ e^{-y²}`, in log space.
///
/// Entry `m` multiplies `y^m`; entries with `m ≢ n (mod 2)` are zero.
pub fn hermite_coeffs(n: usize) -> Result<Vec<SignedLogValue>> {
    if n > MAX_HERMITE_ORDER {
        return Err(Error::Overflow {
            op: "hermite_coeffs",
            detail: format!("order {n} exceeds {MAX_HERMITE_ORDER}"),
        });
    }
    let lg = |k: usize| statrs::function::gamma::ln_gamma(k as f64 + 1.0);
    let nf = n as f64;
    // physicists' polynomial: n! Σ_k (-1)^k (2y)^{n-2k} / (k! (n-2k)!)
    let log_norm = -0.5 * (nf * std::f64::consts::LN_2 + lg(n) + 0.5 * PI.ln());
    let mut out = vec![SignedLogValue::ZERO; n + 1];
    for k in 0..=n / 2 {
        let m = n - 2 * k;
        let log_mag = log_norm + lg(n) - lg(k) - lg(m) + m as f64 * std::f64::consts::LN_2;
        out[m] = SignedLogValue::new(if k % 2 == 0 { 1 } else { -1 }, log_mag);
    }
    Ok(out)
}

/// Normalized Hermite functions `φ_k(y) = H_k(y) e^{-y²/2}` for
/// `k = 0..out.len()`, by the upward three-term recurrence.
#[inline]
pub fn hermite_functions<T: Real>(y: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    let two = T::lit(2.0);
    out[0] = T::lit(PI.powf(-0.25)) * (-(y * y) / two).exp();
    if out.len() > 1 {
        out[1] = two.sqrt() * y * out[0];
    }
    for k in 2..out.len() {
        let kf = T::from_usize_lossy(k);
        out[k] = (two / kf).sqrt() * y * out[k - 1] - ((kf - T::one()) / kf).sqrt() * out[k - 2];
    }
}

/// `φ_n(y)` alone.
pub fn hermite_function<T: Real>(n: usize, y: T) -> T {
    let mut buf = vec![T::zero(); n + 1];
    hermite_functions(y, &mut buf);
    buf[n]
}
