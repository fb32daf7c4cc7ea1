use serde::{Deserialize, Serialize};

/// A real number stored as `sign * exp(log_magnitude)`.
///
/// Zero is represented by `sign == 0`; its `log_magnitude` is `-inf` and
/// never read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLogValue {
    pub sign: i8,
    pub log_magnitude: f64,
}

impl SignedLogValue {
    pub const ZERO: Self = Self { sign: 0, log_magnitude: f64::NEG_INFINITY };

    pub fn new(sign: i8, log_magnitude: f64) -> Self {
        if sign == 0 || log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { sign: sign.signum(), log_magnitude }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self { sign: if x > 0.0 { 1 } else { -1 }, log_magnitude: x.abs().ln() }
        }
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_magnitude.exp(),
        }
    }

    /// Product; log magnitudes add.
    #[inline]
    pub fn mul(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            Self::ZERO
        } else {
            Self { sign: self.sign * other.sign, log_magnitude: self.log_magnitude + other.log_magnitude }
        }
    }

    /// Multiplies by `exp(log_factor)` (a positive factor).
    #[inline]
    pub fn scale_log(self, log_factor: f64) -> Self {
        if self.is_zero() {
            self
        } else {
            Self { sign: self.sign, log_magnitude: self.log_magnitude + log_factor }
        }
    }
}

/// Streaming sum of signed log-space terms.
///
/// Terms are rescaled against the largest magnitude seen so far, so the
/// running total stays in range whatever the spread of exponents.
#[derive(Debug, Clone, Copy)]
pub struct LogSumAccumulator {
    pivot: f64,
    scaled: f64,
}

impl Default for LogSumAccumulator {
    fn default() -> Self {
        Self { pivot: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSumAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, term: SignedLogValue) {
        if term.is_zero() {
            return;
        }
        if term.log_magnitude > self.pivot {
            self.scaled *= (self.pivot - term.log_magnitude).exp();
            self.pivot = term.log_magnitude;
        }
        self.scaled += f64::from(term.sign) * (term.log_magnitude - self.pivot).exp();
    }

    pub fn total(&self) -> SignedLogValue {
        if self.scaled == 0.0 {
            SignedLogValue::ZERO
        } else {
            SignedLogValue::new(if self.scaled > 0.0 { 1 } else { -1 }, self.pivot + self.scaled.abs().ln())
        }
    }
}

impl FromIterator<SignedLogValue> for SignedLogValue {
    fn from_iter<I: IntoIterator<Item = SignedLogValue>>(iter: I) -> Self {
        let mut acc = LogSumAccumulator::new();
        iter.into_iter().for_each(|t| acc.add(t));
        acc.total()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_handling() {
        assert!(SignedLogValue::from_f64(0.0).is_zero());
        assert_eq!(SignedLogValue::ZERO.to_f64(), 0.0);
        assert!(SignedLogValue::new(1, f64::NEG_INFINITY).is_zero());
        let empty: SignedLogValue = std::iter::empty().collect();
        assert!(empty.is_zero());
    }

    #[test]
    fn products_beyond_f64_range() {
        let big = SignedLogValue::new(1, 700.0 * std::f64::consts::LN_10);
        let tiny = SignedLogValue::new(-1, -690.0 * std::f64::consts::LN_10);
        let p = big.mul(tiny);
        assert_eq!(p.sign, -1);
        assert!((p.to_f64() + 1e10).abs() < 1e-2);
    }

    #[test]
    fn sums_with_cancellation() {
        let xs = [1e300, -1e300, 3.5, -1.25, 1e-300];
        let s: SignedLogValue = xs.iter().map(|&x| SignedLogValue::from_f64(x)).collect();
        // the 1e300 terms cancel exactly in the scaled frame
        assert!((s.to_f64() - 2.25).abs() < 1e-12);
        let ys = [2.0, -0.5, 0.125, 7.0];
        let t: SignedLogValue = ys.iter().map(|&x| SignedLogValue::from_f64(x)).collect();
        assert!((t.to_f64() - 8.625).abs() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn accumulator_matches_plain_sum(xs in prop::collection::vec(-1e3f64..1e3, 1..50)) {
                let s: SignedLogValue = xs.iter().map(|&x| SignedLogValue::from_f64(x)).collect();
                let plain: f64 = xs.iter().sum();
                let scale: f64 = xs.iter().map(|x| x.abs()).sum();
                prop_assert!((s.to_f64() - plain).abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }
}
