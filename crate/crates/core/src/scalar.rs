//! Scalar abstraction for the exact-algebra parts of the crate.
//!
//! Confusion matrices, Dirichlet updates, effective matrices and the
//! correlation formulas only need field arithmetic and an ordering, so they
//! are written against [`Scalar`]. That lets the same code run on `f64`,
//! `f32` and exact rationals such as [`num_rational::Rational64`].

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Numeric type usable for counts, concentrations and correlations.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {
    /// Lossy conversion used at the boundary to the sampling code.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `n` as a scalar. Panics only if the type cannot represent small integers.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("scalar type must represent small integers")
    }

    fn is_negative(self) -> bool {
        self < Self::zero()
    }

    /// Clamp into `[lo, hi]`. NaN-like values that compare false stay unchanged.
    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        if self < lo {
            lo
        } else if self > hi {
            hi
        } else {
            self
        }
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn rational_counts() {
        let third = Rational64::new(1, 3);
        assert_eq!(Rational64::from_count(3) * third, Rational64::from_integer(1));
        assert!((third.to_f64_lossy() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn clamp() {
        assert_eq!((-0.5f64).clamp_to(0.0, 1.0), 0.0);
        assert_eq!(1.5f32.clamp_to(0.0, 1.0), 1.0);
        assert_eq!(0.25f64.clamp_to(0.0, 1.0), 0.25);
    }
}
