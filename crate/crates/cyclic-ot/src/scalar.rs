//! Scalar abstraction: every solver is generic over the floating-point type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable throughout the library: f32 or f64.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum<Self> + Debug + Display + Default + 'static
{
    /// Converts an f64 constant (tolerances, literals) into `Self`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in this scalar type")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum<Self>
        + Debug
        + Display
        + Default
        + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_of_squares<T: Real>(xs: &[T]) -> T {
        xs.iter().map(|&x| x * x).sum()
    }

    #[test]
    fn works_for_both_widths() {
        assert_eq!(sum_of_squares(&[1.0f32, 2.0, 3.0]), 14.0f32);
        assert_eq!(sum_of_squares(&[1.0f64, 2.0, 3.0]), 14.0f64);
        assert_eq!(f64::of(0.5), 0.5);
    }
}
