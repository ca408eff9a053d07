//! Scalar abstraction over the floating-point types used for distances.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar for distances, spectra and slopes: `f32` or `f64`.
///
/// All core math is written against this trait; the crate root exports
/// concrete `f64` aliases for the common case.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Parse a decimal produced by [`Scalar::format_full`]; accepts `inf` and `-inf`.
    fn parse_decimal(s: &str) -> Option<Self>;

    /// Print with enough significant digits for a bit-exact round trip.
    fn format_full(self) -> String;
}

impl Scalar for f64 {
    fn parse_decimal(s: &str) -> Option<Self> {
        match s.trim() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            other => other.parse().ok(),
        }
    }

    fn format_full(self) -> String {
        if self.is_infinite() {
            return if self > 0.0 { "inf".into() } else { "-inf".into() };
        }
        // 17 significant digits round-trip any f64.
        format!("{:.16e}", self)
    }
}

impl Scalar for f32 {
    fn parse_decimal(s: &str) -> Option<Self> {
        match s.trim() {
            "inf" => Some(f32::INFINITY),
            "-inf" => Some(f32::NEG_INFINITY),
            other => other.parse().ok(),
        }
    }

    fn format_full(self) -> String {
        if self.is_infinite() {
            return if self > 0.0 { "inf".into() } else { "-inf".into() };
        }
        format!("{:.8e}", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip_is_bit_exact() {
        for &x in &[0.0f64, 1.0, 2.0 / 3.0, std::f64::consts::PI, 1e-300, 6.25e17] {
            let s = x.format_full();
            let back = f64::parse_decimal(&s).unwrap();
            assert_eq!(x.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn infinities() {
        assert_eq!(f64::INFINITY.format_full(), "inf");
        assert_eq!(f64::parse_decimal("inf"), Some(f64::INFINITY));
        assert_eq!(f64::parse_decimal("-inf"), Some(f64::NEG_INFINITY));
    }
}
