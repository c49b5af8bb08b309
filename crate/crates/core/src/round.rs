//! Decimal rounding used to keep serialized output byte-stable.

/// Round to 10 significant decimal digits.
///
/// All floating-point values are passed through this before serialization so
/// that re-runs produce byte-identical artifacts regardless of benign
/// platform-level differences in the last couple of bits.
pub fn sig10(x: f64) -> f64 {
    round_sig(x, 10)
}

/// Round `x` to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits - 1 - magnitude);
    (x * factor).round() / factor
}
