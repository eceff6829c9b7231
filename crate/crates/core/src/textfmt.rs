//! Shortest round-trip float formatting for text outputs.

/// Plain decimal for moderate magnitudes, exponent form otherwise.
/// Parsing the result gives back the identical `f64`.
pub fn float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
