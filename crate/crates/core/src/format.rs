//! Text formatting shared by the CSV writers.

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn float17(x: f64) -> String {
    format!("{x:.16e}")
}
