//! Plain CSV output: `.` decimal separator, 17 significant digits.

/// Formats a real so that parsing it back yields the same `f64`.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}
