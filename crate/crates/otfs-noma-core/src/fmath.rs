//! Scalar float helpers routed through `libm` so the crate builds without `std`.

use num_complex::Complex64;

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `e^{jθ}` as a complex number.
#[inline]
pub(crate) fn expi(theta: f64) -> Complex64 {
    Complex64::new(cos(theta), sin(theta))
}

/// Nearest integer with exact halves rounded toward zero.
#[inline]
pub(crate) fn round_ties_to_zero(x: f64) -> f64 {
    let magnitude = x.abs();
    let base = floor(magnitude);
    let rounded = if magnitude - base > 0.5 { base + 1.0 } else { base };
    if x < 0.0 {
        -rounded
    } else {
        rounded
    }
}
