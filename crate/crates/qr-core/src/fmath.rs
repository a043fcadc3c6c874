//! Thin float helpers backed by `libm` so the crate stays `no_std`.

/// Natural logarithm.
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Largest integer value not above `x`.
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// Smallest integer value not below `x`.
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// Absolute value.
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// `floor(x)` as a saturating non-negative integer.
pub fn floor_u32(x: f64) -> u32 {
    let f = floor(x);
    if f <= 0.0 {
        0
    } else if f >= u32::MAX as f64 {
        u32::MAX
    } else {
        f as u32
    }
}

/// `ceil(x)` as a saturating non-negative integer.
pub fn ceil_u32(x: f64) -> u32 {
    let c = ceil(x);
    if c <= 0.0 {
        0
    } else if c >= u32::MAX as f64 {
        u32::MAX
    } else {
        c as u32
    }
}
