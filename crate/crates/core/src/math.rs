// Thin wrappers over libm so the rest of the crate reads like std float code.

pub(crate) use core::f64::consts::{FRAC_PI_2, PI, TAU};

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    libm::sincos(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// Wraps an angle to (−π, π].
pub(crate) fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a - TAU * floor((a + PI) / TAU);
    // r is in [−π, π) up to rounding
    if r <= -PI {
        r + TAU
    } else if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wraps an angle to (−π/2, π/2], i.e. the signed angle to an undirected axis.
pub(crate) fn wrap_half_angle(a: f64) -> f64 {
    let mut e = wrap_angle(a);
    if e > FRAC_PI_2 {
        e -= PI;
    } else if e <= -FRAC_PI_2 {
        e += PI;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert_eq!(wrap_half_angle(-FRAC_PI_2), FRAC_PI_2);
        assert!((wrap_half_angle(PI - 0.2) + 0.2).abs() < 1e-12);
    }
}
