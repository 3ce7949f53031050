//! Euclidean cone of total angle `theta`: the chart is `(radius, angle)` with
//! `radius >= 0` and `angle` taken modulo `theta`. Distances and geodesics come
//! from developing the cone onto the plane.

/// Reduce an angle into `[0, theta)`.
pub fn wrap_angle(alpha: f64, theta: f64) -> f64 {
    let mut a = alpha % theta;
    if a < 0.0 {
        a += theta;
    }
    // `% theta` can return `theta` itself after the correction when alpha is a
    // tiny negative number.
    if a >= theta {
        a -= theta;
    }
    a
}

/// Angular gap between two chart angles, measured the short way around.
pub fn angular_gap(a1: f64, a2: f64, theta: f64) -> f64 {
    let raw = (wrap_angle(a1, theta) - wrap_angle(a2, theta)).abs();
    raw.min(theta - raw)
}

/// Signed developed angle of `a2` relative to `a1`, in `(-theta/2, theta/2]`.
pub fn signed_gap(a1: f64, a2: f64, theta: f64) -> f64 {
    let d = wrap_angle(a2 - a1, theta);
    if d <= theta / 2.0 {
        d
    } else {
        d - theta
    }
}

/// Exact cone distance from the unfolding law of cosines, in the
/// cancellation-free form `(r1-r2)^2 + 4 r1 r2 sin^2(gap/2)` that keeps
/// relative accuracy for nearby points.
pub fn distance(r1: f64, a1: f64, r2: f64, a2: f64, theta: f64) -> f64 {
    if r1 == 0.0 || r2 == 0.0 {
        return r1 + r2;
    }
    let gap = angular_gap(a1, a2, theta);
    if gap >= std::f64::consts::PI {
        // Unreachable for theta < 2*pi; kept for completeness.
        return r1 + r2;
    }
    let s = (gap / 2.0).sin();
    let dr = r1 - r2;
    (dr * dr + 4.0 * r1 * r2 * s * s).sqrt()
}

/// Develop the pair into the plane: x at `(r1, 0)`, y at the signed gap.
pub fn develop(r1: f64, a1: f64, r2: f64, a2: f64, theta: f64) -> ([f64; 2], [f64; 2]) {
    let s = signed_gap(a1, a2, theta);
    ([r1, 0.0], [r2 * s.cos(), r2 * s.sin()])
}

/// Refold a developed point back into the chart, given the chart angle that
/// development angle zero corresponds to. Returns `(radius, angle, dev_angle)`.
pub fn refold(p: [f64; 2], base_angle: f64, theta: f64) -> (f64, f64, f64) {
    let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
    if rho == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let phi = p[1].atan2(p[0]);
    (rho, wrap_angle(base_angle + phi, theta), phi)
}
