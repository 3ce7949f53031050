//! Round unit sphere helpers. Points are unit 3-vectors; the model space is
//! the open cap of a given radius (< pi/2) around the north pole, which is
//! uniquely geodesic and geodesically convex.

pub const POLE: [f64; 3] = [0.0, 0.0, 1.0];

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm(&a);
    [a[0] / n, a[1] / n, a[2] / n]
}

pub fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Spherical distance via the chord, which stays accurate for nearby points
/// where `acos(dot)` loses half the significant digits.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    let chord = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    2.0 * (0.5 * chord).min(1.0).asin()
}

/// Constant-speed great-circle arc between two non-antipodal points.
pub fn slerp(x: &[f64], y: &[f64], omega: f64, t: f64) -> [f64; 3] {
    if omega == 0.0 {
        return [x[0], x[1], x[2]];
    }
    let s = omega.sin();
    let cx = ((1.0 - t) * omega).sin() / s;
    let cy = (t * omega).sin() / s;
    normalize([
        cx * x[0] + cy * y[0],
        cx * x[1] + cy * y[1],
        cx * x[2] + cy * y[2],
    ])
}

/// Deterministic orthonormal tangent basis at `c`.
pub fn tangent_basis(c: &[f64]) -> ([f64; 3], [f64; 3]) {
    let e = if c[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let ce = dot(c, &e);
    let mut u = [e[0] - ce * c[0], e[1] - ce * c[1], e[2] - ce * c[2]];
    let un = norm(&u);
    u = [u[0] / un, u[1] / un, u[2] / un];
    let v = cross(c, &u);
    (u, v)
}

/// Point at geodesic distance `psi` from `c` in tangent direction `ang`.
pub fn exp_map(c: &[f64], psi: f64, ang: f64) -> [f64; 3] {
    let (u, v) = tangent_basis(c);
    let (s, cs) = psi.sin_cos();
    let (sa, ca) = ang.sin_cos();
    normalize([
        cs * c[0] + s * (ca * u[0] + sa * v[0]),
        cs * c[1] + s * (ca * u[1] + sa * v[1]),
        cs * c[2] + s * (ca * u[2] + sa * v[2]),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_distances_keep_precision() {
        let a = [0.0, 0.0, 1.0];
        let eps = 1e-9;
        let b = normalize([eps, 0.0, 1.0]);
        let d = distance(&a, &b);
        assert!((d - eps).abs() < 1e-18);
    }

    #[test]
    fn exp_map_has_exact_radius() {
        let c = normalize([0.1, -0.2, 0.97]);
        for k in 0..8 {
            let p = exp_map(&c, 0.3, k as f64);
            assert!((distance(&c, &p) - 0.3).abs() < 1e-12);
        }
    }
}
