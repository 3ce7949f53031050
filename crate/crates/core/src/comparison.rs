//! Euclidean comparison triangles, the two notions of angle, and the
//! closed-form error functions that control how far comparison angles can
//! drift from the limit angles.
//!
//! Angle from a fixed point `p` at `x` along a unit-speed geodesic `xi`:
//! the limit of comparison angles at `x` of the triangles `(p, x, xi(t))` as
//! `t` shrinks. Concavity of squared distances makes the defining cosine
//! quotient monotone along a shrinking grid, so the limit is certified by
//! monotonicity rather than assumed.
//!
//! Angle of fixed scale between two geodesics from a common point: the
//! monotone limit of comparison angles under simultaneous rescaling; it
//! depends only on the ratio of the two scales.

use crate::chart::PointChart;
use crate::error::{Error, Result};
use crate::space::{CurvatureParams, GeodesicSegment, SpaceModel};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Hard cap on grid halvings for monotone limits.
const MAX_HALVINGS: usize = 48;
/// Convergence target on successive cosine values.
const COS_STOP: f64 = 1e-10;
/// Absolute monotonicity slack on cosines before declaring a violation.
const MONOTONE_TOL: f64 = 1e-9;
/// Tolerance for finite-difference cross-checks of distance derivatives.
pub const DERIVATIVE_TOL: f64 = 1e-5;

/// Which concavity hypothesis drives the monotone limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleMode {
    /// Squared distances are S-concave: the cosine quotient
    /// `(|px|^2 - |p xi(t)|^2 + S t^2) / (2 t |px|)` decreases to its limit
    /// along a shrinking grid.
    Concave,
    /// Squared distances are (C, D)-semi-convex and `|px| < D`: the quotient
    /// `(|px|^2 - |p xi(t)|^2 - C t^2) / (2 t |px|)` increases to its limit.
    SemiConvex,
}

/// Euclidean comparison triangle, stored by side lengths
/// `a = |xy|, b = |xz|, c = |yz|`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ComparisonTriangle {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ComparisonTriangle {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let slack = 1e-9 * (a + b + c).max(1.0);
        if a < 0.0 || b < 0.0 || c < 0.0 {
            return Err(Error::Domain("negative side length".into()));
        }
        if c > a + b + slack || c + slack < (a - b).abs() {
            return Err(Error::Domain(format!(
                "side lengths ({a}, {b}, {c}) violate the triangle inequality"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Angle at the vertex `x` (between the sides of lengths `a` and `b`).
    pub fn angle_at_x(&self) -> Result<f64> {
        comparison_angle(self.a, self.b, self.c)
    }

    pub fn angles(&self) -> Result<[f64; 3]> {
        Ok([
            comparison_angle(self.a, self.b, self.c)?,
            comparison_angle(self.a, self.c, self.b)?,
            comparison_angle(self.b, self.c, self.a)?,
        ])
    }
}

/// Angle at the vertex joining sides `a` and `b`, opposite side `c`, by the
/// law of cosines with the cosine clamped to [-1, 1].
pub fn comparison_angle(a: f64, b: f64, c: f64) -> Result<f64> {
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::DegenerateVertex);
    }
    let slack = 1e-9 * (a + b + c).max(1.0);
    if c > a + b + slack || c + slack < (a - b).abs() {
        return Err(Error::Domain(format!(
            "side lengths ({a}, {b}, {c}) violate the triangle inequality"
        )));
    }
    let cos = (a * a + b * b - c * c) / (2.0 * a * b);
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// The four closed-form error budgets attached to angles and strainers, all
/// of the shape `arccos(1 - coefficient * t / (2 d))`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// `arccos(1 - (S-1) t / (2 d))`: slack of the almost comparison upper
    /// bound in S-concave spaces.
    pub delta_s: f64,
    /// `arccos(1 - (C+1) t / (2 d))`: slack of the lower bound in
    /// semi-convex spaces.
    pub delta_c: f64,
    /// `arccos(1 - S t / (2 d))`: opposite-strainer budget.
    pub bar_delta_s: f64,
    /// `arccos(1 - (S+C) t / (2 d))`: hierarchical strainer-distance budget.
    pub bar_delta_sc: f64,
    /// Set when any arccos argument had to be clamped, i.e. the input left
    /// the domain where the budget is meaningful.
    pub clamped: bool,
}

/// Evaluate all four error functions at ratio `t / d`.
pub fn error_functions(params: &CurvatureParams, t: f64, d: f64) -> Result<ErrorBudget> {
    if d <= 0.0 {
        return Err(Error::Domain(format!(
            "error functions need d > 0, got {d}"
        )));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!(
            "error functions need t >= 0, got {t}"
        )));
    }
    let mut clamped = false;
    let mut ac = |coeff: f64| -> f64 {
        let arg = 1.0 - coeff * t / (2.0 * d);
        if arg < -1.0 - 1e-9 {
            clamped = true;
        }
        arg.clamp(-1.0, 1.0).acos()
    };
    let delta_s = ac(params.s - 1.0);
    let delta_c = ac(params.c + 1.0);
    let bar_delta_s = ac(params.s);
    let bar_delta_sc = ac(params.s + params.c);
    Ok(ErrorBudget {
        delta_s,
        delta_c,
        bar_delta_s,
        bar_delta_sc,
        clamped,
    })
}

/// `arccos(1 - S t / (2 d))`, the opposite-strainer budget on its own.
pub fn bar_delta_s(s: f64, t: f64, d: f64) -> f64 {
    (1.0 - s * t / (2.0 * d)).clamp(-1.0, 1.0).acos()
}

/// `arccos(1 - (S+C) t / (2 d))`, the hierarchical-distance budget.
pub fn bar_delta_sc(s: f64, c: f64, t: f64, d: f64) -> f64 {
    (1.0 - (s + c) * t / (2.0 * d)).clamp(-1.0, 1.0).acos()
}

/// An extracted monotone limit: the angle value, the shrinking grid used,
/// the final successive gap, and whether monotonicity held along the way.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngleEstimate {
    /// Radians in [0, pi].
    pub value: f64,
    /// The decreasing parameter grid actually evaluated.
    pub grid: Vec<f64>,
    /// Last successive difference of the cosine sequence.
    pub residual: f64,
    /// Whether the cosine sequence was monotone in the direction the active
    /// hypothesis dictates, within tolerance.
    pub monotone_ok: bool,
    /// Whether any cosine left [-1, 1] by more than 1e-9 before clamping.
    pub clamped: bool,
}

/// Extract a limit from a monotone cosine sequence along a halving grid.
///
/// `direction`: +1 when the sequence must be non-decreasing along the grid
/// (towards smaller parameters), -1 when non-increasing. `noise(t)` bounds
/// the round-off expected at grid value `t`; once successive differences sink
/// into it, further halving only amplifies cancellation, so extraction stops.
fn monotone_limit(
    t0: f64,
    cos_at: impl Fn(f64) -> f64,
    direction: f64,
    noise: impl Fn(f64) -> f64,
) -> (f64, Vec<f64>, f64, bool, bool) {
    let mut grid = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut noises: Vec<f64> = Vec::new();
    let mut monotone_ok = true;
    let mut clamped = false;
    let mut t = t0;
    // Convergence, monotonicity and extrapolation all watch the raw
    // quotients: clamping first would fake plateaus at +-1 (radial-ish
    // configurations legitimately start outside [-1, 1]).
    // Set when the loop quit because gaps sank into round-off (or ran out of
    // halvings) rather than genuinely converging; only then is the tail
    // correction below warranted.
    let mut noise_stopped = true;
    for _ in 0..=MAX_HALVINGS {
        let v = cos_at(t);
        if v.abs() > 1.0 + 1e-9 {
            clamped = true;
        }
        grid.push(t);
        noises.push(noise(t));
        if let Some(&prev) = values.last() {
            let step = (v - prev) * direction;
            let tol = MONOTONE_TOL.max(4.0 * noise(t));
            if step < -tol {
                monotone_ok = false;
            }
            let delta = (v - prev).abs();
            values.push(v);
            if delta < COS_STOP {
                noise_stopped = false;
                break;
            }
            if delta < 4.0 * noise(t) {
                break;
            }
        } else {
            values.push(v);
        }
        t /= 2.0;
    }
    let last = *values.last().unwrap();
    let residual = if values.len() >= 2 {
        (last - values[values.len() - 2]).abs()
    } else {
        0.0
    };
    // The raw final value only reaches the cancellation floor, so the limit
    // is recovered from the clean part of the tail (successive gaps still
    // dominating round-off by two orders): a least-squares linear fit in t
    // over the deepest clean points when the tail is linear there, otherwise
    // one geometric-sum step from the deepest clean triple. Monotonicity
    // bounds either correction: it may move past the deepest value, never
    // back behind it.
    let guard = |ext: f64| {
        if direction < 0.0 {
            ext.min(last)
        } else {
            ext.max(last)
        }
    };
    let mut limit = last;
    let clean = |i: usize| i >= 1 && (values[i] - values[i - 1]).abs() > 100.0 * noises[i];
    let mut hi = values.len() - 1;
    while hi >= 1 && !clean(hi) {
        hi -= 1;
    }
    let mut lo = hi;
    while lo >= 1 && clean(lo) {
        lo -= 1;
    }
    if noise_stopped && hi > lo {
        // Deeper half of the clean run, at least four points when available.
        let start = lo + (hi - lo) / 2;
        let start = start.min(hi.saturating_sub(3)).max(lo);
        let ts = &grid[start..=hi];
        let vs = &values[start..=hi];
        let mut fitted = false;
        if ts.len() >= 4 {
            let n = ts.len() as f64;
            let mt = ts.iter().sum::<f64>() / n;
            let mv = vs.iter().sum::<f64>() / n;
            let stt: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
            let stv: f64 = ts.iter().zip(vs).map(|(t, v)| (t - mt) * (v - mv)).sum();
            if stt > 0.0 {
                let slope = stv / stt;
                let intercept = mv - slope * mt;
                let fit_err = ts
                    .iter()
                    .zip(vs)
                    .map(|(t, v)| (v - (intercept + slope * t)).abs())
                    .fold(0.0f64, f64::max);
                let noise_cap = ts
                    .iter()
                    .zip(&noises[start..=hi])
                    .map(|(_, n)| *n)
                    .fold(0.0f64, f64::max);
                if fit_err <= 5.0 * noise_cap + 1e-15 {
                    limit = guard(intercept);
                    fitted = true;
                }
            }
        }
        if !fitted && hi >= 2 && clean(hi) && clean(hi - 1) {
            let d1 = values[hi - 1] - values[hi - 2];
            let d2 = values[hi] - values[hi - 1];
            if d1 != 0.0 {
                let q = d2 / d1;
                if (0.15..=0.8).contains(&q) {
                    limit = guard(values[hi] + d2 * q / (1.0 - q));
                }
            }
        }
    }
    (limit.clamp(-1.0, 1.0), grid, residual, monotone_ok, clamped)
}

/// The angle viewed from `p` at `xi(0)` along the unit-speed geodesic `xi`.
///
/// Fails with a curvature-violation error when the certifying monotonicity
/// breaks beyond tolerance: the space does not satisfy the declared
/// hypothesis at this configuration.
pub fn angle_from_point(
    space: &SpaceModel,
    p: &PointChart,
    xi: &GeodesicSegment,
    mode: AngleMode,
) -> Result<AngleEstimate> {
    let params = space.params();
    let x = xi.start();
    let px = space.distance(p, &x)?;
    if px <= 0.0 {
        return Err(Error::Input("angle base point coincides with p".into()));
    }
    if xi.length() <= 0.0 {
        return Err(Error::DegenerateSegment);
    }
    if mode == AngleMode::SemiConvex && px >= params.d {
        return Err(Error::Domain(format!(
            "semi-convex angle needs |px| = {px} < D = {}",
            params.d
        )));
    }
    let t0 = xi.length().min(px / 4.0);
    let modulus = match mode {
        AngleMode::Concave => params.s,
        AngleMode::SemiConvex => -params.c,
    };
    let direction = match mode {
        AngleMode::Concave => -1.0,
        AngleMode::SemiConvex => 1.0,
    };
    let cos_at = |t: f64| -> f64 {
        let q = xi.eval_arclength(t);
        let pq = space.dist(p, &q);
        (px * px - pq * pq + modulus * t * t) / (2.0 * t * px)
    };
    let noise = |t: f64| -> f64 { 8.0 * f64::EPSILON * (px * px).max(1.0) / (2.0 * t * px) };
    let (cos_limit, grid, residual, monotone_ok, clamped) =
        monotone_limit(t0, cos_at, direction, noise);
    if !monotone_ok {
        return Err(Error::CurvatureViolated(format!(
            "cosine quotient not monotone for mode {mode:?} at |px| = {px}"
        )));
    }
    Ok(AngleEstimate {
        value: cos_limit.acos(),
        grid,
        residual,
        monotone_ok,
        clamped,
    })
}

/// The angle of fixed scale between two geodesics from a common point,
/// evaluated at scales `t` and `s`: the monotone limit of comparison angles
/// under simultaneous shrinking. Depends only on `t/s`.
pub fn angle_fixed_scale(
    space: &SpaceModel,
    gamma: &GeodesicSegment,
    eta: &GeodesicSegment,
    t: f64,
    s: f64,
) -> Result<AngleEstimate> {
    if t <= 0.0 || s <= 0.0 {
        return Err(Error::Domain(format!(
            "scales must be positive, got ({t}, {s})"
        )));
    }
    let x = gamma.start();
    if space.dist(&x, &eta.start()) > 1e-12 * (1.0 + gamma.length() + eta.length()) {
        return Err(Error::Input(
            "geodesics do not share a starting point".into(),
        ));
    }
    let theta0 = 1.0f64.min(gamma.length() / t).min(eta.length() / s);
    let mag = x.coords.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
    let cos_at = |theta: f64| -> f64 {
        let a = gamma.eval_arclength(theta * t);
        let b = eta.eval_arclength(theta * s);
        let ratio = space.dist(&a, &b) / theta;
        (t * t + s * s - ratio * ratio) / (2.0 * t * s)
    };
    // Distances between points at scale theta lose absolute accuracy of order
    // eps * chart magnitude; dividing by theta amplifies it.
    let noise = |theta: f64| -> f64 {
        16.0 * f64::EPSILON * mag * (t + s) / (theta * t * s).max(f64::MIN_POSITIVE)
    };
    let (cos_limit, grid, residual, monotone_ok, clamped) =
        monotone_limit(theta0, cos_at, -1.0, noise);
    if !monotone_ok {
        return Err(Error::BusemannViolated(format!(
            "comparison angle not monotone under rescaling at scales ({t}, {s})"
        )));
    }
    Ok(AngleEstimate {
        value: cos_limit.acos(),
        grid,
        residual,
        monotone_ok,
        clamped,
    })
}

/// Derivative of `t -> |p xi(t)|` at `t = 0`, which equals minus the cosine
/// of the angle viewed from `p`, cross-checked by one-sided differences.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    /// `-cos(angle_from_point)`.
    pub value: f64,
    /// Second-order one-sided finite-difference estimate.
    pub finite_difference: f64,
    /// Set when the two estimates disagree beyond `DERIVATIVE_TOL`.
    pub mismatch: bool,
}

pub fn distance_derivative(
    space: &SpaceModel,
    p: &PointChart,
    xi: &GeodesicSegment,
    mode: AngleMode,
) -> Result<DerivativeEstimate> {
    let angle = angle_from_point(space, p, xi, mode)?;
    let value = -angle.value.cos();
    let x = xi.start();
    let f0 = space.dist(p, &x);
    let t0 = xi.length().min(f0 / 4.0);
    let mut estimates = Vec::new();
    for k in [6, 8, 10] {
        let h = t0 / f64::powi(2.0, k);
        let f1 = space.dist(p, &xi.eval_arclength(h));
        let f2 = space.dist(p, &xi.eval_arclength(2.0 * h));
        estimates.push((4.0 * f1 - f2 - 3.0 * f0) / (2.0 * h));
    }
    estimates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let finite_difference = estimates[estimates.len() / 2];
    let mismatch = (finite_difference - value).abs() > DERIVATIVE_TOL;
    Ok(DerivativeEstimate {
        value,
        finite_difference,
        mismatch,
    })
}

/// Slack used by the sampled angle-inequality verifiers.
pub const ANGLE_SLACK: f64 = 1e-8;
/// Angles closer than this to 0 or pi are rejected by the sampled angle
/// verifiers: arccos conditioning (1/sin) amplifies cosine round-off past
/// `ANGLE_SLACK` there.
pub const ANGLE_GUARD: f64 = 0.1;

fn well_conditioned(a: f64, b: f64) -> bool {
    a.min(b) >= ANGLE_GUARD && a.max(b) <= PI - ANGLE_GUARD
}

/// Margin of the almost-comparison upper bound at one configuration: the
/// comparison angle at parameter `t` along the geodesic from `x` to `y` must
/// stay under the limit angle plus its budget. `None` when the configuration
/// is too ill-conditioned to judge at `ANGLE_SLACK`.
pub fn almost_comparison_residual(
    space: &SpaceModel,
    p: &PointChart,
    x: &PointChart,
    y: &PointChart,
    t: f64,
) -> Result<Option<f64>> {
    let params = space.params();
    let xi = space.geodesic(x, y)?;
    let angle = angle_from_point(space, p, &xi, AngleMode::Concave)?;
    let px = space.dist(p, x);
    let comp = comparison_angle(px, t, space.dist(p, &xi.eval_arclength(t)))?;
    let budget = error_functions(&params, t, px)?.delta_s;
    Ok(well_conditioned(angle.value, comp).then_some(angle.value + budget + ANGLE_SLACK - comp))
}

/// Margin of the almost-comparison lower bound (semi-convex mode) at one
/// configuration.
pub fn comparison_lower_residual(
    space: &SpaceModel,
    p: &PointChart,
    x: &PointChart,
    y: &PointChart,
    t: f64,
) -> Result<Option<f64>> {
    let params = space.params();
    let xi = space.geodesic(x, y)?;
    let angle = angle_from_point(space, p, &xi, AngleMode::SemiConvex)?;
    let px = space.dist(p, x);
    let comp = comparison_angle(px, t, space.dist(p, &xi.eval_arclength(t)))?;
    let budget = error_functions(&params, t, px)?.delta_c;
    Ok(well_conditioned(angle.value, comp).then_some(comp - (angle.value - budget - ANGLE_SLACK)))
}

/// Margin of the angle-sum bound along the reversed halves of the geodesic
/// from `a` to `b`, split at its midpoint: at most pi under concavity, at
/// least pi under semi-convexity.
pub fn angle_sum_residual(
    space: &SpaceModel,
    mode: AngleMode,
    p: &PointChart,
    a: &PointChart,
    b: &PointChart,
) -> Result<Option<f64>> {
    let gamma = space.geodesic(a, b)?;
    let x = gamma.eval(0.5);
    if *p == x || x == *a || x == *b {
        return Ok(None);
    }
    let xi = space.geodesic(&x, b)?;
    let eta = space.geodesic(&x, a)?;
    let u = angle_from_point(space, p, &xi, mode)?;
    let v = angle_from_point(space, p, &eta, mode)?;
    if u.value.min(v.value) < ANGLE_GUARD {
        return Ok(None);
    }
    Ok(Some(match mode {
        AngleMode::Concave => PI + ANGLE_SLACK - (u.value + v.value),
        AngleMode::SemiConvex => u.value + v.value - (PI - ANGLE_SLACK),
    }))
}

/// Margin of the fixed-scale angle's scaling invariance at one configuration:
/// `tol - |value(lambda t, lambda s) - value(t, s)|`.
#[allow(clippy::too_many_arguments)]
pub fn fixed_scale_scaling_residual(
    space: &SpaceModel,
    x: &PointChart,
    a: &PointChart,
    b: &PointChart,
    t: f64,
    s: f64,
    lambda: f64,
    tol: f64,
) -> Result<f64> {
    let gamma = space.geodesic(x, a)?;
    let eta = space.geodesic(x, b)?;
    let base = angle_fixed_scale(space, &gamma, &eta, t, s)?;
    let scaled = angle_fixed_scale(space, &gamma, &eta, lambda * t, lambda * s)?;
    Ok(tol - (scaled.value - base.value).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(coords: &[f64]) -> PointChart {
        PointChart::new(coords.to_vec())
    }

    #[test]
    fn comparison_angle_basics() {
        assert!(
            (comparison_angle(1.0, 1.0, std::f64::consts::SQRT_2).unwrap()
                - std::f64::consts::FRAC_PI_2)
                .abs()
                < 1e-12
        );
        assert!((comparison_angle(1.0, 1.0, 2.0).unwrap() - std::f64::consts::PI).abs() < 1e-12);
        // Direct arithmetic oracle: cos = 1 - 2^(2/3)/2 for sides (1, 1, 2^(1/3)).
        let expected = (1.0 - 2.0f64.powf(2.0 / 3.0) / 2.0).acos();
        let got = comparison_angle(1.0, 1.0, 2.0f64.powf(1.0 / 3.0)).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!(matches!(
            comparison_angle(0.0, 1.0, 1.0),
            Err(Error::DegenerateVertex)
        ));
        assert!(comparison_angle(1.0, 1.0, 2.1).is_err());
    }

    #[test]
    fn triangle_angles_sum_to_pi() {
        let t = ComparisonTriangle::new(0.7, 1.1, 1.5).unwrap();
        let sum: f64 = t.angles().unwrap().iter().sum();
        assert!((sum - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn error_function_values() {
        let params = CurvatureParams {
            s: 1.0,
            c: 0.0,
            d: f64::INFINITY,
            n: 2,
        };
        let b = error_functions(&params, 0.3, 2.0).unwrap();
        assert_eq!(b.delta_s, 0.0);
        let params = CurvatureParams {
            s: 2.0,
            c: 0.0,
            d: f64::INFINITY,
            n: 2,
        };
        let b = error_functions(&params, 1.0, 1.0).unwrap();
        assert!((b.bar_delta_s - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let b = error_functions(&params, 1.0, 1.0).unwrap();
        assert!((b.delta_c - std::f64::consts::FRAC_PI_3).abs() < 1e-12);
        assert!(error_functions(&params, 1.0, 0.0).is_err());
    }

    #[test]
    fn euclidean_right_angle_from_point() {
        let space = SpaceModel::euclidean(2).unwrap();
        let xi = space.geodesic(&pt(&[0.0, 0.0]), &pt(&[0.0, 1.0])).unwrap();
        let a = angle_from_point(&space, &pt(&[1.0, 0.0]), &xi, AngleMode::Concave).unwrap();
        assert!((a.value - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert!(a.monotone_ok);
    }

    #[test]
    fn lp_axis_angle_from_point_is_right() {
        // The quotient (1 + t^2 - (1 + t^p)^(2/p)) / (2t) tends to 0.
        for p in [2.0, 3.0, 4.0] {
            let space = SpaceModel::lp(p, 2).unwrap();
            let xi = space.geodesic(&pt(&[0.0, 0.0]), &pt(&[1.0, 0.0])).unwrap();
            let a = angle_from_point(&space, &pt(&[0.0, 1.0]), &xi, AngleMode::Concave).unwrap();
            assert!(
                (a.value - std::f64::consts::FRAC_PI_2).abs() < 1e-6,
                "p = {p}: {}",
                a.value
            );
        }
    }

    #[test]
    fn radial_angles_are_zero_and_pi() {
        let space = SpaceModel::lp(3.0, 2).unwrap();
        let o = pt(&[0.0, 0.0]);
        let p = pt(&[1.0, 0.0]);
        let toward = space.geodesic(&o, &p).unwrap();
        let a = angle_from_point(&space, &p, &toward, AngleMode::Concave).unwrap();
        assert!(a.value < 1e-6);
        let away = space.geodesic(&o, &pt(&[-1.0, 0.0])).unwrap();
        let b = angle_from_point(&space, &p, &away, AngleMode::Concave).unwrap();
        assert!((b.value - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn fixed_scale_axis_pair_matches_closed_form() {
        for p in [2.0, 3.0, 4.0] {
            let space = SpaceModel::lp(p, 2).unwrap();
            let o = pt(&[0.0, 0.0]);
            let gamma = space.geodesic(&o, &pt(&[0.0, 1.0])).unwrap();
            let eta = space.geodesic(&o, &pt(&[1.0, 0.0])).unwrap();
            let a = angle_fixed_scale(&space, &gamma, &eta, 1.0, 1.0).unwrap();
            let expected = (1.0 - 2.0f64.powf(2.0 / p - 1.0)).acos();
            assert!((a.value - expected).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn fixed_scale_axis_pair_at_half_scale() {
        // For the axis pair at scales (1, 1/2) the metric relation gives
        // cos = 5/4 - (1 + 2^-p)^(2/p) exactly in a normed plane.
        for p in [2.0, 3.0, 4.0] {
            let space = SpaceModel::lp(p, 2).unwrap();
            let o = pt(&[0.0, 0.0]);
            let gamma = space.geodesic(&o, &pt(&[0.0, 1.0])).unwrap();
            let eta = space.geodesic(&o, &pt(&[1.0, 0.0])).unwrap();
            let a = angle_fixed_scale(&space, &gamma, &eta, 1.0, 0.5).unwrap();
            let expected = (1.25 - (1.0 + 0.5f64.powf(p)).powf(2.0 / p)).acos();
            assert!((a.value - expected).abs() < 1e-9, "p = {p}: {}", a.value);
        }
        // The three angle flavors at the axis pair coincide for p = 2 and
        // split apart for p > 2.
        let values = |p: f64| -> (f64, f64, f64) {
            let space = SpaceModel::lp(p, 2).unwrap();
            let o = pt(&[0.0, 0.0]);
            let gamma = space.geodesic(&o, &pt(&[0.0, 1.0])).unwrap();
            let eta = space.geodesic(&o, &pt(&[1.0, 0.0])).unwrap();
            let common = angle_fixed_scale(&space, &gamma, &eta, 1.0, 1.0)
                .unwrap()
                .value;
            let half = angle_fixed_scale(&space, &gamma, &eta, 1.0, 0.5)
                .unwrap()
                .value;
            let viewed = angle_from_point(&space, &pt(&[0.0, 1.0]), &eta, AngleMode::Concave)
                .unwrap()
                .value;
            (common, half, viewed)
        };
        let (c2, h2, v2) = values(2.0);
        assert!((c2 - h2).abs() < 1e-8 && (c2 - v2).abs() < 1e-6);
        let (c3, h3, v3) = values(3.0);
        assert!((c3 - h3).abs() > 1e-3);
        assert!((c3 - v3).abs() > 1e-3);
    }

    #[test]
    fn angle_sums_agree_with_pi_when_both_modes_hold() {
        // Where concavity gives sum <= pi and semi-convexity gives >= pi,
        // the sum pins to pi.
        let space = SpaceModel::euclidean(2).unwrap();
        let p = pt(&[0.4, 0.9]);
        let a = pt(&[-0.8, -0.3]);
        let b = pt(&[0.7, -0.5]);
        let gamma = space.geodesic(&a, &b).unwrap();
        let x = gamma.eval(0.5);
        let xi = space.geodesic(&x, &b).unwrap();
        let eta = space.geodesic(&x, &a).unwrap();
        for mode in [AngleMode::Concave, AngleMode::SemiConvex] {
            let u = angle_from_point(&space, &p, &xi, mode).unwrap().value;
            let v = angle_from_point(&space, &p, &eta, mode).unwrap().value;
            assert!(
                (u + v - std::f64::consts::PI).abs() < 1e-8,
                "{mode:?}: {}",
                u + v
            );
        }
    }

    #[test]
    fn fixed_scale_is_scaling_invariant() {
        let space = SpaceModel::lp(3.0, 2).unwrap();
        let o = pt(&[0.0, 0.0]);
        let gamma = space.geodesic(&o, &pt(&[0.3, 1.0])).unwrap();
        let eta = space.geodesic(&o, &pt(&[1.0, -0.2])).unwrap();
        let base = angle_fixed_scale(&space, &gamma, &eta, 0.5, 0.25).unwrap();
        for lambda in [0.1, 0.5, 2.0] {
            let scaled =
                angle_fixed_scale(&space, &gamma, &eta, lambda * 0.5, lambda * 0.25).unwrap();
            assert!((scaled.value - base.value).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_derivative_cross_checks() {
        let space = SpaceModel::lp(3.0, 2).unwrap();
        let o = pt(&[0.0, 0.0]);
        let xi = space.geodesic(&o, &pt(&[1.0, 0.0])).unwrap();
        let d = distance_derivative(&space, &pt(&[0.0, 1.0]), &xi, AngleMode::Concave).unwrap();
        assert!(!d.mismatch, "{} vs {}", d.value, d.finite_difference);
        let radial =
            distance_derivative(&space, &pt(&[2.0, 0.0]), &xi, AngleMode::Concave).unwrap();
        assert!((radial.value + 1.0).abs() < 1e-6);
    }

    #[test]
    fn angle_is_semicontinuous_along_converging_geodesics() {
        // Perturbed geodesics converging pointwise: liminf of angles in the
        // concave mode dominates the limit angle; limsup in the semi-convex
        // mode is dominated by it.
        let space = SpaceModel::lp(3.0, 2).unwrap();
        let p = pt(&[0.9, 0.7]);
        let x = pt(&[0.0, 0.0]);
        let y = pt(&[1.0, -0.4]);
        let xi = space.geodesic(&x, &y).unwrap();
        let lim_lower = angle_from_point(&space, &p, &xi, AngleMode::Concave)
            .unwrap()
            .value;
        let lim_upper = angle_from_point(&space, &p, &xi, AngleMode::SemiConvex)
            .unwrap()
            .value;
        // The perturbed angles approach the limit at the perturbation rate,
        // which is exactly what liminf/limsup semicontinuity needs along
        // this family.
        for i in 6..14 {
            let h = f64::powi(2.0, -i);
            let yi = pt(&[1.0 + h, -0.4 + h]);
            let xi_i = space.geodesic(&x, &yi).unwrap();
            let lo = angle_from_point(&space, &p, &xi_i, AngleMode::Concave)
                .unwrap()
                .value;
            let hi = angle_from_point(&space, &p, &xi_i, AngleMode::SemiConvex)
                .unwrap()
                .value;
            assert!(
                lim_lower <= lo + 3.0 * h + 1e-6,
                "h={h}: {lim_lower} vs {lo}"
            );
            assert!(
                lim_upper >= hi - 3.0 * h - 1e-6,
                "h={h}: {lim_upper} vs {hi}"
            );
        }
    }

    #[test]
    fn semiconvex_mode_requires_range() {
        let space = SpaceModel::sphere_cap(0.8).unwrap();
        let base = space.base_point();
        let q = space.probe_sphere(&base, 0.5, 8).unwrap();
        let xi = space.geodesic(&q[0], &q[1]).unwrap();
        // |p xi(0)| close to 1.0 > D = 0.8 must be rejected.
        let far = q[q.len() / 2].clone();
        let d = space.dist(&far, &xi.start());
        if d >= 0.8 {
            assert!(angle_from_point(&space, &far, &xi, AngleMode::SemiConvex).is_err());
        }
    }
}
