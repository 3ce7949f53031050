//! Concrete model geodesic spaces with exact distances, geodesics and
//! measure-proportional samplers. Everything downstream (angles, curvature
//! verifiers, strainers, tangent-cone and measure estimators) checks itself
//! against these ground truths.

mod cone;
pub mod spec;
mod sphere;

use crate::chart::PointChart;
use crate::error::{Error, Result};
use crate::seed;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use spec::SpaceSpec;

const CHART_TOL: f64 = 1e-12;

/// Declared curvature data of a model space: the squared-distance concavity
/// constant `s` (>= 1), the local semi-convexity constant `c` (>= 0) valid
/// inside radius `d` (possibly infinite), and the expected Hausdorff
/// dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureParams {
    pub s: f64,
    pub c: f64,
    pub d: f64,
    pub n: usize,
}

impl CurvatureParams {
    pub fn new(s: f64, c: f64, d: f64, n: usize) -> Result<Self> {
        if s < 1.0 {
            return Err(Error::Domain(format!(
                "concavity constant S={s} must be >= 1"
            )));
        }
        if c < 0.0 {
            return Err(Error::Domain(format!(
                "semi-convexity constant C={c} must be >= 0"
            )));
        }
        if d <= 0.0 {
            return Err(Error::Domain(format!(
                "semi-convexity radius D={d} must be > 0"
            )));
        }
        Ok(Self { s, c, d, n })
    }
}

#[derive(Clone, Debug)]
enum Kind {
    /// (R^n, ||.||_p) with p in [2, oo); p > 1 keeps the norm strictly convex
    /// so geodesics are unique straight segments.
    Lp { p: f64, dim: usize },
    /// Euclidean cone of total angle theta in (0, 2*pi).
    Cone { theta: f64 },
    /// Open cap of radius `cap` (< pi/2) around the north pole of the round
    /// unit sphere.
    SphereCap { cap: f64 },
    /// L^2 product of two factors.
    Product {
        a: Box<SpaceModel>,
        b: Box<SpaceModel>,
    },
}

/// A model geodesic space. Immutable after construction; all operations are
/// pure given `(inputs, seed)`, so values can be shared freely across threads.
#[derive(Clone, Debug)]
pub struct SpaceModel {
    kind: Kind,
    params: CurvatureParams,
}

impl SpaceModel {
    /// Finite-dimensional l^p space. Restricted to p in [2, oo): those are the
    /// 2-uniformly smooth members of the family, with S = p - 1 declared.
    pub fn lp(p: f64, dim: usize) -> Result<Self> {
        if !(2.0..f64::INFINITY).contains(&p) {
            return Err(Error::InvalidSpec(format!(
                "lp exponent p={p} must lie in [2, oo)"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidSpec("lp dimension must be >= 1".into()));
        }
        Ok(Self {
            kind: Kind::Lp { p, dim },
            params: CurvatureParams::new((p - 1.0).max(1.0), 0.0, f64::INFINITY, dim)?,
        })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::lp(2.0, dim)
    }

    /// Euclidean cone of total angle `theta` in (0, 2*pi): non-negatively
    /// curved, Busemann concave, with semi-convexity holding only locally away
    /// from the apex.
    pub fn cone(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 2.0 * std::f64::consts::PI) {
            return Err(Error::InvalidSpec(format!(
                "cone angle theta={theta} must lie in (0, 2*pi)"
            )));
        }
        Ok(Self {
            kind: Kind::Cone { theta },
            params: CurvatureParams::new(1.0, 0.0, f64::INFINITY, 2)?,
        })
    }

    /// Open spherical cap of radius `cap` < pi/2 around the north pole.
    /// Squared distances are convex at range < pi/2, so C = 0 with D = cap.
    pub fn sphere_cap(cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidSpec(format!(
                "cap radius {cap} must lie in (0, pi/2)"
            )));
        }
        Ok(Self {
            kind: Kind::SphereCap { cap },
            params: CurvatureParams::new(1.0, 0.0, cap, 2)?,
        })
    }

    /// L^2 product of two factor models.
    pub fn product(a: SpaceModel, b: SpaceModel) -> Result<Self> {
        let params = CurvatureParams::new(
            a.params.s.max(b.params.s),
            a.params.c.max(b.params.c),
            a.params.d.min(b.params.d),
            a.params.n + b.params.n,
        )?;
        Ok(Self {
            kind: Kind::Product {
                a: Box::new(a),
                b: Box::new(b),
            },
            params,
        })
    }

    pub fn params(&self) -> CurvatureParams {
        self.params
    }

    /// The textual description that rebuilds this model (curvature overrides
    /// excepted).
    pub fn spec(&self) -> SpaceSpec {
        match &self.kind {
            Kind::Lp { p, dim } => SpaceSpec::Lp { p: *p, n: *dim },
            Kind::Cone { theta } => SpaceSpec::Cone { theta: *theta },
            Kind::SphereCap { cap } => SpaceSpec::Sphere { cap: *cap },
            Kind::Product { a, b } => SpaceSpec::Product {
                first: Box::new(a.spec()),
                second: Box::new(b.spec()),
            },
        }
    }

    /// Default sampling region for randomized verification: a ball around the
    /// base point sized to the model (and to the chart's valid region).
    pub fn default_region(&self) -> (PointChart, f64) {
        (self.base_point(), self.default_radius())
    }

    fn default_radius(&self) -> f64 {
        match &self.kind {
            Kind::Lp { .. } => 1.0,
            Kind::Cone { .. } => 1.0,
            Kind::SphereCap { cap } => 0.95 * cap,
            Kind::Product { a, b } => a.default_radius().min(b.default_radius()),
        }
    }

    /// Distance from `x` to the nearest chart trouble (cone apex, cap
    /// boundary), capped at 1; sets the natural scale for constructions
    /// around `x`.
    pub fn regular_scale(&self, x: &PointChart) -> f64 {
        match &self.kind {
            Kind::Lp { .. } => 1.0,
            Kind::Cone { .. } => x.coords[0].clamp(0.0, 1.0),
            Kind::SphereCap { cap } => {
                (cap - sphere::distance(&x.coords, &sphere::POLE)).clamp(0.0, 1.0)
            }
            Kind::Product { a, b } => {
                let (xa, xb) = split(x, a.chart_dim());
                a.regular_scale(&xa).min(b.regular_scale(&xb))
            }
        }
    }

    /// Sampling region on which local semi-convexity at the declared constant
    /// is expected: inside the convexity radius, and for the cone inside a
    /// flat ball well away from the apex.
    pub fn semiconvex_region(&self) -> (PointChart, f64) {
        match &self.kind {
            Kind::Cone { theta } => {
                let half = (theta / 2.0).min(std::f64::consts::FRAC_PI_2);
                (self.base_point(), 0.25 * half.sin())
            }
            _ => {
                let (c, r) = self.default_region();
                let d = self.params.d;
                if d.is_finite() {
                    (c, r.min(0.45 * d))
                } else {
                    (c, r)
                }
            }
        }
    }

    /// Override the declared curvature constants, e.g. after estimating a
    /// better semi-convexity constant empirically.
    pub fn with_params(mut self, params: CurvatureParams) -> Self {
        self.params = params;
        self
    }

    pub fn chart_dim(&self) -> usize {
        match &self.kind {
            Kind::Lp { dim, .. } => *dim,
            Kind::Cone { .. } => 2,
            Kind::SphereCap { .. } => 3,
            Kind::Product { a, b } => a.chart_dim() + b.chart_dim(),
        }
    }

    /// Intrinsic (expected Hausdorff) dimension.
    pub fn dim(&self) -> usize {
        self.params.n
    }

    /// A canonical interior point, used as the default base of experiments.
    pub fn base_point(&self) -> PointChart {
        match &self.kind {
            Kind::Lp { dim, .. } => PointChart::new(vec![0.0; *dim]),
            Kind::Cone { theta } => PointChart::new(vec![1.0, theta / 4.0]),
            Kind::SphereCap { .. } => PointChart::new(sphere::POLE.to_vec()),
            Kind::Product { a, b } => {
                let mut c = a.base_point().coords;
                c.extend(b.base_point().coords);
                PointChart::new(c)
            }
        }
    }

    pub fn validate_point(&self, x: &PointChart) -> Result<()> {
        if x.dim() != self.chart_dim() {
            return Err(Error::InvalidChart(format!(
                "chart dimension {} does not match space dimension {}",
                x.dim(),
                self.chart_dim()
            )));
        }
        match &self.kind {
            Kind::Lp { .. } => Ok(()),
            Kind::Cone { theta } => {
                let (r, a) = (x.coords[0], x.coords[1]);
                if r < 0.0 {
                    return Err(Error::InvalidChart(format!("cone radius {r} is negative")));
                }
                if !(0.0..*theta).contains(&a) {
                    return Err(Error::InvalidChart(format!(
                        "cone angle {a} outside [0, {theta})"
                    )));
                }
                Ok(())
            }
            Kind::SphereCap { cap } => {
                let n = sphere::norm(&x.coords);
                if (n - 1.0).abs() > CHART_TOL {
                    return Err(Error::InvalidChart(format!(
                        "sphere point has norm {n}, off the unit sphere"
                    )));
                }
                let colat = sphere::distance(&x.coords, &sphere::POLE);
                if colat > cap + CHART_TOL {
                    return Err(Error::InvalidChart(format!(
                        "sphere point at colatitude {colat} escapes the cap of radius {cap}"
                    )));
                }
                Ok(())
            }
            Kind::Product { a, b } => {
                let (xa, xb) = split(x, a.chart_dim());
                a.validate_point(&xa)?;
                b.validate_point(&xb)
            }
        }
    }

    /// Exact model distance.
    pub fn distance(&self, x: &PointChart, y: &PointChart) -> Result<f64> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        Ok(self.dist(x, y))
    }

    /// Distance without chart validation, for interior hot loops over points
    /// the caller already knows are valid.
    pub fn dist(&self, x: &PointChart, y: &PointChart) -> f64 {
        match &self.kind {
            Kind::Lp { p, .. } => lp_dist(*p, &x.coords, &y.coords),
            Kind::Cone { theta } => {
                cone::distance(x.coords[0], x.coords[1], y.coords[0], y.coords[1], *theta)
            }
            Kind::SphereCap { .. } => sphere::distance(&x.coords, &y.coords),
            Kind::Product { a, b } => {
                let na = a.chart_dim();
                let (xa, xb) = split(x, na);
                let (ya, yb) = split(y, na);
                let da = a.dist(&xa, &ya);
                let db = b.dist(&xb, &yb);
                (da * da + db * db).sqrt()
            }
        }
    }

    /// The constant-speed minimizing segment from `x` to `y`.
    ///
    /// All models here are uniquely geodesic except for the measure-zero cone
    /// configuration whose development passes through the apex exactly; that
    /// case returns the two-segment apex path flagged `non_unique`.
    pub fn geodesic(&self, x: &PointChart, y: &PointChart) -> Result<GeodesicSegment> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        if x == y {
            return Err(Error::DegenerateSegment);
        }
        self.geo(x, y)
    }

    fn geo(&self, x: &PointChart, y: &PointChart) -> Result<GeodesicSegment> {
        let length = self.dist(x, y);
        let rep = match &self.kind {
            Kind::Lp { .. } => SegRep::Line {
                start: x.coords.clone(),
                end: y.coords.clone(),
            },
            Kind::Cone { theta } => {
                let (r1, a1) = (x.coords[0], x.coords[1]);
                let (r2, a2) = (y.coords[0], y.coords[1]);
                if r1 > 0.0 && r2 > 0.0 {
                    let gap = cone::angular_gap(a1, a2, *theta);
                    if gap >= std::f64::consts::PI - 1e-12 {
                        // Development crosses the apex; both one-sided paths
                        // realize the distance. Unreachable for theta < 2*pi.
                        return Ok(GeodesicSegment {
                            rep: SegRep::ConeApexPath { r1, a1, r2, a2 },
                            length,
                            non_unique: true,
                        });
                    }
                }
                let (a, b) = cone::develop(r1, a1, r2, a2, *theta);
                SegRep::Cone {
                    theta: *theta,
                    base_angle: a1,
                    a,
                    b,
                }
            }
            Kind::SphereCap { .. } => SegRep::Arc {
                x: [x.coords[0], x.coords[1], x.coords[2]],
                y: [y.coords[0], y.coords[1], y.coords[2]],
                omega: length,
            },
            Kind::Product { a, b } => {
                let na = a.chart_dim();
                let (xa, xb) = split(x, na);
                let (ya, yb) = split(y, na);
                // A degenerate factor stays put; the other carries the speed.
                let ga = if xa == ya {
                    None
                } else {
                    Some(Box::new(a.geo(&xa, &ya)?))
                };
                let gb = if xb == yb {
                    None
                } else {
                    Some(Box::new(b.geo(&xb, &yb)?))
                };
                SegRep::Product {
                    a: ga,
                    b: gb,
                    rest_a: xa.coords,
                    rest_b: xb.coords,
                }
            }
        };
        Ok(GeodesicSegment {
            rep,
            length,
            non_unique: false,
        })
    }

    /// The point at arclength `s >= 0` along the geodesic from `x` through
    /// `y`, extending past `y` where the model permits.
    pub fn point_along(&self, x: &PointChart, y: &PointChart, s: f64) -> Result<PointChart> {
        if s < 0.0 {
            return Err(Error::Domain(format!("arclength {s} must be >= 0")));
        }
        let g = self.geodesic(x, y)?;
        let t = s / g.length();
        let p = g.eval_extended(t)?;
        self.validate_point(&p)?;
        Ok(p)
    }

    /// Sample `count` points distributed proportionally to the model's
    /// natural volume measure restricted to the ball `B(center, r)`.
    pub fn sample_ball(
        &self,
        center: &PointChart,
        r: f64,
        count: usize,
        seed_value: u64,
    ) -> Result<Vec<PointChart>> {
        if r <= 0.0 {
            return Err(Error::Domain(format!("ball radius {r} must be > 0")));
        }
        if count == 0 {
            return Err(Error::Domain("sample count must be >= 1".into()));
        }
        self.validate_point(center)?;
        self.check_ball_in_chart(center, r)?;
        let mut rng = seed::rng(seed_value);
        let mut out = Vec::with_capacity(count);
        let mut guard = 0usize;
        while out.len() < count {
            guard += 1;
            if guard > 10_000 * count {
                return Err(Error::Range("rejection sampling stalled".into()));
            }
            let p = self.draw_in_region(center, r, &mut rng);
            if self.dist(center, &p) <= r {
                out.push(p);
            }
        }
        Ok(out)
    }

    fn check_ball_in_chart(&self, center: &PointChart, r: f64) -> Result<()> {
        match &self.kind {
            Kind::SphereCap { cap } => {
                let colat = sphere::distance(&center.coords, &sphere::POLE);
                if colat + r > cap + CHART_TOL {
                    return Err(Error::Range(format!(
                        "ball of radius {r} at colatitude {colat} escapes the cap {cap}"
                    )));
                }
                Ok(())
            }
            Kind::Product { a, b } => {
                let (ca, cb) = split(center, a.chart_dim());
                a.check_ball_in_chart(&ca, r)?;
                b.check_ball_in_chart(&cb, r)
            }
            _ => Ok(()),
        }
    }

    /// One volume-proportional draw from the enclosing region of
    /// `B(center, r)` whose exact measure `enclosing_measure` reports.
    fn draw_in_region(&self, center: &PointChart, r: f64, rng: &mut impl Rng) -> PointChart {
        match &self.kind {
            Kind::Lp { dim, .. } => {
                let coords = (0..*dim)
                    .map(|i| center.coords[i] + (2.0 * rng.gen::<f64>() - 1.0) * r)
                    .collect();
                PointChart::new(coords)
            }
            Kind::Cone { theta } => {
                let r0 = center.coords[0];
                let lo = (r0 - r).max(0.0);
                let hi = r0 + r;
                let rho2 = lo * lo + (hi * hi - lo * lo) * rng.gen::<f64>();
                let rho = rho2.sqrt();
                let w = cone_window(r0, r, *theta);
                let alpha = cone::wrap_angle(
                    center.coords[1] + (2.0 * rng.gen::<f64>() - 1.0) * w,
                    *theta,
                );
                PointChart::new(vec![rho, alpha])
            }
            Kind::SphereCap { .. } => {
                let c = &center.coords;
                let z = 1.0 - (1.0 - r.cos()) * rng.gen::<f64>();
                let phi = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                let (u, v) = sphere::tangent_basis(c);
                let s = (1.0 - z * z).max(0.0).sqrt();
                let p = sphere::normalize([
                    z * c[0] + s * (phi.cos() * u[0] + phi.sin() * v[0]),
                    z * c[1] + s * (phi.cos() * u[1] + phi.sin() * v[1]),
                    z * c[2] + s * (phi.cos() * u[2] + phi.sin() * v[2]),
                ]);
                PointChart::new(p.to_vec())
            }
            Kind::Product { a, b } => {
                let (ca, cb) = split(center, a.chart_dim());
                let pa = a.draw_in_region(&ca, r, rng);
                let pb = b.draw_in_region(&cb, r, rng);
                let mut coords = pa.coords;
                coords.extend(pb.coords);
                PointChart::new(coords)
            }
        }
    }

    /// Uniform samples from an explicit enclosing region of `B(center, r)`
    /// together with the region's exact volume, for hit-fraction Monte Carlo.
    pub fn sample_enclosing(
        &self,
        center: &PointChart,
        r: f64,
        count: usize,
        seed_value: u64,
    ) -> Result<(f64, Vec<PointChart>)> {
        self.validate_point(center)?;
        self.check_ball_in_chart(center, r)?;
        let measure = self.enclosing_measure(center, r);
        let mut rng = seed::rng(seed_value);
        let out = (0..count)
            .map(|_| self.draw_in_region(center, r, &mut rng))
            .collect();
        Ok((measure, out))
    }

    fn enclosing_measure(&self, center: &PointChart, r: f64) -> f64 {
        match &self.kind {
            Kind::Lp { dim, .. } => (2.0 * r).powi(*dim as i32),
            Kind::Cone { theta } => {
                let r0 = center.coords[0];
                let lo = (r0 - r).max(0.0);
                let hi = r0 + r;
                let w = cone_window(r0, r, *theta);
                w * (hi * hi - lo * lo)
            }
            Kind::SphereCap { .. } => 2.0 * std::f64::consts::PI * (1.0 - r.cos()),
            Kind::Product { a, b } => {
                let (ca, cb) = split(center, a.chart_dim());
                a.enclosing_measure(&ca, r) * b.enclosing_measure(&cb, r)
            }
        }
    }

    /// Deterministic quasi-uniform probe points at metric distance `d` from
    /// `x`, one per tangent direction, skipping directions that leave the
    /// chart's valid region.
    pub fn probe_sphere(&self, x: &PointChart, d: f64, count: usize) -> Result<Vec<PointChart>> {
        self.validate_point(x)?;
        if d <= 0.0 {
            return Err(Error::Domain(format!("probe distance {d} must be > 0")));
        }
        let mut out = Vec::with_capacity(count);
        match &self.kind {
            Kind::Lp { p, dim } => {
                for u in unit_directions(*dim, count) {
                    let n = lp_norm(*p, &u);
                    let coords = x
                        .coords
                        .iter()
                        .zip(&u)
                        .map(|(xi, ui)| xi + d * ui / n)
                        .collect();
                    out.push(PointChart::new(coords));
                }
            }
            Kind::Cone { theta } => {
                let (r0, a0) = (x.coords[0], x.coords[1]);
                if r0 == 0.0 {
                    for k in 0..count {
                        out.push(PointChart::new(vec![d, theta * k as f64 / count as f64]));
                    }
                } else {
                    for k in 0..count {
                        let psi = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                        let p = [r0 + d * psi.cos(), d * psi.sin()];
                        let (rho, alpha, phi) = cone::refold(p, a0, *theta);
                        // Keep only probes whose developed chord is minimizing,
                        // so the metric distance from x is exactly d.
                        if rho > 0.0 && phi.abs() <= theta / 2.0 {
                            out.push(PointChart::new(vec![rho, alpha]));
                        }
                    }
                }
            }
            Kind::SphereCap { cap } => {
                for k in 0..count {
                    let ang = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                    let p = sphere::exp_map(&x.coords, d, ang);
                    if sphere::distance(&p, &sphere::POLE) <= cap - CHART_TOL {
                        out.push(PointChart::new(p.to_vec()));
                    }
                }
            }
            Kind::Product { a, b } => {
                let (xa, xb) = split(x, a.chart_dim());
                let third = (count / 3).max(1);
                let da = a.probe_sphere(&xa, d, third)?;
                let db = b.probe_sphere(&xb, d, third)?;
                for pa in &da {
                    out.push(join(pa, &xb));
                }
                for pb in &db {
                    out.push(join(&xa, pb));
                }
                let w = d / std::f64::consts::SQRT_2;
                let dda = a.probe_sphere(&xa, w, third)?;
                let ddb = b.probe_sphere(&xb, w, third)?;
                for pa in &dda {
                    for pb in &ddb {
                        if out.len() >= count {
                            break;
                        }
                        out.push(join(pa, pb));
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Range(
                "no valid probe directions at this point".into(),
            ));
        }
        Ok(out)
    }

    /// Move from `x` by `lambda * w` in a fixed local orthonormal frame of the
    /// chart, where `w` has the intrinsic dimension. This is the retraction
    /// used to express tangent norms in chart coordinates.
    pub fn frame_move(&self, x: &PointChart, w: &[f64], lambda: f64) -> Result<PointChart> {
        self.validate_point(x)?;
        if w.len() != self.dim() {
            return Err(Error::Input(format!(
                "frame vector has dimension {}, expected {}",
                w.len(),
                self.dim()
            )));
        }
        match &self.kind {
            Kind::Lp { .. } => Ok(PointChart::new(
                x.coords
                    .iter()
                    .zip(w)
                    .map(|(xi, wi)| xi + lambda * wi)
                    .collect(),
            )),
            Kind::Cone { theta } => {
                let (r0, a0) = (x.coords[0], x.coords[1]);
                if r0 == 0.0 {
                    return Err(Error::Domain("no linear frame at the cone apex".into()));
                }
                let r = r0 + lambda * w[0];
                if r <= 0.0 {
                    return Err(Error::Range("frame move crosses the apex".into()));
                }
                Ok(PointChart::new(vec![
                    r,
                    cone::wrap_angle(a0 + lambda * w[1] / r0, *theta),
                ]))
            }
            Kind::SphereCap { .. } => {
                let (u, v) = sphere::tangent_basis(&x.coords);
                let p = sphere::normalize([
                    x.coords[0] + lambda * (w[0] * u[0] + w[1] * v[0]),
                    x.coords[1] + lambda * (w[0] * u[1] + w[1] * v[1]),
                    x.coords[2] + lambda * (w[0] * u[2] + w[1] * v[2]),
                ]);
                let p = PointChart::new(p.to_vec());
                self.validate_point(&p)?;
                Ok(p)
            }
            Kind::Product { a, b } => {
                let (xa, xb) = split(x, a.chart_dim());
                let pa = a.frame_move(&xa, &w[..a.dim()], lambda)?;
                let pb = b.frame_move(&xb, &w[a.dim()..], lambda)?;
                Ok(join(&pa, &pb))
            }
        }
    }
}

/// Angular half-width of a sector certainly containing `B((r0, _), r)` on a
/// cone of angle theta. Balls reaching the apex need the full range; small
/// off-apex balls fit in a thin sector, which keeps rejection sampling
/// efficient.
fn cone_window(r0: f64, r: f64, theta: f64) -> f64 {
    if r >= r0 {
        return theta / 2.0;
    }
    let ratio = r / (r0 - r);
    // Points at angular gap beyond pi/2 are at distance >= r0 > r already.
    let w = if ratio >= 1.0 {
        std::f64::consts::FRAC_PI_2
    } else {
        ratio.asin() * (1.0 + 1e-9) + 1e-15
    };
    w.min(theta / 2.0)
}

fn split(x: &PointChart, na: usize) -> (PointChart, PointChart) {
    (
        PointChart::new(x.coords[..na].to_vec()),
        PointChart::new(x.coords[na..].to_vec()),
    )
}

fn join(a: &PointChart, b: &PointChart) -> PointChart {
    let mut coords = a.coords.clone();
    coords.extend_from_slice(&b.coords);
    PointChart::new(coords)
}

/// l^p distance with scaling to dodge overflow and with integer fast paths.
pub fn lp_dist(p: f64, x: &[f64], y: &[f64]) -> f64 {
    if p == 2.0 {
        return x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    }
    let m = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let sum: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let u = (a - b).abs() / m;
            if p == 3.0 {
                u * u * u
            } else if p == 4.0 {
                let s = u * u;
                s * s
            } else {
                u.powf(p)
            }
        })
        .sum();
    m * sum.powf(1.0 / p)
}

/// l^p norm of a vector.
pub fn lp_norm(p: f64, v: &[f64]) -> f64 {
    lp_dist(p, v, &vec![0.0; v.len()])
}

/// Deterministic quasi-uniform unit directions in R^dim (Euclidean unit;
/// callers renormalize for other norms). 2D: equally spaced angles; 3D:
/// Fibonacci sphere; higher: seeded Gaussian.
pub fn unit_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let a = 2.0 * std::f64::consts::PI * k as f64 / golden;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = seed::rng(0xD15C);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..dim)
                        .map(|_| {
                            // Box-Muller.
                            let u1: f64 = rng.gen::<f64>().max(1e-12);
                            let u2: f64 = rng.gen();
                            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                        })
                        .collect();
                    let n = lp_dist(2.0, &v, &vec![0.0; dim]);
                    v.into_iter().map(|c| c / n).collect()
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug)]
enum SegRep {
    Line {
        start: Vec<f64>,
        end: Vec<f64>,
    },
    Cone {
        theta: f64,
        base_angle: f64,
        a: [f64; 2],
        b: [f64; 2],
    },
    /// Degenerate development through the apex: radial in, radial out.
    ConeApexPath {
        r1: f64,
        a1: f64,
        r2: f64,
        a2: f64,
    },
    Arc {
        x: [f64; 3],
        y: [f64; 3],
        omega: f64,
    },
    Product {
        a: Option<Box<GeodesicSegment>>,
        b: Option<Box<GeodesicSegment>>,
        rest_a: Vec<f64>,
        rest_b: Vec<f64>,
    },
}

/// A constant-speed minimizing segment with a standalone evaluator on [0, 1].
#[derive(Clone, Debug)]
pub struct GeodesicSegment {
    rep: SegRep,
    length: f64,
    pub non_unique: bool,
}

impl GeodesicSegment {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> PointChart {
        self.eval(0.0)
    }

    pub fn end(&self) -> PointChart {
        self.eval(1.0)
    }

    /// Evaluate at `t` in [0, 1].
    pub fn eval(&self, t: f64) -> PointChart {
        debug_assert!((-1e-12..=1.0 + 1e-12).contains(&t));
        self.eval_inner(t)
    }

    /// Evaluate at arclength `s` in [0, length].
    pub fn eval_arclength(&self, s: f64) -> PointChart {
        self.eval(s / self.length)
    }

    /// Evaluate the maximal extension at arbitrary `t`; errs where the model
    /// cannot extend (through the cone apex, past the development's validity).
    pub fn eval_extended(&self, t: f64) -> Result<PointChart> {
        if (0.0..=1.0).contains(&t) {
            return Ok(self.eval_inner(t));
        }
        match &self.rep {
            SegRep::Line { .. } | SegRep::Arc { .. } => Ok(self.eval_inner(t)),
            SegRep::Cone {
                theta,
                base_angle,
                a,
                b,
            } => {
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let (rho, alpha, phi) = cone::refold(p, *base_angle, *theta);
                if rho < 1e-300 {
                    return Err(Error::Range("extension reaches the cone apex".into()));
                }
                // Only extensions whose development still subtends at most
                // half the cone angle refold to minimizing chords.
                if phi.abs() > theta / 2.0 + 1e-12 {
                    return Err(Error::Range(
                        "extension leaves the valid development sector".into(),
                    ));
                }
                Ok(PointChart::new(vec![rho, alpha]))
            }
            SegRep::ConeApexPath { .. } => Err(Error::Range("apex path does not extend".into())),
            SegRep::Product {
                a,
                b,
                rest_a,
                rest_b,
            } => {
                let pa = match a {
                    Some(g) => g.eval_extended(t)?,
                    None => PointChart::new(rest_a.clone()),
                };
                let pb = match b {
                    Some(g) => g.eval_extended(t)?,
                    None => PointChart::new(rest_b.clone()),
                };
                Ok(join(&pa, &pb))
            }
        }
    }

    fn eval_inner(&self, t: f64) -> PointChart {
        match &self.rep {
            SegRep::Line { start, end } => PointChart::new(
                start
                    .iter()
                    .zip(end)
                    .map(|(a, b)| a + t * (b - a))
                    .collect(),
            ),
            SegRep::Cone {
                theta,
                base_angle,
                a,
                b,
            } => {
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let (rho, alpha, _) = cone::refold(p, *base_angle, *theta);
                PointChart::new(vec![rho, alpha])
            }
            SegRep::ConeApexPath { r1, a1, r2, a2 } => {
                let u = t * (r1 + r2);
                if u <= *r1 {
                    PointChart::new(vec![r1 - u, *a1])
                } else {
                    PointChart::new(vec![u - r1, *a2])
                }
            }
            SegRep::Arc { x, y, omega } => PointChart::new(sphere::slerp(x, y, *omega, t).to_vec()),
            SegRep::Product {
                a,
                b,
                rest_a,
                rest_b,
            } => {
                let pa = match a {
                    Some(g) => g.eval_inner(t),
                    None => PointChart::new(rest_a.clone()),
                };
                let pb = match b {
                    Some(g) => g.eval_inner(t),
                    None => PointChart::new(rest_b.clone()),
                };
                join(&pa, &pb)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_axis_distance_is_exact() {
        // p = 3, (1,0) to (0,1): 2^(1/3).
        let s = SpaceModel::lp(3.0, 2).unwrap();
        let d = s
            .distance(
                &PointChart::new(vec![1.0, 0.0]),
                &PointChart::new(vec![0.0, 1.0]),
            )
            .unwrap();
        assert!((d - 2.0f64.powf(1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn cone_distance_matches_law_of_cosines() {
        let s = SpaceModel::cone(std::f64::consts::PI).unwrap();
        let d = s
            .distance(
                &PointChart::new(vec![1.0, 0.0]),
                &PointChart::new(vec![1.0, std::f64::consts::FRAC_PI_2]),
            )
            .unwrap();
        assert!((d - std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn product_distance_is_pythagorean() {
        let line = SpaceModel::euclidean(1).unwrap();
        let s = SpaceModel::product(line.clone(), line).unwrap();
        let d = s
            .distance(
                &PointChart::new(vec![0.0, 0.0]),
                &PointChart::new(vec![3.0, 4.0]),
            )
            .unwrap();
        assert!((d - 5.0).abs() < 1e-14);
    }

    #[test]
    fn cone_midpoint_radius_from_unfolding() {
        // theta = 3, radius-1 endpoints with angular gap 1: midpoint radius cos(1/2).
        let s = SpaceModel::cone(3.0).unwrap();
        let g = s
            .geodesic(
                &PointChart::new(vec![1.0, 0.5]),
                &PointChart::new(vec![1.0, 1.5]),
            )
            .unwrap();
        let mid = g.eval(0.5);
        assert!((mid.coords[0] - 0.5f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn sphere_geodesic_passes_colatitude_grid() {
        let s = SpaceModel::sphere_cap(1.2).unwrap();
        let pole = PointChart::new(sphere::POLE.to_vec());
        let q = PointChart::new(sphere::exp_map(&sphere::POLE, 1.0, 0.3).to_vec());
        let g = s.geodesic(&pole, &q).unwrap();
        let mid = g.eval(0.5);
        let colat = sphere::distance(&mid.coords, &sphere::POLE);
        assert!((colat - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_segment_is_rejected() {
        let s = SpaceModel::euclidean(2).unwrap();
        let x = PointChart::new(vec![0.3, 0.4]);
        assert!(matches!(s.geodesic(&x, &x), Err(Error::DegenerateSegment)));
    }

    #[test]
    fn invalid_charts_are_rejected() {
        let s = SpaceModel::sphere_cap(1.0).unwrap();
        let off = PointChart::new(vec![0.0, 0.0, 1.1]);
        assert!(s.distance(&off, &off).is_err());
        let c = SpaceModel::cone(4.0).unwrap();
        assert!(c
            .distance(
                &PointChart::new(vec![1.0, 4.5]),
                &PointChart::new(vec![1.0, 0.0])
            )
            .is_err());
        let l = SpaceModel::lp(3.0, 2).unwrap();
        assert!(l
            .distance(
                &PointChart::new(vec![1.0]),
                &PointChart::new(vec![0.0, 0.0])
            )
            .is_err());
    }

    #[test]
    fn sample_ball_respects_radius_and_determinism() {
        let s = SpaceModel::lp(4.0, 2).unwrap();
        let c = PointChart::new(vec![0.5, -0.25]);
        let a = s.sample_ball(&c, 0.75, 200, 7).unwrap();
        let b = s.sample_ball(&c, 0.75, 200, 7).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(s.dist(&c, p) <= 0.75 + 1e-12);
        }
    }

    #[test]
    fn sphere_ball_escaping_cap_is_range_error() {
        let s = SpaceModel::sphere_cap(0.8).unwrap();
        let base = s.base_point();
        assert!(matches!(
            s.sample_ball(&base, 1.0, 4, 1),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn cone_apex_ball_area_fraction() {
        // theta = pi apex ball: fraction inside radius r/2 is 1/4.
        let s = SpaceModel::cone(std::f64::consts::PI).unwrap();
        let apex = PointChart::new(vec![0.0, 0.0]);
        let pts = s.sample_ball(&apex, 1.0, 40_000, 11).unwrap();
        let inside = pts.iter().filter(|p| s.dist(&apex, p) <= 0.5).count();
        let frac = inside as f64 / pts.len() as f64;
        assert!((frac - 0.25).abs() < 0.01, "fraction {frac}");
    }

    #[test]
    fn point_along_extends_lines() {
        let s = SpaceModel::lp(3.0, 2).unwrap();
        let x = PointChart::new(vec![0.0, 0.0]);
        let y = PointChart::new(vec![1.0, 0.0]);
        let q = s.point_along(&x, &y, 2.5).unwrap();
        assert!((q.coords[0] - 2.5).abs() < 1e-12);
    }
}
