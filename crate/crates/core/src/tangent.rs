//! Blow-ups and tangent-cone analysis: finite pointed samples with
//! Gromov--Hausdorff bounds, epsilon-isometry checks, the rescaling metric on
//! geodesic germs, spaces of directions with a common length, and fitting of
//! the Banach tangent norm in chart coordinates with smoothness/convexity
//! certification.

use crate::chart::PointChart;
use crate::comparison::{angle_fixed_scale, AngleEstimate};
use crate::curvature::{norm_residual, norm_uniform_search, NormMode};
use crate::error::{Error, Result};
use crate::seed;
use crate::space::{unit_directions, GeodesicSegment, SpaceModel, SpaceSpec};
use serde::{Deserialize, Serialize};

/// Pairwise-distance matrix with a distinguished base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinitePointedSample {
    matrix: Vec<Vec<f64>>,
    base: usize,
}

impl FinitePointedSample {
    pub fn new(matrix: Vec<Vec<f64>>, base: usize) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::Input(
                "sample must contain at least one point".into(),
            ));
        }
        if base >= n {
            return Err(Error::Input(format!("base index {base} out of range {n}")));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Input("distance matrix is not square".into()));
            }
            if row[i] != 0.0 {
                return Err(Error::Input("distance matrix diagonal must be zero".into()));
            }
        }
        let scale = matrix
            .iter()
            .flat_map(|r| r.iter().copied())
            .fold(0.0f64, f64::max)
            .max(1.0);
        for i in 0..n {
            for j in 0..n {
                if (matrix[i][j] - matrix[j][i]).abs() > 1e-9 * scale {
                    return Err(Error::Input(format!("matrix not symmetric at ({i}, {j})")));
                }
                if matrix[i][j] < 0.0 {
                    return Err(Error::Input("negative distance".into()));
                }
                for l in 0..n {
                    if matrix[i][j] > matrix[i][l] + matrix[l][j] + 1e-9 * scale {
                        return Err(Error::Input(format!(
                            "triangle inequality fails at ({i}, {j}, {l})"
                        )));
                    }
                }
            }
        }
        Ok(Self { matrix, base })
    }

    pub fn from_points(space: &SpaceModel, points: &[PointChart], base: usize) -> Result<Self> {
        let n = points.len();
        let mut matrix = vec![vec![0.0; n]; n];
        for i in 0..n {
            space.validate_point(&points[i])?;
            for j in (i + 1)..n {
                let d = space.dist(&points[i], &points[j]);
                matrix[i][j] = d;
                matrix[j][i] = d;
            }
        }
        Self::new(matrix, base)
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.matrix[i][j]
    }

    pub fn diameter(&self) -> f64 {
        self.matrix
            .iter()
            .flat_map(|r| r.iter().copied())
            .fold(0.0, f64::max)
    }

    /// All distances multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        let matrix = self
            .matrix
            .iter()
            .map(|r| r.iter().map(|d| d * factor).collect())
            .collect();
        Self {
            matrix,
            base: self.base,
        }
    }

    /// CSV distance-matrix format: header row of point ids, one row per
    /// point, and a final metadata row naming the base id.
    pub fn to_csv(&self) -> String {
        let n = self.len();
        let mut out = String::new();
        out.push_str("id");
        for j in 0..n {
            out.push_str(&format!(",p{j}"));
        }
        out.push('\n');
        for i in 0..n {
            out.push_str(&format!("p{i}"));
            for j in 0..n {
                out.push_str(&format!(",{}", self.matrix[i][j]));
            }
            out.push('\n');
        }
        out.push_str(&format!("base,p{}\n", self.base));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Input("empty CSV".into()))?;
        let ids: Vec<&str> = header.split(',').skip(1).collect();
        let n = ids.len();
        let mut matrix = vec![vec![0.0; n]; n];
        let mut base: Option<usize> = None;
        let mut row_count = 0usize;
        for line in lines {
            let mut fields = line.split(',');
            let tag = fields.next().unwrap_or_default();
            if tag == "base" {
                let id = fields
                    .next()
                    .ok_or_else(|| Error::Input("base row missing id".into()))?;
                base = Some(
                    ids.iter()
                        .position(|s| *s == id)
                        .ok_or_else(|| Error::Input(format!("unknown base id {id}")))?,
                );
                continue;
            }
            if row_count >= n {
                return Err(Error::Input("too many matrix rows".into()));
            }
            for (j, f) in fields.enumerate() {
                if j >= n {
                    return Err(Error::Input("row too long".into()));
                }
                matrix[row_count][j] = f
                    .parse::<f64>()
                    .map_err(|_| Error::Input(format!("bad distance {f:?}")))?;
            }
            row_count += 1;
        }
        if row_count != n {
            return Err(Error::Input(format!(
                "expected {n} rows, found {row_count}"
            )));
        }
        let base = base.ok_or_else(|| Error::Input("missing base metadata row".into()))?;
        Self::new(matrix, base)
    }
}

/// Sample the blow-up `(X, d / lambda, x)`: `count` points (the first is the
/// base `x`, the rest sampled in `B(x, lambda * radius)`), with all pairwise
/// distances divided by `lambda`.
pub fn blowup_sample(
    space: &SpaceModel,
    x: &PointChart,
    lambda: f64,
    count: usize,
    radius: f64,
    seed_value: u64,
) -> Result<FinitePointedSample> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} must lie in (0, 1]"
        )));
    }
    if count < 1 {
        return Err(Error::Input("count must be >= 1".into()));
    }
    let mut points = vec![x.clone()];
    if count > 1 {
        points.extend(space.sample_ball(x, lambda * radius, count - 1, seed_value)?);
    }
    Ok(FinitePointedSample::from_points(space, &points, 0)?.rescaled(1.0 / lambda))
}

/// Pad the sample to `n` points by repeating its base.
fn padded(a: &FinitePointedSample, n: usize) -> FinitePointedSample {
    if a.len() >= n {
        return a.clone();
    }
    let m = a.len();
    let idx = |i: usize| if i < m { i } else { a.base };
    let matrix: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a.dist(idx(i), idx(j))).collect())
        .collect();
    FinitePointedSample {
        matrix,
        base: a.base,
    }
}

fn distortion(a: &FinitePointedSample, b: &FinitePointedSample, perm: &[usize]) -> f64 {
    let n = a.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a.dist(i, j) - b.dist(perm[i], perm[j])).abs());
        }
    }
    worst
}

/// Lower and upper bounds for the pointed Gromov--Hausdorff distance between
/// finite samples, with correspondences restricted to base-preserving
/// bijections (samples padded by their base when sizes differ).
///
/// The upper bound is half the minimal distortion: exact by exhaustive search
/// when the padded size is at most `exact_limit`, otherwise greedy rank
/// matching improved by pair swaps. The lower bound combines the diameter gap
/// with the sorted-distance-multiset bound, both valid for bijections.
pub fn gh_distance_bounds(
    a: &FinitePointedSample,
    b: &FinitePointedSample,
    exact_limit: usize,
) -> Result<(f64, f64)> {
    let n = a.len().max(b.len());
    let a = padded(a, n);
    let b = padded(b, n);

    let mut da: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| a.dist(i, j))
        .collect();
    let mut db: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| b.dist(i, j))
        .collect();
    da.sort_by(|x, y| x.partial_cmp(y).unwrap());
    db.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let multiset_gap = da
        .iter()
        .zip(&db)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let lower = ((a.diameter() - b.diameter()).abs() / 2.0).max(multiset_gap / 2.0);

    // Base-preserving bijections act on the non-base indices.
    let free_a: Vec<usize> = (0..n).filter(|&i| i != a.base()).collect();
    let free_b: Vec<usize> = (0..n).filter(|&i| i != b.base()).collect();
    let assemble = |assign: &[usize]| -> Vec<usize> {
        let mut perm = vec![0usize; n];
        perm[a.base()] = b.base();
        for (slot, &img) in free_a.iter().zip(assign) {
            perm[*slot] = img;
        }
        perm
    };

    let upper = if n <= exact_limit {
        let mut best = f64::INFINITY;
        let mut assign = free_b.clone();
        permute(&mut assign, 0, &mut |arrangement| {
            let perm = assemble(arrangement);
            let d = distortion(&a, &b, &perm);
            if d < best {
                best = d;
            }
        });
        best
    } else {
        // Greedy: match by distance-to-base rank, then improve with swaps.
        let mut order_a = free_a.clone();
        order_a.sort_by(|&x, &y| {
            a.dist(a.base(), x)
                .partial_cmp(&a.dist(a.base(), y))
                .unwrap()
        });
        let mut order_b = free_b.clone();
        order_b.sort_by(|&x, &y| {
            b.dist(b.base(), x)
                .partial_cmp(&b.dist(b.base(), y))
                .unwrap()
        });
        let mut assign = vec![0usize; free_a.len()];
        for (rank, &ai) in order_a.iter().enumerate() {
            let slot = free_a.iter().position(|&s| s == ai).unwrap();
            assign[slot] = order_b[rank];
        }
        let mut best = distortion(&a, &b, &assemble(&assign));
        let mut improved = true;
        let mut passes = 0;
        while improved && passes < 50 {
            improved = false;
            passes += 1;
            for i in 0..assign.len() {
                for j in (i + 1)..assign.len() {
                    assign.swap(i, j);
                    let d = distortion(&a, &b, &assemble(&assign));
                    if d < best {
                        best = d;
                        improved = true;
                    } else {
                        assign.swap(i, j);
                    }
                }
            }
        }
        best
    };
    Ok((lower.min(upper / 2.0), upper / 2.0))
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Literal evaluation of the three epsilon-isometry conditions for an index
/// correspondence between finite pointed samples: base preserved, distortion
/// under eps on the 1/eps ball, and eps-almost-onto on interior balls.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpsIsometryCheck {
    pub holds: bool,
    pub base_preserved: bool,
    pub distortion_ok: bool,
    pub almost_onto: bool,
}

pub fn eps_isometry_check(
    map: &[usize],
    a: &FinitePointedSample,
    b: &FinitePointedSample,
    eps: f64,
) -> Result<EpsIsometryCheck> {
    if eps <= 0.0 {
        return Err(Error::Domain("eps must be > 0".into()));
    }
    if map.len() != a.len() {
        return Err(Error::Input("correspondence length mismatch".into()));
    }
    if map.iter().any(|&m| m >= b.len()) {
        return Err(Error::Input("correspondence image out of range".into()));
    }
    let base_preserved = map[a.base()] == b.base();

    let reach = 1.0 / eps;
    let mut distortion_ok = true;
    for i in 0..a.len() {
        if a.dist(a.base(), i) >= reach {
            continue;
        }
        for j in 0..a.len() {
            if a.dist(a.base(), j) >= reach {
                continue;
            }
            if (a.dist(i, j) - b.dist(map[i], map[j])).abs() >= eps {
                distortion_ok = false;
            }
        }
    }

    let mut almost_onto = true;
    for w in 0..b.len() {
        let rho = b.dist(b.base(), w);
        if rho + eps >= reach {
            continue;
        }
        let covered = (0..a.len())
            .any(|z| a.dist(a.base(), z) <= rho + eps + 1e-12 && b.dist(map[z], w) < eps);
        if !covered {
            almost_onto = false;
        }
    }
    Ok(EpsIsometryCheck {
        holds: base_preserved && distortion_ok && almost_onto,
        base_preserved,
        distortion_ok,
        almost_onto,
    })
}

/// A geodesic germ from a base point, tagged with a length parameter: an
/// element of the space of directions with common length.
#[derive(Clone, Debug)]
pub struct DirectionWithLength {
    pub geodesic: GeodesicSegment,
    pub length: f64,
}

impl DirectionWithLength {
    pub fn new(geodesic: GeodesicSegment, length: f64) -> Result<Self> {
        if length <= 0.0 {
            return Err(Error::Input("direction length must be > 0".into()));
        }
        if geodesic.length() <= 0.0 {
            return Err(Error::DegenerateSegment);
        }
        Ok(Self { geodesic, length })
    }
}

/// Value of the rescaling metric between two germs, plus its consistency
/// against the fixed-scale angle through the law of cosines.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TangentMetricValue {
    pub value: f64,
    /// `|value^2 - (t^2 + s^2 - 2 t s cos angle)| / (t + s)^2`.
    pub relation_residual: f64,
    pub angle: AngleEstimate,
}

/// The metric `d_x((gamma, t), (eta, s)) = lim |gamma(theta t) eta(theta s)| / theta`
/// on germs at a common base point; the limit is certified monotone
/// (non-decreasing as theta shrinks) by Busemann concavity.
pub fn tangent_metric(
    space: &SpaceModel,
    u: &DirectionWithLength,
    v: &DirectionWithLength,
) -> Result<TangentMetricValue> {
    let x = u.geodesic.start();
    if space.dist(&x, &v.geodesic.start()) > 1e-12 * (1.0 + u.length + v.length) {
        return Err(Error::Input("germs do not share a base point".into()));
    }
    let (t, s) = (u.length, v.length);
    let theta0 = 1.0f64
        .min(u.geodesic.length() / t)
        .min(v.geodesic.length() / s);
    let mag = x.coords.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);

    let mut theta = theta0;
    let mut prev: Option<f64> = None;
    let mut value = 0.0;
    for _ in 0..=48 {
        let a = u.geodesic.eval_arclength(theta * t);
        let b = v.geodesic.eval_arclength(theta * s);
        let ratio = space.dist(&a, &b) / theta;
        let noise = 16.0 * f64::EPSILON * mag * (t + s) / theta;
        if let Some(p) = prev {
            if ratio < p - (1e-9 * (t + s)).max(4.0 * noise) {
                return Err(Error::BusemannViolated(format!(
                    "rescaled spread decreased from {p} to {ratio} as theta shrank"
                )));
            }
            let delta = (ratio - p).abs();
            value = ratio;
            prev = Some(ratio);
            if delta < 1e-12 * (t + s) || delta < 4.0 * noise {
                break;
            }
        } else {
            value = ratio;
            prev = Some(ratio);
        }
        theta /= 2.0;
    }

    let angle = angle_fixed_scale(space, &u.geodesic, &v.geodesic, t, s)?;
    let by_angle = t * t + s * s - 2.0 * t * s * angle.value.cos();
    let relation_residual = (value * value - by_angle).abs() / ((t + s) * (t + s));
    Ok(TangentMetricValue {
        value,
        relation_residual,
        angle,
    })
}

/// The common-scale angle metric on directions with equal length parameter.
pub fn direction_angle_metric(
    space: &SpaceModel,
    u: &DirectionWithLength,
    v: &DirectionWithLength,
) -> Result<f64> {
    if (u.length - v.length).abs() > 1e-12 * (u.length + v.length) {
        return Err(Error::Input(format!(
            "common-length metric needs equal lengths, got {} and {}",
            u.length, v.length
        )));
    }
    Ok(angle_fixed_scale(space, &u.geodesic, &v.geodesic, u.length, v.length)?.value)
}

/// Greedy packing of the direction space at `x` at angular separation `eps`,
/// compared against the doubling-derived uniform-compactness bound `N(eps/4)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionPacking {
    pub count: usize,
    /// Measured `N(eps/4)`: greedy packing number of a sampled ball at
    /// separation `(eps/4) * radius`.
    pub bound: usize,
    pub bound_ok: bool,
}

pub fn packing_directions(
    space: &SpaceModel,
    x: &PointChart,
    l: f64,
    eps: f64,
    budget: usize,
    seed_value: u64,
) -> Result<DirectionPacking> {
    if eps <= 0.0 {
        return Err(Error::Domain("eps must be > 0".into()));
    }
    if l <= 0.0 {
        return Err(Error::Domain("length must be > 0".into()));
    }
    let (_, region_radius) = space.default_region();
    let probe_dist = 0.25 * region_radius;
    let probes = space.probe_sphere(x, probe_dist, budget)?;
    let germs: Vec<DirectionWithLength> = probes
        .iter()
        .filter(|p| **p != *x)
        .filter_map(|p| {
            let g = space.geodesic(x, p).ok()?;
            DirectionWithLength::new(g, l).ok()
        })
        .collect();

    let mut kept: Vec<&DirectionWithLength> = Vec::new();
    for germ in &germs {
        let mut separated = true;
        for other in &kept {
            if direction_angle_metric(space, germ, other)? < eps {
                separated = false;
                break;
            }
        }
        if separated {
            kept.push(germ);
        }
    }
    let count = kept.len();

    // Measured doubling bound: (eps/4)-separated packing of a sampled ball,
    // separation scaled by the ball radius.
    let ball = space.sample_ball(x, probe_dist, (budget * 4).max(2000), seed_value)?;
    let sep = eps / 4.0 * probe_dist;
    let mut centers: Vec<&PointChart> = Vec::new();
    for p in &ball {
        if centers.iter().all(|c| space.dist(c, p) >= sep) {
            centers.push(p);
        }
    }
    let bound = centers.len();
    Ok(DirectionPacking {
        count,
        bound,
        bound_ok: count <= bound,
    })
}

/// A tangent norm fitted in chart-frame coordinates: unit-ball boundary radii
/// sampled per direction, evaluated elsewhere by interpolation (periodic
/// Catmull-Rom in 2D, inverse-distance over nearest samples otherwise).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FittedNorm {
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
}

impl FittedNorm {
    /// Unit-ball boundary radius in an arbitrary unit direction.
    pub fn radius(&self, unit: &[f64]) -> f64 {
        if self.dim == 2 {
            // Directions are equally spaced angles; periodic Catmull-Rom.
            let n = self.directions.len();
            let ang = unit[1]
                .atan2(unit[0])
                .rem_euclid(2.0 * std::f64::consts::PI);
            let step = 2.0 * std::f64::consts::PI / n as f64;
            let pos = ang / step;
            let i1 = pos.floor() as usize % n;
            let u = pos - pos.floor();
            let i0 = (i1 + n - 1) % n;
            let i2 = (i1 + 1) % n;
            let i3 = (i1 + 2) % n;
            let (r0, r1, r2, r3) = (
                self.radii[i0],
                self.radii[i1],
                self.radii[i2],
                self.radii[i3],
            );
            0.5 * ((2.0 * r1)
                + (-r0 + r2) * u
                + (2.0 * r0 - 5.0 * r1 + 4.0 * r2 - r3) * u * u
                + (-r0 + 3.0 * r1 - 3.0 * r2 + r3) * u * u * u)
        } else {
            // Inverse-distance over the three nearest sampled directions.
            let mut best = [(f64::INFINITY, 0usize); 3];
            for (i, d) in self.directions.iter().enumerate() {
                let dist2: f64 = d.iter().zip(unit).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist2 < best[2].0 {
                    best[2] = (dist2, i);
                    best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                }
            }
            let mut wsum = 0.0;
            let mut rsum = 0.0;
            for (d2, i) in best {
                if !d2.is_finite() {
                    continue;
                }
                let w = 1.0 / (d2.sqrt() + 1e-12);
                wsum += w;
                rsum += w * self.radii[i];
            }
            rsum / wsum
        }
    }

    /// Evaluate the fitted norm at an arbitrary chart-frame vector.
    pub fn norm(&self, w: &[f64]) -> f64 {
        let e: f64 = w.iter().map(|c| c * c).sum::<f64>().sqrt();
        if e == 0.0 {
            return 0.0;
        }
        let unit: Vec<f64> = w.iter().map(|c| c / e).collect();
        e / self.radius(&unit)
    }

    /// Interpolation error scale of the fit, used as the certification slack.
    pub fn interpolation_tolerance(&self) -> f64 {
        let n = self.directions.len().max(4) as f64;
        if self.dim == 2 {
            // Catmull-Rom on a smooth periodic curve: O(h^4).
            (50.0 * (2.0 * std::f64::consts::PI / n).powi(4)).max(1e-9)
        } else {
            // Nearest-sample interpolation on the sphere: O(h^2)-ish.
            20.0 * (4.0 * std::f64::consts::PI / n)
        }
    }
}

/// Norm fit plus its diagnostics and certification outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormFit {
    pub fitted: FittedNorm,
    /// Max relative spread of per-direction radii across blow-up scales;
    /// large drift flags a non-conical tangent.
    pub scale_drift: f64,
    pub symmetry_defect: f64,
    pub convexity_defect: f64,
    /// Worst residual of 2-uniform smoothness at the declared constant.
    pub smooth_residual: f64,
    /// Worst residual of p-uniform convexity at the Clarkson constant.
    pub convex_residual: f64,
    pub cert_tolerance: f64,
    pub certified: bool,
}

/// Fit the tangent norm at `x` from blow-up distances along chart-frame
/// directions, then certify uniform smoothness and convexity of the fitted
/// norm at the hypothesis constants implied by the model.
pub fn fit_norm(
    space: &SpaceModel,
    x: &PointChart,
    scales: &[f64],
    directions: usize,
    seed_value: u64,
) -> Result<NormFit> {
    if scales.len() < 2 {
        return Err(Error::Input("need at least two blow-up scales".into()));
    }
    if directions < 8 {
        return Err(Error::Input("need at least 8 fit directions".into()));
    }
    let n = space.dim();
    let dirs = unit_directions(n, directions);
    let step0 = (0.02 * space.regular_scale(x)).max(1e-4);

    let mut radii = Vec::with_capacity(dirs.len());
    let mut scale_drift = 0.0f64;
    for u in &dirs {
        let mut per_scale = Vec::with_capacity(scales.len());
        for &lambda in scales {
            if !(lambda > 0.0 && lambda <= 1.0) {
                return Err(Error::Domain(format!("scale {lambda} must lie in (0, 1]")));
            }
            let h = lambda * step0;
            let moved = space.frame_move(x, u, h)?;
            per_scale.push(space.dist(x, &moved) / h);
        }
        let mut sorted = per_scale.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = sorted[sorted.len() / 2];
        if med <= 0.0 {
            return Err(Error::Domain("degenerate direction in norm fit".into()));
        }
        let spread = (sorted[sorted.len() - 1] - sorted[0]) / med;
        scale_drift = scale_drift.max(spread);
        radii.push(1.0 / med);
    }
    let fitted = FittedNorm {
        dim: n,
        directions: dirs.clone(),
        radii,
    };

    // Symmetry: radius(u) vs radius(-u).
    let mut symmetry_defect = 0.0f64;
    for (u, r) in dirs.iter().zip(&fitted.radii) {
        let neg: Vec<f64> = u.iter().map(|c| -c).collect();
        symmetry_defect = symmetry_defect.max((fitted.radius(&neg) - r).abs() / r);
    }

    // Convexity of the unit ball: midpoints of boundary points stay inside.
    let mut convexity_defect = 0.0f64;
    // Certification slack: interpolation error of the fit plus the finite
    // blow-up bias (measured as scale drift) that curved models carry.
    let tol = fitted.interpolation_tolerance() + 6.0 * scale_drift;
    let mut rng = seed::rng(seed_value);
    use rand::Rng;
    for _ in 0..512 {
        let i = rng.gen_range(0..dirs.len());
        let j = rng.gen_range(0..dirs.len());
        if i == j {
            continue;
        }
        let bi: Vec<f64> = dirs[i].iter().map(|c| c * fitted.radii[i]).collect();
        let bj: Vec<f64> = dirs[j].iter().map(|c| c * fitted.radii[j]).collect();
        let mid: Vec<f64> = bi.iter().zip(&bj).map(|(a, b)| (a + b) / 2.0).collect();
        convexity_defect = convexity_defect.max(fitted.norm(&mid) - 1.0);
    }

    // Certification hypotheses from the model: smoothness at the declared S;
    // convexity at (p, 2^(p-2)) for l^p kinds, inner-product values otherwise.
    let s = space.params().s;
    let (cpow, cconst) = match space.spec() {
        SpaceSpec::Lp { p, .. } => (p, crate::curvature::lp_convexity_constant(p)),
        _ => (2.0, 1.0),
    };
    let nf = |w: &[f64]| fitted.norm(w);
    let (smooth_residual, _, _, _) =
        norm_uniform_search(&nf, n, NormMode::Smooth, 2.0, s, 2000, seed_value ^ 0x5f17);
    let (convex_residual, _, _, _) = norm_uniform_search(
        &nf,
        n,
        NormMode::Convex,
        cpow,
        cconst,
        2000,
        seed_value ^ 0xc0417,
    );
    let certified = smooth_residual >= -tol && convex_residual >= -tol;
    Ok(NormFit {
        fitted,
        scale_drift,
        symmetry_defect,
        convexity_defect,
        smooth_residual,
        convex_residual,
        cert_tolerance: tol,
        certified,
    })
}

/// Residual of a single inequality instance on a fitted norm, for replays.
pub fn fitted_norm_residual(
    fitted: &FittedNorm,
    mode: NormMode,
    power: f64,
    constant: f64,
    u: &[f64],
    v: &[f64],
) -> f64 {
    let nf = |w: &[f64]| fitted.norm(w);
    norm_residual(&nf, mode, power, constant, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(coords: &[f64]) -> PointChart {
        PointChart::new(coords.to_vec())
    }

    #[test]
    fn csv_round_trip() {
        let space = SpaceModel::lp(3.0, 2).unwrap();
        let pts = vec![
            pt(&[0.0, 0.0]),
            pt(&[1.0, 0.0]),
            pt(&[0.0, 1.0]),
            pt(&[0.4, -0.3]),
        ];
        let s = FinitePointedSample::from_points(&space, &pts, 2).unwrap();
        let csv = s.to_csv();
        let back = FinitePointedSample::from_csv(&csv).unwrap();
        assert_eq!(back.base(), 2);
        assert_eq!(back.len(), 4);
        for i in 0..4 {
            for j in 0..4 {
                assert!((back.dist(i, j) - s.dist(i, j)).abs() < 1e-15);
            }
        }
        assert!(FinitePointedSample::from_csv("id,p0\np0,0.0\n").is_err());
    }

    #[test]
    fn gh_identical_samples_are_zero() {
        let space = SpaceModel::euclidean(2).unwrap();
        let s = blowup_sample(&space, &pt(&[0.0, 0.0]), 1.0, 6, 1.0, 5).unwrap();
        let (lo, hi) = gh_distance_bounds(&s, &s, 8).unwrap();
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 0.0);
    }

    #[test]
    fn gh_bounds_scale_linearly_and_nest() {
        let space = SpaceModel::lp(4.0, 2).unwrap();
        let a = blowup_sample(&space, &pt(&[0.0, 0.0]), 1.0, 7, 1.0, 5).unwrap();
        let b = blowup_sample(&space, &pt(&[0.0, 0.0]), 1.0, 7, 1.0, 9).unwrap();
        let (lo, hi) = gh_distance_bounds(&a, &b, 8).unwrap();
        assert!(lo <= hi + 1e-15);
        let (lo2, hi2) = gh_distance_bounds(&a.rescaled(0.5), &b.rescaled(0.5), 8).unwrap();
        assert!((lo2 - 0.5 * lo).abs() < 1e-12);
        assert!((hi2 - 0.5 * hi).abs() < 1e-12);
    }

    #[test]
    fn gh_separates_l2_from_l4_ball_samples() {
        let l2 = SpaceModel::euclidean(2).unwrap();
        let l4 = SpaceModel::lp(4.0, 2).unwrap();
        let a = blowup_sample(&l2, &pt(&[0.0, 0.0]), 1.0, 8, 1.0, 17).unwrap();
        let b = blowup_sample(&l4, &pt(&[0.0, 0.0]), 1.0, 8, 1.0, 17).unwrap();
        let (lo, hi) = gh_distance_bounds(&a, &b, 8).unwrap();
        assert!(lo > 0.0, "lower bound {lo}");
        assert!(hi >= lo);
    }

    #[test]
    fn eps_isometry_literal_conditions() {
        let space = SpaceModel::euclidean(2).unwrap();
        let s = blowup_sample(&space, &pt(&[0.0, 0.0]), 1.0, 6, 1.0, 23).unwrap();
        let identity: Vec<usize> = (0..s.len()).collect();
        assert!(eps_isometry_check(&identity, &s, &s, 0.05).unwrap().holds);
        // Swapping the base image breaks the first condition.
        let mut bad = identity.clone();
        bad.swap(0, 1);
        let check = eps_isometry_check(&bad, &s, &s, 0.05).unwrap();
        assert!(!check.base_preserved);
        assert!(!check.holds);
    }

    #[test]
    fn rescaled_samples_are_eps_isometric_at_the_diameter_gap() {
        // The identity correspondence between a sample and its
        // lambda-rescaling distorts every distance by (1 - lambda) d, so it
        // is an eps-isometry exactly when eps clears (1 - lambda) diam on
        // the reachable ball.
        let space = SpaceModel::euclidean(2).unwrap();
        let sample = blowup_sample(&space, &pt(&[0.0, 0.0]), 1.0, 7, 1.0, 29).unwrap();
        let lambda = 0.9;
        let shrunk = sample.rescaled(lambda);
        let identity: Vec<usize> = (0..sample.len()).collect();
        let gap = (1.0 - lambda) * sample.diameter();
        let pass = eps_isometry_check(&identity, &sample, &shrunk, gap * 1.05).unwrap();
        assert!(pass.holds, "{pass:?}");
        let fail = eps_isometry_check(&identity, &sample, &shrunk, gap * 0.5).unwrap();
        assert!(!fail.distortion_ok);
        assert!(!fail.holds);
    }

    #[test]
    fn tangent_metric_matches_norm_in_lp() {
        let space = SpaceModel::lp(3.0, 2).unwrap();
        let o = pt(&[0.0, 0.0]);
        let gu = space.geodesic(&o, &pt(&[1.0, 0.0])).unwrap();
        let gv = space.geodesic(&o, &pt(&[0.0, 1.0])).unwrap();
        let u = DirectionWithLength::new(gu, 0.7).unwrap();
        let v = DirectionWithLength::new(gv, 0.4).unwrap();
        let m = tangent_metric(&space, &u, &v).unwrap();
        let expected = crate::space::lp_dist(3.0, &[0.7, 0.0], &[0.0, 0.4]);
        assert!(
            (m.value - expected).abs() < 1e-9,
            "{} vs {expected}",
            m.value
        );
        assert!(m.relation_residual < 1e-8);
    }

    #[test]
    fn tangent_metric_is_homogeneous() {
        let space = SpaceModel::cone(4.0).unwrap();
        let x = pt(&[1.0, 1.0]);
        let a = pt(&[1.4, 1.5]);
        let b = pt(&[0.8, 0.6]);
        let gu = space.geodesic(&x, &a).unwrap();
        let gv = space.geodesic(&x, &b).unwrap();
        let base = tangent_metric(
            &space,
            &DirectionWithLength::new(gu.clone(), 0.2).unwrap(),
            &DirectionWithLength::new(gv.clone(), 0.3).unwrap(),
        )
        .unwrap();
        let scaled = tangent_metric(
            &space,
            &DirectionWithLength::new(gu, 0.1).unwrap(),
            &DirectionWithLength::new(gv, 0.15).unwrap(),
        )
        .unwrap();
        assert!((scaled.value - 0.5 * base.value).abs() < 1e-9);
    }

    fn germs_at(space: &SpaceModel, x: &PointChart, count: usize) -> Vec<DirectionWithLength> {
        space
            .probe_sphere(x, 0.5, count)
            .unwrap()
            .iter()
            .map(|p| DirectionWithLength::new(space.geodesic(x, p).unwrap(), 1.0).unwrap())
            .collect()
    }

    #[test]
    fn common_scale_angle_symmetry_and_length_independence() {
        let space = SpaceModel::lp(3.0, 2).unwrap();
        let x = pt(&[0.1, -0.2]);
        let germs = germs_at(&space, &x, 12);
        for i in 0..germs.len() {
            for j in (i + 1)..germs.len() {
                let ab = direction_angle_metric(&space, &germs[i], &germs[j]).unwrap();
                let ba = direction_angle_metric(&space, &germs[j], &germs[i]).unwrap();
                assert!((ab - ba).abs() < 1e-9);
            }
        }
        let g0 = DirectionWithLength::new(germs[0].geodesic.clone(), 0.2).unwrap();
        let g1 = DirectionWithLength::new(germs[1].geodesic.clone(), 0.2).unwrap();
        let short = direction_angle_metric(&space, &g0, &g1).unwrap();
        let long = direction_angle_metric(&space, &germs[0], &germs[1]).unwrap();
        assert!((short - long).abs() < 1e-8);
        // Mismatched lengths are an input error.
        assert!(direction_angle_metric(&space, &g0, &germs[1]).is_err());
    }

    /// The rescaling metric is a genuine metric on germ triples. The
    /// common-scale angle is not: for p != 2 the arccos transform breaks the
    /// triangle inequality, witnessed exactly by the axis triple
    /// (e1, e2, -e1), where angle(e1, -e1) = pi exceeds
    /// 2 * arccos(1 - 2^(2/p - 1)). On l^2 the angle is the Euclidean one
    /// and the inequality does hold.
    #[test]
    fn triangle_inequality_holds_for_the_metric_not_the_angle() {
        let l3 = SpaceModel::lp(3.0, 2).unwrap();
        let x = pt(&[0.0, 0.0]);
        let dirs = [pt(&[1.0, 0.0]), pt(&[0.0, 1.0]), pt(&[-1.0, 0.0])];
        let germ =
            |d: &PointChart| DirectionWithLength::new(l3.geodesic(&x, d).unwrap(), 1.0).unwrap();
        let (a, b, c) = (germ(&dirs[0]), germ(&dirs[1]), germ(&dirs[2]));
        let ac = direction_angle_metric(&l3, &a, &c).unwrap();
        let ab = direction_angle_metric(&l3, &a, &b).unwrap();
        let bc = direction_angle_metric(&l3, &b, &c).unwrap();
        assert!((ac - std::f64::consts::PI).abs() < 1e-9);
        let hop = (1.0 - 2.0f64.powf(2.0 / 3.0 - 1.0)).acos();
        assert!((ab - hop).abs() < 1e-9 && (bc - hop).abs() < 1e-9);
        assert!(ac > ab + bc + 0.4, "expected the documented violation");
        // The underlying rescaling metric does satisfy the triangle
        // inequality on the same triples (and sampled ones).
        let germs = germs_at(&l3, &pt(&[0.1, -0.2]), 10);
        for i in 0..germs.len() {
            for j in 0..germs.len() {
                for k in 0..germs.len() {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    let dij = tangent_metric(&l3, &germs[i], &germs[j]).unwrap().value;
                    let dik = tangent_metric(&l3, &germs[i], &germs[k]).unwrap().value;
                    let dkj = tangent_metric(&l3, &germs[k], &germs[j]).unwrap().value;
                    assert!(dij <= dik + dkj + 1e-8);
                }
            }
        }
        // Euclidean common-scale angles are honest angles between rays.
        let l2 = SpaceModel::euclidean(2).unwrap();
        let germs = germs_at(&l2, &pt(&[0.0, 0.0]), 10);
        for i in 0..germs.len() {
            for j in 0..germs.len() {
                for k in 0..germs.len() {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    let ab = direction_angle_metric(&l2, &germs[i], &germs[j]).unwrap();
                    let ak = direction_angle_metric(&l2, &germs[i], &germs[k]).unwrap();
                    let kb = direction_angle_metric(&l2, &germs[k], &germs[j]).unwrap();
                    assert!(ab <= ak + kb + 1e-8);
                }
            }
        }
    }

    #[test]
    fn direction_packing_on_the_euclidean_circle() {
        let space = SpaceModel::euclidean(2).unwrap();
        let x = pt(&[0.0, 0.0]);
        let eps = 0.5;
        let packing = packing_directions(&space, &x, 1.0, eps, 256, 31).unwrap();
        let expected = (2.0 * std::f64::consts::PI / eps).floor() as usize;
        assert!(
            packing.count >= expected - 1 && packing.count <= expected + 1,
            "count {} vs {expected}",
            packing.count
        );
        assert!(
            packing.bound_ok,
            "count {} bound {}",
            packing.count, packing.bound
        );
    }

    #[test]
    fn fitted_norm_recovers_l4() {
        let space = SpaceModel::lp(4.0, 2).unwrap();
        let fit = fit_norm(&space, &pt(&[0.3, -0.2]), &[1.0, 0.5, 0.25], 128, 41).unwrap();
        assert!(fit.scale_drift < 1e-9, "drift {}", fit.scale_drift);
        assert!(fit.symmetry_defect < 1e-6);
        // Sup error of fitted radii against the true unit sphere of l^4.
        let mut worst = 0.0f64;
        for (u, r) in fit.fitted.directions.iter().zip(&fit.fitted.radii) {
            let truth = 1.0 / crate::space::lp_norm(4.0, u);
            worst = worst.max((r - truth).abs() / truth);
        }
        assert!(worst < 0.02, "sup error {worst}");
        assert!(
            fit.certified,
            "smooth {} convex {}",
            fit.smooth_residual, fit.convex_residual
        );
    }

    #[test]
    fn fitted_norm_on_the_sphere_is_round() {
        let space = SpaceModel::sphere_cap(1.2).unwrap();
        let fit = fit_norm(&space, &space.base_point(), &[1.0, 0.5], 64, 43).unwrap();
        for r in &fit.fitted.radii {
            assert!((r - 1.0).abs() < 1e-3, "radius {r}");
        }
    }
}
