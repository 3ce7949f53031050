//! Strainers: ordered tuples of reference points whose comparison angles at a
//! base point are near pi (opposite pairs) and near pi/2 (cross pairs), with
//! hierarchical distance control. The associated distance map is an almost
//! orthogonal coordinate chart; this module constructs, verifies and improves
//! strainers, and measures the openness and bi-Lipschitz quality of their
//! charts.

use crate::chart::PointChart;
use crate::comparison::{bar_delta_s, bar_delta_sc, comparison_angle};
use crate::error::{Error, Result};
use crate::seed;
use crate::space::{CurvatureParams, SpaceModel};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Strict strainer inequalities are checked with this slack.
pub const MARGIN_SLACK: f64 = 1e-9;
/// Probe directions per level; doubled on failure up to `MAX_DIRECTIONS`.
const BASE_DIRECTIONS: usize = 64;
const MAX_DIRECTIONS: usize = 512;
/// Local refinement rounds after the best probe direction is picked.
const REFINE_ROUNDS: usize = 9;
const REFINE_SAMPLES: usize = 24;
/// Fraction of delta targeted by constructed distances, leaving margin.
const TARGET_FRACTION: f64 = 0.6;
/// Descent budget per openness target.
const MAX_DESCENT_STEPS: usize = 10_000;

/// One strainer pair: the strainer point `p` and an opposite point `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrainerPair {
    pub p: PointChart,
    pub q: PointChart,
}

/// An ordered list of strainer pairs at a base point. Order is significant:
/// the defining conditions are inductive and asymmetric, so reordering a
/// valid strainer generally breaks it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strainer {
    pub pairs: Vec<StrainerPair>,
    pub delta: f64,
    pub base: PointChart,
}

impl Strainer {
    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    /// The coordinate chart `x -> (|p_1 x|, ..., |p_k x|)`.
    pub fn map(&self, space: &SpaceModel) -> StrainerMap {
        StrainerMap {
            space: space.clone(),
            points: self.pairs.iter().map(|pr| pr.p.clone()).collect(),
        }
    }
}

/// Distance-coordinate map of a strainer: sqrt(k)-Lipschitz into Euclidean
/// R^k, 1-Lipschitz per coordinate.
#[derive(Clone, Debug)]
pub struct StrainerMap {
    space: SpaceModel,
    points: Vec<PointChart>,
}

impl StrainerMap {
    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn eval(&self, x: &PointChart) -> Result<Vec<f64>> {
        self.space.validate_point(x)?;
        Ok(self.points.iter().map(|p| self.space.dist(p, x)).collect())
    }
}

/// The closed-form constants attached to level-k strainers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrainerConstants {
    /// Admissibility threshold `k^-1 2^(-2k-1)` for the openness theorem.
    pub delta_k: f64,
    /// Openness floor `(1 - 2 delta) / 4^(k-1)` of the chart into l^1.
    pub epsilon_k: f64,
    /// Openness floor `epsilon_k / sqrt(k)` into Euclidean R^k.
    pub bar_epsilon_k: f64,
}

pub fn strainer_constants(k: usize, delta: f64) -> Result<StrainerConstants> {
    if k == 0 {
        return Err(Error::Input("strainer level k must be >= 1".into()));
    }
    if !(0.0..0.5).contains(&delta) || delta == 0.0 {
        return Err(Error::Input(format!(
            "delta = {delta} must lie in (0, 1/2)"
        )));
    }
    let kf = k as f64;
    let epsilon_k = (1.0 - 2.0 * delta) / f64::powi(4.0, k as i32 - 1);
    Ok(StrainerConstants {
        delta_k: f64::powi(2.0, -(2 * k as i32 + 1)) / kf,
        epsilon_k,
        bar_epsilon_k: epsilon_k / kf.sqrt(),
    })
}

/// Diagnostics of the single-pair condition: `p` is a strainer at `x` with
/// opposite `q` when the comparison angle exceeds `pi - delta` and the
/// distance-ratio budget `arccos(1 - S |qx| / (2 |px|))` stays under `delta`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PairDiagnostics {
    pub holds: bool,
    pub angle: f64,
    pub angle_margin: f64,
    pub budget: f64,
    pub budget_margin: f64,
    /// +inf when the range condition `|px| < D` holds (or D is infinite),
    /// negative when violated.
    pub range_margin: f64,
}

impl PairDiagnostics {
    pub fn margin(&self) -> f64 {
        self.angle_margin
            .min(self.budget_margin)
            .min(self.range_margin)
    }
}

pub fn is_one_strainer(
    space: &SpaceModel,
    params: &CurvatureParams,
    p: &PointChart,
    x: &PointChart,
    q: &PointChart,
    delta: f64,
) -> Result<PairDiagnostics> {
    let px = space.distance(p, x)?;
    let qx = space.distance(q, x)?;
    if px <= 0.0 || qx <= 0.0 {
        return Err(Error::Input(
            "strainer pair points must differ from the base".into(),
        ));
    }
    let pq = space.dist(p, q);
    let angle = comparison_angle(px, qx, pq)?;
    let budget = bar_delta_s(params.s, qx, px);
    let angle_margin = angle - (PI - delta);
    let budget_margin = delta - budget;
    let range_margin = if params.d.is_finite() {
        if px < params.d {
            f64::INFINITY
        } else {
            params.d - px
        }
    } else {
        f64::INFINITY
    };
    let holds =
        angle_margin > MARGIN_SLACK && budget_margin > MARGIN_SLACK && range_margin > MARGIN_SLACK;
    Ok(PairDiagnostics {
        holds,
        angle,
        angle_margin,
        budget,
        budget_margin,
        range_margin,
    })
}

/// Which inductive condition failed first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    OppositePair,
    Range,
    Hierarchy,
    Orthogonality,
}

/// Per-level margins of the inductive conditions.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LevelMargins {
    pub pair: f64,
    pub range: f64,
    pub hierarchy: f64,
    pub orthogonality: f64,
}

impl LevelMargins {
    pub fn min(&self) -> f64 {
        self.pair
            .min(self.range)
            .min(self.hierarchy)
            .min(self.orthogonality)
    }

    fn worst_condition(&self) -> Condition {
        let m = self.min();
        if m == self.pair {
            Condition::OppositePair
        } else if m == self.range {
            Condition::Range
        } else if m == self.hierarchy {
            Condition::Hierarchy
        } else {
            Condition::Orthogonality
        }
    }
}

/// Full inductive verification report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KStrainerCheck {
    pub holds: bool,
    /// First failing (level, condition), 1-based level.
    pub failing: Option<(usize, Condition)>,
    pub min_margin: f64,
    pub levels: Vec<LevelMargins>,
}

/// Margins of the conditions that level `j` (0-based index into `pairs`)
/// introduces on top of the previous levels.
fn level_margins(
    space: &SpaceModel,
    params: &CurvatureParams,
    base: &PointChart,
    pairs: &[StrainerPair],
    j: usize,
    delta: f64,
) -> Result<LevelMargins> {
    let pr = &pairs[j];
    let diag = is_one_strainer(space, params, &pr.p, base, &pr.q, delta)?;
    let pair = diag.angle_margin.min(diag.budget_margin);
    // The range condition |p_1 x| < D is attached to the first level.
    let range = if j == 0 {
        diag.range_margin
    } else {
        f64::INFINITY
    };
    let pjx = space.dist(&pr.p, base);
    let qjx = space.dist(&pr.q, base);
    let mut hierarchy = f64::INFINITY;
    let mut orthogonality = f64::INFINITY;
    for prev in pairs.iter().take(j) {
        let pix = space.dist(&prev.p, base);
        hierarchy = hierarchy.min(delta - bar_delta_sc(params.s, params.c, pjx, pix));
        let app = comparison_angle(pix, pjx, space.dist(&prev.p, &pr.p))?;
        let apq = comparison_angle(pix, qjx, space.dist(&prev.p, &pr.q))?;
        orthogonality = orthogonality
            .min(delta - (app - PI / 2.0).abs())
            .min(delta - (apq - PI / 2.0).abs());
    }
    Ok(LevelMargins {
        pair,
        range,
        hierarchy,
        orthogonality,
    })
}

/// Inductive check of all strainer conditions, reporting the first failing
/// condition and all margins.
pub fn is_k_strainer(
    space: &SpaceModel,
    params: &CurvatureParams,
    strainer: &Strainer,
) -> Result<KStrainerCheck> {
    if strainer.pairs.is_empty() {
        return Err(Error::Input("strainer has no pairs".into()));
    }
    let mut levels = Vec::with_capacity(strainer.k());
    let mut failing = None;
    let mut min_margin = f64::INFINITY;
    for j in 0..strainer.k() {
        let m = level_margins(
            space,
            params,
            &strainer.base,
            &strainer.pairs,
            j,
            strainer.delta,
        )?;
        if m.min() <= MARGIN_SLACK && failing.is_none() {
            failing = Some((j + 1, m.worst_condition()));
        }
        min_margin = min_margin.min(m.min());
        levels.push(m);
    }
    Ok(KStrainerCheck {
        holds: failing.is_none(),
        failing,
        min_margin,
        levels,
    })
}

/// Outcome of a strainer search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum FindOutcome {
    Found(Strainer),
    NotFound(FindDiagnostics),
}

impl FindOutcome {
    pub fn found(self) -> Option<Strainer> {
        match self {
            FindOutcome::Found(s) => Some(s),
            FindOutcome::NotFound(_) => None,
        }
    }
}

/// Best candidate reached by a failed search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FindDiagnostics {
    /// Levels completed before the failure.
    pub achieved_level: usize,
    /// Margin of the best candidate at the failing level.
    pub best_margin: f64,
    pub failing: Option<(usize, Condition)>,
}

/// Distance ratio (`|qx| / |px|`, or `|p_j x| / |p_(j-1) x|`) that puts the
/// corresponding arccos budget at `TARGET_FRACTION * delta`.
fn budget_ratio(coeff: f64, delta: f64) -> f64 {
    2.0 * (1.0 - (TARGET_FRACTION * delta).cos()) / coeff
}

/// Construction scale for a level-k strainer search whose smallest pair
/// distance must still exceed `range` (long strainers): inverts the
/// hierarchical and opposite-point shrinkage the construction applies.
pub fn long_search_scale(params: &CurvatureParams, k: usize, delta: f64, range: f64) -> f64 {
    let hier = budget_ratio(params.s + params.c, delta);
    let q = budget_ratio(params.s, delta);
    1.5 * range / (hier.powi(k as i32 - 1) * q)
}

/// Opposite point for a candidate strainer point: extend the geodesic from
/// `p` through `x` a little past `x`, keeping the pair budget inside delta.
fn opposite_point(
    space: &SpaceModel,
    params: &CurvatureParams,
    p: &PointChart,
    x: &PointChart,
    delta: f64,
) -> Option<PointChart> {
    let px = space.dist(p, x);
    let dq = budget_ratio(params.s, delta) * px;
    let q = space.point_along(p, x, px + dq).ok()?;
    // The extension must still be minimizing for the comparison angle at x
    // to be flat.
    let collinear = (space.dist(p, &q) - (px + dq)).abs() <= 1e-9 * px.max(1.0);
    if collinear {
        Some(q)
    } else {
        None
    }
}

/// Greedy inductive strainer construction with direction probing and local
/// refinement, re-verified before returning.
pub fn find_strainer(
    space: &SpaceModel,
    params: &CurvatureParams,
    x: &PointChart,
    k: usize,
    delta: f64,
    scale: f64,
    master_seed: u64,
) -> Result<FindOutcome> {
    if k == 0 {
        return Err(Error::Input("strainer level k must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Input(format!("delta = {delta} must lie in (0, 1)")));
    }
    if scale <= 0.0 {
        return Err(Error::Input("scale must be > 0".into()));
    }
    space.validate_point(x)?;

    let mut pairs: Vec<StrainerPair> = Vec::with_capacity(k);
    let hier = budget_ratio(params.s + params.c, delta);
    let mut level_dist = scale.min(if params.d.is_finite() {
        0.5 * params.d
    } else {
        scale
    });
    for j in 0..k {
        if j > 0 {
            level_dist *= hier;
        }
        let mut best: Option<(f64, StrainerPair)> = None;
        let mut dirs = BASE_DIRECTIONS;
        loop {
            if let Some(cand) = best_candidate_at_level(
                space,
                params,
                x,
                &pairs,
                j,
                delta,
                level_dist,
                dirs,
                master_seed,
            )? {
                let good = cand.0 > MARGIN_SLACK;
                if best.as_ref().map_or(true, |(m, _)| cand.0 > *m) {
                    best = Some(cand);
                }
                if good {
                    break;
                }
            }
            if dirs >= MAX_DIRECTIONS {
                break;
            }
            dirs *= 2;
        }
        match best {
            Some((margin, pair)) if margin > MARGIN_SLACK => pairs.push(pair),
            Some((margin, pair)) => {
                pairs.push(pair);
                let probe = Strainer {
                    pairs,
                    delta,
                    base: x.clone(),
                };
                let check = is_k_strainer(space, params, &probe)?;
                return Ok(FindOutcome::NotFound(FindDiagnostics {
                    achieved_level: j,
                    best_margin: margin,
                    failing: check.failing,
                }));
            }
            None => {
                return Ok(FindOutcome::NotFound(FindDiagnostics {
                    achieved_level: j,
                    best_margin: f64::NEG_INFINITY,
                    failing: Some((j + 1, Condition::OppositePair)),
                }));
            }
        }
    }
    let strainer = Strainer {
        pairs,
        delta,
        base: x.clone(),
    };
    let check = is_k_strainer(space, params, &strainer)?;
    if check.holds {
        Ok(FindOutcome::Found(strainer))
    } else {
        Ok(FindOutcome::NotFound(FindDiagnostics {
            achieved_level: k.saturating_sub(1),
            best_margin: check.min_margin,
            failing: check.failing,
        }))
    }
}

/// Score candidates for level `j` among probe directions at `level_dist`,
/// then refine the best one by shrinking-ball resampling. Returns the best
/// (margin, pair) seen, if any candidate admits an opposite point.
#[allow(clippy::too_many_arguments)]
fn best_candidate_at_level(
    space: &SpaceModel,
    params: &CurvatureParams,
    x: &PointChart,
    pairs: &[StrainerPair],
    j: usize,
    delta: f64,
    level_dist: f64,
    dirs: usize,
    master_seed: u64,
) -> Result<Option<(f64, StrainerPair)>> {
    let score = |p: &PointChart| -> Option<(f64, StrainerPair)> {
        let q = opposite_point(space, params, p, x, delta)?;
        let mut probe: Vec<StrainerPair> = pairs.to_vec();
        probe.push(StrainerPair { p: p.clone(), q });
        let m = level_margins(space, params, x, &probe, j, delta).ok()?;
        Some((m.min(), probe.pop().unwrap()))
    };

    let mut best: Option<(f64, StrainerPair)> = None;
    for p in space.probe_sphere(x, level_dist, dirs)? {
        if let Some(cand) = score(&p) {
            if best.as_ref().map_or(true, |(m, _)| cand.0 > *m) {
                best = Some(cand);
            }
        }
    }
    let Some(mut current) = best else {
        return Ok(None);
    };
    // Hill-climb: resample around the incumbent on the metric sphere.
    let mut radius = level_dist * 0.5;
    for round in 0..REFINE_ROUNDS {
        let round_seed = seed::derive_indexed(master_seed, (j * 100 + round) as u64);
        let Ok(cloud) = space.sample_ball(&current.1.p, radius, REFINE_SAMPLES, round_seed) else {
            break;
        };
        for s in cloud {
            if s == *x {
                continue;
            }
            let Ok(projected) = space.point_along(x, &s, level_dist) else {
                continue;
            };
            if let Some(cand) = score(&projected) {
                if cand.0 > current.0 {
                    current = cand;
                }
            }
        }
        radius *= 0.5;
    }
    Ok(Some(current))
}

/// Openness measurement of a strainer chart by explicit descent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpennessReport {
    /// Worst successful ratio `|f(base) - v|_1 / |base y|`; the chart was
    /// observed epsilon-open at this epsilon.
    pub achieved_epsilon: f64,
    pub targets_tried: usize,
    pub failures: usize,
    /// Target coordinates attaining the worst ratio.
    pub worst_case: Vec<f64>,
}

/// Solve `f(y) = v` by moving along geodesics towards the pair point whose
/// weighted coordinate deviation is largest, with 1-D bracketing per move.
/// The last coordinate is down-weighted by `eps_(k-1)/2`, mirroring the
/// anisotropic norm under which each move is a strict descent.
fn descend_to_target(
    space: &SpaceModel,
    strainer: &Strainer,
    start: &PointChart,
    target: &[f64],
    tol: f64,
) -> Option<PointChart> {
    let k = strainer.k();
    let eps_prev = if k >= 2 {
        strainer_constants(k - 1, strainer.delta).ok()?.epsilon_k
    } else {
        1.0
    };
    let weight = |i: usize| {
        if i + 1 == k && k >= 2 {
            eps_prev / 2.0
        } else {
            1.0
        }
    };
    let coord = |y: &PointChart, i: usize| space.dist(&strainer.pairs[i].p, y);
    let phi = |y: &PointChart| -> f64 {
        (0..k)
            .map(|i| weight(i) * (coord(y, i) - target[i]).abs())
            .sum()
    };

    let mut y = start.clone();
    let mut value = phi(&y);
    for _ in 0..MAX_DESCENT_STEPS {
        let l1: f64 = (0..k).map(|i| (coord(&y, i) - target[i]).abs()).sum();
        if l1 < tol {
            return Some(y);
        }
        // Coordinates by weighted deviation, largest first.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            let da = weight(a) * (coord(&y, a) - target[a]).abs();
            let db = weight(b) * (coord(&y, b) - target[b]).abs();
            db.partial_cmp(&da).unwrap()
        });
        let mut moved = false;
        for &i in &order {
            let dev = coord(&y, i) - target[i];
            if dev.abs() < tol / (2.0 * k as f64) {
                continue;
            }
            let endpoint = if dev > 0.0 {
                &strainer.pairs[i].p
            } else {
                &strainer.pairs[i].q
            };
            if let Some(next) =
                bracket_coordinate(space, &strainer.pairs[i].p, &y, endpoint, target[i], tol)
            {
                let next_value = phi(&next);
                if next_value < value - 1e-18 {
                    y = next;
                    value = next_value;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            return None;
        }
    }
    None
}

/// Find the point on the geodesic from `y` towards `endpoint` where the
/// distance to `anchor` equals `want` (1-D root bracketing), or the farthest
/// real-progress point when the root is out of range.
fn bracket_coordinate(
    space: &SpaceModel,
    anchor: &PointChart,
    y: &PointChart,
    endpoint: &PointChart,
    want: f64,
    tol: f64,
) -> Option<PointChart> {
    let g = space.geodesic(y, endpoint).ok()?;
    let len = g.length();
    let f = |s: f64| space.dist(anchor, &g.eval_arclength(s)) - want;
    let f0 = f(0.0);
    let s_hi = (f0.abs() * 2.5).min(0.9 * len);
    if s_hi <= 0.0 {
        return None;
    }
    let fhi = f(s_hi);
    if f0.signum() == fhi.signum() {
        if fhi.abs() < f0.abs() * 0.9 {
            return Some(g.eval_arclength(s_hi));
        }
        return None;
    }
    let (mut lo, mut hi) = (0.0, s_hi);
    let mut flo = f0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < tol * 1e-3 {
            return Some(g.eval_arclength(mid));
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(g.eval_arclength(0.5 * (lo + hi)))
}

/// Measure epsilon-openness of the strainer chart on `B(base, radius)` by
/// driving the descent to sampled targets near `f(base)`.
pub fn verify_openness(
    space: &SpaceModel,
    strainer: &Strainer,
    radius: f64,
    targets: usize,
    master_seed: u64,
) -> Result<OpennessReport> {
    if targets == 0 {
        return Err(Error::Input("need at least one target".into()));
    }
    let k = strainer.k();
    let f0 = strainer.map(space).eval(&strainer.base)?;
    let min_pair = strainer
        .pairs
        .iter()
        .map(|pr| {
            space
                .dist(&pr.p, &strainer.base)
                .min(space.dist(&pr.q, &strainer.base))
        })
        .fold(f64::INFINITY, f64::min);
    // Targets stay well inside the range every pair geodesic can serve.
    let target_radius = 0.3 * (1.0 - 2.0 * strainer.delta) * min_pair.min(radius);
    let tol = (1e-4 * target_radius).max(1e-14);

    let mut achieved = f64::INFINITY;
    let mut failures = 0usize;
    let mut worst_case = f0.clone();
    let mut rng = seed::rng(master_seed);
    use rand::Rng;
    for _ in 0..targets {
        let mut offs: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let l1: f64 = offs.iter().map(|o| o.abs()).sum();
        let r = rng.gen::<f64>() * target_radius;
        if l1 > 0.0 {
            for o in offs.iter_mut() {
                *o *= r / l1;
            }
        }
        let v: Vec<f64> = f0.iter().zip(&offs).map(|(a, b)| a + b).collect();
        let dist_v: f64 = offs.iter().map(|o| o.abs()).sum();
        if dist_v < tol {
            continue;
        }
        match descend_to_target(space, strainer, &strainer.base, &v, tol) {
            Some(y) => {
                let moved = space.dist(&strainer.base, &y);
                if moved > 0.0 {
                    let ratio = dist_v / moved;
                    if ratio < achieved {
                        achieved = ratio;
                        worst_case = v.clone();
                    }
                }
            }
            None => failures += 1,
        }
    }
    if !achieved.is_finite() {
        achieved = 0.0;
    }
    Ok(OpennessReport {
        achieved_epsilon: achieved,
        targets_tried: targets,
        failures,
        worst_case,
    })
}

/// Min and max of `|f(x) - f(y)|_1 / |xy|` over sampled pairs in
/// `B(base, radius)`: observed bi-Lipschitz bounds of the chart.
pub fn estimate_bilipschitz(
    space: &SpaceModel,
    strainer: &Strainer,
    radius: f64,
    trials: usize,
    master_seed: u64,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::Input("trials must be >= 1".into()));
    }
    let map = strainer.map(space);
    let pts = space.sample_ball(&strainer.base, radius, 2 * trials, master_seed)?;
    let mut lower = f64::INFINITY;
    let mut upper: f64 = 0.0;
    for pair in pts.chunks_exact(2) {
        let d = space.dist(&pair[0], &pair[1]);
        if d < 1e-12 * radius {
            continue;
        }
        let fa = map.eval(&pair[0])?;
        let fb = map.eval(&pair[1])?;
        let l1: f64 = fa.iter().zip(&fb).map(|(a, b)| (a - b).abs()).sum();
        let ratio = l1 / d;
        lower = lower.min(ratio);
        upper = upper.max(ratio);
    }
    if !lower.is_finite() {
        return Err(Error::EmptyDomain(
            "all sampled pairs were degenerate".into(),
        ));
    }
    Ok((lower, upper))
}

/// Outcome of strainer self-improvement. `r1` is the first stage's working
/// radius: the output base stays within `2 * r1` of the input base.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ImproveOutcome {
    Improved {
        strainer: Strainer,
        r1: f64,
    },
    /// The openness solve or the post-hoc verification failed at this
    /// 1-based stage.
    Stalled {
        stage: usize,
    },
}

/// Improve a verified `(k, delta)`-strainer to a `(k, delta_prime)`-strainer
/// at a nearby base by the dequeue/enqueue walk: straighten the first pair,
/// re-enqueue the straightened pair at the back, repeat k times. The output
/// base stays within `2 r_1` of the input base, where `r_1` is the first
/// stage's working radius.
pub fn improve_strainer(
    space: &SpaceModel,
    params: &CurvatureParams,
    strainer: &Strainer,
    delta_prime: f64,
    master_seed: u64,
) -> Result<ImproveOutcome> {
    if !(delta_prime > 0.0 && delta_prime < strainer.delta) {
        return Err(Error::Input(format!(
            "need 0 < delta_prime = {delta_prime} < delta = {}",
            strainer.delta
        )));
    }
    let pre = is_k_strainer(space, params, strainer)?;
    if !pre.holds {
        return Err(Error::Input("input strainer does not verify".into()));
    }
    let _ = master_seed;
    let k = strainer.k();
    let delta = strainer.delta;

    // k = 1: slide the base towards p_1; (p_1, old base) is the new pair.
    if k == 1 {
        let p1 = strainer.pairs[0].p.clone();
        let x = strainer.base.clone();
        let l = space.dist(&p1, &x);
        let mut t = budget_ratio(params.s, delta_prime) * l / 2.0;
        for _ in 0..20 {
            let g = space.geodesic(&x, &p1)?;
            let z = g.eval_arclength(t);
            let improved = Strainer {
                pairs: vec![StrainerPair {
                    p: p1.clone(),
                    q: x.clone(),
                }],
                delta: delta_prime,
                base: z,
            };
            if is_k_strainer(space, params, &improved)?.holds {
                return Ok(ImproveOutcome::Improved {
                    strainer: improved,
                    r1: t,
                });
            }
            t /= 2.0;
        }
        return Ok(ImproveOutcome::Stalled { stage: 1 });
    }

    let mut pairs = strainer.pairs.clone();
    let mut base = strainer.base.clone();
    let mut r1: Option<f64> = None;
    for stage in 1..=k {
        let working = Strainer {
            pairs: pairs.clone(),
            delta,
            base: base.clone(),
        };
        let dist_min = pairs
            .iter()
            .skip(1)
            .map(|pr| space.dist(&pr.p, &base))
            .fold(f64::INFINITY, f64::min);
        let min_pair = pairs
            .iter()
            .map(|pr| space.dist(&pr.p, &base).min(space.dist(&pr.q, &base)))
            .fold(f64::INFINITY, f64::min);
        let mut r_stage = 0.05 * delta_prime * dist_min;
        if let Some(r) = r1 {
            r_stage = r_stage.min(r / f64::powi(2.0, stage as i32 - 1));
        } else {
            r1 = Some(r_stage);
        }

        let mut advanced = false;
        let mut shift =
            (0.45 * r_stage * (1.0 - 2.0 * delta)).min(0.3 * (1.0 - 2.0 * delta) * min_pair);
        'outer: for _ in 0..4 {
            // Openness solve: move the first coordinate, freeze the rest.
            let f0 = working.map(space).eval(&base)?;
            let mut v = f0.clone();
            v[0] -= shift;
            let tol = (1e-6 * shift).max(1e-14);
            let Some(y) = descend_to_target(space, &working, &base, &v, tol) else {
                shift /= 2.0;
                continue;
            };
            let l = space.dist(&base, &y);
            if l <= 0.0 || l > r_stage {
                shift /= 2.0;
                continue;
            }
            // t small enough that the enqueued pair and the cross angles at z
            // stay inside the target budgets.
            let u = (2.0 * (1.0 - (delta_prime / 8.0).cos()) / (params.s + params.c))
                .min(0.3 * delta_prime / 1.1);
            let mut t = l * u / (1.0 + u);
            for _ in 0..20 {
                let g = space.geodesic(&base, &y)?;
                let z = g.eval_arclength(t);
                let mut next_pairs = pairs[1..].to_vec();
                next_pairs.push(StrainerPair {
                    p: y.clone(),
                    q: base.clone(),
                });
                let rotated = Strainer {
                    pairs: next_pairs.clone(),
                    delta,
                    base: z.clone(),
                };
                let tail = Strainer {
                    pairs: next_pairs[k - stage..].to_vec(),
                    delta: delta_prime,
                    base: z.clone(),
                };
                if is_k_strainer(space, params, &rotated)?.holds
                    && is_k_strainer(space, params, &tail)?.holds
                {
                    pairs = next_pairs;
                    base = z;
                    advanced = true;
                    break 'outer;
                }
                t /= 2.0;
            }
            shift /= 2.0;
        }
        if !advanced {
            return Ok(ImproveOutcome::Stalled { stage });
        }
    }
    let improved = Strainer {
        pairs,
        delta: delta_prime,
        base,
    };
    if is_k_strainer(space, params, &improved)?.holds {
        Ok(ImproveOutcome::Improved {
            strainer: improved,
            r1: r1.unwrap_or(0.0),
        })
    } else {
        Ok(ImproveOutcome::Stalled { stage: k })
    }
}

/// Largest k such that every probed neighborhood scale of `x` contains a
/// point where a (k, delta)-strainer is found; a level fails once two
/// consecutive scales yield no strainer.
pub fn strainer_number(
    space: &SpaceModel,
    params: &CurvatureParams,
    x: &PointChart,
    delta: f64,
    scales: &[f64],
    master_seed: u64,
) -> Result<usize> {
    if scales.is_empty() {
        return Err(Error::Input("need at least one probing scale".into()));
    }
    let cap = space.chart_dim() + 2;
    let mut number = 0usize;
    for k in 1..=cap {
        let mut consecutive = 0usize;
        let mut failed = false;
        for (si, &s) in scales.iter().enumerate() {
            let scale_seed = seed::derive_indexed(master_seed, (k * 1000 + si) as u64);
            let mut ok = false;
            let mut candidates = vec![x.clone()];
            if let Ok(mut extra) = space.sample_ball(x, s, 3, scale_seed) {
                candidates.append(&mut extra);
            }
            for (ci, y) in candidates.iter().enumerate() {
                let seed_c = seed::derive_indexed(scale_seed, ci as u64);
                if let FindOutcome::Found(_) =
                    find_strainer(space, params, y, k, delta, 0.25 * s, seed_c)?
                {
                    ok = true;
                    break;
                }
            }
            if ok {
                consecutive = 0;
            } else {
                consecutive += 1;
                if consecutive >= 2 || scales.len() == 1 {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            break;
        }
        number = k;
    }
    Ok(number)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(coords: &[f64]) -> PointChart {
        PointChart::new(coords.to_vec())
    }

    #[test]
    fn constants_match_closed_forms() {
        let c1 = strainer_constants(1, 0.1).unwrap();
        assert!((c1.delta_k - 0.125).abs() < 1e-15);
        assert!((c1.epsilon_k - 0.8).abs() < 1e-15);
        let c3 = strainer_constants(3, 0.1).unwrap();
        assert!((c3.epsilon_k - 0.05).abs() < 1e-15);
        assert!((c3.delta_k - 1.0 / 384.0).abs() < 1e-18);
        assert!((c3.bar_epsilon_k - 0.05 / 3.0f64.sqrt()).abs() < 1e-15);
        assert!(strainer_constants(0, 0.1).is_err());
        assert!(strainer_constants(2, 0.5).is_err());
    }

    #[test]
    fn collinear_pair_is_a_strainer() {
        let space = SpaceModel::euclidean(2).unwrap();
        let params = space.params();
        let d = is_one_strainer(
            &space,
            &params,
            &pt(&[1.0, 0.0]),
            &pt(&[0.0, 0.0]),
            &pt(&[-0.004, 0.0]),
            0.1,
        )
        .unwrap();
        assert!(d.holds);
        assert!((d.budget - (1.0f64 - 0.002).acos()).abs() < 1e-12);
        let bad = is_one_strainer(
            &space,
            &params,
            &pt(&[1.0, 0.0]),
            &pt(&[0.0, 0.0]),
            &pt(&[0.0, 0.004]),
            0.1,
        )
        .unwrap();
        assert!(!bad.holds);
    }

    #[test]
    fn hierarchical_orthogonal_pairs_verify() {
        let space = SpaceModel::euclidean(2).unwrap();
        let params = space.params();
        let strainer = Strainer {
            pairs: vec![
                StrainerPair {
                    p: pt(&[1.0, 0.0]),
                    q: pt(&[-0.004, 0.0]),
                },
                StrainerPair {
                    p: pt(&[0.0, 0.004]),
                    q: pt(&[0.0, -0.00002]),
                },
            ],
            delta: 0.1,
            base: pt(&[0.0, 0.0]),
        };
        let check = is_k_strainer(&space, &params, &strainer).unwrap();
        assert!(check.holds, "{:?}", check.failing);

        // Same-distance pairs break the hierarchy condition:
        // bar_delta_sc(1; 1) = pi/3 >= delta.
        let flat = Strainer {
            pairs: vec![
                StrainerPair {
                    p: pt(&[1.0, 0.0]),
                    q: pt(&[-0.004, 0.0]),
                },
                StrainerPair {
                    p: pt(&[0.0, 1.0]),
                    q: pt(&[0.0, -0.004]),
                },
            ],
            delta: 0.1,
            base: pt(&[0.0, 0.0]),
        };
        let check = is_k_strainer(&space, &params, &flat).unwrap();
        assert!(!check.holds);
        assert_eq!(check.failing.unwrap().1, Condition::Hierarchy);

        // Second pair rotated onto the first axis breaks orthogonality.
        let aligned = Strainer {
            pairs: vec![
                StrainerPair {
                    p: pt(&[1.0, 0.0]),
                    q: pt(&[-0.004, 0.0]),
                },
                StrainerPair {
                    p: pt(&[0.004, 0.0]),
                    q: pt(&[-0.004, 0.0001]),
                },
            ],
            delta: 0.1,
            base: pt(&[0.0, 0.0]),
        };
        let check = is_k_strainer(&space, &params, &aligned).unwrap();
        assert!(!check.holds);
    }

    #[test]
    fn find_strainer_euclidean_and_l3() {
        let space = SpaceModel::euclidean(2).unwrap();
        let params = space.params();
        let x = pt(&[0.1, -0.2]);
        let out = find_strainer(&space, &params, &x, 2, 0.1, 1.0, 42).unwrap();
        let s = out.found().expect("verified strainer");
        assert!(is_k_strainer(&space, &params, &s).unwrap().holds);

        let l3 = SpaceModel::lp(3.0, 3).unwrap();
        let params3 = l3.params();
        let out = find_strainer(&l3, &params3, &pt(&[0.2, 0.1, -0.3]), 3, 0.05, 1.0, 7).unwrap();
        let s = out.found().expect("verified level-3 strainer");
        assert!(is_k_strainer(&l3, &params3, &s).unwrap().holds);
    }

    #[test]
    fn cone_apex_admits_no_strainer_for_small_delta() {
        // Max comparison angle at the apex is theta/2 = 2 < pi - 0.5.
        let space = SpaceModel::cone(4.0).unwrap();
        let params = space.params();
        let apex = pt(&[0.0, 0.0]);
        let out = find_strainer(&space, &params, &apex, 1, 0.5, 0.5, 3).unwrap();
        assert!(out.found().is_none());
    }

    #[test]
    fn reordering_breaks_a_strainer() {
        let space = SpaceModel::euclidean(2).unwrap();
        let params = space.params();
        let x = pt(&[0.0, 0.0]);
        let s = find_strainer(&space, &params, &x, 2, 0.1, 1.0, 5)
            .unwrap()
            .found()
            .unwrap();
        let mut swapped = s.clone();
        swapped.pairs.reverse();
        assert!(!is_k_strainer(&space, &params, &swapped).unwrap().holds);
    }

    #[test]
    fn openness_of_a_one_strainer_is_near_one() {
        let space = SpaceModel::euclidean(2).unwrap();
        let params = space.params();
        let x = pt(&[0.0, 0.0]);
        let s = find_strainer(&space, &params, &x, 1, 0.05, 1.0, 9)
            .unwrap()
            .found()
            .unwrap();
        let report = verify_openness(&space, &s, 0.05, 100, 11).unwrap();
        assert_eq!(report.failures, 0);
        assert!(
            report.achieved_epsilon >= 1.0 - 2.0 * 0.05,
            "{}",
            report.achieved_epsilon
        );
    }

    #[test]
    fn improve_one_and_two_strainers() {
        let space = SpaceModel::euclidean(2).unwrap();
        let params = space.params();
        let x = pt(&[0.0, 0.0]);
        for k in [1usize, 2] {
            let s = find_strainer(&space, &params, &x, k, 0.1, 1.0, 13)
                .unwrap()
                .found()
                .unwrap();
            match improve_strainer(&space, &params, &s, 0.05, 17).unwrap() {
                ImproveOutcome::Improved {
                    strainer: better,
                    r1,
                } => {
                    assert_eq!(better.k(), k);
                    assert!((better.delta - 0.05).abs() < 1e-15);
                    assert!(is_k_strainer(&space, &params, &better).unwrap().holds);
                    let moved = space.dist(&s.base, &better.base);
                    assert!(moved <= 2.0 * r1 + 1e-12, "moved {moved} vs r1 {r1}");
                }
                ImproveOutcome::Stalled { stage } => panic!("stalled at stage {stage} for k={k}"),
            }
        }
    }

    #[test]
    fn orthogonality_carries_to_limit_angles() {
        // For a verified strainer, angles viewed from earlier strainer points
        // along geodesics to later pair points sit within 2 delta of pi/2.
        use crate::comparison::{angle_from_point, AngleMode};
        let space = SpaceModel::lp(3.0, 2).unwrap();
        let params = space.params();
        let x = pt(&[0.05, -0.1]);
        let s = find_strainer(&space, &params, &x, 2, 0.1, 1.0, 23)
            .unwrap()
            .found()
            .unwrap();
        let p1 = &s.pairs[0].p;
        for target in [&s.pairs[1].p, &s.pairs[1].q] {
            let xi = space.geodesic(&s.base, target).unwrap();
            let a = angle_from_point(&space, p1, &xi, AngleMode::Concave).unwrap();
            assert!(
                (a.value - PI / 2.0).abs() < 2.0 * s.delta + 1e-6,
                "angle {}",
                a.value
            );
        }
    }

    #[test]
    fn strained_points_form_an_open_set() {
        let space = SpaceModel::euclidean(2).unwrap();
        let params = space.params();
        let x = pt(&[0.0, 0.0]);
        let s = find_strainer(&space, &params, &x, 2, 0.1, 1.0, 29)
            .unwrap()
            .found()
            .unwrap();
        let margin = is_k_strainer(&space, &params, &s).unwrap().min_margin;
        assert!(margin > 0.0);
        // A perturbation well under the margin-derived radius keeps every
        // condition satisfied: comparison angles move at rate ~1/d for the
        // nearest reference point.
        let nearest = s
            .pairs
            .iter()
            .map(|pr| space.dist(&pr.p, &s.base).min(space.dist(&pr.q, &s.base)))
            .fold(f64::INFINITY, f64::min);
        let radius = 0.1 * margin * nearest;
        for z in space.sample_ball(&s.base, radius, 16, 31).unwrap() {
            let moved = Strainer {
                pairs: s.pairs.clone(),
                delta: s.delta,
                base: z,
            };
            assert!(is_k_strainer(&space, &params, &moved).unwrap().holds);
        }
    }

    #[test]
    fn strainers_serialize_for_replay() {
        let space = SpaceModel::lp(3.0, 2).unwrap();
        let params = space.params();
        let s = find_strainer(&space, &params, &pt(&[0.0, 0.0]), 2, 0.1, 1.0, 37)
            .unwrap()
            .found()
            .unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: Strainer = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(is_k_strainer(&space, &params, &back).unwrap().holds);
    }

    #[test]
    fn improving_an_exactly_orthogonal_strainer_keeps_margins() {
        // Idempotence sanity: an axis-aligned strainer already better than
        // the target quality improves without losing it.
        let space = SpaceModel::euclidean(2).unwrap();
        let params = space.params();
        let exact = Strainer {
            pairs: vec![
                StrainerPair {
                    p: pt(&[1.0, 0.0]),
                    q: pt(&[-0.004, 0.0]),
                },
                StrainerPair {
                    p: pt(&[0.0, 0.004]),
                    q: pt(&[0.0, -0.00002]),
                },
            ],
            delta: 0.1,
            base: pt(&[0.0, 0.0]),
        };
        assert!(is_k_strainer(&space, &params, &exact).unwrap().holds);
        match improve_strainer(&space, &params, &exact, 0.05, 7).unwrap() {
            ImproveOutcome::Improved { strainer, r1 } => {
                let check = is_k_strainer(&space, &params, &strainer).unwrap();
                assert!(check.holds);
                assert!(check.min_margin > MARGIN_SLACK);
                assert!(space.dist(&exact.base, &strainer.base) <= 2.0 * r1 + 1e-12);
            }
            ImproveOutcome::Stalled { stage } => panic!("stalled at {stage}"),
        }
    }

    #[test]
    fn strainer_number_matches_dimension_in_the_plane() {
        let space = SpaceModel::euclidean(2).unwrap();
        let params = space.params();
        let n = strainer_number(&space, &params, &pt(&[0.0, 0.0]), 0.1, &[1.0, 0.5], 19).unwrap();
        assert_eq!(n, 2);
    }
}
