//! Randomized verification of the three synthetic curvature conditions and of
//! the normed-space convexity/smoothness inequalities, plus best-constant
//! estimation. Violations found while sampling are reported as residuals with
//! replayable witnesses, never as errors.

use crate::chart::PointChart;
use crate::error::{Error, Result};
use crate::seed;
use crate::space::{lp_dist, SpaceModel, SpaceSpec};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fixed part of the evaluation grid for inequality checks; midpoint t = 1/2
/// is where the normed-space inequalities are stated.
const T_GRID: [f64; 7] = [0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875];
/// Random t values added per trial.
const T_RANDOM: usize = 20;

/// Result of a sampled inequality check. `worst_residual >= 0` means the
/// inequality held at every sampled configuration; the most adverse
/// configuration is kept as a witness that re-evaluates to the same residual.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub worst_residual: f64,
    pub worst_witness: Witness,
    pub trials: usize,
    pub seed: u64,
}

/// Monotonicity direction for the geodesic-spread ratio `|γ(t)η(t)| / t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneDirection {
    /// Non-increasing ratio: non-negative curvature in the Busemann sense.
    Concave,
    /// Non-decreasing ratio: non-positive curvature in the Busemann sense.
    Convex,
}

/// Norm inequality side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    Convex,
    Smooth,
}

/// A single replayable configuration: everything needed to recompute one
/// residual bit-for-bit.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Witness {
    SConcavity {
        space: String,
        s: f64,
        p: Vec<f64>,
        start: Vec<f64>,
        end: Vec<f64>,
        t: f64,
    },
    SemiConvexity {
        space: String,
        c: f64,
        p: Vec<f64>,
        start: Vec<f64>,
        end: Vec<f64>,
        t: f64,
    },
    BusemannRatio {
        space: String,
        direction: MonotoneDirection,
        x: Vec<f64>,
        y: Vec<f64>,
        z: Vec<f64>,
        t1: f64,
        t2: f64,
    },
    NormUniform {
        p_norm: f64,
        dim: usize,
        mode: NormMode,
        power: f64,
        constant: f64,
        u: Vec<f64>,
        v: Vec<f64>,
    },
    AlmostComparison {
        space: String,
        /// `upper` is the concave-mode bound, `lower` the semi-convex one.
        side: ComparisonSide,
        p: Vec<f64>,
        x: Vec<f64>,
        y: Vec<f64>,
        t: f64,
    },
    AngleSum {
        space: String,
        mode: crate::comparison::AngleMode,
        p: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
    },
    FixedScaleScaling {
        space: String,
        x: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        t: f64,
        s: f64,
        lambda: f64,
        tol: f64,
    },
    TangentRelation {
        space: String,
        x: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        t: f64,
        s: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonSide {
    Upper,
    Lower,
}

impl Witness {
    /// Re-evaluate the stored configuration and return its residual.
    pub fn evaluate(&self) -> Result<f64> {
        match self {
            Witness::SConcavity {
                space,
                s,
                p,
                start,
                end,
                t,
            } => {
                let model = SpaceSpec::parse(space)?.build()?;
                s_concavity_residual(
                    &model,
                    *s,
                    &PointChart::from(p.as_slice()),
                    &PointChart::from(start.as_slice()),
                    &PointChart::from(end.as_slice()),
                    *t,
                )
            }
            Witness::SemiConvexity {
                space,
                c,
                p,
                start,
                end,
                t,
            } => {
                let model = SpaceSpec::parse(space)?.build()?;
                semi_convexity_residual(
                    &model,
                    *c,
                    &PointChart::from(p.as_slice()),
                    &PointChart::from(start.as_slice()),
                    &PointChart::from(end.as_slice()),
                    *t,
                )
            }
            Witness::BusemannRatio {
                space,
                direction,
                x,
                y,
                z,
                t1,
                t2,
            } => {
                let model = SpaceSpec::parse(space)?.build()?;
                busemann_residual(
                    &model,
                    *direction,
                    &PointChart::from(x.as_slice()),
                    &PointChart::from(y.as_slice()),
                    &PointChart::from(z.as_slice()),
                    *t1,
                    *t2,
                )
            }
            Witness::NormUniform {
                p_norm,
                dim,
                mode,
                power,
                constant,
                u,
                v,
            } => {
                let norm = |w: &[f64]| lp_dist(*p_norm, w, &vec![0.0; *dim]);
                Ok(norm_residual(&norm, *mode, *power, *constant, u, v))
            }
            Witness::AlmostComparison {
                space,
                side,
                p,
                x,
                y,
                t,
            } => {
                let model = SpaceSpec::parse(space)?.build()?;
                let (p, x, y) = (
                    PointChart::from(p.as_slice()),
                    PointChart::from(x.as_slice()),
                    PointChart::from(y.as_slice()),
                );
                let residual = match side {
                    ComparisonSide::Upper => {
                        crate::comparison::almost_comparison_residual(&model, &p, &x, &y, *t)?
                    }
                    ComparisonSide::Lower => {
                        crate::comparison::comparison_lower_residual(&model, &p, &x, &y, *t)?
                    }
                };
                residual.ok_or_else(|| {
                    Error::Domain("configuration too ill-conditioned to judge".into())
                })
            }
            Witness::AngleSum {
                space,
                mode,
                p,
                a,
                b,
            } => {
                let model = SpaceSpec::parse(space)?.build()?;
                crate::comparison::angle_sum_residual(
                    &model,
                    *mode,
                    &PointChart::from(p.as_slice()),
                    &PointChart::from(a.as_slice()),
                    &PointChart::from(b.as_slice()),
                )?
                .ok_or_else(|| Error::Domain("configuration too ill-conditioned to judge".into()))
            }
            Witness::FixedScaleScaling {
                space,
                x,
                a,
                b,
                t,
                s,
                lambda,
                tol,
            } => {
                let model = SpaceSpec::parse(space)?.build()?;
                crate::comparison::fixed_scale_scaling_residual(
                    &model,
                    &PointChart::from(x.as_slice()),
                    &PointChart::from(a.as_slice()),
                    &PointChart::from(b.as_slice()),
                    *t,
                    *s,
                    *lambda,
                    *tol,
                )
            }
            Witness::TangentRelation {
                space,
                x,
                a,
                b,
                t,
                s,
            } => {
                let model = SpaceSpec::parse(space)?.build()?;
                let x = PointChart::from(x.as_slice());
                let gu = model.geodesic(&x, &PointChart::from(a.as_slice()))?;
                let gv = model.geodesic(&x, &PointChart::from(b.as_slice()))?;
                let u = crate::tangent::DirectionWithLength::new(gu, *t)?;
                let v = crate::tangent::DirectionWithLength::new(gv, *s)?;
                let m = crate::tangent::tangent_metric(&model, &u, &v)?;
                Ok(1e-8 - m.relation_residual)
            }
        }
    }
}

/// S-concavity residual from precomputed side lengths; hot loops and witness
/// replays share this exact expression so both produce identical bits.
fn s_concavity_from_parts(s: f64, d0: f64, d1: f64, l: f64, dt: f64, t: f64) -> f64 {
    let scale = l.max(d0).max(d1).max(f64::MIN_POSITIVE);
    let raw = dt * dt - ((1.0 - t) * d0 * d0 + t * d1 * d1 - s * t * (1.0 - t) * l * l);
    raw / (scale * scale)
}

fn semi_convexity_from_parts(c: f64, d0: f64, d1: f64, l: f64, dt: f64, t: f64) -> f64 {
    let scale = l.max(d0).max(d1).max(f64::MIN_POSITIVE);
    let raw = ((1.0 - t) * d0 * d0 + t * d1 * d1 + c * t * (1.0 - t) * l * l) - dt * dt;
    raw / (scale * scale)
}

/// Residual of the S-concavity inequality at one configuration, normalized by
/// the squared configuration scale so thresholds are scale-free. Non-negative
/// means the inequality held.
pub fn s_concavity_residual(
    space: &SpaceModel,
    s: f64,
    p: &PointChart,
    start: &PointChart,
    end: &PointChart,
    t: f64,
) -> Result<f64> {
    let g = space.geodesic(start, end)?;
    let d0 = space.dist(p, start);
    let d1 = space.dist(p, end);
    let dt = space.dist(p, &g.eval(t));
    Ok(s_concavity_from_parts(s, d0, d1, g.length(), dt, t))
}

/// Residual of the local semi-convexity inequality (right side minus left),
/// same normalization.
pub fn semi_convexity_residual(
    space: &SpaceModel,
    c: f64,
    p: &PointChart,
    start: &PointChart,
    end: &PointChart,
    t: f64,
) -> Result<f64> {
    let g = space.geodesic(start, end)?;
    let d0 = space.dist(p, start);
    let d1 = space.dist(p, end);
    let dt = space.dist(p, &g.eval(t));
    Ok(semi_convexity_from_parts(c, d0, d1, g.length(), dt, t))
}

/// Residual of the ratio monotonicity between two grid parameters t1 < t2,
/// normalized by the larger ratio.
pub fn busemann_residual(
    space: &SpaceModel,
    direction: MonotoneDirection,
    x: &PointChart,
    y: &PointChart,
    z: &PointChart,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    let gamma = space.geodesic(x, y)?;
    let eta = space.geodesic(x, z)?;
    let r1 = space.dist(&gamma.eval(t1), &eta.eval(t1)) / t1;
    let r2 = space.dist(&gamma.eval(t2), &eta.eval(t2)) / t2;
    let scale = r1.max(r2).max(f64::MIN_POSITIVE);
    Ok(match direction {
        MonotoneDirection::Concave => (r1 - r2) / scale,
        MonotoneDirection::Convex => (r2 - r1) / scale,
    })
}

/// Uniform convexity constant of the l^p norm (p >= 2) in the `1/(4C)`
/// convention: Clarkson's inequality gives modulus coefficient 2^-p, so
/// C = 2^(p-2), with equality at u = -v.
pub fn lp_convexity_constant(p: f64) -> f64 {
    f64::powf(2.0, p - 2.0)
}

/// Residual of the p-uniform convexity / smoothness inequality at one pair,
/// normalized by `scale^power`.
pub fn norm_residual(
    norm: &dyn Fn(&[f64]) -> f64,
    mode: NormMode,
    power: f64,
    constant: f64,
    u: &[f64],
    v: &[f64],
) -> f64 {
    let mid: Vec<f64> = u.iter().zip(v).map(|(a, b)| (a + b) / 2.0).collect();
    let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    let nu = norm(u);
    let nv = norm(v);
    let nm = norm(&mid);
    let nd = norm(&diff);
    let scale = nu.max(nv).max(f64::MIN_POSITIVE);
    let pw = |x: f64| x.powf(power);
    let raw = match mode {
        NormMode::Convex => 0.5 * pw(nu) + 0.5 * pw(nv) - pw(nd) / (4.0 * constant) - pw(nm),
        NormMode::Smooth => pw(nm) - (0.5 * pw(nu) + 0.5 * pw(nv) - constant / 4.0 * pw(nd)),
    };
    raw / pw(scale)
}

struct Config {
    p: PointChart,
    start: PointChart,
    end: PointChart,
}

/// Structured configurations probed before random ones: axis-aligned and
/// diagonal/anti-diagonal pairs where the worst cases of the l^p
/// inequalities sit, plus shrinking near-orthogonal triples on every model
/// (tight constants are approached in the small-configuration limit, which
/// uniform sampling misses).
fn structured_configs(space: &SpaceModel) -> Vec<Config> {
    let mut out = Vec::new();
    let base = space.base_point();
    let reach = space.regular_scale(&base).max(1e-3);
    for h in [0.1, 0.01, 1e-3, 1e-4] {
        let d = h * reach;
        if let Ok(probes) = space.probe_sphere(&base, d, 8) {
            if probes.len() >= 7 {
                out.push(Config {
                    p: probes[0].clone(),
                    start: probes[2].clone(),
                    end: probes[6].clone(),
                });
                out.push(Config {
                    p: base.clone(),
                    start: probes[1].clone(),
                    end: probes[5].clone(),
                });
            }
        }
    }
    let spec = space.spec();
    let SpaceSpec::Lp { n, .. } = spec else {
        return out;
    };
    let e = |i: usize| -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            // p on one axis, geodesic along another through the origin.
            out.push(Config {
                p: PointChart::new(e(j)),
                start: PointChart::new(e(i).iter().map(|c| -c).collect()),
                end: PointChart::new(e(i)),
            });
            // Diagonal point, anti-diagonal segments of shrinking half-width.
            for h in [0.5, 0.1, 0.02, 0.004] {
                let u: Vec<f64> = e(i).iter().zip(&e(j)).map(|(a, b)| a + b).collect();
                let v: Vec<f64> = e(i).iter().zip(&e(j)).map(|(a, b)| a - b).collect();
                let start: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - h * b).collect();
                let end: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + h * b).collect();
                out.push(Config {
                    p: PointChart::new(vec![0.0; n]),
                    start: PointChart::new(start),
                    end: PointChart::new(end),
                });
            }
        }
    }
    out
}

fn random_config(
    space: &SpaceModel,
    center: &PointChart,
    radius: f64,
    trial_seed: u64,
) -> Result<Config> {
    let pts = space.sample_ball(center, radius, 3, trial_seed)?;
    Ok(Config {
        p: pts[0].clone(),
        start: pts[1].clone(),
        end: pts[2].clone(),
    })
}

fn t_values(rng: &mut impl Rng) -> Vec<f64> {
    let mut ts: Vec<f64> = T_GRID.to_vec();
    for _ in 0..T_RANDOM {
        ts.push(rng.gen::<f64>().clamp(1e-3, 1.0 - 1e-3));
    }
    ts
}

/// Check the S-concavity inequality over sampled configurations.
pub fn check_s_concavity(
    space: &SpaceModel,
    s: f64,
    trials: usize,
    master_seed: u64,
) -> Result<ResidualReport> {
    if trials == 0 {
        return Err(Error::Input("trials must be >= 1".into()));
    }
    let spec = space.spec().to_string();
    let (center, radius) = space.default_region();
    let mut worst: Option<(f64, Witness)> = None;
    let mut evaluated = 0usize;

    let mut consider = |space: &SpaceModel,
                        cfg: &Config,
                        ts: &[f64],
                        worst: &mut Option<(f64, Witness)>|
     -> Result<()> {
        let g = space.geodesic(&cfg.start, &cfg.end)?;
        let l = g.length();
        let d0 = space.dist(&cfg.p, &cfg.start);
        let d1 = space.dist(&cfg.p, &cfg.end);
        for &t in ts {
            let dt = space.dist(&cfg.p, &g.eval(t));
            let r = s_concavity_from_parts(s, d0, d1, l, dt, t);
            evaluated += 1;
            if worst.as_ref().map_or(true, |(w, _)| r < *w) {
                *worst = Some((
                    r,
                    Witness::SConcavity {
                        space: spec.clone(),
                        s,
                        p: cfg.p.coords.clone(),
                        start: cfg.start.coords.clone(),
                        end: cfg.end.coords.clone(),
                        t,
                    },
                ));
            }
        }
        Ok(())
    };

    for cfg in structured_configs(space) {
        consider(space, &cfg, &T_GRID, &mut worst)?;
    }
    for trial in 0..trials {
        let trial_seed = seed::derive_indexed(master_seed, trial as u64);
        let cfg = random_config(space, &center, radius, trial_seed)?;
        if cfg.start == cfg.end {
            continue;
        }
        let mut rng = seed::rng(seed::derive_indexed(trial_seed, u64::MAX));
        consider(space, &cfg, &t_values(&mut rng), &mut worst)?;
    }
    let (worst_residual, worst_witness) = worst.expect("at least one configuration");
    Ok(ResidualReport {
        worst_residual,
        worst_witness,
        trials: evaluated,
        seed: master_seed,
    })
}

/// Check local semi-convexity at constant `c` inside radius `d`:
/// configurations with `sup_t |p xi(t)| >= d` are excluded. Errs when no
/// sampled configuration fits inside `d`.
pub fn check_local_semiconvexity(
    space: &SpaceModel,
    c: f64,
    d: f64,
    trials: usize,
    master_seed: u64,
) -> Result<ResidualReport> {
    if trials == 0 {
        return Err(Error::Input("trials must be >= 1".into()));
    }
    let spec = space.spec().to_string();
    let (center, radius) = space.semiconvex_region();
    let mut worst: Option<(f64, Witness)> = None;
    let mut evaluated = 0usize;

    for trial in 0..trials {
        let trial_seed = seed::derive_indexed(master_seed, trial as u64);
        let cfg = random_config(space, &center, radius, trial_seed)?;
        if cfg.start == cfg.end {
            continue;
        }
        let g = space.geodesic(&cfg.start, &cfg.end)?;
        // Reject configurations leaving the convexity radius.
        let mut sup = 0.0f64;
        for k in 0..=8 {
            sup = sup.max(space.dist(&cfg.p, &g.eval(k as f64 / 8.0)));
        }
        if sup >= d {
            continue;
        }
        let l = g.length();
        let d0 = space.dist(&cfg.p, &cfg.start);
        let d1 = space.dist(&cfg.p, &cfg.end);
        let mut rng = seed::rng(seed::derive_indexed(trial_seed, u64::MAX));
        for t in t_values(&mut rng) {
            let dt = space.dist(&cfg.p, &g.eval(t));
            let r = semi_convexity_from_parts(c, d0, d1, l, dt, t);
            evaluated += 1;
            if worst.as_ref().map_or(true, |(w, _)| r < *w) {
                worst = Some((
                    r,
                    Witness::SemiConvexity {
                        space: spec.clone(),
                        c,
                        p: cfg.p.coords.clone(),
                        start: cfg.start.coords.clone(),
                        end: cfg.end.coords.clone(),
                        t,
                    },
                ));
            }
        }
    }
    match worst {
        Some((worst_residual, worst_witness)) => Ok(ResidualReport {
            worst_residual,
            worst_witness,
            trials: evaluated,
            seed: master_seed,
        }),
        None => Err(Error::EmptyDomain(format!(
            "no sampled configuration fits inside the convexity radius {d}"
        ))),
    }
}

/// Check monotonicity of `t -> |γ(t)η(t)| / t` for geodesic pairs from a
/// common point, on the geometric grid `2^-8, ..., 1`.
pub fn check_busemann_monotone(
    space: &SpaceModel,
    direction: MonotoneDirection,
    trials: usize,
    master_seed: u64,
) -> Result<ResidualReport> {
    if trials == 0 {
        return Err(Error::Input("trials must be >= 1".into()));
    }
    let spec = space.spec().to_string();
    let (center, radius) = space.default_region();
    let grid: Vec<f64> = (0..=8).map(|k| f64::powi(2.0, k - 8)).collect();
    let mut worst: Option<(f64, Witness)> = None;
    let mut evaluated = 0usize;

    for trial in 0..trials {
        let trial_seed = seed::derive_indexed(master_seed, trial as u64);
        let pts = space.sample_ball(&center, radius, 3, trial_seed)?;
        let (x, y, z) = (&pts[0], &pts[1], &pts[2]);
        if x == y || x == z {
            continue;
        }
        let gamma = space.geodesic(x, y)?;
        let eta = space.geodesic(x, z)?;
        let mag = x
            .coords
            .iter()
            .chain(&y.coords)
            .chain(&z.coords)
            .fold(1.0f64, |m, c| m.max(c.abs()));
        let ratios: Vec<f64> = grid
            .iter()
            .map(|&t| space.dist(&gamma.eval(t), &eta.eval(t)) / t)
            .collect();
        for k in 0..grid.len() - 1 {
            let scale = ratios[k].max(ratios[k + 1]).max(f64::MIN_POSITIVE);
            // Skip comparisons whose round-off floor (cancellation in the
            // spread distance, amplified by 1/t and the normalization)
            // approaches the violation threshold.
            let floor = 8.0 * f64::EPSILON * mag * mag
                / (grid[k] * grid[k] * scale * scale).max(f64::MIN_POSITIVE);
            if floor > 2.5e-10 {
                continue;
            }
            let r = match direction {
                MonotoneDirection::Concave => (ratios[k] - ratios[k + 1]) / scale,
                MonotoneDirection::Convex => (ratios[k + 1] - ratios[k]) / scale,
            };
            evaluated += 1;
            if worst.as_ref().map_or(true, |(w, _)| r < *w) {
                worst = Some((
                    r,
                    Witness::BusemannRatio {
                        space: spec.clone(),
                        direction,
                        x: x.coords.clone(),
                        y: y.coords.clone(),
                        z: z.coords.clone(),
                        t1: grid[k],
                        t2: grid[k + 1],
                    },
                ));
            }
        }
    }
    let (worst_residual, worst_witness) =
        worst.ok_or_else(|| Error::EmptyDomain("no usable geodesic pair sampled".into()))?;
    Ok(ResidualReport {
        worst_residual,
        worst_witness,
        trials: evaluated,
        seed: master_seed,
    })
}

/// Sample the p-uniform convexity (`mode = Convex`, constant C) or
/// p-uniform smoothness (`mode = Smooth`, constant S) inequality on the
/// `l^p_norm` norm in the given dimension.
pub fn check_norm_uniform(
    p_norm: f64,
    dim: usize,
    mode: NormMode,
    power: f64,
    constant: f64,
    trials: usize,
    master_seed: u64,
) -> Result<ResidualReport> {
    if p_norm < 2.0 {
        return Err(Error::Input(format!(
            "only p >= 2 norms are modeled, got {p_norm}"
        )));
    }
    if power <= 1.0 || constant < 1.0 {
        return Err(Error::Input("need power > 1 and constant >= 1".into()));
    }
    let norm = move |w: &[f64]| lp_dist(p_norm, w, &vec![0.0; dim]);
    let (worst_residual, u, v, evaluated) =
        norm_uniform_search(&norm, dim, mode, power, constant, trials, master_seed);
    Ok(ResidualReport {
        worst_residual,
        worst_witness: Witness::NormUniform {
            p_norm,
            dim,
            mode,
            power,
            constant,
            u,
            v,
        },
        trials: evaluated,
        seed: master_seed,
    })
}

/// Norm-inequality search over structured pairs then random pairs; generic in
/// the norm so fitted tangent norms can be certified with the same engine.
pub fn norm_uniform_search(
    norm: &dyn Fn(&[f64]) -> f64,
    dim: usize,
    mode: NormMode,
    power: f64,
    constant: f64,
    trials: usize,
    master_seed: u64,
) -> (f64, Vec<f64>, Vec<f64>, usize) {
    let mut worst = f64::INFINITY;
    let mut arg: (Vec<f64>, Vec<f64>) = (vec![0.0; dim], vec![0.0; dim]);
    let mut evaluated = 0usize;
    let mut consider = |u: &[f64], v: &[f64], worst: &mut f64, arg: &mut (Vec<f64>, Vec<f64>)| {
        if u.iter().all(|c| *c == 0.0) && v.iter().all(|c| *c == 0.0) {
            return;
        }
        let r = norm_residual(norm, mode, power, constant, u, v);
        evaluated += 1;
        if r < *worst {
            *worst = r;
            *arg = (u.to_vec(), v.to_vec());
        }
    };

    let e = |i: usize| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    };
    for i in 0..dim {
        let u = e(i);
        let mu: Vec<f64> = u.iter().map(|c| -c).collect();
        consider(&u, &mu, &mut worst, &mut arg);
        consider(&u, &u, &mut worst, &mut arg);
        for j in 0..dim {
            if i == j {
                continue;
            }
            for h in [1.0, 0.5, 0.1, 0.02] {
                let v1: Vec<f64> = u.iter().zip(&e(j)).map(|(a, b)| a + h * b).collect();
                let v2: Vec<f64> = u.iter().zip(&e(j)).map(|(a, b)| a - h * b).collect();
                consider(&v1, &v2, &mut worst, &mut arg);
            }
        }
    }
    for trial in 0..trials {
        let mut rng = seed::rng(seed::derive_indexed(master_seed, trial as u64));
        let u: Vec<f64> = (0..dim).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
        let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
        consider(&u, &v, &mut worst, &mut arg);
    }
    (worst, arg.0, arg.1, evaluated)
}

/// Smallest S making every sampled S-concavity residual non-negative: the
/// maximum over configurations of the per-configuration tight constant.
pub fn estimate_best_s(space: &SpaceModel, trials: usize, master_seed: u64) -> Result<f64> {
    let (center, radius) = space.default_region();
    let mut best = f64::NEG_INFINITY;
    let probe = |space: &SpaceModel, cfg: &Config, ts: &[f64], best: &mut f64| -> Result<()> {
        let g = space.geodesic(&cfg.start, &cfg.end)?;
        let l = g.length();
        let d0 = space.dist(&cfg.p, &cfg.start);
        let d1 = space.dist(&cfg.p, &cfg.end);
        for &t in ts {
            let denom = t * (1.0 - t) * l * l;
            if denom < 1e-14 {
                continue;
            }
            let dt = space.dist(&cfg.p, &g.eval(t));
            let tight = ((1.0 - t) * d0 * d0 + t * d1 * d1 - dt * dt) / denom;
            if tight > *best {
                *best = tight;
            }
        }
        Ok(())
    };
    for cfg in structured_configs(space) {
        probe(space, &cfg, &T_GRID, &mut best)?;
    }
    for trial in 0..trials {
        let trial_seed = seed::derive_indexed(master_seed, trial as u64);
        let cfg = random_config(space, &center, radius, trial_seed)?;
        if cfg.start == cfg.end {
            continue;
        }
        let mut rng = seed::rng(seed::derive_indexed(trial_seed, u64::MAX));
        probe(space, &cfg, &t_values(&mut rng), &mut best)?;
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::EmptyDomain(
            "no non-degenerate configuration sampled".into(),
        ))
    }
}

/// Smallest C >= 0 making every sampled semi-convexity residual non-negative
/// inside radius `d`.
pub fn estimate_best_c(space: &SpaceModel, d: f64, trials: usize, master_seed: u64) -> Result<f64> {
    let (center, radius) = space.semiconvex_region();
    let mut best: Option<f64> = None;
    for trial in 0..trials {
        let trial_seed = seed::derive_indexed(master_seed, trial as u64);
        let cfg = random_config(space, &center, radius, trial_seed)?;
        if cfg.start == cfg.end {
            continue;
        }
        let g = space.geodesic(&cfg.start, &cfg.end)?;
        let mut sup = 0.0f64;
        for k in 0..=8 {
            sup = sup.max(space.dist(&cfg.p, &g.eval(k as f64 / 8.0)));
        }
        if sup >= d {
            continue;
        }
        let l = g.length();
        let d0 = space.dist(&cfg.p, &cfg.start);
        let d1 = space.dist(&cfg.p, &cfg.end);
        let mut rng = seed::rng(seed::derive_indexed(trial_seed, u64::MAX));
        for t in t_values(&mut rng) {
            let denom = t * (1.0 - t) * l * l;
            if denom < 1e-14 {
                continue;
            }
            let dt = space.dist(&cfg.p, &g.eval(t));
            let tight = (dt * dt - (1.0 - t) * d0 * d0 - t * d1 * d1) / denom;
            best = Some(best.map_or(tight, |b: f64| b.max(tight)));
        }
    }
    match best {
        Some(b) => Ok(b.max(0.0)),
        None => Err(Error::EmptyDomain(format!(
            "no sampled configuration fits inside the convexity radius {d}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_s_concavity_is_an_identity() {
        let space = SpaceModel::euclidean(2).unwrap();
        let report = check_s_concavity(&space, 1.0, 200, 7).unwrap();
        assert!(
            report.worst_residual.abs() < 1e-10,
            "{}",
            report.worst_residual
        );
        let replay = report.worst_witness.evaluate().unwrap();
        assert!((replay - report.worst_residual).abs() < 1e-12);
    }

    #[test]
    fn l4_holds_at_declared_s_and_fails_below() {
        let space = SpaceModel::lp(4.0, 2).unwrap();
        let good = check_s_concavity(&space, 3.0, 500, 11).unwrap();
        assert!(good.worst_residual >= -1e-9, "{}", good.worst_residual);
        let bad = check_s_concavity(&space, 2.5, 500, 11).unwrap();
        assert!(bad.worst_residual < -1e-6, "{}", bad.worst_residual);
        let replay = bad.worst_witness.evaluate().unwrap();
        assert!((replay - bad.worst_residual).abs() < 1e-12);
    }

    #[test]
    fn euclidean_semiconvexity_residuals() {
        let space = SpaceModel::euclidean(2).unwrap();
        // At C = 0 the Euclidean residual is t(1-t)L^2 / scale^2 > 0;
        // the inequality holds with strict slack.
        let report = check_local_semiconvexity(&space, 0.0, f64::INFINITY, 200, 13).unwrap();
        assert!(report.worst_residual >= -1e-12, "{}", report.worst_residual);
        let replay = report.worst_witness.evaluate().unwrap();
        assert!((replay - report.worst_residual).abs() < 1e-12);
    }

    #[test]
    fn busemann_ratio_constant_in_euclidean() {
        let space = SpaceModel::euclidean(3).unwrap();
        let report = check_busemann_monotone(&space, MonotoneDirection::Concave, 100, 17).unwrap();
        assert!(report.worst_residual.abs() < 1e-10);
        let report = check_busemann_monotone(&space, MonotoneDirection::Convex, 100, 17).unwrap();
        assert!(report.worst_residual.abs() < 1e-10);
    }

    #[test]
    fn cone_is_busemann_concave_not_convex() {
        let space = SpaceModel::cone(4.0).unwrap();
        let concave = check_busemann_monotone(&space, MonotoneDirection::Concave, 300, 19).unwrap();
        assert!(
            concave.worst_residual >= -1e-9,
            "{}",
            concave.worst_residual
        );
        let convex = check_busemann_monotone(&space, MonotoneDirection::Convex, 300, 19).unwrap();
        assert!(convex.worst_residual < -1e-6);
    }

    #[test]
    fn l2_norm_passes_both_modes_at_power_two() {
        let convex = check_norm_uniform(2.0, 2, NormMode::Convex, 2.0, 1.0, 500, 23).unwrap();
        assert!(
            convex.worst_residual.abs() < 1e-10,
            "{}",
            convex.worst_residual
        );
        let smooth = check_norm_uniform(2.0, 2, NormMode::Smooth, 2.0, 1.0, 500, 23).unwrap();
        assert!(smooth.worst_residual.abs() < 1e-10);
    }

    #[test]
    fn l4_norm_constants() {
        // 2-uniformly smooth with S = p - 1 = 3; p-uniformly convex with the
        // Clarkson constant C = 2^(p-2), tight at u = -v.
        let smooth = check_norm_uniform(4.0, 2, NormMode::Smooth, 2.0, 3.0, 2_000, 29).unwrap();
        assert!(smooth.worst_residual >= -1e-9, "{}", smooth.worst_residual);
        let convex = check_norm_uniform(
            4.0,
            2,
            NormMode::Convex,
            4.0,
            lp_convexity_constant(4.0),
            2_000,
            29,
        )
        .unwrap();
        assert!(convex.worst_residual >= -1e-9, "{}", convex.worst_residual);
        // Understating either constant is caught.
        let bad = check_norm_uniform(4.0, 2, NormMode::Smooth, 2.0, 2.5, 2_000, 29).unwrap();
        assert!(bad.worst_residual < -1e-6);
        let bad = check_norm_uniform(4.0, 2, NormMode::Convex, 4.0, 3.0, 2_000, 29).unwrap();
        assert!(bad.worst_residual < -1e-6);
    }

    #[test]
    fn best_constant_estimates() {
        let euclid = SpaceModel::euclidean(2).unwrap();
        let s = estimate_best_s(&euclid, 2_000, 31).unwrap();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
        let c = estimate_best_c(&euclid, f64::INFINITY, 2_000, 31).unwrap();
        assert!(c < 1e-6, "{c}");
        let l4 = SpaceModel::lp(4.0, 2).unwrap();
        let s4 = estimate_best_s(&l4, 5_000, 37).unwrap();
        assert!(s4 > 2.95 && s4 <= 3.0 + 1e-9, "{s4}");
    }
}
