//! The named verification suites: each composes the library's checkers over
//! one model space into a list of deterministic check results.

use crate::config::{ExperimentConfig, SuiteName, SuiteParams};
use crate::error::{CliError, Result};
use crate::report::{curve_csv, CheckResult, Verdict};
use metriclab_core::comparison::{
    angle_from_point, distance_derivative, AngleMode, DERIVATIVE_TOL,
};
use metriclab_core::curvature::{
    self, lp_convexity_constant, ComparisonSide, MonotoneDirection, NormMode, ResidualReport,
    Witness,
};
use metriclab_core::measure::{
    bishop_gromov_check, hausdorff_measure_2d, mc_ball_volume, packing_curve, rough_dimension,
    singular_packing, threshold_constants, CylinderRegion,
};
use metriclab_core::strainer::{
    estimate_bilipschitz, find_strainer, improve_strainer, is_k_strainer, strainer_constants,
    verify_openness, FindOutcome, ImproveOutcome,
};
use metriclab_core::tangent::{
    blowup_sample, fit_norm, gh_distance_bounds, packing_directions, tangent_metric,
    DirectionWithLength,
};
use metriclab_core::{comparison, seed, PointChart, SpaceModel, SpaceSpec};
use serde_json::json;

/// Slack for exact-identity residual assertions.
const RESIDUAL_SLACK: f64 = 1e-9;

/// A summary of one sampled property: the most adverse margin seen (>= 0
/// means the property held everywhere sampled), how much was sampled, and
/// the configuration attaining the worst margin as a replayable witness.
#[derive(Clone, Debug)]
pub struct SampledCheck {
    pub worst: f64,
    pub trials: usize,
    pub witness: Option<Witness>,
}

impl SampledCheck {
    fn empty() -> Self {
        Self {
            worst: f64::INFINITY,
            trials: 0,
            witness: None,
        }
    }

    fn consider(&mut self, margin: f64, witness: impl FnOnce() -> Witness) {
        self.trials += 1;
        if margin < self.worst {
            self.worst = margin;
            self.witness = Some(witness());
        }
    }
}

fn sample_triple(
    space: &SpaceModel,
    center: &PointChart,
    radius: f64,
    trial_seed: u64,
) -> Result<(PointChart, PointChart, PointChart)> {
    let pts = space.sample_ball(center, radius, 3, trial_seed)?;
    Ok((pts[0].clone(), pts[1].clone(), pts[2].clone()))
}

/// Almost comparison upper bound: comparison angles along a geodesic stay
/// under the limit angle plus the closed-form budget, at every grid scale.
/// Configurations whose angles sit too close to 0 or pi are skipped (see
/// `comparison::ANGLE_GUARD`).
pub fn almost_comparison(
    space: &SpaceModel,
    trials: usize,
    master_seed: u64,
) -> Result<SampledCheck> {
    let spec = space.spec().to_string();
    let (center, radius) = space.default_region();
    let mut check = SampledCheck::empty();
    for trial in 0..trials {
        let (p, x, y) = sample_triple(
            space,
            &center,
            radius,
            seed::derive_indexed(master_seed, trial as u64),
        )?;
        if x == y || p == x {
            continue;
        }
        if angle_from_point(space, &p, &space.geodesic(&x, &y)?, AngleMode::Concave).is_err() {
            continue;
        }
        let px = space.dist(&p, &x);
        let mut t = space.dist(&x, &y).min(px / 4.0);
        for _ in 0..10 {
            if let Some(margin) = comparison::almost_comparison_residual(space, &p, &x, &y, t)? {
                check.consider(margin, || Witness::AlmostComparison {
                    space: spec.clone(),
                    side: ComparisonSide::Upper,
                    p: p.coords.clone(),
                    x: x.coords.clone(),
                    y: y.coords.clone(),
                    t,
                });
            }
            t /= 2.0;
        }
    }
    Ok(check)
}

/// Almost comparison lower bound in semi-convex mode, inside the radius D.
pub fn comparison_lower(
    space: &SpaceModel,
    trials: usize,
    master_seed: u64,
) -> Result<SampledCheck> {
    let spec = space.spec().to_string();
    let params = space.params();
    let (center, radius) = space.semiconvex_region();
    let mut check = SampledCheck::empty();
    for trial in 0..trials {
        let (p, x, y) = sample_triple(
            space,
            &center,
            radius,
            seed::derive_indexed(master_seed, trial as u64),
        )?;
        if x == y || p == x {
            continue;
        }
        let px = space.dist(&p, &x);
        if px >= params.d {
            continue;
        }
        if angle_from_point(space, &p, &space.geodesic(&x, &y)?, AngleMode::SemiConvex).is_err() {
            continue;
        }
        let mut t = space.dist(&x, &y).min(px / 4.0);
        for _ in 0..10 {
            if let Some(margin) = comparison::comparison_lower_residual(space, &p, &x, &y, t)? {
                check.consider(margin, || Witness::AlmostComparison {
                    space: spec.clone(),
                    side: ComparisonSide::Lower,
                    p: p.coords.clone(),
                    x: x.coords.clone(),
                    y: y.coords.clone(),
                    t,
                });
            }
            t /= 2.0;
        }
    }
    if check.trials == 0 {
        return Err(CliError::Config(
            "no configuration fit inside the convexity radius".into(),
        ));
    }
    Ok(check)
}

/// Angle sums along reversed halves of a geodesic through a point: at most
/// pi under concavity, at least pi under semi-convexity (within D).
pub fn angle_sums(
    space: &SpaceModel,
    trials: usize,
    master_seed: u64,
) -> Result<(SampledCheck, SampledCheck)> {
    let spec = space.spec().to_string();
    let (c_center, c_radius) = space.default_region();
    let (s_center, s_radius) = space.semiconvex_region();
    let params = space.params();
    let mut upper = SampledCheck::empty();
    let mut lower = SampledCheck::empty();
    for trial in 0..trials {
        let ts = seed::derive_indexed(master_seed, trial as u64);
        // Concave side.
        let (p, a, b) = sample_triple(space, &c_center, c_radius, ts)?;
        if a != b && p != a && p != b {
            if let Some(margin) =
                comparison::angle_sum_residual(space, AngleMode::Concave, &p, &a, &b)?
            {
                upper.consider(margin, || Witness::AngleSum {
                    space: spec.clone(),
                    mode: AngleMode::Concave,
                    p: p.coords.clone(),
                    a: a.coords.clone(),
                    b: b.coords.clone(),
                });
            }
        }
        // Semi-convex side.
        let (p, a, b) = sample_triple(space, &s_center, s_radius, seed::derive_indexed(ts, 1))?;
        if a != b && p != a && p != b {
            let mid = space.geodesic(&a, &b)?.eval(0.5);
            if space.dist(&p, &mid) < params.d {
                if let Some(margin) =
                    comparison::angle_sum_residual(space, AngleMode::SemiConvex, &p, &a, &b)?
                {
                    lower.consider(margin, || Witness::AngleSum {
                        space: spec.clone(),
                        mode: AngleMode::SemiConvex,
                        p: p.coords.clone(),
                        a: a.coords.clone(),
                        b: b.coords.clone(),
                    });
                }
            }
        }
    }
    Ok((upper, lower))
}

/// Cross-check of `d/dt |p xi(t)|` at zero against finite differences.
pub fn derivative_crosscheck(
    space: &SpaceModel,
    trials: usize,
    master_seed: u64,
) -> Result<SampledCheck> {
    let (center, radius) = space.default_region();
    let mut check = SampledCheck::empty();
    for trial in 0..trials {
        let (p, x, y) = sample_triple(
            space,
            &center,
            radius,
            seed::derive_indexed(master_seed, trial as u64),
        )?;
        if x == y || p == x {
            continue;
        }
        let xi = space.geodesic(&x, &y)?;
        let Ok(d) = distance_derivative(space, &p, &xi, AngleMode::Concave) else {
            continue;
        };
        check.trials += 1;
        check.worst = check
            .worst
            .min(DERIVATIVE_TOL - (d.value - d.finite_difference).abs());
    }
    Ok(check)
}

/// Scaling invariance of the fixed-scale angle.
pub fn fixed_scale_scaling(
    space: &SpaceModel,
    trials: usize,
    tol: f64,
    master_seed: u64,
) -> Result<SampledCheck> {
    let spec = space.spec().to_string();
    let (center, radius) = space.default_region();
    let mut check = SampledCheck::empty();
    for trial in 0..trials {
        let (x, a, b) = sample_triple(
            space,
            &center,
            radius,
            seed::derive_indexed(master_seed, trial as u64),
        )?;
        if x == a || x == b {
            continue;
        }
        let t = 0.8 * space.dist(&x, &a);
        let s = 0.6 * space.dist(&x, &b);
        for lambda in [0.5, 0.25] {
            let margin =
                comparison::fixed_scale_scaling_residual(space, &x, &a, &b, t, s, lambda, tol)?;
            check.consider(margin, || Witness::FixedScaleScaling {
                space: spec.clone(),
                x: x.coords.clone(),
                a: a.coords.clone(),
                b: b.coords.clone(),
                t,
                s,
                lambda,
                tol,
            });
        }
    }
    Ok(check)
}

/// Law-of-cosines consistency between the rescaling metric and the
/// fixed-scale angle on sampled germ pairs.
pub fn tangent_relation(
    space: &SpaceModel,
    trials: usize,
    master_seed: u64,
) -> Result<SampledCheck> {
    let spec = space.spec().to_string();
    let (center, radius) = space.default_region();
    let mut check = SampledCheck::empty();
    for trial in 0..trials {
        let (x, a, b) = sample_triple(
            space,
            &center,
            radius,
            seed::derive_indexed(master_seed, trial as u64),
        )?;
        if x == a || x == b {
            continue;
        }
        let gu = space.geodesic(&x, &a)?;
        let gv = space.geodesic(&x, &b)?;
        let u = DirectionWithLength::new(gu, 0.7)?;
        let v = DirectionWithLength::new(gv, 0.4)?;
        let m = tangent_metric(space, &u, &v)?;
        check.consider(1e-8 - m.relation_residual, || Witness::TangentRelation {
            space: spec.clone(),
            x: x.coords.clone(),
            a: a.coords.clone(),
            b: b.coords.clone(),
            t: 0.7,
            s: 0.4,
        });
    }
    Ok(check)
}

/// Empirical fraction of sampled points admitting a (k, delta)-strainer,
/// with search failures counted separately (a failed search is not a proof
/// of absence).
#[derive(Clone, Copy, Debug)]
pub struct StrainedFraction {
    pub found: usize,
    pub not_found: usize,
    pub fraction: f64,
}

pub fn strained_fraction(
    space: &SpaceModel,
    k: usize,
    delta: f64,
    samples: usize,
    master_seed: u64,
) -> Result<StrainedFraction> {
    let params = space.params();
    let (center, radius) = space.default_region();
    let pts = space.sample_ball(&center, radius, samples, master_seed)?;
    let mut found = 0usize;
    for (i, z) in pts.iter().enumerate() {
        let scale = 0.25 * space.regular_scale(z).max(1e-6);
        let s = seed::derive_indexed(master_seed, 10_000 + i as u64);
        if let FindOutcome::Found(_) = find_strainer(space, &params, z, k, delta, scale, s)? {
            found += 1;
        }
    }
    Ok(StrainedFraction {
        found,
        not_found: samples - found,
        fraction: found as f64 / samples as f64,
    })
}

/// Upper GH bounds between blow-ups at the given scales and the unit-scale
/// sample, matched seeds.
pub fn blowup_gh_trend(
    space: &SpaceModel,
    x: &PointChart,
    scales: &[f64],
    count: usize,
    radius: f64,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let unit = blowup_sample(space, x, 1.0, count, radius, master_seed)?;
    let mut uppers = Vec::with_capacity(scales.len());
    for &lambda in scales {
        let s = blowup_sample(space, x, lambda, count, radius, master_seed)?;
        uppers.push(gh_distance_bounds(&s, &unit, 8)?.1);
    }
    Ok(uppers)
}

fn residual_check(
    name: &str,
    seed_value: u64,
    report: ResidualReport,
    threshold: f64,
) -> CheckResult {
    CheckResult {
        check: name.to_string(),
        verdict: if report.worst_residual >= threshold {
            Verdict::Pass
        } else {
            Verdict::Violation
        },
        residual: report.worst_residual,
        seed: seed_value,
        witness: Some(report.worst_witness),
        details: Some(json!({ "trials": report.trials })),
    }
}

fn sampled_check(name: &str, seed_value: u64, sc: SampledCheck) -> CheckResult {
    let verdict = if sc.trials == 0 || !sc.worst.is_finite() {
        Verdict::Inconclusive
    } else if sc.worst >= 0.0 {
        Verdict::Pass
    } else {
        Verdict::Violation
    };
    CheckResult {
        check: name.to_string(),
        verdict,
        residual: if sc.worst.is_finite() {
            sc.worst
        } else {
            f64::NAN
        },
        seed: seed_value,
        witness: sc.witness,
        details: Some(json!({ "trials": sc.trials })),
    }
}

fn error_result(name: &str, seed_value: u64, err: &CliError) -> CheckResult {
    CheckResult {
        check: name.to_string(),
        verdict: Verdict::Inconclusive,
        residual: f64::NAN,
        seed: seed_value,
        witness: None,
        details: Some(json!({ "error": err.to_string() })),
    }
}

type CheckJob<'a> = Box<dyn FnOnce() -> Result<CheckResult> + Send + 'a>;
/// Named CSV payloads emitted next to the report.
pub type CurveFiles = Vec<(String, String)>;

/// Run a suite; returns the ordered check results plus named CSV side files.
pub fn run_suite(config: &ExperimentConfig) -> Result<(Vec<CheckResult>, CurveFiles)> {
    let space = config.space_spec()?.build()?;
    let master = config.seed;
    let params = &config.params;
    let mut jobs: Vec<(String, CheckJob)> = Vec::new();
    let mut curves: CurveFiles = Vec::new();

    let suites: Vec<SuiteName> = match config.suite {
        SuiteName::All => vec![
            SuiteName::Curvature,
            SuiteName::Angles,
            SuiteName::Strainers,
            SuiteName::Tangent,
            SuiteName::Dimension,
            SuiteName::Strata,
        ],
        s => vec![s],
    };

    for suite in suites {
        match suite {
            SuiteName::Curvature => curvature_jobs(&space, params, master, &mut jobs),
            SuiteName::Angles => angles_jobs(&space, params, master, &mut jobs),
            SuiteName::Strainers => strainer_jobs(&space, params, master, &mut jobs),
            SuiteName::Tangent => tangent_jobs(&space, params, master, &mut jobs),
            SuiteName::Dimension => dimension_jobs(&space, params, master, &mut jobs),
            SuiteName::Strata => strata_jobs(&space, params, master, &mut jobs),
            SuiteName::All => unreachable!(),
        }
    }

    // Independent checks run in parallel; assembly is an ordered fold.
    let mut results: Vec<CheckResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(name, job)| (name.clone(), scope.spawn(job)))
            .collect();
        handles
            .into_iter()
            .map(|(name, h)| {
                let seed_value = seed::derive_labeled(master, &name);
                match h.join() {
                    Ok(Ok(result)) => result,
                    Ok(Err(e)) => error_result(&name, seed_value, &e),
                    Err(_) => error_result(
                        &name,
                        seed_value,
                        &CliError::Runtime(format!("check {name} panicked")),
                    ),
                }
            })
            .collect()
    });
    results.sort_by(|a, b| a.check.cmp(&b.check));

    // Volume-curve side file for suites that produced one.
    if let Some(det) = results
        .iter()
        .find(|c| c.check == "bishop_gromov")
        .and_then(|c| c.details.clone())
    {
        if let (Some(radii), Some(volumes), Some(stderrs)) = (
            det.get("radii").and_then(|v| v.as_array()),
            det.get("volumes").and_then(|v| v.as_array()),
            det.get("stderrs").and_then(|v| v.as_array()),
        ) {
            let to_vec = |a: &Vec<serde_json::Value>| -> Vec<f64> {
                a.iter().filter_map(|v| v.as_f64()).collect()
            };
            curves.push((
                "volume".to_string(),
                curve_csv(&to_vec(radii), &to_vec(volumes), &to_vec(stderrs)),
            ));
        }
    }
    Ok((results, curves))
}

fn curvature_jobs<'a>(
    space: &'a SpaceModel,
    params: &'a SuiteParams,
    master: u64,
    jobs: &mut Vec<(String, CheckJob<'a>)>,
) {
    let sp = space.params();
    let trials = params.trials;
    let s_decl = params.s_override.unwrap_or(sp.s);
    let c_decl = params.c_override.unwrap_or(sp.c);
    push_job(jobs, "s_concavity", master, move |s| {
        Ok(residual_check(
            "s_concavity",
            s,
            curvature::check_s_concavity(space, s_decl, trials, s)?,
            -RESIDUAL_SLACK,
        ))
    });
    push_job(jobs, "semi_convexity", master, move |s| {
        Ok(residual_check(
            "semi_convexity",
            s,
            curvature::check_local_semiconvexity(space, c_decl, sp.d, trials, s)?,
            -RESIDUAL_SLACK,
        ))
    });
    push_job(jobs, "busemann_concave", master, move |s| {
        Ok(residual_check(
            "busemann_concave",
            s,
            curvature::check_busemann_monotone(space, MonotoneDirection::Concave, trials / 2, s)?,
            -RESIDUAL_SLACK,
        ))
    });
    if let SpaceSpec::Lp { p, n } = space.spec() {
        let smooth_const = params.s_override.unwrap_or(p - 1.0);
        push_job(jobs, "norm_smooth", master, move |s| {
            Ok(residual_check(
                "norm_smooth",
                s,
                curvature::check_norm_uniform(
                    p,
                    n,
                    NormMode::Smooth,
                    2.0,
                    smooth_const,
                    trials,
                    s,
                )?,
                -RESIDUAL_SLACK,
            ))
        });
        push_job(jobs, "norm_convex", master, move |s| {
            Ok(residual_check(
                "norm_convex",
                s,
                curvature::check_norm_uniform(
                    p,
                    n,
                    NormMode::Convex,
                    p,
                    lp_convexity_constant(p),
                    trials,
                    s,
                )?,
                -RESIDUAL_SLACK,
            ))
        });
    }
    push_job(jobs, "best_s", master, move |s| {
        let best = curvature::estimate_best_s(space, trials, s)?;
        Ok(CheckResult {
            check: "best_s".into(),
            verdict: if best <= s_decl + 0.05 && best >= 1.0 - 1e-6 {
                Verdict::Pass
            } else {
                Verdict::Violation
            },
            residual: s_decl + 0.05 - best,
            seed: s,
            witness: None,
            details: Some(json!({ "measured": best, "declared": s_decl })),
        })
    });
    push_job(jobs, "best_c", master, move |s| {
        let d = if sp.d.is_finite() {
            sp.d
        } else {
            f64::INFINITY
        };
        let best = curvature::estimate_best_c(space, d, trials, s)?;
        Ok(CheckResult {
            check: "best_c".into(),
            verdict: if best <= sp.c + 0.05 {
                Verdict::Pass
            } else {
                Verdict::Violation
            },
            residual: sp.c + 0.05 - best,
            seed: s,
            witness: None,
            details: Some(json!({ "measured": best, "declared": sp.c })),
        })
    });
}

fn angles_jobs<'a>(
    space: &'a SpaceModel,
    params: &'a SuiteParams,
    master: u64,
    jobs: &mut Vec<(String, CheckJob<'a>)>,
) {
    let trials = (params.trials / 10).max(200);
    push_job(jobs, "almost_comparison", master, move |s| {
        Ok(sampled_check(
            "almost_comparison",
            s,
            almost_comparison(space, trials, s)?,
        ))
    });
    push_job(jobs, "comparison_lower", master, move |s| {
        Ok(sampled_check(
            "comparison_lower",
            s,
            comparison_lower(space, trials, s)?,
        ))
    });
    push_job(jobs, "angle_sum_concave", master, move |s| {
        let (upper, _) = angle_sums(space, trials, s)?;
        Ok(sampled_check("angle_sum_concave", s, upper))
    });
    push_job(jobs, "angle_sum_semiconvex", master, move |s| {
        let (_, lower) = angle_sums(space, trials, s)?;
        Ok(sampled_check("angle_sum_semiconvex", s, lower))
    });
    push_job(jobs, "derivative_crosscheck", master, move |s| {
        Ok(sampled_check(
            "derivative_crosscheck",
            s,
            derivative_crosscheck(space, trials / 4, s)?,
        ))
    });
    let scaling_tol = match space.spec() {
        SpaceSpec::Lp { .. } => 1e-9,
        _ => 1e-8,
    };
    push_job(jobs, "fixed_scale_scaling", master, move |s| {
        Ok(sampled_check(
            "fixed_scale_scaling",
            s,
            fixed_scale_scaling(space, trials / 4, scaling_tol, s)?,
        ))
    });
}

fn strainer_jobs<'a>(
    space: &'a SpaceModel,
    params: &'a SuiteParams,
    master: u64,
    jobs: &mut Vec<(String, CheckJob<'a>)>,
) {
    let sp = space.params();
    let delta = params.delta;
    let k_max = params.k_max.min(space.dim());
    push_job(jobs, "strainer_constants", master, move |s| {
        let c = strainer_constants(k_max.max(1), delta)?;
        Ok(CheckResult {
            check: "strainer_constants".into(),
            verdict: Verdict::Pass,
            residual: 0.0,
            seed: s,
            witness: None,
            details: Some(json!({
                "delta_k": c.delta_k,
                "epsilon_k": c.epsilon_k,
                "bar_epsilon_k": c.bar_epsilon_k,
            })),
        })
    });
    for k in 1..=k_max {
        let name = format!("strainer_k{k}");
        push_job_named(jobs, name.clone(), master, move |s| {
            let base = space.base_point();
            let scale = 0.25 * space.regular_scale(&base).max(1e-6);
            match find_strainer(space, &sp, &base, k, delta, scale, s)? {
                FindOutcome::Found(strainer) => {
                    let check = is_k_strainer(space, &sp, &strainer)?;
                    let radius = openness_radius(space, &strainer);
                    let open = verify_openness(space, &strainer, radius, 200, s)?;
                    let floor = strainer_constants(k, delta)?.epsilon_k;
                    let (lo, hi) = estimate_bilipschitz(space, &strainer, radius, 500, s)?;
                    let improved = matches!(
                        improve_strainer(space, &sp, &strainer, delta / 2.0, s)?,
                        ImproveOutcome::Improved { .. }
                    );
                    let mut reversed = strainer.clone();
                    reversed.pairs.reverse();
                    let reorder_fails = k < 2 || !is_k_strainer(space, &sp, &reversed)?.holds;
                    let pass = check.holds
                        && open.achieved_epsilon >= floor - 1e-6
                        && open.failures == 0
                        && lo > 0.0
                        && improved
                        && reorder_fails;
                    Ok(CheckResult {
                        check: name.clone(),
                        verdict: if pass {
                            Verdict::Pass
                        } else {
                            Verdict::Violation
                        },
                        residual: open.achieved_epsilon - floor,
                        seed: s,
                        witness: None,
                        details: Some(json!({
                            "margin": check.min_margin,
                            "achieved_epsilon": open.achieved_epsilon,
                            "epsilon_floor": floor,
                            "bilipschitz": [lo, hi],
                            "improved_to_half_delta": improved,
                            "reorder_fails": reorder_fails,
                        })),
                    })
                }
                FindOutcome::NotFound(diag) => Ok(CheckResult {
                    check: name.clone(),
                    verdict: Verdict::Violation,
                    residual: diag.best_margin,
                    seed: s,
                    witness: None,
                    details: Some(json!({
                        "achieved_level": diag.achieved_level,
                        "failing": format!("{:?}", diag.failing),
                    })),
                }),
            }
        });
    }
}

/// A working radius on which a found strainer keeps verifying: well inside
/// the smallest pair distance.
fn openness_radius(space: &SpaceModel, strainer: &metriclab_core::strainer::Strainer) -> f64 {
    strainer
        .pairs
        .iter()
        .map(|pr| {
            space
                .dist(&pr.p, &strainer.base)
                .min(space.dist(&pr.q, &strainer.base))
        })
        .fold(f64::INFINITY, f64::min)
        * 0.25
}

fn tangent_jobs<'a>(
    space: &'a SpaceModel,
    params: &'a SuiteParams,
    master: u64,
    jobs: &mut Vec<(String, CheckJob<'a>)>,
) {
    let trials = (params.trials / 20).max(100);
    push_job(jobs, "tangent_relation", master, move |s| {
        Ok(sampled_check(
            "tangent_relation",
            s,
            tangent_relation(space, trials, s)?,
        ))
    });
    // Matched-seed blow-up convergence is exact for norm-homogeneous
    // samplers; the cone gets the apex self-similarity check instead.
    match space.spec() {
        SpaceSpec::Lp { .. } => {
            let scales = params.scales.clone();
            push_job(jobs, "blowup_gh_trend", master, move |s| {
                let base = space.base_point();
                let radius = 0.5 * space.regular_scale(&base).max(1e-3);
                let uppers = blowup_gh_trend(space, &base, &scales, 8, radius, s)?;
                let monotone = uppers.windows(2).all(|w| w[1] <= w[0] + 1e-9);
                Ok(CheckResult {
                    check: "blowup_gh_trend".into(),
                    verdict: if monotone {
                        Verdict::Pass
                    } else {
                        Verdict::Violation
                    },
                    residual: uppers
                        .windows(2)
                        .map(|w| w[0] + 1e-9 - w[1])
                        .fold(f64::INFINITY, f64::min),
                    seed: s,
                    witness: None,
                    details: Some(json!({ "scales": scales, "uppers": uppers })),
                })
            });
        }
        SpaceSpec::Cone { .. } => {
            let scales = params.scales.clone();
            push_job(jobs, "blowup_apex_selfsimilar", master, move |s| {
                let apex = PointChart::new(vec![0.0, 0.0]);
                let uppers = blowup_gh_trend(space, &apex, &scales, 8, 1.0, s)?;
                let worst = uppers.iter().fold(0.0f64, |m, u| m.max(*u));
                Ok(CheckResult {
                    check: "blowup_apex_selfsimilar".into(),
                    verdict: if worst <= 1e-9 {
                        Verdict::Pass
                    } else {
                        Verdict::Violation
                    },
                    residual: 1e-9 - worst,
                    seed: s,
                    witness: None,
                    details: Some(json!({ "scales": scales, "uppers": uppers })),
                })
            });
        }
        _ => {}
    }
    push_job(jobs, "fit_norm", master, move |s| {
        let base = space.base_point();
        let fit = fit_norm(
            space,
            &base,
            &[1.0, 0.5, 0.25],
            if space.dim() >= 3 { 512 } else { 128 },
            s,
        )?;
        let pass = fit.certified && fit.scale_drift < 0.02 && fit.symmetry_defect < 0.02;
        Ok(CheckResult {
            check: "fit_norm".into(),
            verdict: if pass {
                Verdict::Pass
            } else {
                Verdict::Violation
            },
            residual: fit.smooth_residual.min(fit.convex_residual) + fit.cert_tolerance,
            seed: s,
            witness: None,
            details: Some(json!({
                "scale_drift": fit.scale_drift,
                "symmetry_defect": fit.symmetry_defect,
                "convexity_defect": fit.convexity_defect,
                "smooth_residual": fit.smooth_residual,
                "convex_residual": fit.convex_residual,
                "cert_tolerance": fit.cert_tolerance,
            })),
        })
    });
    push_job(jobs, "direction_packing", master, move |s| {
        let base = space.base_point();
        let eps = 0.4;
        let mut counts = Vec::new();
        let mut ok = true;
        for l in [0.1, 1.0, 10.0] {
            let packing = packing_directions(space, &base, l, eps, 256, s)?;
            ok &= packing.bound_ok;
            counts.push(packing.count);
        }
        let equal = counts.windows(2).all(|w| w[0] == w[1]);
        Ok(CheckResult {
            check: "direction_packing".into(),
            verdict: if ok && equal {
                Verdict::Pass
            } else {
                Verdict::Violation
            },
            residual: if equal { 0.0 } else { -1.0 },
            seed: s,
            witness: None,
            details: Some(json!({ "counts": counts, "eps": eps })),
        })
    });
    if let SpaceSpec::Lp { p, n: 2 } = space.spec() {
        push_job(jobs, "kirchheim_identity", master, move |s| {
            let _ = s;
            let region = move |x: f64, y: f64| metriclab_core::space::lp_norm(p, &[x, y]) <= 1.0;
            let est = hausdorff_measure_2d(&region, (-1.1, -1.1, 1.1, 1.1), p, &[6, 7, 8, 9])?;
            let err = (est.value - std::f64::consts::PI).abs() / std::f64::consts::PI;
            Ok(CheckResult {
                check: "kirchheim_identity".into(),
                verdict: if err < 0.05 {
                    Verdict::Pass
                } else {
                    Verdict::Violation
                },
                residual: 0.05 - err,
                seed: s,
                witness: None,
                details: Some(json!({ "estimate": est.value, "levels": est.levels })),
            })
        });
    }
}

fn dimension_jobs<'a>(
    space: &'a SpaceModel,
    params: &'a SuiteParams,
    master: u64,
    jobs: &mut Vec<(String, CheckJob<'a>)>,
) {
    let sp = space.params();
    let declared = space.dim();
    let delta = params.delta.max(0.05);
    push_job(jobs, "strainer_number", master, move |s| {
        let base = space.base_point();
        let r = space.regular_scale(&base).max(0.1);
        let n =
            metriclab_core::strainer::strainer_number(space, &sp, &base, delta, &[r, 0.5 * r], s)?;
        Ok(CheckResult {
            check: "strainer_number".into(),
            verdict: if n == declared {
                Verdict::Pass
            } else {
                Verdict::Violation
            },
            residual: n as f64 - declared as f64,
            seed: s,
            witness: None,
            details: Some(json!({ "measured": n, "declared": declared })),
        })
    });
    push_job(jobs, "rough_dimension", master, move |s| {
        let (center, radius) = space.default_region();
        // Slope fits need a minimum statistical mass to stay inside the
        // +-0.25 window, whatever the configured budget.
        let count = (params.samples / 2).max(12_000);
        let pts = space.sample_ball(&center, radius, count, s)?;
        let radii: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|f| f * radius).collect();
        let curve = packing_curve(space, &pts, &radii)?;
        let dim = rough_dimension(&curve)?;
        Ok(CheckResult {
            check: "rough_dimension".into(),
            verdict: if (dim - declared as f64).abs() <= 0.25 {
                Verdict::Pass
            } else {
                Verdict::Violation
            },
            residual: 0.25 - (dim - declared as f64).abs(),
            seed: s,
            witness: None,
            details: Some(json!({ "measured": dim, "declared": declared, "counts": curve.counts })),
        })
    });
    push_job(jobs, "bishop_gromov", master, move |s| {
        let (center, region_radius) = space.default_region();
        let radii: Vec<f64> = params.radii.iter().map(|f| f * region_radius).collect();
        let curve = mc_ball_volume(space, &center, &radii, params.samples.max(1000), s)?;
        let bg = bishop_gromov_check(&curve, declared)?;
        Ok(CheckResult {
            check: "bishop_gromov".into(),
            verdict: if bg.passes {
                Verdict::Pass
            } else {
                Verdict::Violation
            },
            residual: bg.worst_residual,
            seed: s,
            witness: None,
            details: Some(json!({
                "radii": curve.radii,
                "volumes": curve.volumes,
                "stderrs": curve.stderrs,
                "worst_pair": bg.worst_pair,
            })),
        })
    });
    // Closed-form volume anchors where the model has one.
    match space.spec() {
        SpaceSpec::Cone { theta } => {
            push_job(jobs, "volume_anchor", master, move |s| {
                let apex = PointChart::new(vec![0.0, 0.0]);
                let curve = mc_ball_volume(space, &apex, &[0.5, 1.0], params.samples.max(1000), s)?;
                let expect = theta / 2.0;
                let err = (curve.volumes[1] - expect).abs();
                let pass = err <= 3.0 * curve.stderrs[1] + 1e-9;
                Ok(CheckResult {
                    check: "volume_anchor".into(),
                    verdict: if pass {
                        Verdict::Pass
                    } else {
                        Verdict::Violation
                    },
                    residual: 3.0 * curve.stderrs[1] - err,
                    seed: s,
                    witness: None,
                    details: Some(json!({ "measured": curve.volumes[1], "expected": expect })),
                })
            });
        }
        SpaceSpec::Lp { p, n: 2 } => {
            push_job(jobs, "volume_anchor", master, move |s| {
                let origin = space.base_point();
                let curve =
                    mc_ball_volume(space, &origin, &[0.5, 1.0], params.samples.max(1000), s)?;
                let expect = metriclab_core::measure::lp_unit_ball_area(p);
                let err = (curve.volumes[1] - expect).abs();
                let pass = err <= 3.0 * curve.stderrs[1] + 1e-9;
                Ok(CheckResult {
                    check: "volume_anchor".into(),
                    verdict: if pass {
                        Verdict::Pass
                    } else {
                        Verdict::Violation
                    },
                    residual: 3.0 * curve.stderrs[1] - err,
                    seed: s,
                    witness: None,
                    details: Some(json!({ "measured": curve.volumes[1], "expected": expect })),
                })
            });
        }
        SpaceSpec::Sphere { .. } => {
            push_job(jobs, "volume_anchor", master, move |s| {
                let pole = space.base_point();
                let r = 0.8 * space.params().d;
                let curve =
                    mc_ball_volume(space, &pole, &[r / 2.0, r], params.samples.max(1000), s)?;
                let expect = 2.0 * std::f64::consts::PI * (1.0 - r.cos());
                let err = (curve.volumes[1] - expect).abs();
                let pass = err <= 3.0 * curve.stderrs[1] + 1e-9;
                Ok(CheckResult {
                    check: "volume_anchor".into(),
                    verdict: if pass {
                        Verdict::Pass
                    } else {
                        Verdict::Violation
                    },
                    residual: 3.0 * curve.stderrs[1] - err,
                    seed: s,
                    witness: None,
                    details: Some(json!({ "measured": curve.volumes[1], "expected": expect })),
                })
            });
        }
        SpaceSpec::Product { .. } | SpaceSpec::Lp { .. } => {}
    }
}

fn strata_jobs<'a>(
    space: &'a SpaceModel,
    params: &'a SuiteParams,
    master: u64,
    jobs: &mut Vec<(String, CheckJob<'a>)>,
) {
    let sp = space.params();
    let n = space.dim();
    let delta = params.delta;
    push_job(jobs, "strained_fraction", master, move |s| {
        let samples = (params.samples / 10).clamp(200, 10_000);
        let f = strained_fraction(space, n.min(2), 0.1, samples, s)?;
        Ok(CheckResult {
            check: "strained_fraction".into(),
            verdict: if f.fraction > 0.999 {
                Verdict::Pass
            } else {
                Verdict::Violation
            },
            residual: f.fraction - 0.999,
            seed: s,
            witness: None,
            details: Some(json!({ "found": f.found, "not_found": f.not_found })),
        })
    });
    push_job(jobs, "threshold_constants", master, move |s| {
        let c = threshold_constants(delta, None, 10, 3.0)?;
        // Direct inversion of the two defining constraints.
        let l0_direct = (1.0 + 2.0 / (1.0 - delta.cos())).max(1.0 / delta.sin());
        let err = (c.l0 - l0_direct).abs();
        Ok(CheckResult {
            check: "threshold_constants".into(),
            verdict: if err < 1e-6 {
                Verdict::Pass
            } else {
                Verdict::Violation
            },
            residual: 1e-6 - err,
            seed: s,
            witness: None,
            details: Some(json!({
                "l0": c.l0, "s0": c.s0, "l1": c.l1, "m": c.m, "k_bar": c.k_bar,
            })),
        })
    });
    push_job(jobs, "singular_packing", master, move |s| {
        let delta_sing = 0.09;
        let base = space.base_point();
        let scale = 0.25 * space.regular_scale(&base).max(1e-6);
        let k = n.saturating_sub(1).max(1);
        let FindOutcome::Found(strainer) =
            find_strainer(space, &sp, &base, k, delta_sing, scale, s)?
        else {
            return Err(CliError::Runtime(
                "no base strainer for the cylindrical region".into(),
            ));
        };
        let radius = openness_radius(space, &strainer);
        let step = delta_sing * radius * 0.5;
        let region = CylinderRegion::new(strainer, radius, step, vec![0; k])?;
        let packing = singular_packing(space, &sp, &region, delta_sing, 60, s)?;
        Ok(CheckResult {
            check: "singular_packing".into(),
            verdict: if packing.bound_ok {
                Verdict::Pass
            } else {
                Verdict::Violation
            },
            residual: packing.constants.k - packing.packed as f64,
            seed: s,
            witness: None,
            details: Some(json!({
                "strained": packing.strained,
                "unresolved": packing.unresolved,
                "packed": packing.packed,
                "bound": packing.constants.k,
            })),
        })
    });
}

fn push_job<'a, F>(jobs: &mut Vec<(String, CheckJob<'a>)>, name: &str, master: u64, f: F)
where
    F: FnOnce(u64) -> Result<CheckResult> + Send + 'a,
{
    push_job_named(jobs, name.to_string(), master, f);
}

fn push_job_named<'a, F>(jobs: &mut Vec<(String, CheckJob<'a>)>, name: String, master: u64, f: F)
where
    F: FnOnce(u64) -> Result<CheckResult> + Send + 'a,
{
    let seed_value = seed::derive_labeled(master, &name);
    jobs.push((name, Box::new(move || f(seed_value))));
}
