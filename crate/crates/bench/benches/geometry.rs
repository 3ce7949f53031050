use criterion::{black_box, criterion_group, criterion_main, Criterion};
use metriclab_core::comparison::{angle_from_point, AngleMode};
use metriclab_core::curvature::check_s_concavity;
use metriclab_core::strainer::{find_strainer, verify_openness, FindOutcome};
use metriclab_core::tangent::{blowup_sample, gh_distance_bounds};
use metriclab_core::{PointChart, SpaceModel};

fn bench_distances(c: &mut Criterion) {
    let spaces = [
        ("l3", SpaceModel::lp(3.0, 3).unwrap()),
        ("cone", SpaceModel::cone(4.0).unwrap()),
        ("sphere", SpaceModel::sphere_cap(1.0).unwrap()),
    ];
    let mut group = c.benchmark_group("distance");
    for (name, space) in &spaces {
        let (center, radius) = space.default_region();
        let pts = space.sample_ball(&center, radius, 2, 1).unwrap();
        group.bench_function(*name, |b| {
            b.iter(|| space.dist(black_box(&pts[0]), black_box(&pts[1])))
        });
    }
    group.finish();
}

fn bench_geodesic_eval(c: &mut Criterion) {
    let space = SpaceModel::cone(4.0).unwrap();
    let g = space
        .geodesic(
            &PointChart::new(vec![1.0, 0.5]),
            &PointChart::new(vec![0.7, 2.2]),
        )
        .unwrap();
    c.bench_function("geodesic_eval/cone", |b| b.iter(|| g.eval(black_box(0.37))));
}

fn bench_angle_limit(c: &mut Criterion) {
    let space = SpaceModel::lp(3.0, 2).unwrap();
    let o = PointChart::new(vec![0.0, 0.0]);
    let xi = space
        .geodesic(&o, &PointChart::new(vec![1.0, 0.2]))
        .unwrap();
    let p = PointChart::new(vec![0.1, 1.0]);
    c.bench_function("angle_from_point/l3", |b| {
        b.iter(|| angle_from_point(&space, black_box(&p), &xi, AngleMode::Concave).unwrap())
    });
}

fn bench_s_concavity_trials(c: &mut Criterion) {
    let space = SpaceModel::lp(4.0, 2).unwrap();
    c.bench_function("s_concavity/1000_trials", |b| {
        b.iter(|| check_s_concavity(&space, 3.0, 1000, black_box(7)).unwrap())
    });
}

fn bench_openness_descent(c: &mut Criterion) {
    let space = SpaceModel::euclidean(2).unwrap();
    let params = space.params();
    let FindOutcome::Found(strainer) =
        find_strainer(&space, &params, &space.base_point(), 2, 0.05, 1.0, 3).unwrap()
    else {
        panic!("no strainer");
    };
    c.bench_function("openness/20_targets", |b| {
        b.iter(|| verify_openness(&space, &strainer, 1e-4, 20, black_box(5)).unwrap())
    });
}

fn bench_gh_exact(c: &mut Criterion) {
    let space = SpaceModel::lp(3.0, 2).unwrap();
    let o = PointChart::new(vec![0.0, 0.0]);
    let a = blowup_sample(&space, &o, 1.0, 8, 1.0, 11).unwrap();
    let b8 = blowup_sample(&space, &o, 1.0, 8, 1.0, 13).unwrap();
    c.bench_function("gh_exact/8_points", |b| {
        b.iter(|| gh_distance_bounds(black_box(&a), black_box(&b8), 8).unwrap())
    });
}

criterion_group!(
    benches,
    bench_distances,
    bench_geodesic_eval,
    bench_angle_limit,
    bench_s_concavity_trials,
    bench_openness_descent,
    bench_gh_exact
);
criterion_main!(benches);
