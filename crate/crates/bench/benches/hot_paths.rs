use criterion::{black_box, criterion_group, criterion_main, Criterion};

use avoid_core::criteria::{series_criterion, RadiusSchedule};
use avoid_core::exponents::CharacteristicExponent;
use avoid_core::geometry::{whitney_decompose, BallFamily, RadiusLaw};
use avoid_core::green::{m_psi_ball, GreenModel};
use avoid_core::rng::PathRng;
use avoid_core::simulate::{estimate_single_ball_hit, sample_stable_increment, SimConfig};

fn bench_increments(c: &mut Criterion) {
    let mut rng = PathRng::new(1, 0).increments;
    c.bench_function("stable_increment_beta_1.5", |b| {
        b.iter(|| sample_stable_increment(black_box(1.5), 0.01, 3, &mut rng).unwrap())
    });
    c.bench_function("gaussian_increment", |b| {
        b.iter(|| sample_stable_increment(black_box(2.0), 0.01, 3, &mut rng).unwrap())
    });
}

fn bench_series(c: &mut Criterion) {
    let exp = CharacteristicExponent::brownian(3);
    let model = GreenModel::exact(exp).unwrap();
    let family = BallFamily::lattice(3, 1.0, 1.0, RadiusLaw::Power { coeff: 0.2, exponent: 1.0 })
        .unwrap();
    let schedule = RadiusSchedule::doubling(2.0, 5);
    c.bench_function("series_lattice_window_32", |b| {
        b.iter(|| series_criterion(black_box(&family), &model, &schedule).unwrap())
    });
}

fn bench_whitney(c: &mut Criterion) {
    c.bench_function("whitney_decompose_d3_12gen", |b| {
        b.iter(|| whitney_decompose(3, -5, 6).unwrap())
    });
}

fn bench_m_psi(c: &mut Criterion) {
    let exp = CharacteristicExponent::stable(3, 1.5).unwrap();
    c.bench_function("m_psi_off_center_ball", |b| {
        b.iter(|| m_psi_ball(&exp, &[4.0, 0.0, 0.0], 1.0).unwrap())
    });
}

fn bench_walker(c: &mut Criterion) {
    let exp = CharacteristicExponent::stable(3, 1.5).unwrap();
    let ball = avoid_core::geometry::Ball::new(vec![0.0; 3], 1.0);
    let cfg = SimConfig::exact(500, 8.0, 3);
    c.bench_function("exact_walk_500_paths", |b| {
        b.iter(|| estimate_single_ball_hit(&exp, &[2.0, 0.0, 0.0], &ball, &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    bench_increments,
    bench_series,
    bench_whitney,
    bench_m_psi,
    bench_walker
);
criterion_main!(benches);
