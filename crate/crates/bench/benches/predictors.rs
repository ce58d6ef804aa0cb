use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mobipred::eval::run_experiment;
use mobipred::pad::{pad_predict_with, PadParams};
use mobipred::prony::vector_prony_predict;
use mobipred::{AngularDelayTransform, SolverStrategy};
use mobipred_bench::desk_fixture;

fn benches(c: &mut Criterion) {
    let fx = desk_fixture().expect("fixture");
    let transform = AngularDelayTransform::new(fx.dims).expect("transform");
    let n_d = fx.config.n_d().expect("n_d");
    let hbar = fx.track.last().ue_vector(0).to_vec();

    c.bench_function("snapshot 2x32x16, 60 paths", |b| {
        b.iter(|| fx.channel.snapshot(black_box(1e-3)))
    });
    c.bench_function("angular-delay projection 4x8x16", |b| {
        b.iter(|| transform.project(black_box(&hbar)).expect("project"))
    });
    let params = PadParams {
        n_d,
        ..PadParams::default()
    };
    c.bench_function("pad predict, 16 samples", |b| {
        b.iter(|| pad_predict_with(black_box(&fx.track), &transform, &params).expect("pad"))
    });
    c.bench_function("vector prony predict, 16 samples", |b| {
        b.iter(|| vector_prony_predict(black_box(&fx.track), n_d, None, &SolverStrategy::default()).expect("prony"))
    });
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    group.bench_function("2 drops, 4 UEs, PAD", |b| {
        b.iter(|| run_experiment(black_box(&fx.config)).expect("run"))
    });
    group.finish();
}

criterion_group!(predictor_benches, benches);
criterion_main!(predictor_benches);
