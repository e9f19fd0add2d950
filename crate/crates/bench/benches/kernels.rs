use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use pu3_bench::{curve_examples, planar_network, random_points};
use pu3_core::diffcore::{AdamConfig, AdamState, Tape};
use pu3_core::geom::{farthest_point_sample, knn};
use pu3_core::lossmetrics::chamfer;
use pu3_core::net::{cascade_infer, unit_forward, UnitVars};
use pu3_core::trainer::{build_schedule, train_step, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("geometry");
    for n in [200, 1000] {
        let pts = random_points(n, 3, 1);
        g.bench_with_input(BenchmarkId::new("knn_k32", n), &pts, |b, p| {
            b.iter(|| knn(p, p, 32).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("fps_half", n), &pts, |b, p| {
            b.iter(|| farthest_point_sample(p, n / 2, 0).unwrap())
        });
        let other = random_points(n, 3, 2);
        g.bench_with_input(BenchmarkId::new("chamfer", n), &pts, |b, p| {
            b.iter(|| chamfer(p, &other).unwrap())
        });
    }
    g.finish();
}

fn network(c: &mut Criterion) {
    let params = planar_network(2);
    let patch = random_points(50, 2, 3);
    c.bench_function("unit_forward_n50", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let vars = params.bind(&mut tape, 1, false);
            let x = tape.constant(patch.to_tensor());
            let (out, _) =
                unit_forward(&mut tape, x, None, UnitVars::new(&params, &vars, 0)).unwrap();
            black_box(tape.value(out)[0])
        })
    });
    let input = random_points(100, 2, 4);
    c.bench_function("cascade_infer_100_x4", |b| {
        b.iter(|| cascade_infer(&input, &params, 2, 50, 3.0).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let examples = curve_examples(50, 2);
    let batch: Vec<_> = examples.iter().collect();
    let cfg = TrainConfig {
        levels: 2,
        batch_size: batch.len(),
        ..TrainConfig::default()
    };
    let schedule = build_schedule(2);
    let mut g = c.benchmark_group("train_step_batch4");
    g.sample_size(10);
    for stage in &schedule {
        g.bench_with_input(
            BenchmarkId::from_parameter(stage.index),
            stage,
            |b, stage| {
                let mut params = planar_network(2);
                let mut adam = AdamState::new(AdamConfig::default(), params.tensors());
                let mut rng = ChaCha8Rng::seed_from_u64(5);
                let mut step = 0;
                b.iter(|| {
                    step += 1;
                    train_step(&mut params, &batch, stage, &cfg, &mut rng, &mut adam, step).unwrap()
                })
            },
        );
    }
    g.finish();
}

criterion_group!(benches, geometry, network, training);
criterion_main!(benches);
