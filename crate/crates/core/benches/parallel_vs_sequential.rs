//! Sequential vs rayon execution of the data-parallel hot paths.
//!
//! Build with `--no-default-features` to confirm the `Parallel` arm falls
//! back to the sequential loop.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eegmap::augment::{one_hot, SoftLabeledBatch};
use eegmap::coords::tsne::pairwise_sq_distances;
use eegmap::coords::{transform, TransformMethod, TsneParams};
use eegmap::ingest::{default_montage, Epoch};
use eegmap::model::{loss_and_grad, Mode, ModelConfig, StPoolModel};
use eegmap::topomap::{build_assignment, build_sequence_with, scale_to_grid, Normalization};
use eegmap::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn batch_gradient(c: &mut Criterion) {
    let cfg = ModelConfig { n_frames: 20, h: 16, w: 16, num_blocks: 2, num_classes: 2, ..ModelConfig::default() };
    let model = StPoolModel::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch = SoftLabeledBatch {
        frames: (0..8).map(|_| (0..cfg.input_len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        labels: (0..8).map(|i| one_hot(i % 2, 2)).collect(),
    };
    let mut g = c.benchmark_group("loss_and_grad_batch8");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| loss_and_grad(&model, black_box(&batch), Mode::Train { dropout_seed: 3 }, exec).unwrap())
        });
    }
    g.finish();
}

fn render_sequence(c: &mut Criterion) {
    let montage = default_montage();
    let map = transform(&montage, TransformMethod::Azimuthal, &TsneParams::default()).unwrap();
    let a = build_assignment(&scale_to_grid(&map, 32, 32).unwrap(), 32, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let epoch = Epoch {
        signals: (0..64).map(|_| (0..960).map(|_| rng.random_range(-50.0..50.0)).collect()).collect(),
        label: 0,
        subject_id: 1,
    };
    let mut g = c.benchmark_group("render_60_frames_32x32");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| build_sequence_with(black_box(&epoch), &a, 60, Normalization::ZScore, exec).unwrap())
        });
    }
    g.finish();
}

fn distances(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<[f64; 3]> = (0..512).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let mut g = c.benchmark_group("pairwise_sq_distances_512");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| pairwise_sq_distances(black_box(&pts), exec))
        });
    }
    g.finish();
}

criterion_group!(benches, batch_gradient, render_sequence, distances);
criterion_main!(benches);
