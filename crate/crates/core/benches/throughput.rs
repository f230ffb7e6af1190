use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use freqgen::harness::{train_with, Augmentation, ExperimentConfig};
use freqgen::par::Exec;
use freqgen::raster::Image;
use freqgen::spectral::{two_step_batch, ParamSampler};
use freqgen::tail::TailInteraction;
use ndarray::Array3;
use rand::Rng;

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Auto), ("sequential", Exec::Sequential)];

fn augmentation(c: &mut Criterion) {
    let mut rng = freqgen::seed::rng(0);
    let images: Vec<Image> = (0..16)
        .map(|_| Image::new(64, 64, 3, (0..64 * 64 * 3).map(|_| rng.random::<f64>()).collect()).unwrap())
        .collect();
    let mut sampler = ParamSampler::new(1);
    let params: Vec<_> = images.iter().map(|_| sampler.sample(64, 64)).collect();
    let mut group = c.benchmark_group("two_step_batch_16x64x64");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| two_step_batch(exec, black_box(&images), &params).unwrap())
        });
    }
    group.finish();
}

fn tail_forward(c: &mut Criterion) {
    let mut rng = freqgen::seed::rng(2);
    let input = Array3::from_shape_simple_fn((8, 1024, 64), || rng.random_range(-1.0..1.0));
    let mut group = c.benchmark_group("tail_forward_b8_n1024");
    for (name, exec) in MODES {
        let layer = TailInteraction::init(64, 64, &mut freqgen::seed::rng(3)).unwrap().with_exec(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| layer.forward(black_box(&input)).unwrap()));
    }
    group.finish();
}

fn folds(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        augmentation: Augmentation::TwoStep,
        use_tail_interaction: true,
        epochs: 1,
        samples_per_class: 8,
        ..ExperimentConfig::default()
    };
    let mut group = c.benchmark_group("train_four_folds");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| train_with(black_box(&cfg), exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, augmentation, tail_forward, folds);
criterion_main!(benches);
