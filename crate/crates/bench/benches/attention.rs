use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use freqdeblur_core::attention::{
    fsas_forward, spatial_attention_oracle, window_attention_forward, FftGranularity, FsasParams,
    SpatialAttnParams,
};
use freqdeblur_core::params::materialize;
use freqdeblur_core::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CHANNELS: usize = 2;

fn setup(size: usize) -> (Tensor<f32>, FsasParams<Tensor<f32>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let store = materialize::<f32, _>(&FsasParams::<()>::specs("a", CHANNELS), &mut rng).unwrap();
    let p = FsasParams::bind(&store, "a", 8, FftGranularity::Patch).unwrap();
    let x = Tensor::uniform(&[1, CHANNELS, size, size], -1.0, 1.0, &mut rng).unwrap();
    (x, p)
}

fn attention(c: &mut Criterion) {
    let mut g = c.benchmark_group("attention");
    g.sample_size(10);
    for size in [64usize, 128, 256] {
        let (x, p) = setup(size);
        let sp = SpatialAttnParams::from_fsas(&p);
        g.bench_with_input(BenchmarkId::new("fsas", size), &x, |b, x| {
            b.iter(|| fsas_forward(x, &p).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("window_attention", size), &x, |b, x| {
            b.iter(|| window_attention_forward(x, 8, &sp).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("quadratic_oracle", size), &x, |b, x| {
            b.iter(|| spatial_attention_oracle(x, &sp).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, attention);
criterion_main!(benches);
