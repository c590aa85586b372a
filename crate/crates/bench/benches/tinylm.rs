use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ndarray::Array2;

use ordlab_core::tinylm::{loss, Batch, Gpt, ModelConfig};

fn bench_tinylm(c: &mut Criterion) {
    let cfg = ModelConfig::small_gpt(10);
    let model = Gpt::<f32>::init(&cfg, 1).unwrap();
    let tokens = Array2::from_shape_fn((64, 9), |(b, t)| ((b * 7 + t * 3) % 10) as u32);

    c.bench_function("forward_batch_64x9_6l_192d", |b| {
        b.iter(|| model.forward_batch(black_box(&tokens)).unwrap())
    });

    let batch = Batch {
        inputs: tokens.clone(),
        targets: Array2::from_shape_fn((64, 9), |(b, t)| ((b + t * 5) % 10) as u32),
        mask: Array2::from_shape_fn((64, 9), |(_, t)| t >= 5),
    };
    c.bench_function("masked_loss_64x9_6l_192d", |b| {
        b.iter(|| loss(black_box(&model), black_box(&batch)).unwrap())
    });

    let tiny = ModelConfig::tiny(11);
    let tiny_model = Gpt::<f32>::init(&tiny, 2).unwrap();
    let tiny_tokens = Array2::from_shape_fn((8, 8), |(b, t)| ((b + t) % 11) as u32);
    c.bench_function("forward_batch_tiny_config", |b| {
        b.iter(|| tiny_model.forward_batch(black_box(&tiny_tokens)).unwrap())
    });
}

criterion_group!(benches, bench_tinylm);
criterion_main!(benches);
