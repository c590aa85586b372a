use criterion::{black_box, criterion_group, criterion_main, Criterion};

use ordlab_bench::mlc_dataset;
use ordlab_core::mi::{greedy_order, mi_exact, mi_source_vs_target, Estimator};

fn bench_mi(c: &mut Criterion) {
    let ds = mlc_dataset(5000);
    let x: Vec<u32> = ds.examples.iter().map(|e| e.source[0]).collect();
    let y: Vec<u32> = ds.examples.iter().map(|e| e.target[1]).collect();

    c.bench_function("mi_exact_pairwise_n5000", |b| {
        b.iter(|| mi_exact(black_box(&x), black_box(&y)).unwrap())
    });

    c.bench_function("mi_source_vs_target_factored_n5000", |b| {
        b.iter(|| mi_source_vs_target(black_box(&ds), &[], 1, Estimator::FactoredSum).unwrap())
    });

    c.bench_function("greedy_order_factored_n5000_l2_4", |b| {
        b.iter(|| greedy_order(black_box(&ds), Estimator::FactoredSum).unwrap())
    });

    c.bench_function("greedy_order_joint_n5000_l2_4", |b| {
        b.iter(|| greedy_order(black_box(&ds), Estimator::JointSource).unwrap())
    });
}

criterion_group!(benches, bench_mi);
criterion_main!(benches);
