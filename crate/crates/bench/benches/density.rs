//! kNN queries and density estimates.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gsanatomy::density::{knn_density, KdTree};
use gsanatomy::seed::rng_for;
use gsanatomy::PointCloud;
use rand::Rng;

fn cloud(n: usize) -> Vec<[f64; 3]> {
    let mut rng = rng_for(1, 0);
    (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect()
}

fn bench(c: &mut Criterion) {
    let pts = cloud(20_000);
    let tree = KdTree::new(&pts);
    let queries = cloud(1000);
    c.bench_function("kdtree_knn32_x1000", |b| {
        b.iter(|| queries.iter().map(|q| tree.knn(q, 32, None).len()).sum::<usize>())
    });
    let mut g = c.benchmark_group("knn_density");
    g.sample_size(10);
    for n in [2_000, 20_000] {
        let cloud = PointCloud::from_positions(cloud(n));
        g.bench_with_input(BenchmarkId::from_parameter(n), &cloud, |b, cl| b.iter(|| knn_density(cl, 32).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
