use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use textsignal::cascade::{run_cascade, CascadeConfig, CascadeInput};
use textsignal::manifold::{epsilon_edges, twonn_estimate, NeighborIndex, PointCloud};
use textsignal::partition::{density_core_label, kmeans_assign, kmeans_fit, KMeansConfig};

/// `n` points around `clusters` centres spread over a square of side 20.
fn clustered(n: usize, dim: usize, clusters: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let mut coords = Vec::with_capacity(n * dim);
    for i in 0..n {
        let c = &centres[i % clusters];
        for x in c {
            coords.push(x + rng.random_range(-1.5..1.5));
        }
    }
    PointCloud::new(dim, coords).unwrap()
}

fn bench_kmeans(c: &mut Criterion) {
    let mut g = c.benchmark_group("kmeans");
    g.sample_size(10);
    for &n in &[2_000usize, 12_000] {
        let pts = clustered(n, 5, 15, 1);
        let cfg = KMeansConfig { k: 15, seed: 42, ..KMeansConfig::default() };
        g.bench_with_input(BenchmarkId::new("fit_5d_k15", n), &pts, |b, p| {
            b.iter(|| kmeans_fit(black_box(p), &cfg).unwrap())
        });
        let model = kmeans_fit(&pts, &cfg).unwrap().model;
        g.bench_with_input(BenchmarkId::new("assign_5d_k15", n), &pts, |b, p| {
            b.iter(|| kmeans_assign(&model, black_box(p)).unwrap())
        });
    }
    g.finish();
}

fn bench_neighbors(c: &mut Criterion) {
    let mut g = c.benchmark_group("neighbors");
    let map = clustered(12_000, 2, 15, 2);
    let cloud5 = clustered(12_000, 5, 15, 3);
    g.bench_function("grid_build_2d", |b| {
        b.iter_batched(|| map.clone(), |p| NeighborIndex::build(p).unwrap(), BatchSize::LargeInput)
    });
    g.bench_function("kd_build_5d", |b| {
        b.iter_batched(|| cloud5.clone(), |p| NeighborIndex::build(p).unwrap(), BatchSize::LargeInput)
    });
    let grid = NeighborIndex::build(map.clone()).unwrap();
    let kd = NeighborIndex::build(cloud5.clone()).unwrap();
    g.bench_function("grid_knn15_x1000", |b| {
        b.iter(|| (0..1000).map(|i| grid.knn_of(i * 7, 15).unwrap().len()).sum::<usize>())
    });
    g.bench_function("kd_knn2_x1000", |b| {
        b.iter(|| (0..1000).map(|i| kd.knn_of(i * 7, 2).unwrap().len()).sum::<usize>())
    });
    g.sample_size(10);
    g.bench_function("epsilon_edges_2d_eps1.2", |b| b.iter(|| epsilon_edges(black_box(&map), 1.2).unwrap().len()));
    g.finish();
}

fn bench_manifold(c: &mut Criterion) {
    let mut g = c.benchmark_group("manifold");
    g.sample_size(10);
    let cloud5 = clustered(12_000, 5, 15, 4);
    g.bench_function("twonn_5d_12k", |b| b.iter(|| twonn_estimate(black_box(&cloud5)).unwrap()));
    let map = clustered(12_000, 2, 15, 5);
    g.bench_function("density_core_2d_12k", |b| {
        b.iter(|| density_core_label(black_box(&map), 0.5, 15).unwrap())
    });
    g.finish();
}

fn bench_cascade(c: &mut Criterion) {
    let mut g = c.benchmark_group("cascade");
    g.sample_size(10);
    let n = 12_000;
    let map = clustered(n, 2, 15, 6);
    let density_core = density_core_label(&map, 0.5, 15).unwrap();
    let regions = kmeans_assign(
        &kmeans_fit(&map, &KMeansConfig { k: 15, seed: 42, ..KMeansConfig::default() })
            .unwrap()
            .model,
        &map,
    )
    .unwrap();
    let input = CascadeInput {
        doc_ids: (0..n).map(|i| format!("d{i:05}")).collect(),
        points: map,
        density_core,
        regions,
        n_regions: 15,
    };
    let cfg = CascadeConfig::default();
    g.bench_function("run_cascade_12k", |b| b.iter(|| run_cascade(black_box(&input), &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_kmeans, bench_neighbors, bench_manifold, bench_cascade);
criterion_main!(benches);
