//! Parallel vs sequential timing for the data-parallel kernels. Each
//! group runs the same input through both code paths via the runtime
//! switch, so a single binary shows the speedup (or lack of one) per
//! kernel at a mid-size scale.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use divrec_core::dataset::PlaytimeMatrix;
use divrec_core::kmeans::{kmeans, EntityKind};
use divrec_core::mat::{Csr, Dense};
use divrec_core::metrics::evaluate;
use divrec_core::par;
use divrec_core::preferences::{percentile_transform, ImplicitPreference};
use divrec_core::propagation::{propagate, ModelParams, Propagator};
use divrec_core::rng::Stream;
use divrec_core::selection::{build_subgraphs, singleton_clusters};

const N_USERS: usize = 2000;
const N_ITEMS: usize = 500;
const PER_USER: usize = 40;
const DIM: usize = 32;

fn playtimes() -> PlaytimeMatrix {
    let mut rng = Stream::new(7, "bench_playtimes");
    let mut triplets = Vec::with_capacity(N_USERS * PER_USER);
    for u in 0..N_USERS {
        let mut items: Vec<usize> = (0..N_ITEMS).collect();
        rng.shuffle(&mut items);
        for &i in items.iter().take(PER_USER) {
            let pt = if rng.f64() < 0.3 {
                0
            } else {
                (60.0 * rng.pareto(1.0, 1.2)).floor() as u64
            };
            triplets.push((u, i, pt));
        }
    }
    PlaytimeMatrix(Csr::from_triplets(N_USERS, N_ITEMS, &triplets).unwrap())
}

fn random_dense(rows: usize, cols: usize, purpose: &str) -> Dense {
    let mut rng = Stream::new(11, purpose);
    let data = (0..rows * cols).map(|_| rng.normal()).collect();
    Dense::from_vec(rows, cols, data)
}

fn both_paths<F: FnMut()>(c: &mut Criterion, group: &str, mut run: F) {
    let mut g = c.benchmark_group(group);
    for sequential in [false, true] {
        let label = if sequential { "sequential" } else { "parallel" };
        g.bench_with_input(
            BenchmarkId::from_parameter(label),
            &sequential,
            |b, &seq| {
                par::force_sequential(seq);
                b.iter(&mut run);
                par::force_sequential(false);
            },
        );
    }
    g.finish();
}

fn bench_percentile(c: &mut Criterion) {
    let r = playtimes();
    both_paths(c, "percentile_transform", || {
        std::hint::black_box(percentile_transform(&r));
    });
}

fn bench_kmeans(c: &mut Criterion) {
    let points = random_dense(N_USERS, DIM, "bench_kmeans");
    both_paths(c, "kmeans_20_clusters", || {
        std::hint::black_box(kmeans(&points, 20, EntityKind::User, 3, 10, 1e-4).unwrap());
    });
}

fn propagation_setup() -> (ModelParams, Propagator, Csr<f64>) {
    let r = playtimes();
    let h = ImplicitPreference(r.0.map_values(|v| v as f64 + 1.0));
    let sub = build_subgraphs(
        &h,
        &singleton_clusters(N_USERS, EntityKind::User),
        &singleton_clusters(N_ITEMS, EntityKind::Item),
    )
    .unwrap();
    let params = ModelParams::init(N_USERS, N_ITEMS, DIM, 3, 5);
    (params, Propagator::new(sub).unwrap(), h.0)
}

fn bench_propagation(c: &mut Criterion) {
    let (params, prop, _) = propagation_setup();
    both_paths(c, "propagate_3_layers", || {
        std::hint::black_box(propagate(&params, &prop, 3).unwrap());
    });
}

fn bench_evaluate(c: &mut Criterion) {
    let (params, prop, train_csr) = propagation_setup();
    let out = propagate(&params, &prop, 3).unwrap();
    let mut rng = Stream::new(13, "bench_tests");
    let tests: Vec<Vec<usize>> = (0..N_USERS)
        .map(|_| {
            let mut items: Vec<usize> = (0..5).map(|_| rng.below(N_ITEMS)).collect();
            items.sort_unstable();
            items.dedup();
            items
        })
        .collect();
    let q_rows: Vec<Vec<usize>> = (0..N_ITEMS).map(|i| vec![i % 10]).collect();
    let q = divrec_core::dataset::CategoryMatrix(
        divrec_core::mat::Pattern::from_rows(10, &q_rows).unwrap(),
    );
    both_paths(c, "evaluate_at_100", || {
        std::hint::black_box(
            evaluate(
                &out.fused_users,
                &out.fused_items,
                &train_csr,
                &tests,
                &q,
                &[100],
            )
            .unwrap(),
        );
    });
}

criterion_group!(
    benches,
    bench_percentile,
    bench_kmeans,
    bench_propagation,
    bench_evaluate
);
criterion_main!(benches);
