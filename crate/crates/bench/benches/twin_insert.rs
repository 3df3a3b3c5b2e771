use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use twinsearch::{
    add_user_fast, build_list_full, cosine, generate_synthetic, twin_search, RatingMatrix,
    SimilarityStore, TwinSearchConfig, UserId,
};

const USERS: usize = 1000;
const ITEMS: usize = 800;
const DENSITY: f64 = 0.06;

/// A store holding one twin of user 0, and the matrix with a second copy of
/// that row appended (no list yet).
fn fixture() -> (RatingMatrix, SimilarityStore, UserId) {
    let mut m = generate_synthetic(USERS, ITEMS, DENSITY, 1).unwrap();
    let mut store = SimilarityStore::build_all(&m).unwrap();
    let row = m.row(UserId(0)).unwrap().to_vec();
    add_user_fast(
        &mut m,
        &mut store,
        row.clone(),
        &TwinSearchConfig::default(),
    )
    .unwrap();
    let u0 = m.add_user(row).unwrap();
    (m, store, u0)
}

fn bench_cosine(c: &mut Criterion) {
    let m = generate_synthetic(2, ITEMS, DENSITY, 2).unwrap();
    c.bench_function("cosine", |b| {
        b.iter(|| cosine(black_box(&m), UserId(0), UserId(1)).unwrap())
    });
}

fn bench_list(c: &mut Criterion) {
    let (m, store, u0) = fixture();
    let config = TwinSearchConfig::default();
    let mut g = c.benchmark_group("new list");
    g.bench_function("full build", |b| {
        b.iter(|| build_list_full(black_box(&m), u0).unwrap())
    });
    g.bench_function("twin search", |b| {
        b.iter(|| twin_search(black_box(&m), &store, u0, &config).unwrap())
    });
    g.finish();
}

fn bench_link(c: &mut Criterion) {
    let (m, store, u0) = fixture();
    let list = build_list_full(&m, u0).unwrap();
    c.bench_function("link", |b| {
        // by reference, so dropping the copies is not timed
        b.iter_batched_ref(
            || (store.clone(), Some(list.clone())),
            |(s, l)| s.link(l.take().unwrap()).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_cosine, bench_list, bench_link
}
criterion_main!(benches);
