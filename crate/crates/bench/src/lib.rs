//! Criterion benchmarks for twin insertion; see `benches/`.
