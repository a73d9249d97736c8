//! Criterion benchmarks for the estimation library; see `benches/`.
