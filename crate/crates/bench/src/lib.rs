//! Criterion benchmarks for the `qtraj` core; see `benches/`.
