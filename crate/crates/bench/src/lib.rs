//! Criterion benchmarks for blockpress live under `benches/`.
