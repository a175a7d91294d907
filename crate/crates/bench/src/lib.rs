//! Criterion benchmarks for the valuecycle engine live under `benches/`.
