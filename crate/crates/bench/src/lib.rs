//! Criterion benchmarks for the `exchangeable` kernels; see `benches/`.
