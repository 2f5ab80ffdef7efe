//! Benchmarks for fou2-core live in `benches/`.
