//! Criterion benchmarks for the simulation and rate kernels live in `benches/`.
