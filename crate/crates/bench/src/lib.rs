//! Benchmarks of the samplers live in `benches/`.
