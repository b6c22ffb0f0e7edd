//! Criterion benchmarks for the propagator and analytic layer; see `benches/`.
