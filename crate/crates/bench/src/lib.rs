//! Criterion benchmarks for the core crate live in `benches/`; this library
//! target exists only so the package builds on its own.
