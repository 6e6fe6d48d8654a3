//! Benchmarks live in `benches/`. This crate has no library code of its own.
