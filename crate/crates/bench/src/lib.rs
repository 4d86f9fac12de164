//! Criterion benchmarks for the hot kernels of `sr-forge-core`.
//!
//! Run with `cargo bench -p sr-forge-bench`. The suites live in
//! `benches/kernels.rs`.
