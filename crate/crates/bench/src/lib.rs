//! Criterion benchmarks for map evaluation, sampling, the empirical loss matrix and bound reports.
//! Run with `cargo bench -p rosegan-bench`.
