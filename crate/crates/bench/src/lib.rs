//! Benchmark-only crate; the interesting content lives in `benches/`.
//! Run with `cargo bench -p problab-bench`.
