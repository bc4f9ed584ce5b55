//! Benchmarks for the sparse recovery library; see `benches/decode.rs`.
