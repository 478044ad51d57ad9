//! Benchmarks for the `cookie-walk` crate; see `benches/walk.rs`.
