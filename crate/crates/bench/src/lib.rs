//! Criterion benchmarks for the generation and scoring pipelines live in
//! `benches/`; this crate exports nothing.
