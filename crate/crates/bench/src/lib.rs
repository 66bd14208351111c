//! Criterion benchmarks for the hot paths of `wassdiff-core`; see `benches/`.
