//! Criterion benchmarks for `fepanel`; see `benches/`.
