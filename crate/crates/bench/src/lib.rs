//! Criterion benchmarks for the plasmashell library; see `benches/`.
