//! Criterion benchmarks of cut-cell quadrature construction and system
//! assembly live in `benches/`.
