//! Criterion benchmarks of meshing, solves and shape derivatives; run with `cargo bench -p sigma-shape-bench`.
