//! Shared fixtures for the benchmarks.

use treegnas::synth::{planted_partition, SyntheticGraphConfig};
use treegnas::tensor::Tensor;
use treegnas::Graph;

/// Planted-partition graph with three labels and 16 features.
pub fn graph(num_nodes: usize) -> Graph {
    planted_partition(&SyntheticGraphConfig {
        num_nodes,
        num_labels: 3,
        num_features: 16,
        avg_degree: 5.0,
        intra_prob: 0.8,
        signal: 1.0,
        noise: 1.0,
        seed: 42,
    })
    .expect("valid config")
}

/// Deterministic dense matrix with entries in (-1, 1).
pub fn matrix(rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |r, c| ((r * 31 + c * 17) % 97) as f64 / 48.5 - 1.0)
}
