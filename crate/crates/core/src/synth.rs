//! Planted-partition graphs with label-dependent features.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::graph::{Graph, GraphError};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGraphConfig {
    pub num_nodes: usize,
    pub num_labels: usize,
    pub num_features: usize,
    /// Expected node degree.
    pub avg_degree: f64,
    /// Probability that a generated edge joins two nodes of the same label.
    pub intra_prob: f64,
    /// Standard deviation of the per-class feature means.
    pub signal: f64,
    /// Standard deviation of per-node feature noise.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticGraphConfig {
    pub fn homophilic(num_nodes: usize, num_labels: usize, seed: u64) -> Self {
        Self {
            num_nodes,
            num_labels,
            num_features: 16,
            avg_degree: 6.0,
            intra_prob: 0.85,
            signal: 1.0,
            noise: 1.2,
            seed,
        }
    }

    pub fn heterophilic(num_nodes: usize, num_labels: usize, seed: u64) -> Self {
        Self { intra_prob: 0.1, ..Self::homophilic(num_nodes, num_labels, seed) }
    }
}

/// The graphs shipped under `data/`, keyed by directory name.
pub fn bundled_datasets() -> Vec<(&'static str, SyntheticGraphConfig)> {
    vec![
        (
            "toy30",
            SyntheticGraphConfig { num_features: 8, avg_degree: 4.0, ..SyntheticGraphConfig::homophilic(30, 3, 7) },
        ),
        ("homophilic300", SyntheticGraphConfig::homophilic(300, 3, 1)),
        ("heterophilic300", SyntheticGraphConfig::heterophilic(300, 3, 1)),
    ]
}

pub fn planted_partition(cfg: &SyntheticGraphConfig) -> Result<Graph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_nodes;
    let y = cfg.num_labels.max(1);

    let mut labels: Vec<usize> = (0..n).map(|i| i % y).collect();
    labels.shuffle(&mut rng);
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); y];
    for (u, &l) in labels.iter().enumerate() {
        by_label[l].push(u);
    }

    let signal = Normal::new(0.0, cfg.signal).expect("finite std");
    let noise = Normal::new(0.0, cfg.noise).expect("finite std");
    let means: Vec<Vec<f64>> =
        (0..y).map(|_| (0..cfg.num_features).map(|_| signal.sample(&mut rng)).collect()).collect();
    let features = Tensor::from_fn(n, cfg.num_features, |r, c| means[labels[r]][c] + noise.sample(&mut rng));

    let target = ((cfg.avg_degree * n as f64) / 2.0).round() as usize;
    let mut edges = BTreeSet::new();
    let mut attempts = 0;
    while edges.len() < target && attempts < target * 50 {
        attempts += 1;
        let u = rng.random_range(0..n);
        let lu = labels[u];
        let same = rng.random_bool(cfg.intra_prob.clamp(0.0, 1.0));
        let pool: &[usize] = if same || y == 1 {
            &by_label[lu]
        } else {
            let mut other = rng.random_range(0..y - 1);
            if other >= lu {
                other += 1;
            }
            &by_label[other]
        };
        let v = pool[rng.random_range(0..pool.len())];
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    let edges: Vec<_> = edges.into_iter().collect();
    Graph::new(features, labels, y, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_homophily;

    #[test]
    fn homophily_tracks_intra_probability() {
        let g = planted_partition(&SyntheticGraphConfig::homophilic(300, 3, 1)).unwrap();
        let h = edge_homophily(&g).unwrap();
        assert!(h > 0.75, "{h}");
        let g = planted_partition(&SyntheticGraphConfig::heterophilic(300, 3, 1)).unwrap();
        let h = edge_homophily(&g).unwrap();
        assert!(h < 0.3, "{h}");
        assert_eq!(g.num_edges(), 900);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SyntheticGraphConfig::homophilic(40, 2, 9);
        assert_eq!(planted_partition(&cfg).unwrap(), planted_partition(&cfg).unwrap());
    }
}
