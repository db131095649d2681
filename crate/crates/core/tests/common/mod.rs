//! Independent reference implementations used by the integration tests.
//! Nothing here calls the code under test except to build inputs.

#![allow(dead_code)]

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treegnas::model::{Activation, ArchitectureParams, Attention, EmbSize, JkMode, LayerParams, Toggle};
use treegnas::search::SearchSpace;
use treegnas::synth::{planted_partition, SyntheticGraphConfig};
use treegnas::tensor::Tensor;
use treegnas::Graph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Textbook triple loop.
pub fn naive_matmul(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.cols(), b.rows());
    let mut out = Tensor::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

/// Dense `D^-1/2 (S + I) D^-1/2` with `D` the degree matrix of `S + I`,
/// built from the edge list alone.
pub fn dense_gcn_operator(n: usize, edges: &[(usize, usize)]) -> Tensor {
    let mut s = Tensor::zeros(n, n);
    for &(u, v) in edges {
        s.set(u, v, 1.0);
        s.set(v, u, 1.0);
    }
    for u in 0..n {
        s.set(u, u, 1.0);
    }
    let deg: Vec<f64> = (0..n).map(|u| s.row(u).iter().sum()).collect();
    Tensor::from_fn(n, n, |u, v| s.get(u, v) / (deg[u] * deg[v]).sqrt())
}

/// Macro one-vs-rest AUC by counting every positive/negative pair.
pub fn pairwise_auc(scores: &Tensor, labels: &[usize], nodes: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut classes = 0;
    for c in 0..scores.cols() {
        let pos: Vec<usize> = nodes.iter().copied().filter(|&u| labels[u] == c).collect();
        let neg: Vec<usize> = nodes.iter().copied().filter(|&u| labels[u] != c).collect();
        if pos.is_empty() {
            continue;
        }
        let mut wins = 0.0;
        for &p in &pos {
            for &q in &neg {
                let (sp, sq) = (scores.get(p, c), scores.get(q, c));
                wins += if sp > sq {
                    1.0
                } else if sp == sq {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total += wins / (pos.len() * neg.len()) as f64;
        classes += 1;
    }
    total / classes as f64
}

/// Counts distinct valid architectures by listing every raw combination and
/// keeping those that satisfy the dependency rules, with inactive fields
/// blanked. Widths are kept symbolic so `y` stays distinct from numbers.
pub fn enumerate_space(space: &SearchSpace) -> usize {
    #[derive(Hash, PartialEq, Eq)]
    struct Key(Vec<(Attention, Activation, EmbSize)>, JkMode, Toggle, Toggle, Option<EmbSize>, usize, Option<usize>);

    let mut seen = HashSet::new();
    let layer_opts: Vec<(Attention, Activation, EmbSize)> = space
        .attention
        .iter()
        .flat_map(|&a| space.activation.iter().flat_map(move |&f| space.emb_size.iter().map(move |&e| (a, f, e))))
        .collect();
    // Any width a preMLP could end up with: its own list, or a layer width
    // it is tied to under max.
    let mut pre_widths: Vec<Option<EmbSize>> = vec![None];
    pre_widths.extend(space.pre_mlp_emb.iter().chain(&space.emb_size).map(|&e| Some(e)));
    let mut post_opts: Vec<Option<usize>> = vec![None];
    post_opts.extend(space.post_mlp_hidden.iter().map(|&h| Some(h)));

    for &l in &space.num_gnn_layers {
        let mut stacks: Vec<Vec<(Attention, Activation, EmbSize)>> = vec![vec![]];
        for _ in 0..l {
            stacks = stacks
                .into_iter()
                .flat_map(|s| layer_opts.iter().map(move |&o| [s.clone(), vec![o]].concat()))
                .collect();
        }
        for layers in &stacks {
            for &jk in &space.jknet {
                if jk == JkMode::Max && layers.iter().any(|x| x.2 != layers[0].2) {
                    continue;
                }
                for &pre_jk in &space.pre_jknet {
                    for &pre in &space.pre_mlp {
                        for &pw in &pre_widths {
                            let tied = jk == JkMode::Max && pre == Toggle::Use && pre_jk == Toggle::Use;
                            let ok = match (pre, pw) {
                                (Toggle::None, None) => true,
                                (Toggle::Use, Some(w)) if tied => w == layers[0].2,
                                (Toggle::Use, Some(w)) => space.pre_mlp_emb.contains(&w),
                                _ => false,
                            };
                            if !ok {
                                continue;
                            }
                            for &post in &space.post_mlp_layers {
                                for &hidden in &post_opts {
                                    if (post == 0) != hidden.is_none() {
                                        continue;
                                    }
                                    seen.insert(Key(layers.clone(), jk, pre_jk, pre, pw, post, hidden));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    seen.len()
}

/// A small random graph with three labels and five features.
pub fn small_graph(n: usize, seed: u64) -> Graph {
    planted_partition(&SyntheticGraphConfig {
        num_nodes: n,
        num_labels: 3,
        num_features: 5,
        avg_degree: 3.0,
        intra_prob: 0.6,
        signal: 1.0,
        noise: 0.5,
        seed,
    })
    .expect("valid config")
}

/// Solves `a x = b` for square `a` by Gaussian elimination with partial
/// pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[r][k] -= f * a[col][k];
                    }
                    for k in 0..b[r].len() {
                        b[r][k] -= f * b[col][k];
                    }
                }
            }
        }
    }
    (0..n).map(|r| b[r].iter().map(|x| x / a[r][r]).collect()).collect()
}

/// Ridge regression of one-hot labels on `[features, 1]` fitted on
/// `train`; returns the scores of every node.
pub fn linear_classifier_scores(g: &Graph, train: &[usize], ridge: f64) -> Tensor {
    let d = g.num_features() + 1;
    let y = g.num_labels();
    let row = |u: usize| -> Vec<f64> { g.features().row(u).iter().copied().chain([1.0]).collect() };
    let mut xtx = vec![vec![0.0; d]; d];
    let mut xty = vec![vec![0.0; y]; d];
    for &u in train {
        let x = row(u);
        for i in 0..d {
            for j in 0..d {
                xtx[i][j] += x[i] * x[j];
            }
            xty[i][g.labels()[u]] += x[i];
        }
    }
    for (i, r) in xtx.iter_mut().enumerate() {
        r[i] += ridge;
    }
    let w = solve(xtx, xty);
    Tensor::from_fn(g.num_nodes(), y, |u, c| row(u).iter().zip(&w).map(|(x, wr)| x * wr[c]).sum())
}

/// A canonical architecture with every field set by hand.
pub fn arch(
    layers: &[(Attention, Activation, EmbSize)],
    jknet: JkMode,
    pre_jknet: Toggle,
    pre_mlp_emb: Option<usize>,
    post: Option<(usize, usize)>,
) -> ArchitectureParams {
    ArchitectureParams {
        num_gnn_layers: layers.len(),
        layers: layers
            .iter()
            .map(|&(attention, activation, emb_size)| LayerParams { attention, activation, emb_size })
            .collect(),
        jknet,
        pre_jknet,
        pre_mlp: if pre_mlp_emb.is_some() { Toggle::Use } else { Toggle::None },
        pre_mlp_emb: pre_mlp_emb.map(EmbSize::Fixed),
        post_mlp_layers: post.map_or(0, |p| p.0),
        post_mlp_hidden: post.map(|p| p.1),
    }
}
