//! Attributed, labeled, undirected graphs: loading, saving, splitting and
//! edge homophily.
//!
//! On-disk layout of a graph directory (UTF-8, tab separated, LF endings):
//!
//! ```text
//! meta.tsv      n<TAB>d<TAB>y
//! edges.tsv     u<TAB>v          one undirected edge per line, 0-based
//! features.tsv  d floats per line, n lines
//! labels.tsv    one label in [0, y) per line, n lines
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{CsrMatrix, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}:{line}: cannot parse {token:?}")]
    Parse { file: &'static str, line: usize, token: String },
    #[error("meta.tsv must hold exactly three fields n, d, y")]
    BadMeta,
    #[error("feature arity mismatch at row {row}: got {got}, expected {expected}")]
    FeatureArity { row: usize, got: usize, expected: usize },
    #[error("{file} has {got} rows, expected {expected}")]
    RowCount { file: &'static str, got: usize, expected: usize },
    #[error("node index {index} out of range for {num_nodes} nodes (edges.tsv line {line})")]
    NodeOutOfRange { index: usize, num_nodes: usize, line: usize },
    #[error("self-loop on node {node} (edges.tsv line {line})")]
    SelfLoop { node: usize, line: usize },
    #[error("label {label} at row {row} out of range for {num_labels} labels")]
    LabelOutOfRange { row: usize, label: usize, num_labels: usize },
    #[error("graph too small to split ({0} nodes, need at least 4)")]
    TooSmall(usize),
    #[error("homophily undefined: graph has no edges")]
    NoEdges,
    #[error("invalid permutation")]
    BadPermutation,
}

/// Undirected attributed graph with node labels.
///
/// The adjacency never stores the diagonal. The self-loop augmented
/// propagation operators used by GNN layers are derived once at construction.
#[derive(Debug, Clone)]
pub struct Graph {
    num_labels: usize,
    adjacency: CsrMatrix,
    features: Tensor,
    labels: Vec<usize>,
    degrees: Vec<usize>,
    with_self_loops: Arc<CsrMatrix>,
    gcn_normalized: Arc<CsrMatrix>,
}

impl Graph {
    /// Builds a graph from undirected edges. Each pair may appear in either
    /// or both directions and any number of times; the stored adjacency is
    /// symmetric with every edge present once per direction.
    pub fn new(
        features: Tensor,
        labels: Vec<usize>,
        num_labels: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        let n = features.rows();
        if labels.len() != n {
            return Err(GraphError::RowCount { file: "labels", got: labels.len(), expected: n });
        }
        for (row, &label) in labels.iter().enumerate() {
            if label >= num_labels {
                return Err(GraphError::LabelOutOfRange { row, label, num_labels });
            }
        }
        let mut pairs = BTreeSet::new();
        for (line, &(u, v)) in edges.iter().enumerate() {
            for index in [u, v] {
                if index >= n {
                    return Err(GraphError::NodeOutOfRange { index, num_nodes: n, line: line + 1 });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { node: u, line: line + 1 });
            }
            pairs.insert((u, v));
            pairs.insert((v, u));
        }
        let adjacency =
            CsrMatrix::from_triplets(n, n, pairs.iter().map(|&(u, v)| (u, v, 1.0))).expect("indices validated above");
        let degrees: Vec<usize> = (0..n).map(|u| adjacency.row_indices(u).len()).collect();

        let with_self_loops =
            CsrMatrix::from_triplets(n, n, pairs.iter().map(|&(u, v)| (u, v, 1.0)).chain((0..n).map(|u| (u, u, 1.0))))
                .expect("indices validated above");
        let inv_sqrt: Vec<f64> = degrees.iter().map(|&d| 1.0 / ((d + 1) as f64).sqrt()).collect();
        let mut norm_values = Vec::with_capacity(with_self_loops.nnz());
        for u in 0..n {
            for &v in with_self_loops.row_indices(u) {
                norm_values.push(inv_sqrt[u] * inv_sqrt[v]);
            }
        }
        let gcn_normalized = with_self_loops.with_values(norm_values);

        Ok(Self {
            num_labels,
            adjacency,
            features,
            labels,
            degrees,
            with_self_loops: Arc::new(with_self_loops),
            gcn_normalized: Arc::new(gcn_normalized),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        self.adjacency.row_indices(u)
    }

    /// `S + I` with unit weights.
    pub fn self_loop_adjacency(&self) -> &Arc<CsrMatrix> {
        &self.with_self_loops
    }

    /// `D^-1/2 (S + I) D^-1/2` with `D` the degree matrix of `S + I`.
    pub fn gcn_adjacency(&self) -> &Arc<CsrMatrix> {
        &self.gcn_normalized
    }

    /// Undirected edges with `u < v`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_nodes())
            .flat_map(|u| self.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect()
    }

    /// The same graph with node `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph, GraphError> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(GraphError::BadPermutation);
        }
        let mut features = Tensor::zeros(n, self.num_features());
        let mut labels = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            features.row_mut(p).copy_from_slice(self.features.row(i));
            labels[p] = self.labels[i];
        }
        let edges: Vec<_> = self.edges().into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
        Graph::new(features, labels, self.num_labels, &edges)
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.num_labels == other.num_labels
            && self.adjacency == other.adjacency
            && self.features == other.features
            && self.labels == other.labels
    }
}

/// Diagnostics collected while loading a graph directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Edge lines naming a pair already seen in either direction.
    pub duplicate_edges: usize,
}

fn read_file(dir: &Path, name: &str) -> Result<String, GraphError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(GraphError::MissingFile(path));
    }
    fs::read_to_string(&path).map_err(|source| GraphError::Io { path, source })
}

fn parse<T: std::str::FromStr>(file: &'static str, line: usize, token: &str) -> Result<T, GraphError> {
    token.trim().parse().map_err(|_| GraphError::Parse { file, line, token: token.to_string() })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty())
}

pub fn load_graph(dir: impl AsRef<Path>) -> Result<Graph, GraphError> {
    load_graph_with_report(dir).map(|(g, _)| g)
}

pub fn load_graph_with_report(dir: impl AsRef<Path>) -> Result<(Graph, LoadReport), GraphError> {
    let dir = dir.as_ref();
    let meta = read_file(dir, "meta.tsv")?;
    let edges_text = read_file(dir, "edges.tsv")?;
    let features_text = read_file(dir, "features.tsv")?;
    let labels_text = read_file(dir, "labels.tsv")?;

    let (_, meta_line) = data_lines(&meta).next().ok_or(GraphError::BadMeta)?;
    let fields: Vec<&str> = meta_line.split('\t').collect();
    if fields.len() != 3 {
        return Err(GraphError::BadMeta);
    }
    let n: usize = parse("meta.tsv", 1, fields[0])?;
    let d: usize = parse("meta.tsv", 1, fields[1])?;
    let y: usize = parse("meta.tsv", 1, fields[2])?;

    let mut features = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (i, line) in features_text.lines().enumerate() {
        if rows == n && line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = if line.is_empty() { Vec::new() } else { line.split('\t').collect() };
        if tokens.len() != d {
            return Err(GraphError::FeatureArity { row: i, got: tokens.len(), expected: d });
        }
        for t in tokens {
            features.push(parse::<f64>("features.tsv", i + 1, t)?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(GraphError::RowCount { file: "features.tsv", got: rows, expected: n });
    }

    let labels = data_lines(&labels_text)
        .map(|(line, t)| parse::<usize>("labels.tsv", line, t))
        .collect::<Result<Vec<_>, _>>()?;
    if labels.len() != n {
        return Err(GraphError::RowCount { file: "labels.tsv", got: labels.len(), expected: n });
    }

    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    let mut report = LoadReport::default();
    for (line, text) in data_lines(&edges_text) {
        let mut parts = text.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(GraphError::Parse { file: "edges.tsv", line, token: text.to_string() });
        };
        let u: usize = parse("edges.tsv", line, a)?;
        let v: usize = parse("edges.tsv", line, b)?;
        for index in [u, v] {
            if index >= n {
                return Err(GraphError::NodeOutOfRange { index, num_nodes: n, line });
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop { node: u, line });
        }
        if !seen.insert((u.min(v), u.max(v))) {
            report.duplicate_edges += 1;
            continue;
        }
        edges.push((u, v));
    }

    let features = Tensor::from_vec(n, d, features).expect("row count checked");
    Ok((Graph::new(features, labels, y, &edges)?, report))
}

/// Writes a graph directory that [`load_graph`] reads back to an equal graph.
pub fn save_graph(g: &Graph, dir: impl AsRef<Path>) -> Result<(), GraphError> {
    let dir = dir.as_ref();
    let io = |path: PathBuf| move |source| GraphError::Io { path: path.clone(), source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;

    let write = |name: &str, body: String| -> Result<(), GraphError> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(io(path.clone()))?;
        f.write_all(body.as_bytes()).map_err(io(path.clone()))
    };

    write("meta.tsv", format!("{}\t{}\t{}\n", g.num_nodes(), g.num_features(), g.num_labels()))?;
    let mut edges = String::new();
    for (u, v) in g.edges() {
        edges.push_str(&format!("{u}\t{v}\n"));
    }
    write("edges.tsv", edges)?;
    let mut features = String::new();
    for r in 0..g.num_nodes() {
        let row: Vec<String> = g.features().row(r).iter().map(|x| format!("{x:?}")).collect();
        features.push_str(&row.join("\t"));
        features.push('\n');
    }
    write("features.tsv", features)?;
    let labels: String = g.labels().iter().map(|l| format!("{l}\n")).collect();
    write("labels.tsv", labels)
}

/// Disjoint train / validation / test node sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Seeded uniform 0.5 / 0.25 / 0.25 split.
///
/// The train set takes `ceil(n/2)` nodes of a seeded shuffle and the
/// remainder is halved between validation (rounding up) and test.
pub fn make_split(g: &Graph, seed: u64) -> Result<Split, GraphError> {
    let n = g.num_nodes();
    if n < 4 {
        return Err(GraphError::TooSmall(n));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n.div_ceil(2);
    let n_val = (n - n_train).div_ceil(2);
    let test = perm.split_off(n_train + n_val);
    let val = perm.split_off(n_train);
    Ok(Split { train: perm, val, test })
}

/// Fraction of stored (ordered) adjacency entries whose endpoints share a
/// label.
pub fn edge_homophily(g: &Graph) -> Result<f64, GraphError> {
    let adj = g.adjacency();
    if adj.nnz() == 0 {
        return Err(GraphError::NoEdges);
    }
    let labels = g.labels();
    let same = (0..g.num_nodes())
        .map(|u| adj.row_indices(u).iter().filter(|&&v| labels[v] == labels[u]).count())
        .sum::<usize>();
    Ok(same as f64 / adj.nnz() as f64)
}
