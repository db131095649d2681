//! Turning an [`ArchitectureParams`] into trainable tensors and a forward
//! pass.
//!
//! The network is
//!
//! ```text
//! x -> [preMLP] -> GNN_1 -> ... -> GNN_L -> JK merge -> [postMLP] -> linear head
//! ```
//!
//! where each GNN layer computes `act(sum_{v in N(u)} e(u, v) * W z_v)` and
//! the JK merge combines the preMLP skip (when `pre_jknet = use`) with either
//! all layer outputs or only the last one.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{Activation, ArchitectureParams, Attention, JkMode};
use super::ModelError;
use crate::graph::Graph;
use crate::tensor::{CsrMatrix, Parameter, Tape, Tensor, Var};

/// Interpretation switches for details the architecture parameters leave
/// open. The defaults are the behaviour used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    /// Aggregate over `N(u) + {u}` and use `deg + 1` in GCN normalization.
    pub self_loops: bool,
    /// Softmax-normalize GAT scores over each neighborhood.
    pub gat_softmax: bool,
    pub gat_slope: f64,
    pub pre_mlp_activation: Activation,
    pub post_mlp_activation: Activation,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            self_loops: true,
            gat_softmax: true,
            gat_slope: 0.2,
            pre_mlp_activation: Activation::Tanh,
            post_mlp_activation: Activation::Relu,
        }
    }
}

/// Sparse propagation operators of one graph under a set of options.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub constant: Arc<CsrMatrix>,
    pub gcn: Arc<CsrMatrix>,
    /// Sparsity pattern over which GAT attends.
    pub pattern: Arc<CsrMatrix>,
}

impl Propagation {
    pub fn new(g: &Graph, options: &ModelOptions) -> Self {
        if options.self_loops {
            let plain = Arc::clone(g.self_loop_adjacency());
            return Self { constant: Arc::clone(&plain), gcn: Arc::clone(g.gcn_adjacency()), pattern: plain };
        }
        let plain = Arc::new(g.adjacency().clone());
        let deg = g.degrees();
        let mut values = Vec::with_capacity(plain.nnz());
        for u in 0..g.num_nodes() {
            for &v in plain.row_indices(u) {
                values.push(1.0 / ((deg[u] * deg[v]) as f64).sqrt());
            }
        }
        Self { gcn: Arc::new(plain.with_values(values)), constant: Arc::clone(&plain), pattern: plain }
    }
}

/// Per-node attention logits of a GAT layer: `a_l . W z_u` and `a_r . W z_u`.
#[derive(Debug, Clone)]
pub struct GatScores {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Attention coefficient `e(u, v)` of one layer; zero when `v` is not in the
/// aggregation neighborhood of `u`.
pub fn attention_coeff(
    kind: Attention,
    u: usize,
    v: usize,
    g: &Graph,
    options: &ModelOptions,
    gat: Option<&GatScores>,
) -> f64 {
    let in_hood = |a: usize, b: usize| (options.self_loops && a == b) || g.neighbors(a).binary_search(&b).is_ok();
    if !in_hood(u, v) {
        return 0.0;
    }
    let bump = usize::from(options.self_loops);
    match kind {
        Attention::Constant => 1.0,
        Attention::Gcn => {
            let (du, dv) = (g.degrees()[u] + bump, g.degrees()[v] + bump);
            1.0 / ((du * dv) as f64).sqrt()
        }
        Attention::Gat => {
            let s = gat.expect("GAT coefficients need attention scores");
            let score = |w: usize| leaky(s.left[u] + s.right[w], options.gat_slope);
            if !options.gat_softmax {
                return score(v);
            }
            let hood: Vec<usize> =
                options.self_loops.then_some(u).into_iter().chain(g.neighbors(u).iter().copied()).collect();
            let max = hood.iter().map(|&w| score(w)).fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = hood.iter().map(|&w| (score(w) - max).exp()).sum();
            (score(v) - max).exp() / denom
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    weight: usize,
    bias: usize,
}

#[derive(Debug, Clone, Copy)]
struct GnnLayer {
    attention: Attention,
    activation: Activation,
    weight: usize,
    /// `(a_l, a_r)` parameter indices for GAT layers.
    scores: Option<(usize, usize)>,
}

/// A network with concrete parameter tensors.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    arch: ArchitectureParams,
    options: ModelOptions,
    input_dim: usize,
    num_labels: usize,
    merged_width: usize,
    pre_mlp: Option<Dense>,
    gnn: Vec<GnnLayer>,
    post_mlp: Vec<Dense>,
    head: Dense,
    params: Vec<Parameter>,
}

/// Output of [`BuiltModel::forward`]: the logits node and the leaf handle of
/// every parameter, in parameter order.
pub struct ForwardPass {
    pub logits: Var,
    pub params: Vec<Var>,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..=limit))
}

fn activate(tape: &mut Tape, x: Var, act: Activation) -> Var {
    match act {
        Activation::None => tape.identity(x),
        Activation::Relu => tape.relu(x),
        Activation::Sigmoid => tape.sigmoid(x),
        Activation::Tanh => tape.tanh(x),
    }
}

impl BuiltModel {
    /// Allocates and Glorot-initializes all parameters (biases start at zero).
    pub fn build(
        arch: &ArchitectureParams,
        input_dim: usize,
        num_labels: usize,
        options: ModelOptions,
        seed: u64,
    ) -> Result<Self, ModelError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let dense = |params: &mut Vec<Parameter>, rng: &mut ChaCha8Rng, name: &str, fan_in: usize, fan_out: usize| {
            params.push(Parameter::new(format!("{name}.weight"), glorot(rng, fan_in, fan_out)));
            params.push(Parameter::new(format!("{name}.bias"), Tensor::zeros(1, fan_out)));
            Dense { weight: params.len() - 2, bias: params.len() - 1 }
        };

        let mut width = input_dim;
        let pre_mlp = match arch.pre_mlp_emb {
            Some(emb) if arch.pre_mlp.is_use() => {
                let out = emb.resolve(num_labels);
                let layer = dense(&mut params, &mut rng, "pre_mlp", width, out);
                width = out;
                Some(layer)
            }
            _ => None,
        };
        let skip_width = width;

        let mut gnn = Vec::with_capacity(arch.layers.len());
        let mut layer_widths = Vec::with_capacity(arch.layers.len());
        for (i, layer) in arch.layers.iter().enumerate() {
            let out = layer.emb_size.resolve(num_labels);
            params.push(Parameter::new(format!("gnn{i}.weight"), glorot(&mut rng, width, out)));
            let weight = params.len() - 1;
            let scores = (layer.attention == Attention::Gat).then(|| {
                params.push(Parameter::new(format!("gnn{i}.att_left"), glorot(&mut rng, out, 1)));
                params.push(Parameter::new(format!("gnn{i}.att_right"), glorot(&mut rng, out, 1)));
                (params.len() - 2, params.len() - 1)
            });
            gnn.push(GnnLayer { attention: layer.attention, activation: layer.activation, weight, scores });
            layer_widths.push(out);
            width = out;
        }

        let skip = if arch.pre_jknet.is_use() { skip_width } else { 0 };
        let last = *layer_widths.last().expect("at least one layer");
        let merged_width = match arch.jknet {
            JkMode::None => skip + last,
            JkMode::Concat => skip + layer_widths.iter().sum::<usize>(),
            JkMode::Max if arch.pre_mlp.is_use() => {
                if skip != 0 && skip != last {
                    return Err(ModelError::Arch(super::ArchError::MaxWidthMismatch));
                }
                last
            }
            // The raw-feature skip has its own width, so it is concatenated
            // after the max instead of joining it.
            JkMode::Max => skip + last,
        };

        let mut width = merged_width;
        let mut post_mlp = Vec::new();
        if let Some(hidden) = arch.post_mlp_hidden {
            for i in 0..arch.post_mlp_layers {
                post_mlp.push(dense(&mut params, &mut rng, &format!("post_mlp{i}"), width, hidden));
                width = hidden;
            }
        }
        let head = dense(&mut params, &mut rng, "head", width, num_labels);

        Ok(Self {
            arch: arch.clone(),
            options,
            input_dim,
            num_labels,
            merged_width,
            pre_mlp,
            gnn,
            post_mlp,
            head,
            params,
        })
    }

    pub fn arch(&self) -> &ArchitectureParams {
        &self.arch
    }

    pub fn options(&self) -> &ModelOptions {
        &self.options
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Width of the JK-merged representation that feeds the postMLP.
    pub fn merged_width(&self) -> usize {
        self.merged_width
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn num_weights(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Records the forward pass with the current parameter values.
    pub fn forward(&self, tape: &mut Tape, features: Var, prop: &Propagation) -> Result<ForwardPass, ModelError> {
        let params: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.value.clone())).collect();
        let logits = self.forward_with(tape, features, prop, &params)?;
        Ok(ForwardPass { logits, params })
    }

    /// Forward pass with caller-provided parameter nodes (one per entry of
    /// [`BuiltModel::params`]).
    pub fn forward_with(
        &self,
        tape: &mut Tape,
        features: Var,
        prop: &Propagation,
        params: &[Var],
    ) -> Result<Var, ModelError> {
        let (n, d) = tape.shape(features);
        if d != self.input_dim {
            return Err(ModelError::FeatureWidth { got: d, expected: self.input_dim });
        }
        if prop.constant.rows() != n {
            return Err(ModelError::NodeCount { got: n, expected: prop.constant.rows() });
        }
        let linear = |tape: &mut Tape, x: Var, layer: Dense| -> Result<Var, ModelError> {
            let xw = tape.matmul(x, params[layer.weight])?;
            Ok(tape.add_row(xw, params[layer.bias])?)
        };

        let mut h = features;
        if let Some(layer) = self.pre_mlp {
            let z = linear(tape, h, layer)?;
            h = activate(tape, z, self.options.pre_mlp_activation);
        }
        let skip = self.arch.pre_jknet.is_use().then_some(h);

        let mut outputs = Vec::with_capacity(self.gnn.len());
        for layer in &self.gnn {
            let z = tape.matmul(h, params[layer.weight])?;
            let agg = match layer.attention {
                Attention::Constant => tape.spmm(&prop.constant, z)?,
                Attention::Gcn => tape.spmm(&prop.gcn, z)?,
                Attention::Gat => {
                    let (al, ar) = layer.scores.expect("GAT layer has attention vectors");
                    let left = tape.matmul(z, params[al])?;
                    let right = tape.matmul(z, params[ar])?;
                    let opts = &self.options;
                    tape.gat_aggregate(&prop.pattern, z, left, right, opts.gat_slope, opts.gat_softmax)?
                }
            };
            h = activate(tape, agg, layer.activation);
            outputs.push(h);
        }

        let last = *outputs.last().expect("at least one layer");
        let mut merged = match (self.arch.jknet, skip) {
            (JkMode::None, None) => last,
            (JkMode::None, Some(s)) => tape.concat_cols(&[s, last])?,
            (JkMode::Concat, s) => {
                let parts: Vec<Var> = s.into_iter().chain(outputs.iter().copied()).collect();
                tape.concat_cols(&parts)?
            }
            (JkMode::Max, Some(s)) if self.pre_mlp.is_some() => {
                let parts: Vec<Var> = std::iter::once(s).chain(outputs.iter().copied()).collect();
                tape.rowwise_max(&parts)?
            }
            (JkMode::Max, Some(s)) => {
                let m = tape.rowwise_max(&outputs)?;
                tape.concat_cols(&[s, m])?
            }
            (JkMode::Max, None) => tape.rowwise_max(&outputs)?,
        };

        for &layer in &self.post_mlp {
            let z = linear(tape, merged, layer)?;
            merged = activate(tape, z, self.options.post_mlp_activation);
        }
        linear(tape, merged, self.head)
    }

    /// Convenience forward pass on a graph's own features.
    pub fn logits(&self, g: &Graph) -> Result<Tensor, ModelError> {
        let prop = Propagation::new(g, &self.options);
        let mut tape = Tape::new();
        let x = tape.constant(g.features().clone());
        let fp = self.forward(&mut tape, x, &prop)?;
        Ok(tape.value(fp.logits).clone())
    }

    /// Per-class probabilities (row-wise softmax of the logits).
    pub fn predict_proba(&self, g: &Graph) -> Result<Tensor, ModelError> {
        Ok(softmax_rows(&self.logits(g)?))
    }
}

pub(crate) fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::arch::{EmbSize, LayerParams, Toggle};

    fn one_layer(att: Attention, emb: usize) -> ArchitectureParams {
        ArchitectureParams {
            num_gnn_layers: 1,
            layers: vec![LayerParams { attention: att, activation: Activation::None, emb_size: EmbSize::Fixed(emb) }],
            jknet: JkMode::None,
            pre_jknet: Toggle::None,
            pre_mlp: Toggle::None,
            pre_mlp_emb: None,
            post_mlp_layers: 0,
            post_mlp_hidden: None,
        }
    }

    fn gnn_output(model: &BuiltModel, g: &Graph) -> Tensor {
        let prop = Propagation::new(g, model.options());
        let mut tape = Tape::new();
        let x = tape.constant(g.features().clone());
        let p = model.params.iter().map(|p| tape.leaf(p.value.clone())).collect::<Vec<_>>();
        let layer = model.gnn[0];
        let z = tape.matmul(x, p[layer.weight]).unwrap();
        let agg = tape.spmm(&prop.constant, z).unwrap();
        tape.value(agg).clone()
    }

    #[test]
    fn isolated_node_constant_identity() {
        let g = Graph::new(Tensor::from_rows(&[[0.3, -1.2]]), vec![0], 1, &[]).unwrap();
        let mut model =
            BuiltModel::build(&one_layer(Attention::Constant, 2), 2, 1, ModelOptions::default(), 0).unwrap();
        model.param_mut("gnn0.weight").unwrap().value = Tensor::identity(2);
        assert_eq!(gnn_output(&model, &g), Tensor::from_rows(&[[0.3, -1.2]]));
    }

    #[test]
    fn path_pair_self_plus_neighbor() {
        let g = Graph::new(Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]), vec![0, 0], 1, &[(0, 1)]).unwrap();
        let mut model =
            BuiltModel::build(&one_layer(Attention::Constant, 2), 2, 1, ModelOptions::default(), 0).unwrap();
        model.param_mut("gnn0.weight").unwrap().value = Tensor::identity(2);
        assert_eq!(gnn_output(&model, &g).row(0), &[1.0, 1.0]);
    }

    #[test]
    fn concat_merge_width() {
        let arch = ArchitectureParams {
            num_gnn_layers: 2,
            layers: vec![
                LayerParams { attention: Attention::Gcn, activation: Activation::Relu, emb_size: EmbSize::Fixed(16) },
                LayerParams { attention: Attention::Gat, activation: Activation::Tanh, emb_size: EmbSize::Fixed(32) },
            ],
            jknet: JkMode::Concat,
            pre_jknet: Toggle::Use,
            pre_mlp: Toggle::Use,
            pre_mlp_emb: Some(EmbSize::Fixed(64)),
            post_mlp_layers: 1,
            post_mlp_hidden: Some(64),
        };
        let model = BuiltModel::build(&arch, 5, 3, ModelOptions::default(), 1).unwrap();
        assert_eq!(model.merged_width(), 112);
        assert_eq!(model.param("post_mlp0.weight").unwrap().value.shape(), (112, 64));
        assert_eq!(model.param("head.weight").unwrap().value.shape(), (64, 3));
    }

    #[test]
    fn coefficient_examples() {
        let g = Graph::new(Tensor::zeros(2, 1), vec![0, 0], 1, &[(0, 1)]).unwrap();
        let opts = ModelOptions::default();
        assert_eq!(attention_coeff(Attention::Constant, 0, 1, &g, &opts, None), 1.0);
        assert!((attention_coeff(Attention::Gcn, 0, 1, &g, &opts, None) - 0.5).abs() < 1e-15);
        let zero = GatScores { left: vec![0.0; 2], right: vec![0.0; 2] };
        assert!((attention_coeff(Attention::Gat, 0, 1, &g, &opts, Some(&zero)) - 0.5).abs() < 1e-15);
        assert!((attention_coeff(Attention::Gat, 0, 0, &g, &opts, Some(&zero)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn feature_width_checked() {
        let g = Graph::new(Tensor::zeros(2, 3), vec![0, 0], 1, &[(0, 1)]).unwrap();
        let model = BuiltModel::build(&one_layer(Attention::Gcn, 4), 2, 1, ModelOptions::default(), 0).unwrap();
        assert!(matches!(model.logits(&g), Err(ModelError::FeatureWidth { got: 3, expected: 2 })));
    }
}
