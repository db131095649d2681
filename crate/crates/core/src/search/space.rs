use serde::{Deserialize, Serialize};

use crate::model::{Activation, Attention, EmbSize, JkMode, Toggle};

/// Candidate values for every architecture component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub num_gnn_layers: Vec<usize>,
    pub attention: Vec<Attention>,
    pub activation: Vec<Activation>,
    pub emb_size: Vec<EmbSize>,
    pub jknet: Vec<JkMode>,
    pub pre_jknet: Vec<Toggle>,
    pub pre_mlp: Vec<Toggle>,
    pub pre_mlp_emb: Vec<EmbSize>,
    pub post_mlp_layers: Vec<usize>,
    pub post_mlp_hidden: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            num_gnn_layers: vec![1, 2, 3],
            attention: Attention::ALL.to_vec(),
            activation: Activation::ALL.to_vec(),
            emb_size: [16, 32, 64, 128, 256].map(EmbSize::Fixed).into_iter().chain([EmbSize::NumLabels]).collect(),
            jknet: JkMode::ALL.to_vec(),
            pre_jknet: Toggle::ALL.to_vec(),
            pre_mlp: Toggle::ALL.to_vec(),
            pre_mlp_emb: [16, 32, 64, 128, 256].map(EmbSize::Fixed).to_vec(),
            post_mlp_layers: vec![0, 1, 2],
            post_mlp_hidden: vec![64, 128, 256],
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpaceError {
    #[error("candidate list for {0} is empty")]
    EmptyList(&'static str),
    #[error("candidate {value} for {component} is outside the supported range")]
    BadCandidate { component: &'static str, value: String },
}

impl SearchSpace {
    /// At most two GNN layers, embedding sizes {16, 32}, no preMLP and no
    /// postMLP. Small enough to enumerate by brute force.
    pub fn reduced() -> Self {
        Self {
            num_gnn_layers: vec![1, 2],
            emb_size: vec![EmbSize::Fixed(16), EmbSize::Fixed(32)],
            pre_mlp: vec![Toggle::None],
            post_mlp_layers: vec![0],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        let lists: [(&'static str, bool); 10] = [
            ("num_gnn_layers", self.num_gnn_layers.is_empty()),
            ("attention", self.attention.is_empty()),
            ("activation", self.activation.is_empty()),
            ("emb_size", self.emb_size.is_empty()),
            ("jknet", self.jknet.is_empty()),
            ("pre_jknet", self.pre_jknet.is_empty()),
            ("pre_mlp", self.pre_mlp.is_empty()),
            ("pre_mlp_emb", self.pre_mlp_emb.is_empty() && self.pre_mlp.contains(&Toggle::Use)),
            ("post_mlp_layers", self.post_mlp_layers.is_empty()),
            ("post_mlp_hidden", self.post_mlp_hidden.is_empty() && self.post_mlp_layers.iter().any(|&p| p > 0)),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, empty)| *empty) {
            return Err(SpaceError::EmptyList(name));
        }
        let bad = |component: &'static str, value: String| Err(SpaceError::BadCandidate { component, value });
        if let Some(&l) = self.num_gnn_layers.iter().find(|&&l| !(1..=3).contains(&l)) {
            return bad("num_gnn_layers", l.to_string());
        }
        if let Some(&p) = self.post_mlp_layers.iter().find(|&&p| p > 2) {
            return bad("post_mlp_layers", p.to_string());
        }
        let zero = EmbSize::Fixed(0);
        if self.emb_size.contains(&zero) || self.pre_mlp_emb.contains(&zero) || self.post_mlp_hidden.contains(&0) {
            return bad("size", "0".into());
        }
        Ok(())
    }

    /// Number of distinct canonical architectures in the space.
    ///
    /// For each layer count and JK mode the count factors into the layer
    /// choices, the (preMLP, preJK) choices and the postMLP choices. Under
    /// `max` only the first layer's width is free, and it also fixes the
    /// preMLP width whenever the preMLP output feeds the merge.
    pub fn count(&self) -> u128 {
        let per_layer = (self.attention.len() * self.activation.len()) as u128;
        let embs = self.emb_size.len() as u128;
        let post: u128 =
            self.post_mlp_layers.iter().map(|&p| if p == 0 { 1 } else { self.post_mlp_hidden.len() as u128 }).sum();
        let mut total = 0;
        for &layers in &self.num_gnn_layers {
            for &jk in &self.jknet {
                let max = jk == JkMode::Max;
                let micro =
                    if max { per_layer.pow(layers as u32) * embs } else { (per_layer * embs).pow(layers as u32) };
                let mut pre = 0;
                for &pre_mlp in &self.pre_mlp {
                    for &pre_jk in &self.pre_jknet {
                        pre += match (pre_mlp, max && pre_jk.is_use()) {
                            (Toggle::None, _) => 1,
                            (Toggle::Use, true) => 1,
                            (Toggle::Use, false) => self.pre_mlp_emb.len() as u128,
                        };
                    }
                }
                total += micro * pre * post;
            }
        }
        total
    }
}

/// Size of the default search space.
pub fn count_search_space() -> u128 {
    SearchSpace::default().count()
}
