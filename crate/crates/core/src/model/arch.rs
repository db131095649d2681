//! Architecture parameters and their canonical JSON form.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attention {
    Constant,
    Gcn,
    Gat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JkMode {
    None,
    Concat,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    None,
    Use,
}

impl Toggle {
    pub fn is_use(self) -> bool {
        self == Toggle::Use
    }
}

/// Width of a hidden representation: a fixed size, or the number of labels
/// of the graph the model is built for (`"y"` in JSON).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmbSize {
    Fixed(usize),
    NumLabels,
}

impl EmbSize {
    pub fn resolve(self, num_labels: usize) -> usize {
        match self {
            EmbSize::Fixed(n) => n,
            EmbSize::NumLabels => num_labels,
        }
    }
}

impl fmt::Display for EmbSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbSize::Fixed(n) => write!(f, "{n}"),
            EmbSize::NumLabels => write!(f, "y"),
        }
    }
}

impl Serialize for EmbSize {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            EmbSize::Fixed(n) => s.serialize_u64(*n as u64),
            EmbSize::NumLabels => s.serialize_str("y"),
        }
    }
}

impl<'de> Deserialize<'de> for EmbSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct EmbVisitor;
        impl Visitor<'_> for EmbVisitor {
            type Value = EmbSize;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive integer or \"y\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<EmbSize, E> {
                if v == 0 {
                    return Err(E::custom("embedding size must be positive"));
                }
                Ok(EmbSize::Fixed(v as usize))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<EmbSize, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom("embedding size must be positive"))
                    .and_then(|v| self.visit_u64(v))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<EmbSize, E> {
                if v == "y" {
                    Ok(EmbSize::NumLabels)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(EmbVisitor)
    }
}

/// Micro-architecture of one message-passing layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerParams {
    pub attention: Attention,
    pub activation: Activation,
    pub emb_size: EmbSize,
}

/// One fully specified architecture.
///
/// `pre_mlp_emb` is `Some` exactly when `pre_mlp` is `Use`, and
/// `post_mlp_hidden` is `Some` exactly when `post_mlp_layers >= 1`; with
/// that convention structural equality is architectural identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureParams {
    pub num_gnn_layers: usize,
    pub layers: Vec<LayerParams>,
    pub jknet: JkMode,
    pub pre_jknet: Toggle,
    pub pre_mlp: Toggle,
    pub pre_mlp_emb: Option<EmbSize>,
    pub post_mlp_layers: usize,
    pub post_mlp_hidden: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArchError {
    #[error("num_gnn_layers must be 1, 2 or 3, got {0}")]
    LayerCount(usize),
    #[error("num_gnn_layers is {expected} but {got} layer entries were given")]
    LayerListLength { expected: usize, got: usize },
    #[error("post_mlp_layers must be 0, 1 or 2, got {0}")]
    PostMlpLayers(usize),
    #[error("{0} must be set exactly when its component is active")]
    InactiveField(&'static str),
    #[error("jknet=max needs equal embedding sizes across layers and the preMLP skip")]
    MaxWidthMismatch,
    #[error("sizes must be positive")]
    ZeroSize,
    #[error("invalid architecture JSON: {0}")]
    Json(String),
}

impl ArchitectureParams {
    /// A plain single-layer GCN, handy as a default.
    pub fn gcn(num_layers: usize, emb: usize, activation: Activation) -> Self {
        Self {
            num_gnn_layers: num_layers,
            layers: vec![
                LayerParams { attention: Attention::Gcn, activation, emb_size: EmbSize::Fixed(emb) };
                num_layers
            ],
            jknet: JkMode::None,
            pre_jknet: Toggle::None,
            pre_mlp: Toggle::None,
            pre_mlp_emb: None,
            post_mlp_layers: 0,
            post_mlp_hidden: None,
        }
    }

    /// Applies the dependency rules and sentinels: under `jknet = max` all
    /// layer widths (and the preMLP width when it feeds the merge) take the
    /// first layer's width; inactive fields become `None`.
    pub fn canonicalize(mut self) -> Self {
        if self.jknet == JkMode::Max {
            if let Some(first) = self.layers.first().map(|l| l.emb_size) {
                for l in &mut self.layers {
                    l.emb_size = first;
                }
                if self.pre_mlp.is_use() && self.pre_jknet.is_use() {
                    self.pre_mlp_emb = Some(first);
                }
            }
        }
        if !self.pre_mlp.is_use() {
            self.pre_mlp_emb = None;
        }
        if self.post_mlp_layers == 0 {
            self.post_mlp_hidden = None;
        }
        self
    }

    pub fn is_canonical(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        if !(1..=3).contains(&self.num_gnn_layers) {
            return Err(ArchError::LayerCount(self.num_gnn_layers));
        }
        if self.layers.len() != self.num_gnn_layers {
            return Err(ArchError::LayerListLength { expected: self.num_gnn_layers, got: self.layers.len() });
        }
        if self.post_mlp_layers > 2 {
            return Err(ArchError::PostMlpLayers(self.post_mlp_layers));
        }
        if self.pre_mlp.is_use() != self.pre_mlp_emb.is_some() {
            return Err(ArchError::InactiveField("pre_mlp_emb"));
        }
        if (self.post_mlp_layers > 0) != self.post_mlp_hidden.is_some() {
            return Err(ArchError::InactiveField("post_mlp_hidden"));
        }
        let zero = |e: EmbSize| e == EmbSize::Fixed(0);
        if self.layers.iter().any(|l| zero(l.emb_size))
            || self.pre_mlp_emb.is_some_and(zero)
            || self.post_mlp_hidden == Some(0)
        {
            return Err(ArchError::ZeroSize);
        }
        if self.jknet == JkMode::Max {
            let first = self.layers[0].emb_size;
            if self.layers.iter().any(|l| l.emb_size != first) {
                return Err(ArchError::MaxWidthMismatch);
            }
            if self.pre_mlp.is_use() && self.pre_jknet.is_use() && self.pre_mlp_emb != Some(first) {
                return Err(ArchError::MaxWidthMismatch);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("architecture serializes")
    }

    /// Parses and validates the canonical JSON form. Unknown keys are
    /// rejected by name.
    pub fn from_json(text: &str) -> Result<Self, ArchError> {
        let arch: Self = serde_json::from_str(text).map_err(|e| ArchError::Json(e.to_string()))?;
        arch.validate()?;
        Ok(arch)
    }
}

impl fmt::Display for ArchitectureParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "layers={}", self.num_gnn_layers)?;
        for (i, l) in self.layers.iter().enumerate() {
            write!(f, " [{}:{}/{}/{}]", i + 1, l.attention.as_str(), l.activation.as_str(), l.emb_size)?;
        }
        write!(f, " jk={} prejk={} premlp={}", self.jknet.as_str(), self.pre_jknet.as_str(), self.pre_mlp.as_str())?;
        if let Some(e) = self.pre_mlp_emb {
            write!(f, "({e})")?;
        }
        write!(f, " postmlp={}", self.post_mlp_layers)?;
        if let Some(h) = self.post_mlp_hidden {
            write!(f, "({h})")?;
        }
        Ok(())
    }
}

macro_rules! names {
    ($ty:ident { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            /// The lowercase name used in JSON.
            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $name,)*
                }
            }

            pub const ALL: &'static [$ty] = &[$($ty::$variant),*];
        }
    };
}

names!(Attention { Constant => "constant", Gcn => "gcn", Gat => "gat" });
names!(Activation { None => "none", Relu => "relu", Sigmoid => "sigmoid", Tanh => "tanh" });
names!(JkMode { None => "none", Concat => "concat", Max => "max" });
names!(Toggle { None => "none", Use => "use" });

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ArchitectureParams {
        ArchitectureParams {
            num_gnn_layers: 2,
            layers: vec![
                LayerParams { attention: Attention::Gat, activation: Activation::Tanh, emb_size: EmbSize::Fixed(64) },
                LayerParams { attention: Attention::Gcn, activation: Activation::Relu, emb_size: EmbSize::NumLabels },
            ],
            jknet: JkMode::Concat,
            pre_jknet: Toggle::Use,
            pre_mlp: Toggle::Use,
            pre_mlp_emb: Some(EmbSize::Fixed(32)),
            post_mlp_layers: 0,
            post_mlp_hidden: None,
        }
    }

    #[test]
    fn json_key_names_and_nulls() {
        let text = sample().to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        // Top-level keys appear in declaration order in the written text.
        let mut keys: Vec<(usize, &str)> =
            v.as_object().unwrap().keys().map(|k| (text.find(&format!("\n  \"{k}\":")).unwrap(), k.as_str())).collect();
        keys.sort();
        let keys: Vec<&str> = keys.into_iter().map(|(_, k)| k).collect();
        assert_eq!(
            keys,
            [
                "num_gnn_layers",
                "layers",
                "jknet",
                "pre_jknet",
                "pre_mlp",
                "pre_mlp_emb",
                "post_mlp_layers",
                "post_mlp_hidden"
            ]
        );
        assert!(v["post_mlp_hidden"].is_null());
        assert_eq!(v["layers"][1]["emb_size"], "y");
        assert_eq!(v["layers"][0]["attention"], "gat");
    }

    #[test]
    fn json_round_trip() {
        let a = sample();
        assert_eq!(ArchitectureParams::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(&sample().to_json()).unwrap();
        v["dropout"] = serde_json::json!(0.5);
        let err = ArchitectureParams::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("dropout"), "{err}");
    }

    #[test]
    fn canonicalize_max_and_sentinels() {
        let mut a = sample();
        a.jknet = JkMode::Max;
        a.post_mlp_hidden = Some(128);
        let c = a.canonicalize();
        assert!(c.layers.iter().all(|l| l.emb_size == EmbSize::Fixed(64)));
        assert_eq!(c.pre_mlp_emb, Some(EmbSize::Fixed(64)));
        assert_eq!(c.post_mlp_hidden, None);
        assert!(c.is_canonical());
    }

    #[test]
    fn validation_errors() {
        let mut a = sample();
        a.pre_mlp = Toggle::None;
        assert_eq!(a.validate(), Err(ArchError::InactiveField("pre_mlp_emb")));
        let mut a = sample();
        a.jknet = JkMode::Max;
        assert_eq!(a.validate(), Err(ArchError::MaxWidthMismatch));
        let mut a = sample();
        a.num_gnn_layers = 3;
        assert!(matches!(a.validate(), Err(ArchError::LayerListLength { .. })));
    }
}
