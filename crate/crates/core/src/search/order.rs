use std::fmt;

use rand::Rng;
use serde_json::Value;

use super::space::SearchSpace;
use crate::model::{Activation, ArchitectureParams, Attention, EmbSize, JkMode, LayerParams, Toggle};

/// One architecture component, i.e. one level of the search tree.
/// Per-layer components carry the 1-based layer index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    NumGnnLayers,
    PreMlp,
    PreJknet,
    Jknet,
    Activation(usize),
    Attention(usize),
    PreMlpEmb,
    PostMlpHidden,
    EmbSize(usize),
    PostMlpLayers,
}

/// Depth order of the tree. Layer components of layers beyond the chosen
/// layer count are skipped on the branches where they do not exist.
pub const COMPONENT_ORDER: [Component; 16] = [
    Component::NumGnnLayers,
    Component::PreMlp,
    Component::PreJknet,
    Component::Jknet,
    Component::Activation(1),
    Component::Attention(1),
    Component::PreMlpEmb,
    Component::PostMlpHidden,
    Component::EmbSize(1),
    Component::Activation(2),
    Component::Attention(2),
    Component::EmbSize(2),
    Component::Activation(3),
    Component::Attention(3),
    Component::EmbSize(3),
    Component::PostMlpLayers,
];

/// A candidate value of some component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamValue {
    Count(usize),
    Toggle(Toggle),
    Jk(JkMode),
    Activation(Activation),
    Attention(Attention),
    Emb(EmbSize),
}

impl ParamValue {
    pub fn to_json(self) -> Value {
        match self {
            ParamValue::Count(n) | ParamValue::Emb(EmbSize::Fixed(n)) => Value::from(n),
            ParamValue::Emb(EmbSize::NumLabels) => Value::from("y"),
            ParamValue::Toggle(t) => Value::from(t.as_str()),
            ParamValue::Jk(j) => Value::from(j.as_str()),
            ParamValue::Activation(a) => Value::from(a.as_str()),
            ParamValue::Attention(a) => Value::from(a.as_str()),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ParamValue::Count(n) => write!(f, "{n}"),
            ParamValue::Emb(e) => write!(f, "{e}"),
            ParamValue::Toggle(t) => f.write_str(t.as_str()),
            ParamValue::Jk(j) => f.write_str(j.as_str()),
            ParamValue::Activation(a) => f.write_str(a.as_str()),
            ParamValue::Attention(a) => f.write_str(a.as_str()),
        }
    }
}

fn by_name<T: Copy>(all: &[T], name: impl Fn(T) -> &'static str, s: &str) -> Option<T> {
    all.iter().copied().find(|&v| name(v) == s)
}

impl Component {
    /// Name used in tree exports, e.g. `emb_size_2`.
    pub fn name(self) -> String {
        match self {
            Component::NumGnnLayers => "num_gnn_layers".into(),
            Component::PreMlp => "pre_mlp".into(),
            Component::PreJknet => "pre_jknet".into(),
            Component::Jknet => "jknet".into(),
            Component::Activation(l) => format!("activation_{l}"),
            Component::Attention(l) => format!("attention_{l}"),
            Component::PreMlpEmb => "pre_mlp_emb".into(),
            Component::PostMlpHidden => "post_mlp_hidden".into(),
            Component::EmbSize(l) => format!("emb_size_{l}"),
            Component::PostMlpLayers => "post_mlp_layers".into(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        COMPONENT_ORDER.iter().copied().find(|c| c.name() == name)
    }

    /// Name shared by every layer's copy of a per-layer component.
    pub fn family(self) -> &'static str {
        match self {
            Component::NumGnnLayers => "num_gnn_layers",
            Component::PreMlp => "pre_mlp",
            Component::PreJknet => "pre_jknet",
            Component::Jknet => "jknet",
            Component::Activation(_) => "activation",
            Component::Attention(_) => "attention",
            Component::PreMlpEmb => "pre_mlp_emb",
            Component::PostMlpHidden => "post_mlp_hidden",
            Component::EmbSize(_) => "emb_size",
            Component::PostMlpLayers => "post_mlp_layers",
        }
    }

    pub fn candidates(self, space: &SearchSpace) -> Vec<ParamValue> {
        match self {
            Component::NumGnnLayers => space.num_gnn_layers.iter().map(|&n| ParamValue::Count(n)).collect(),
            Component::PreMlp => space.pre_mlp.iter().map(|&t| ParamValue::Toggle(t)).collect(),
            Component::PreJknet => space.pre_jknet.iter().map(|&t| ParamValue::Toggle(t)).collect(),
            Component::Jknet => space.jknet.iter().map(|&j| ParamValue::Jk(j)).collect(),
            Component::Activation(_) => space.activation.iter().map(|&a| ParamValue::Activation(a)).collect(),
            Component::Attention(_) => space.attention.iter().map(|&a| ParamValue::Attention(a)).collect(),
            Component::PreMlpEmb => space.pre_mlp_emb.iter().map(|&e| ParamValue::Emb(e)).collect(),
            Component::PostMlpHidden => space.post_mlp_hidden.iter().map(|&h| ParamValue::Count(h)).collect(),
            Component::EmbSize(_) => space.emb_size.iter().map(|&e| ParamValue::Emb(e)).collect(),
            Component::PostMlpLayers => space.post_mlp_layers.iter().map(|&p| ParamValue::Count(p)).collect(),
        }
    }

    /// Parses a JSON value exported by [`ParamValue::to_json`].
    pub fn parse_value(self, v: &Value) -> Option<ParamValue> {
        let count = || v.as_u64().map(|n| n as usize);
        let emb = || match v {
            Value::String(s) if s == "y" => Some(EmbSize::NumLabels),
            _ => count().map(EmbSize::Fixed),
        };
        let s = v.as_str().unwrap_or("");
        match self {
            Component::NumGnnLayers | Component::PostMlpHidden | Component::PostMlpLayers => {
                count().map(ParamValue::Count)
            }
            Component::PreMlp | Component::PreJknet => by_name(Toggle::ALL, Toggle::as_str, s).map(ParamValue::Toggle),
            Component::Jknet => by_name(JkMode::ALL, JkMode::as_str, s).map(ParamValue::Jk),
            Component::Activation(_) => by_name(Activation::ALL, Activation::as_str, s).map(ParamValue::Activation),
            Component::Attention(_) => by_name(Attention::ALL, Attention::as_str, s).map(ParamValue::Attention),
            Component::PreMlpEmb | Component::EmbSize(_) => emb().map(ParamValue::Emb),
        }
    }

    /// The value this component takes in a canonical architecture, or
    /// `None` when the component is inactive there.
    pub fn value_in(self, arch: &ArchitectureParams) -> Option<ParamValue> {
        let layer = |l: usize| arch.layers.get(l - 1);
        match self {
            Component::NumGnnLayers => Some(ParamValue::Count(arch.num_gnn_layers)),
            Component::PreMlp => Some(ParamValue::Toggle(arch.pre_mlp)),
            Component::PreJknet => Some(ParamValue::Toggle(arch.pre_jknet)),
            Component::Jknet => Some(ParamValue::Jk(arch.jknet)),
            Component::Activation(l) => layer(l).map(|p| ParamValue::Activation(p.activation)),
            Component::Attention(l) => layer(l).map(|p| ParamValue::Attention(p.attention)),
            Component::PreMlpEmb => arch.pre_mlp_emb.map(ParamValue::Emb),
            Component::PostMlpHidden => arch.post_mlp_hidden.map(ParamValue::Count),
            Component::EmbSize(l) => layer(l).map(|p| ParamValue::Emb(p.emb_size)),
            Component::PostMlpLayers => Some(ParamValue::Count(arch.post_mlp_layers)),
        }
    }
}

/// Values fixed so far, indexed by position in [`COMPONENT_ORDER`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    values: [Option<ParamValue>; COMPONENT_ORDER.len()],
}

fn position(c: Component) -> usize {
    COMPONENT_ORDER.iter().position(|&x| x == c).expect("every component is in the order")
}

impl Assignment {
    pub fn get(&self, c: Component) -> Option<ParamValue> {
        self.values[position(c)]
    }

    pub fn set(&mut self, c: Component, v: ParamValue) {
        self.values[position(c)] = Some(v);
    }

    /// Whether `c` still has a tree level given the values fixed so far.
    fn admits(&self, c: Component) -> bool {
        let layers = match self.get(Component::NumGnnLayers) {
            Some(ParamValue::Count(n)) => n,
            _ => 3,
        };
        let max = self.get(Component::Jknet) == Some(ParamValue::Jk(JkMode::Max));
        let is_use = |c| self.get(c) == Some(ParamValue::Toggle(Toggle::Use));
        match c {
            Component::Activation(l) | Component::Attention(l) => l <= layers,
            // Under max the first layer's width decides every other width.
            Component::EmbSize(l) => l <= layers && (l == 1 || !max),
            Component::PreMlpEmb => is_use(Component::PreMlp) && !(max && is_use(Component::PreJknet)),
            _ => true,
        }
    }

    /// The first component after `after` (or from the start) that exists
    /// under the current assignment.
    pub fn next_component(&self, after: Option<Component>) -> Option<Component> {
        let start = after.map_or(0, |c| position(c) + 1);
        COMPONENT_ORDER[start..].iter().copied().find(|&c| self.admits(c))
    }

    /// Completes the assignment with uniform draws and returns the canonical
    /// architecture. Draws happen in component order for every unset
    /// component, active or not, so the random stream consumed per call is
    /// fixed.
    pub fn realize<R: Rng + ?Sized>(&self, space: &SearchSpace, rng: &mut R) -> ArchitectureParams {
        let mut full = self.clone();
        for c in COMPONENT_ORDER {
            if full.get(c).is_none() {
                let options = c.candidates(space);
                if !options.is_empty() {
                    full.set(c, options[rng.random_range(0..options.len())]);
                }
            }
        }
        full.build()
    }

    fn build(&self) -> ArchitectureParams {
        let count = |c| match self.get(c) {
            Some(ParamValue::Count(n)) => Some(n),
            _ => None,
        };
        let toggle = |c| match self.get(c) {
            Some(ParamValue::Toggle(t)) => t,
            _ => Toggle::None,
        };
        let emb = |c| match self.get(c) {
            Some(ParamValue::Emb(e)) => Some(e),
            _ => None,
        };
        let num_gnn_layers = count(Component::NumGnnLayers).unwrap_or(1);
        let layers = (1..=num_gnn_layers)
            .map(|l| LayerParams {
                attention: match self.get(Component::Attention(l)) {
                    Some(ParamValue::Attention(a)) => a,
                    _ => Attention::Gcn,
                },
                activation: match self.get(Component::Activation(l)) {
                    Some(ParamValue::Activation(a)) => a,
                    _ => Activation::Relu,
                },
                emb_size: emb(Component::EmbSize(l)).unwrap_or(EmbSize::NumLabels),
            })
            .collect();
        let post_mlp_layers = count(Component::PostMlpLayers).unwrap_or(0);
        ArchitectureParams {
            num_gnn_layers,
            layers,
            jknet: match self.get(Component::Jknet) {
                Some(ParamValue::Jk(j)) => j,
                _ => JkMode::None,
            },
            pre_jknet: toggle(Component::PreJknet),
            pre_mlp: toggle(Component::PreMlp),
            pre_mlp_emb: emb(Component::PreMlpEmb).or(Some(EmbSize::NumLabels)),
            post_mlp_layers,
            post_mlp_hidden: count(Component::PostMlpHidden).or(Some(64)),
        }
        .canonicalize()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn names_round_trip() {
        for c in COMPONENT_ORDER {
            assert_eq!(Component::from_name(&c.name()), Some(c));
            for v in c.candidates(&SearchSpace::default()) {
                assert_eq!(c.parse_value(&v.to_json()), Some(v), "{c:?} {v}");
            }
        }
    }

    #[test]
    fn order_skips_missing_layers() {
        let mut a = Assignment::default();
        assert_eq!(a.next_component(None), Some(Component::NumGnnLayers));
        a.set(Component::NumGnnLayers, ParamValue::Count(1));
        assert_eq!(a.next_component(Some(Component::EmbSize(1))), Some(Component::PostMlpLayers));
        a.set(Component::NumGnnLayers, ParamValue::Count(2));
        assert_eq!(a.next_component(Some(Component::EmbSize(1))), Some(Component::Activation(2)));
    }

    #[test]
    fn order_skips_forced_widths() {
        let mut a = Assignment::default();
        a.set(Component::NumGnnLayers, ParamValue::Count(3));
        a.set(Component::PreMlp, ParamValue::Toggle(Toggle::None));
        assert_eq!(a.next_component(Some(Component::Attention(1))), Some(Component::PostMlpHidden));
        a.set(Component::PreMlp, ParamValue::Toggle(Toggle::Use));
        a.set(Component::PreJknet, ParamValue::Toggle(Toggle::Use));
        a.set(Component::Jknet, ParamValue::Jk(JkMode::Max));
        assert_eq!(a.next_component(Some(Component::Attention(1))), Some(Component::PostMlpHidden));
        assert_eq!(a.next_component(Some(Component::Attention(2))), Some(Component::Activation(3)));
        a.set(Component::Jknet, ParamValue::Jk(JkMode::Concat));
        assert_eq!(a.next_component(Some(Component::Attention(1))), Some(Component::PreMlpEmb));
    }

    #[test]
    fn realize_keeps_fixed_values_and_is_canonical() {
        let space = SearchSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = Assignment::default();
        a.set(Component::NumGnnLayers, ParamValue::Count(1));
        a.set(Component::Jknet, ParamValue::Jk(JkMode::Max));
        for _ in 0..200 {
            let arch = a.realize(&space, &mut rng);
            assert!(arch.is_canonical(), "{arch}");
            assert_eq!(arch.num_gnn_layers, 1);
            assert_eq!(arch.jknet, JkMode::Max);
        }
    }
}
