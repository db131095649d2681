//! Scoring of candidate architectures: real training, or a cheap planted
//! mock with a known optimum for exercising the search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Split};
use crate::model::{train_model, ArchitectureParams, EvalResult, ModelError, TrainConfig};
use crate::search::{Component, ParamValue};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid evaluator setting: {0}")]
    Config(String),
}

/// Scores one architecture. Implementations are pure in `(arch, seed)`.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, arch: &ArchitectureParams, seed: u64) -> Result<EvalResult, EvalError>;
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn evaluate(&self, arch: &ArchitectureParams, seed: u64) -> Result<EvalResult, EvalError> {
        (**self).evaluate(arch, seed)
    }
}

/// Trains each candidate on a fixed graph and split.
#[derive(Debug, Clone)]
pub struct GnnEvaluator {
    graph: Graph,
    split: Split,
    config: TrainConfig,
}

pub fn gnn_evaluator(g: Graph, s: Split) -> GnnEvaluator {
    GnnEvaluator::new(g, s, TrainConfig::default())
}

impl GnnEvaluator {
    pub fn new(graph: Graph, split: Split, config: TrainConfig) -> Self {
        Self { graph, split, config }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }
}

impl Evaluator for GnnEvaluator {
    fn evaluate(&self, arch: &ArchitectureParams, seed: u64) -> Result<EvalResult, EvalError> {
        let (_, result) = train_model(arch, &self.graph, &self.split, seed, &self.config)?;
        Ok(result)
    }
}

/// Closed-form score: `0.5 + 0.05 * matches + U(-noise, noise)`, clamped to
/// `[0, 1]`, where `matches` counts planted component values present in
/// the architecture. The noise draw is a hash of the architecture and the
/// two seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedMock {
    prefix: Vec<(Component, ParamValue)>,
    noise: f64,
    seed: u64,
}

pub fn planted_mock(
    optimal_prefix: Vec<(Component, ParamValue)>,
    noise: f64,
    seed: u64,
) -> Result<PlantedMock, EvalError> {
    if !(0.0..0.3).contains(&noise) {
        return Err(EvalError::Config(format!("noise must lie in [0, 0.3), got {noise}")));
    }
    Ok(PlantedMock { prefix: optimal_prefix, noise, seed })
}

impl PlantedMock {
    /// The four leading components of the default order:
    /// two layers, preMLP, preJK and concatenating JK.
    pub fn default_prefix() -> Vec<(Component, ParamValue)> {
        use crate::model::{JkMode, Toggle};
        vec![
            (Component::NumGnnLayers, ParamValue::Count(2)),
            (Component::PreMlp, ParamValue::Toggle(Toggle::Use)),
            (Component::PreJknet, ParamValue::Toggle(Toggle::Use)),
            (Component::Jknet, ParamValue::Jk(JkMode::Concat)),
        ]
    }

    pub fn prefix(&self) -> &[(Component, ParamValue)] {
        &self.prefix
    }

    pub fn matches(&self, arch: &ArchitectureParams) -> usize {
        self.prefix.iter().filter(|&&(c, v)| c.value_in(arch) == Some(v)).count()
    }

    pub fn matches_all(&self, arch: &ArchitectureParams) -> bool {
        self.matches(arch) == self.prefix.len()
    }

    /// Noise-free score.
    pub fn base_score(&self, arch: &ArchitectureParams) -> f64 {
        (0.5 + 0.05 * self.matches(arch) as f64).clamp(0.0, 1.0)
    }

    pub fn score(&self, arch: &ArchitectureParams, seed: u64) -> f64 {
        let base = 0.5 + 0.05 * self.matches(arch) as f64;
        let jitter = if self.noise > 0.0 {
            let key = format!("{}|{}|{}", arch.to_json(), self.seed, seed);
            ChaCha8Rng::seed_from_u64(fnv1a(key.as_bytes())).random_range(-self.noise..=self.noise)
        } else {
            0.0
        };
        (base + jitter).clamp(0.0, 1.0)
    }
}

/// 64-bit FNV-1a, stable across platforms and toolchains.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl Evaluator for PlantedMock {
    fn evaluate(&self, arch: &ArchitectureParams, seed: u64) -> Result<EvalResult, EvalError> {
        let score = self.score(arch, seed);
        Ok(EvalResult {
            val_auc: score,
            test_auc: self.base_score(arch),
            train_seconds: 0.001 * arch.num_gnn_layers as f64,
            epochs_run: 1,
            final_epoch_loss: 1.0 - score,
            diverged: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, JkMode, Toggle};

    fn planted() -> ArchitectureParams {
        let mut a = ArchitectureParams::gcn(2, 32, Activation::Relu);
        a.pre_mlp = Toggle::Use;
        a.pre_mlp_emb = Some(crate::model::EmbSize::Fixed(64));
        a.pre_jknet = Toggle::Use;
        a.jknet = JkMode::Concat;
        a
    }

    #[test]
    fn noise_free_scores() {
        let mock = planted_mock(PlantedMock::default_prefix(), 0.0, 1).unwrap();
        assert!((mock.evaluate(&planted(), 5).unwrap().val_auc - 0.70).abs() < 1e-12);
        let none = ArchitectureParams::gcn(1, 16, Activation::Tanh);
        assert_eq!(mock.evaluate(&none, 5).unwrap().val_auc, 0.5);
    }

    #[test]
    fn noise_bounds_and_purity() {
        assert!(planted_mock(vec![], 0.3, 0).is_err());
        assert!(planted_mock(vec![], -0.1, 0).is_err());
        let mock = planted_mock(PlantedMock::default_prefix(), 0.1, 9).unwrap();
        let a = planted();
        for seed in 0..1000 {
            let s = mock.score(&a, seed);
            assert!((0.6 - 1e-12..=0.8 + 1e-12).contains(&s));
            assert_eq!(s, mock.score(&a, seed));
        }
    }
}
