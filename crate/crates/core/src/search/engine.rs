use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::importance::{importance_report, ImportanceError, ImportanceReport};
use super::order::Assignment;
use super::space::{SearchSpace, SpaceError};
use super::tree::MctTree;
use crate::evaluator::Evaluator;
use crate::model::{ArchitectureParams, EvalResult};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Exploration constant of the UCB score.
    pub c: f64,
    /// Visits after which a leaf grows children.
    pub theta: u64,
    pub trials: usize,
    pub seed: u64,
    pub space: SearchSpace,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { c: std::f64::consts::SQRT_2, theta: 10, trials: 1000, seed: 0, space: SearchSpace::default() }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("c must be finite and non-negative, got {0}")]
    BadC(f64),
    #[error("theta must be at least 1")]
    BadTheta,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Importance(#[from] ImportanceError),
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(SearchError::BadC(self.c));
        }
        if self.theta == 0 {
            return Err(SearchError::BadTheta);
        }
        if self.trials == 0 {
            return Err(SearchError::NoTrials);
        }
        self.space.validate()?;
        Ok(())
    }
}

/// One line of the trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub architecture: ArchitectureParams,
    pub val_auc: f64,
    pub test_auc: f64,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub best_architecture: ArchitectureParams,
    pub best_result: EvalResult,
    /// Index into `trials` of the best model.
    pub best_trial: usize,
    pub tree: MctTree,
    pub importance: ImportanceReport,
    pub trials: Vec<TrialRecord>,
}

impl SearchReport {
    pub fn total_models(&self) -> u64 {
        self.tree.total_models()
    }

    pub fn trials_jsonl(&self) -> String {
        self.trials.iter().map(|t| serde_json::to_string(t).expect("record serializes") + "\n").collect()
    }
}

/// Seed handed to the evaluator for trial `trial` (splitmix64 of the pair).
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed ^ (trial as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Monte-Carlo tree search: each trial selects a leaf by UCB, fixes the
/// values on its path, draws the rest uniformly, evaluates, and backs the
/// validation AUC up the path. A failed evaluation counts as AUC 0.
pub fn search<E: Evaluator + ?Sized>(cfg: &SearchConfig, evaluator: &E) -> Result<SearchReport, SearchError> {
    run(cfg, evaluator, true)
}

/// Baseline with the same budget: every trial is drawn uniformly from the
/// whole space. The returned tree has only a root.
pub fn random_search<E: Evaluator + ?Sized>(cfg: &SearchConfig, evaluator: &E) -> Result<SearchReport, SearchError> {
    run(cfg, evaluator, false)
}

fn run<E: Evaluator + ?Sized>(cfg: &SearchConfig, evaluator: &E, guided: bool) -> Result<SearchReport, SearchError> {
    cfg.validate()?;
    let mut tree = MctTree::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trials = Vec::with_capacity(cfg.trials);
    let mut best: Option<(usize, EvalResult)> = None;

    for trial in 0..cfg.trials {
        let path = if guided { tree.select_leaf(cfg.c) } else { vec![0] };
        let assignment = if guided { tree.assignment(&path) } else { Assignment::default() };
        let arch = assignment.realize(&cfg.space, &mut rng);
        let (result, error) = match evaluator.evaluate(&arch, trial_seed(cfg.seed, trial)) {
            Ok(r) if r.val_auc.is_finite() => (r, None),
            Ok(_) => (EvalResult::failed(), Some("non-finite validation score".to_string())),
            Err(e) => (EvalResult::failed(), Some(e.to_string())),
        };
        let theta = if guided { cfg.theta } else { u64::MAX };
        tree.update(&path, result.val_auc, result.train_seconds, theta, &cfg.space);
        if best.as_ref().is_none_or(|(_, b)| b.val_auc < result.val_auc) {
            best = Some((trial, result.clone()));
        }
        trials.push(TrialRecord {
            trial,
            architecture: arch,
            val_auc: result.val_auc,
            test_auc: result.test_auc,
            seconds: result.train_seconds,
            error,
        });
    }

    let (best_trial, best_result) = best.expect("at least one trial");
    let importance = importance_report(&tree, trials.iter().map(|t| &t.architecture), &cfg.space)?;
    Ok(SearchReport {
        best_architecture: trials[best_trial].architecture.clone(),
        best_result,
        best_trial,
        tree,
        importance,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{planted_mock, PlantedMock};

    #[test]
    fn config_validation() {
        let mock = planted_mock(vec![], 0.0, 0).unwrap();
        let bad = |cfg: SearchConfig| search(&cfg, &mock).unwrap_err();
        assert_eq!(bad(SearchConfig { trials: 0, ..Default::default() }), SearchError::NoTrials);
        assert_eq!(bad(SearchConfig { theta: 0, ..Default::default() }), SearchError::BadTheta);
        assert!(matches!(bad(SearchConfig { c: -1.0, ..Default::default() }), SearchError::BadC(_)));
    }

    #[test]
    fn single_trial() {
        let mock = planted_mock(PlantedMock::default_prefix(), 0.05, 1).unwrap();
        let r = search(&SearchConfig { trials: 1, ..Default::default() }, &mock).unwrap();
        assert_eq!(r.trials.len(), 1);
        assert_eq!(r.best_trial, 0);
        assert_eq!(r.tree.root().m, 1);
        assert_eq!(r.best_result.val_auc, r.trials[0].val_auc);
    }

    #[test]
    fn ties_keep_first() {
        // Noise-free mock with nothing planted: every model scores 0.5.
        let mock = planted_mock(vec![], 0.0, 0).unwrap();
        let r = search(&SearchConfig { trials: 25, ..Default::default() }, &mock).unwrap();
        assert_eq!(r.best_trial, 0);
    }
}
