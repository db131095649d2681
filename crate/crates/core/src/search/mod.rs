//! Monte-Carlo tree search over architecture components.

mod engine;
mod importance;
mod order;
mod space;
mod tree;

pub use engine::{random_search, search, trial_seed, SearchConfig, SearchError, SearchReport, TrialRecord};
pub use importance::{
    importance_ratios, importance_report, ComponentShares, ImportanceError, ImportanceReport, NodeStats, ValueShare,
};
pub use order::{Assignment, Component, ParamValue, COMPONENT_ORDER};
pub use space::{count_search_space, SearchSpace, SpaceError};
pub use tree::{ucb, MctNode, MctTree, TreeError};
