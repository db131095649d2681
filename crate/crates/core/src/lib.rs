//! Tree-structured architecture search for graph neural networks.
//!
//! The search walks a Monte-Carlo tree whose levels are architecture
//! components. Each leaf is completed into a full architecture, trained on a
//! node-classification graph and scored by validation ROC-AUC; the score is
//! backed up along the path.

pub mod evaluator;
pub mod graph;
pub mod model;
pub mod search;
pub mod synth;
pub mod tensor;

pub use evaluator::{gnn_evaluator, planted_mock, EvalError, Evaluator, GnnEvaluator, PlantedMock};
pub use graph::{edge_homophily, load_graph, make_split, save_graph, Graph, GraphError, Split};
pub use model::{
    train_model, Activation, ArchError, ArchitectureParams, Attention, EmbSize, EvalResult, JkMode, LayerParams,
    ModelError, Toggle, TrainConfig,
};
pub use search::{count_search_space, random_search, search, MctTree, SearchConfig, SearchReport, SearchSpace};
