//! Knowledge base embeddings (TransE, DistMult, ComplEx) for relation
//! prediction, with raw/filtered ranking evaluation and late fusion of
//! embedding scores into relation-extraction rankings.

pub mod checkpoint;
pub mod error;
pub mod filter;
pub mod fusion;
pub mod model;
pub mod ranking;
pub mod store;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use filter::FilterIndex;
pub use model::{ModelKind, ModelParams, Norm};
pub use ranking::{evaluate_relation_prediction, EvalReport, Regime, TiePolicy};
pub use store::{KnowledgeBase, Split, Triple, Vocab};
pub use trainer::{train, TrainConfig, TrainReport};
