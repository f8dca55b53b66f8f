//! Abductive reasoning over knowledge graphs.
//!
//! Given an observed set of entities, find a logical hypothesis whose
//! conclusion on the graph explains it. This crate provides the graph store
//! and splits, the 13-pattern hypothesis language, conclusion execution with
//! an enumeration oracle, pair sampling, action-sequence tokenization,
//! Smatch, a one-hop search baseline, and the reward environment used for
//! reinforcement fine-tuning of a generator.

pub mod env;
pub mod exec;
pub mod hypothesis;
pub mod kg;
pub mod report;
pub mod sampler;
pub mod search;
pub mod smatch;
pub mod synth;
pub mod tokenizer;

pub use env::{RewardEnv, RewardRequest, RewardResponse};
pub use exec::{brute_force_conclusion, conclusion, jaccard, Conclusion, ExecError};
pub use hypothesis::{
    pattern_of, validate, EdgeLabel, Expr, HypothesisEdge, HypothesisGraph, HypothesisNode, HypothesisPattern,
    NodeKind, Violation,
};
pub use kg::{
    load_triple_files, load_triples, split_edges, EntityId, EntitySet, GraphSplit, GraphTag, KnowledgeGraph, LoadError,
    RelationId, SplitRatios, Triple, TripleFormat,
};
pub use sampler::{
    ground_type, sample_pair, sample_split_datasets, DatasetPlan, PairRecord, PairSample, SamplerConfig,
};
pub use search::one_hop_search;
pub use smatch::{smatch_score, to_amr_view, AmrView};
pub use tokenizer::{actions_to_hypothesis, encode_observation, hypothesis_to_actions, ParseError, Token, Vocabulary};

/// An observation is a set of entities, kept in ascending id order.
pub type Observation = EntitySet;
