//! Observation/hypothesis pair sampling.
//!
//! Hypotheses are grounded top-down from a seed entity so that the seed
//! is always in the conclusion; the conclusion on the sampling graph then
//! becomes the observation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{evaluate, jaccard};
use crate::hypothesis::{Expr, HypothesisGraph, HypothesisPattern, Shape};
use crate::kg::{EntityId, EntitySet, GraphSplit, GraphTag, KnowledgeGraph};
use crate::tokenizer::{hypothesis_to_actions, Vocabulary};

pub const MAX_OBSERVATION: usize = 32;
pub const RETRY_BUDGET: usize = 128;
/// Attempts at a negated branch that leaves the merge target alive.
const NEGATION_TRIES: usize = 8;

#[derive(Clone, Copy, Debug)]
pub struct SamplerConfig {
    pub max_observation: usize,
    pub retries: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { max_observation: MAX_OBSERVATION, retries: RETRY_BUDGET }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("unsatisfiable pattern {pattern}: no grounding after {attempts} attempts")]
    Unsatisfiable { pattern: HypothesisPattern, attempts: usize },
    #[error("retry budget exhausted for {pattern} after {attempts} attempts")]
    BudgetExhausted { pattern: HypothesisPattern, attempts: usize },
}

/// A grounded hypothesis and the entity it was grown from.
#[derive(Clone, Debug)]
pub struct Grounded {
    pub hypothesis: HypothesisGraph,
    pub seed: EntityId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub hypothesis: HypothesisGraph,
    pub observation: EntitySet,
    pub pattern: HypothesisPattern,
    pub split: GraphTag,
    pub seed: EntityId,
}

fn random_entity<R: Rng + ?Sized>(g: &KnowledgeGraph, rng: &mut R) -> EntityId {
    EntityId(rng.random_range(0..g.num_entities() as u32))
}

struct Grounder<'a, R: ?Sized> {
    g: &'a KnowledgeGraph,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Grounder<'_, R> {
    /// Grounds `shape` so that `target` is in its conclusion.
    fn ground(&mut self, shape: &Shape, target: EntityId) -> Option<Expr> {
        match shape {
            Shape::E => Some(Expr::Anchor(target)),
            Shape::P(x) => {
                let &(head, relation) = self.g.in_edges(target).choose(self.rng)?;
                let inner = self.ground(x, head)?;
                Some(Expr::Project(relation, Box::new(inner)))
            }
            Shape::I(a, b) => {
                let a = self.ground_branch(a, target)?;
                let b = self.ground_branch(b, target)?;
                Some(Expr::intersect(a, b))
            }
            Shape::U(a, b) => {
                let a = self.ground_branch(a, target)?;
                let other = random_entity(self.g, self.rng);
                let b = self.ground_branch(b, other)?;
                Some(Expr::union(a, b))
            }
            Shape::N(x) => self.ground_negated(x, target),
        }
    }

    fn ground_branch(&mut self, shape: &Shape, target: EntityId) -> Option<Expr> {
        match shape {
            Shape::N(x) => self.ground_negated(x, target),
            other => self.ground(other, target),
        }
    }

    /// The negated conjunct is grown from an unrelated random entity and
    /// redrawn while it would remove `target`.
    fn ground_negated(&mut self, shape: &Shape, target: EntityId) -> Option<Expr> {
        for _ in 0..NEGATION_TRIES {
            let from = random_entity(self.g, self.rng);
            let Some(inner) = self.ground(shape, from) else {
                continue;
            };
            let excluded = evaluate(&inner, self.g).ok()?;
            if !excluded.contains(target) {
                return Some(Expr::negate(inner));
            }
        }
        None
    }
}

fn ground_once<R: Rng + ?Sized>(g: &KnowledgeGraph, pattern: HypothesisPattern, rng: &mut R) -> Option<Grounded> {
    let seed = random_entity(g, rng);
    let expr = Grounder { g, rng }.ground(&pattern.shape(), seed)?;
    let hypothesis = HypothesisGraph::from_expr(&expr).ok()?;
    Some(Grounded { hypothesis, seed })
}

/// Samples a hypothesis of `pattern` that has a uniformly drawn seed
/// entity among its conclusions, redrawing the seed on dead ends.
pub fn ground_type<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    pattern: HypothesisPattern,
    rng: &mut R,
    retries: usize,
) -> Result<Grounded, SampleError> {
    if g.num_edges() == 0 {
        return Err(SampleError::EmptyGraph);
    }
    (0..retries)
        .find_map(|_| ground_once(g, pattern, rng))
        .ok_or(SampleError::Unsatisfiable { pattern, attempts: retries })
}

/// Grounds and executes until the conclusion is non-empty, within the
/// size cap, and accepted by `accept`.
pub fn sample_pair_where<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    pattern: HypothesisPattern,
    rng: &mut R,
    cfg: &SamplerConfig,
    mut accept: impl FnMut(&HypothesisGraph, &EntitySet) -> bool,
) -> Result<PairSample, SampleError> {
    if g.num_edges() == 0 {
        return Err(SampleError::EmptyGraph);
    }
    for _ in 0..cfg.retries {
        let Some(grounded) = ground_once(g, pattern, rng) else {
            continue;
        };
        let Ok(observation) = grounded.hypothesis.to_expr().map(|e| evaluate(&e, g)) else {
            continue;
        };
        let Ok(observation) = observation else { continue };
        if observation.is_empty() || observation.len() > cfg.max_observation {
            continue;
        }
        if !accept(&grounded.hypothesis, &observation) {
            continue;
        }
        return Ok(PairSample {
            pattern: grounded.hypothesis.pattern,
            hypothesis: grounded.hypothesis,
            observation,
            split: g.tag(),
            seed: grounded.seed,
        });
    }
    Err(SampleError::BudgetExhausted { pattern, attempts: cfg.retries })
}

pub fn sample_pair<R: Rng + ?Sized>(
    g: &KnowledgeGraph,
    pattern: HypothesisPattern,
    rng: &mut R,
    cfg: &SamplerConfig,
) -> Result<PairSample, SampleError> {
    sample_pair_where(g, pattern, rng, cfg, |_, _| true)
}

/// Per-pattern sample counts for each split.
#[derive(Clone, Debug)]
pub struct DatasetPlan {
    pub patterns: Vec<HypothesisPattern>,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shortfall {
    pub split: GraphTag,
    pub pattern: HypothesisPattern,
    pub wanted: usize,
    pub got: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SplitDatasets {
    pub train: Vec<PairSample>,
    pub valid: Vec<PairSample>,
    pub test: Vec<PairSample>,
    pub shortfalls: Vec<Shortfall>,
}

/// splitmix64 over the parts, so every sample owns an independent stream.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut x: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        x ^= p;
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x = z ^ (z >> 31);
    }
    x
}

fn split_index(tag: GraphTag) -> u64 {
    match tag {
        GraphTag::Train => 0,
        GraphTag::Valid => 1,
        GraphTag::Test => 2,
        GraphTag::Other => 3,
    }
}

/// Extra acceptance test on a candidate (hypothesis, observation).
pub type Accept<'a> = &'a (dyn Fn(&HypothesisGraph, &EntitySet) -> bool + Sync);

/// Samples `count` pairs of `pattern` on `g`, in parallel. Output order and
/// content depend only on `seed`, not on the thread count.
pub fn sample_many(
    g: &KnowledgeGraph,
    pattern: HypothesisPattern,
    count: usize,
    seed: u64,
    cfg: &SamplerConfig,
    accept: Accept,
) -> Vec<PairSample> {
    let pidx = HypothesisPattern::ALL.iter().position(|&p| p == pattern).unwrap_or(0) as u64;
    (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, split_index(g.tag()), pidx, i as u64]));
            sample_pair_where(g, pattern, &mut rng, cfg, |h, o| accept(h, o)).ok()
        })
        .collect()
}

/// Training pairs on the training graph; validation pairs whose conclusion
/// strictly grows from the training to the validation graph; test pairs
/// whose conclusion strictly grows from the validation to the test graph.
pub fn sample_split_datasets(split: &GraphSplit, plan: &DatasetPlan, seed: u64, cfg: &SamplerConfig) -> SplitDatasets {
    let mut out = SplitDatasets::default();
    let grows_from_train = |h: &HypothesisGraph, obs: &EntitySet| grows(h, obs, &split.train);
    let grows_from_valid = |h: &HypothesisGraph, obs: &EntitySet| grows(h, obs, &split.valid);
    let any = |_: &HypothesisGraph, _: &EntitySet| true;

    for &pattern in &plan.patterns {
        let jobs: [(&KnowledgeGraph, usize, Accept, GraphTag); 3] = [
            (&split.train, plan.train, &any, GraphTag::Train),
            (&split.valid, plan.valid, &grows_from_train, GraphTag::Valid),
            (&split.test, plan.test, &grows_from_valid, GraphTag::Test),
        ];
        for (g, wanted, accept, tag) in jobs {
            let got = sample_many(g, pattern, wanted, seed, cfg, accept);
            if got.len() < wanted {
                log::warn!("{tag}/{pattern}: sampled {} of {wanted} pairs within the retry budget", got.len());
                out.shortfalls.push(Shortfall { split: tag, pattern, wanted, got: got.len() });
            }
            match tag {
                GraphTag::Train => out.train.extend(got),
                GraphTag::Valid => out.valid.extend(got),
                _ => out.test.extend(got),
            }
        }
    }
    out
}

/// True if `obs` strictly contains the conclusion of `h` on `smaller`.
fn grows(h: &HypothesisGraph, obs: &EntitySet, smaller: &KnowledgeGraph) -> bool {
    h.to_expr().ok().and_then(|e| evaluate(&e, smaller).ok()).is_some_and(|prev| obs.is_strict_superset(&prev))
}

/// One line of a pair-sample file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairRecord {
    pub pattern: HypothesisPattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisGraph>,
    pub actions: Vec<String>,
    pub observation: Vec<u32>,
}

impl PairRecord {
    pub fn from_sample(s: &PairSample, vocab: &Vocabulary) -> PairRecord {
        let actions = hypothesis_to_actions(&s.hypothesis).expect("sampled hypotheses are valid");
        PairRecord {
            pattern: s.pattern,
            hypothesis: Some(s.hypothesis.clone()),
            actions: vocab.to_strings(&actions),
            observation: s.observation.iter().map(|e| e.0).collect(),
        }
    }

    pub fn observation_set(&self) -> EntitySet {
        self.observation.iter().map(|&e| EntityId(e)).collect()
    }
}

#[derive(Debug, Error)]
pub enum PairFileError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn write_pairs(path: impl AsRef<Path>, samples: &[PairSample], vocab: &Vocabulary) -> Result<(), PairFileError> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        let rec = PairRecord::from_sample(s, vocab);
        serde_json::to_writer(&mut w, &rec).map_err(|e| PairFileError::Parse { line: 0, message: e.to_string() })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads any JSON-lines file into `T`, skipping blank lines.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, PairFileError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| PairFileError::Parse { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<PairRecord>, PairFileError> {
    read_jsonl(path)
}

/// Mean training-graph Jaccard of a set of samples against their own
/// observations; 1.0 for freshly sampled data.
pub fn self_consistency(samples: &[PairSample], g: &KnowledgeGraph) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let total: f64 = samples
        .iter()
        .map(|s| {
            let c = s.hypothesis.to_expr().ok().and_then(|e| evaluate(&e, g).ok()).unwrap_or_default();
            jaccard(&c, &s.observation)
        })
        .sum();
    total / samples.len() as f64
}
