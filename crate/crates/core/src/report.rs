//! Scoring generated hypotheses and per-pattern summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::exec::{conclusion, jaccard};
use crate::hypothesis::{HypothesisGraph, HypothesisPattern};
use crate::kg::{EntitySet, KnowledgeGraph};
use crate::sampler::PairRecord;
use crate::smatch::smatch_score;
use crate::tokenizer::Vocabulary;

/// A pair-sample line extended with a generated action sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(flatten)]
    pub pair: PairRecord,
    pub prediction: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ItemScore {
    pub pattern: HypothesisPattern,
    pub valid: bool,
    pub jaccard: f64,
    pub smatch: f64,
}

/// Reference hypothesis of a pair line: its JSON form, else its actions.
pub fn reference_hypothesis(pair: &PairRecord, vocab: &Vocabulary) -> Option<HypothesisGraph> {
    pair.hypothesis.clone().or_else(|| vocab.parse_hypothesis(&pair.actions).ok())
}

/// Jaccard of `predicted` on `g` against `obs`, and Smatch against the
/// reference. An unparseable or foreign prediction scores 0 on both.
pub fn score_hypothesis(
    pattern: HypothesisPattern,
    predicted: Option<&HypothesisGraph>,
    reference: Option<&HypothesisGraph>,
    obs: &EntitySet,
    g: &KnowledgeGraph,
) -> ItemScore {
    let Some(h) = predicted else {
        return ItemScore { pattern, valid: false, jaccard: 0.0, smatch: 0.0 };
    };
    let Ok(c) = conclusion(h, g) else {
        return ItemScore { pattern, valid: false, jaccard: 0.0, smatch: 0.0 };
    };
    ItemScore {
        pattern,
        valid: true,
        jaccard: jaccard(&c.entities, obs),
        smatch: reference.map_or(0.0, |r| smatch_score(h, r)),
    }
}

pub fn score_prediction(rec: &PredictionRecord, g: &KnowledgeGraph, vocab: &Vocabulary) -> ItemScore {
    let predicted = vocab.parse_hypothesis(&rec.prediction).ok();
    let reference = reference_hypothesis(&rec.pair, vocab);
    score_hypothesis(rec.pair.pattern, predicted.as_ref(), reference.as_ref(), &rec.pair.observation_set(), g)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SummaryRow {
    pub pattern: String,
    pub count: usize,
    pub invalid: usize,
    pub jaccard: f64,
    pub smatch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub patterns: Vec<SummaryRow>,
    pub overall: SummaryRow,
}

#[derive(Default)]
struct Acc {
    n: usize,
    invalid: usize,
    jaccard: f64,
    smatch: f64,
}

impl Acc {
    fn add(&mut self, s: &ItemScore) {
        self.n += 1;
        self.invalid += usize::from(!s.valid);
        self.jaccard += s.jaccard;
        self.smatch += s.smatch;
    }

    fn row(&self, pattern: String) -> SummaryRow {
        let d = self.n.max(1) as f64;
        SummaryRow { pattern, count: self.n, invalid: self.invalid, jaccard: self.jaccard / d, smatch: self.smatch / d }
    }
}

/// Per-pattern means in canonical pattern order, plus the mean over all
/// items.
pub fn summarize(scores: &[ItemScore]) -> Summary {
    let mut by: BTreeMap<HypothesisPattern, Acc> = BTreeMap::new();
    let mut all = Acc::default();
    for s in scores {
        by.entry(s.pattern).or_default().add(s);
        all.add(s);
    }
    Summary {
        patterns: by.into_iter().map(|(p, a)| a.row(p.name().to_owned())).collect(),
        overall: all.row("all".into()),
    }
}

impl Summary {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8}{:>8}{:>9}{:>10}{:>10}", "pattern", "count", "invalid", "jaccard", "smatch");
        for r in self.patterns.iter().chain(std::iter::once(&self.overall)) {
            let _ = writeln!(s, "{:<8}{:>8}{:>9}{:>10.3}{:>10.3}", r.pattern, r.count, r.invalid, r.jaccard, r.smatch);
        }
        s
    }
}
