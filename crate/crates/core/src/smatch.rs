//! Structural similarity of hypotheses as Smatch F1 over AMR-style triples.
//!
//! A hypothesis becomes an AMR view with one variable per logical variable
//! (the target and each existential), an `instance` edge from every
//! variable to a shared virtual concept, attribute edges from a variable to
//! an anchor entity, and relation edges between variables. Atoms under a
//! negation carry a polarity marker and atoms under a union a disjunction
//! marker, so they never match their plain counterparts. The instance
//! edges always match once variables are mapped, which lifts every score.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hypothesis::{Expr, HypothesisGraph, Violation};
use crate::kg::{EntityId, RelationId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomLabel {
    pub relation: RelationId,
    pub negated: bool,
    pub disjunctive: bool,
}

impl AtomLabel {
    pub fn plain(relation: u32) -> Self {
        AtomLabel { relation: RelationId(relation), negated: false, disjunctive: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AmrTriple {
    /// `instance(var, v′)`
    Instance(usize),
    /// `label(var, entity)`
    Attribute(usize, AtomLabel, EntityId),
    /// `label(var, var)`
    Relation(usize, AtomLabel, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmrView {
    pub num_variables: usize,
    /// Sorted and deduplicated.
    pub triples: Vec<AmrTriple>,
}

impl AmrView {
    pub fn new(num_variables: usize, mut triples: Vec<AmrTriple>) -> Self {
        triples.sort_unstable();
        triples.dedup();
        AmrView { num_variables, triples }
    }

    pub fn count(&self, pred: impl Fn(&AmrTriple) -> bool) -> usize {
        self.triples.iter().filter(|t| pred(t)).count()
    }
}

pub fn to_amr_view(h: &HypothesisGraph) -> Result<AmrView, Vec<Violation>> {
    Ok(expr_to_amr_view(&h.to_expr()?))
}

pub fn expr_to_amr_view(e: &Expr) -> AmrView {
    let mut triples = vec![AmrTriple::Instance(0)];
    let mut vars = 1;
    walk(e, 0, false, false, &mut vars, &mut triples);
    AmrView::new(vars, triples)
}

fn walk(e: &Expr, var: usize, negated: bool, disjunctive: bool, vars: &mut usize, out: &mut Vec<AmrTriple>) {
    match e {
        // a bare anchor never occurs in a valid hypothesis
        Expr::Anchor(_) => {}
        Expr::Project(r, x) => {
            let label = AtomLabel { relation: *r, negated, disjunctive };
            match x.as_ref() {
                Expr::Anchor(a) => out.push(AmrTriple::Attribute(var, label, *a)),
                inner => {
                    let y = *vars;
                    *vars += 1;
                    out.push(AmrTriple::Instance(y));
                    out.push(AmrTriple::Relation(var, label, y));
                    walk(inner, y, negated, disjunctive, vars, out);
                }
            }
        }
        Expr::Intersect(a, b) => {
            walk(a, var, negated, disjunctive, vars, out);
            walk(b, var, negated, disjunctive, vars, out);
        }
        Expr::Union(a, b) => {
            walk(a, var, negated, true, vars, out);
            walk(b, var, negated, true, vars, out);
        }
        Expr::Negate(x) => walk(x, var, !negated, disjunctive, vars, out),
    }
}

/// Variable mapping from predicted to gold variables; `None` = unmapped.
pub type Mapping = Vec<Option<usize>>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmatchScore {
    pub matched: usize,
    pub pred_total: usize,
    pub gold_total: usize,
}

impl SmatchScore {
    pub fn precision(&self) -> f64 {
        ratio(self.matched, self.pred_total)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.matched, self.gold_total)
    }

    pub fn f1(&self) -> f64 {
        let total = self.pred_total + self.gold_total;
        if total == 0 {
            0.0
        } else {
            2.0 * self.matched as f64 / total as f64
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Number of predicted triples that land on a gold triple under `m`.
pub fn matched_triples(pred: &AmrView, gold: &AmrView, m: &[Option<usize>]) -> usize {
    pred.triples
        .iter()
        .filter(|t| {
            let mapped = match **t {
                AmrTriple::Instance(x) => m[x].map(AmrTriple::Instance),
                AmrTriple::Attribute(x, l, e) => m[x].map(|y| AmrTriple::Attribute(y, l, e)),
                AmrTriple::Relation(x, l, z) => m[x].zip(m[z]).map(|(y, w)| AmrTriple::Relation(y, l, w)),
            };
            mapped.is_some_and(|g| gold.triples.binary_search(&g).is_ok())
        })
        .count()
}

#[derive(Clone, Copy, Debug)]
pub struct SmatchConfig {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SmatchConfig {
    fn default() -> Self {
        SmatchConfig { restarts: 10, seed: 0 }
    }
}

/// Hill-climbing search for the mapping with most matched triples: one
/// greedy start plus `restarts` random ones.
pub fn best_mapping(pred: &AmrView, gold: &AmrView, cfg: &SmatchConfig) -> (Mapping, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = climb(pred, gold, greedy_start(pred, gold));
    for _ in 0..cfg.restarts {
        let cand = climb(pred, gold, random_start(pred, gold, &mut rng));
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

fn greedy_start(pred: &AmrView, gold: &AmrView) -> Mapping {
    let mut m: Mapping = vec![None; pred.num_variables];
    let mut used = vec![false; gold.num_variables];
    for x in 0..pred.num_variables {
        let mut best: Option<(usize, usize)> = None;
        for y in (0..gold.num_variables).filter(|&y| !used[y]) {
            m[x] = Some(y);
            let s = matched_triples(pred, gold, &m);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((y, s));
            }
        }
        m[x] = best.map(|(y, _)| y);
        if let Some((y, _)) = best {
            used[y] = true;
        }
    }
    m
}

fn random_start<R: Rng>(pred: &AmrView, gold: &AmrView, rng: &mut R) -> Mapping {
    let mut targets: Vec<Option<usize>> = (0..gold.num_variables).map(Some).collect();
    targets.extend(std::iter::repeat_n(None, pred.num_variables));
    targets.shuffle(rng);
    targets.truncate(pred.num_variables);
    targets
}

/// Steepest ascent over reassign-one and swap-two moves.
fn climb(pred: &AmrView, gold: &AmrView, mut m: Mapping) -> (Mapping, usize) {
    let mut score = matched_triples(pred, gold, &m);
    loop {
        let mut best_move: Option<(Mapping, usize)> = None;
        let mut consider = |cand: Mapping| {
            let s = matched_triples(pred, gold, &cand);
            if s > best_move.as_ref().map_or(score, |b| b.1) {
                best_move = Some((cand, s));
            }
        };
        for x in 0..m.len() {
            let free = (0..gold.num_variables).filter(|y| !m.contains(&Some(*y))).map(Some);
            for y in free.chain(std::iter::once(None)) {
                if m[x] != y {
                    let mut c = m.clone();
                    c[x] = y;
                    consider(c);
                }
            }
            for z in x + 1..m.len() {
                if m[x] != m[z] {
                    let mut c = m.clone();
                    c.swap(x, z);
                    consider(c);
                }
            }
        }
        match best_move {
            Some((c, s)) => {
                m = c;
                score = s;
            }
            None => return (m, score),
        }
    }
}

/// Every injective partial mapping; only for small views.
pub fn exhaustive_best(pred: &AmrView, gold: &AmrView) -> usize {
    fn go(x: usize, m: &mut Mapping, used: &mut [bool], pred: &AmrView, gold: &AmrView, best: &mut usize) {
        if x == m.len() {
            *best = (*best).max(matched_triples(pred, gold, m));
            return;
        }
        m[x] = None;
        go(x + 1, m, used, pred, gold, best);
        for y in 0..gold.num_variables {
            if !used[y] {
                used[y] = true;
                m[x] = Some(y);
                go(x + 1, m, used, pred, gold, best);
                used[y] = false;
            }
        }
        m[x] = None;
    }
    let mut best = 0;
    let mut m = vec![None; pred.num_variables];
    let mut used = vec![false; gold.num_variables];
    go(0, &mut m, &mut used, pred, gold, &mut best);
    best
}

pub fn smatch_views(pred: &AmrView, gold: &AmrView, cfg: &SmatchConfig) -> SmatchScore {
    let (_, matched) = best_mapping(pred, gold, cfg);
    SmatchScore { matched, pred_total: pred.triples.len(), gold_total: gold.triples.len() }
}

/// Smatch F1 between two hypotheses; 0 if either is structurally invalid.
pub fn smatch_score(pred: &HypothesisGraph, gold: &HypothesisGraph) -> f64 {
    match (to_amr_view(pred), to_amr_view(gold)) {
        (Ok(p), Ok(g)) => smatch_views(&p, &g, &SmatchConfig::default()).f1(),
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::HypothesisPattern;

    fn h(e: Expr) -> HypothesisGraph {
        HypothesisGraph::from_expr(&e).unwrap()
    }

    #[test]
    fn one_hop_view() {
        let v = to_amr_view(&h(Expr::atom(3, 7))).unwrap();
        assert_eq!(v.num_variables, 1);
        assert_eq!(v.triples, vec![AmrTriple::Instance(0), AmrTriple::Attribute(0, AtomLabel::plain(3), EntityId(7))]);
    }

    #[test]
    fn two_hop_view() {
        let v = to_amr_view(&h(Expr::project(1, Expr::atom(0, 0)))).unwrap();
        assert_eq!(v.num_variables, 2);
        assert_eq!(v.count(|t| matches!(t, AmrTriple::Instance(_))), 2);
        assert_eq!(v.count(|t| matches!(t, AmrTriple::Relation(..))), 1);
        assert_eq!(v.count(|t| matches!(t, AmrTriple::Attribute(..))), 1);
    }

    #[test]
    fn self_score_is_one() {
        let e = Expr::intersect(Expr::negate(Expr::project(1, Expr::atom(0, 0))), Expr::atom(2, 1));
        assert_eq!(h(e.clone()).pattern, HypothesisPattern::PNI);
        assert_eq!(smatch_score(&h(e.clone()), &h(e)), 1.0);
    }

    #[test]
    fn distinct_one_hops_score_half() {
        assert_eq!(smatch_score(&h(Expr::atom(0, 0)), &h(Expr::atom(1, 1))), 0.5);
    }

    #[test]
    fn two_hop_against_one_hop() {
        // pred 2p: {inst(x0), inst(x1), r1(x0,x1), r0(x1,e0)}
        // gold 1p: {inst(y0), r1(y0,e5)}
        // x0→y0 matches inst only; x1→y0 matches inst only: 1 of 4/2 → F1 = 2/6
        let pred = h(Expr::project(1, Expr::atom(0, 0)));
        let gold = h(Expr::atom(1, 5));
        let s = smatch_score(&pred, &gold);
        assert!(s > 0.0 && s < 1.0);
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
        let pv = to_amr_view(&pred).unwrap();
        let gv = to_amr_view(&gold).unwrap();
        assert_eq!(exhaustive_best(&pv, &gv), 1);
    }

    #[test]
    fn union_and_negation_do_not_match_plain_atoms() {
        let i2 = h(Expr::intersect(Expr::atom(0, 0), Expr::atom(1, 1)));
        let u2 = h(Expr::union(Expr::atom(0, 0), Expr::atom(1, 1)));
        let in2 = h(Expr::intersect(Expr::atom(0, 0), Expr::negate(Expr::atom(1, 1))));
        assert!((smatch_score(&i2, &u2) - 1.0 / 3.0).abs() < 1e-12);
        assert!((smatch_score(&i2, &in2) - 2.0 / 3.0).abs() < 1e-12);
    }
}
