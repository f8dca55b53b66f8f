//! Conclusion sets of hypotheses on a graph, and the Jaccard index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypothesis::{Expr, HypothesisGraph, Violation};
use crate::kg::{EntityId, EntitySet, GraphTag, KnowledgeGraph, RelationId, Triple};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conclusion {
    pub entities: EntitySet,
    pub graph_tag: GraphTag,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("foreign symbol: {0}")]
    ForeignSymbol(String),
    #[error("invalid hypothesis: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("too large for oracle: {0} assignment tuples")]
    TooLargeForOracle(u128),
}

/// Upper bound on `|V|^variables` the enumeration oracle accepts.
pub const ORACLE_LIMIT: u128 = 10_000;

fn check_symbols(expr: &Expr, g: &KnowledgeGraph) -> Result<(), ExecError> {
    if let Some(e) = expr.anchors().into_iter().find(|&e| !g.has_entity(e)) {
        return Err(ExecError::ForeignSymbol(format!("entity {e}")));
    }
    if let Some(r) = expr.relations().into_iter().find(|&r| !g.has_relation(r)) {
        return Err(ExecError::ForeignSymbol(format!("relation {r}")));
    }
    Ok(())
}

/// `⟦h⟧_g` by bottom-up set evaluation.
pub fn conclusion(h: &HypothesisGraph, g: &KnowledgeGraph) -> Result<Conclusion, ExecError> {
    let expr = h.to_expr().map_err(ExecError::Invalid)?;
    Ok(Conclusion { entities: evaluate(&expr, g)?, graph_tag: g.tag() })
}

/// Set evaluation of an expression tree.
pub fn evaluate(expr: &Expr, g: &KnowledgeGraph) -> Result<EntitySet, ExecError> {
    check_symbols(expr, g)?;
    Ok(eval_signed(expr, g).materialize(g))
}

/// A set, or the complement of a set relative to all entities. Negated
/// branches stay symbolic until a merge turns them into a difference.
enum Signed {
    Pos(EntitySet),
    Neg(EntitySet),
}

impl Signed {
    fn materialize(self, g: &KnowledgeGraph) -> EntitySet {
        match self {
            Signed::Pos(s) => s,
            Signed::Neg(s) => EntitySet::full(g.num_entities()).difference(&s),
        }
    }
}

fn eval_signed(expr: &Expr, g: &KnowledgeGraph) -> Signed {
    use Signed::*;
    match expr {
        Expr::Anchor(e) => Pos(EntitySet::singleton(*e)),
        Expr::Project(r, x) => {
            let input = eval_signed(x, g).materialize(g);
            Pos(g.out_image(&input, *r))
        }
        Expr::Negate(x) => match eval_signed(x, g) {
            Pos(s) => Neg(s),
            Neg(s) => Pos(s),
        },
        Expr::Intersect(a, b) => match (eval_signed(a, g), eval_signed(b, g)) {
            (Pos(a), Pos(b)) => Pos(a.intersection(&b)),
            (Pos(p), Neg(n)) | (Neg(n), Pos(p)) => Pos(p.difference(&n)),
            (Neg(a), Neg(b)) => Neg(a.union(&b)),
        },
        Expr::Union(a, b) => match (eval_signed(a, g), eval_signed(b, g)) {
            (Pos(a), Pos(b)) => Pos(a.union(&b)),
            (Pos(p), Neg(n)) | (Neg(n), Pos(p)) => Neg(n.difference(&p)),
            (Neg(a), Neg(b)) => Neg(a.intersection(&b)),
        },
    }
}

/// First-order reading of a hypothesis over entity-valued variables.
#[derive(Clone, Debug)]
enum Formula {
    /// `relation(from, to)`
    Atom {
        relation: RelationId,
        from: Term,
        to: usize,
    },
    /// `var = entity`; only arises for a bare anchor.
    Is {
        var: usize,
        entity: EntityId,
    },
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    Exists(usize, Box<Formula>),
}

#[derive(Clone, Copy, Debug)]
enum Term {
    Const(EntityId),
    Var(usize),
}

/// Translates the subtree computing the value of variable `var`.
/// Intermediate variables are quantified where they are introduced, so a
/// variable under a negation is quantified inside it.
fn to_formula(expr: &Expr, var: usize, fresh: &mut usize) -> Formula {
    match expr {
        Expr::Anchor(e) => Formula::Is { var, entity: *e },
        Expr::Project(r, x) => match x.as_ref() {
            Expr::Anchor(e) => Formula::Atom { relation: *r, from: Term::Const(*e), to: var },
            inner => {
                let y = *fresh;
                *fresh += 1;
                let body = to_formula(inner, y, fresh);
                let atom = Formula::Atom { relation: *r, from: Term::Var(y), to: var };
                Formula::Exists(y, Box::new(Formula::And(Box::new(body), Box::new(atom))))
            }
        },
        Expr::Intersect(a, b) => Formula::And(Box::new(to_formula(a, var, fresh)), Box::new(to_formula(b, var, fresh))),
        Expr::Union(a, b) => Formula::Or(Box::new(to_formula(a, var, fresh)), Box::new(to_formula(b, var, fresh))),
        Expr::Negate(x) => Formula::Not(Box::new(to_formula(x, var, fresh))),
    }
}

fn holds(f: &Formula, assignment: &mut [u32], g: &KnowledgeGraph) -> bool {
    match f {
        Formula::Atom { relation, from, to } => {
            let head = match from {
                Term::Const(e) => *e,
                Term::Var(v) => EntityId(assignment[*v]),
            };
            g.contains_edge(&Triple { head, relation: *relation, tail: EntityId(assignment[*to]) })
        }
        Formula::Is { var, entity } => assignment[*var] == entity.0,
        Formula::And(a, b) => holds(a, assignment, g) && holds(b, assignment, g),
        Formula::Or(a, b) => holds(a, assignment, g) || holds(b, assignment, g),
        Formula::Not(a) => !holds(a, assignment, g),
        Formula::Exists(v, body) => {
            let saved = assignment[*v];
            let mut found = false;
            for x in 0..g.num_entities() as u32 {
                assignment[*v] = x;
                if holds(body, assignment, g) {
                    found = true;
                    break;
                }
            }
            assignment[*v] = saved;
            found
        }
    }
}

/// `⟦h⟧_g` by enumerating every assignment of the target and existential
/// variables over all entities. Refuses graphs where that exceeds
/// [`ORACLE_LIMIT`] tuples.
pub fn brute_force_conclusion(h: &HypothesisGraph, g: &KnowledgeGraph) -> Result<Conclusion, ExecError> {
    let expr = h.to_expr().map_err(ExecError::Invalid)?;
    check_symbols(&expr, g)?;
    let mut fresh = 1;
    let formula = to_formula(&expr, 0, &mut fresh);
    let tuples = (g.num_entities() as u128).checked_pow(fresh as u32).unwrap_or(u128::MAX);
    if tuples > ORACLE_LIMIT {
        return Err(ExecError::TooLargeForOracle(tuples));
    }
    let mut assignment = vec![0u32; fresh];
    let mut out = Vec::new();
    for v in 0..g.num_entities() as u32 {
        assignment[0] = v;
        if holds(&formula, &mut assignment, g) {
            out.push(EntityId(v));
        }
    }
    Ok(Conclusion { entities: EntitySet::from_unsorted(out), graph_tag: g.tag() })
}

/// `|a ∩ b| / |a ∪ b|`, and 0 when both are empty.
pub fn jaccard(a: &EntitySet, b: &EntitySet) -> f64 {
    let inter = a.intersection_len(b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}
