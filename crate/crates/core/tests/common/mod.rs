#![allow(dead_code)]

use abductkg::hypothesis::Shape;
use abductkg::{Expr, HypothesisPattern, KnowledgeGraph, Triple};
use rand::Rng;

/// A uniformly grounded instance of `pattern`'s shape, in canonical form.
/// Anchors and relations are drawn independently, so the conclusion is
/// often empty.
pub fn random_expr<R: Rng + ?Sized>(pattern: HypothesisPattern, entities: u32, relations: u32, rng: &mut R) -> Expr {
    fn go<R: Rng + ?Sized>(s: &Shape, ne: u32, nr: u32, rng: &mut R) -> Expr {
        match s {
            Shape::E => Expr::anchor(rng.random_range(0..ne)),
            Shape::P(x) => Expr::project(rng.random_range(0..nr), go(x, ne, nr, rng)),
            Shape::I(a, b) => Expr::intersect(go(a, ne, nr, rng), go(b, ne, nr, rng)),
            Shape::U(a, b) => Expr::union(go(a, ne, nr, rng), go(b, ne, nr, rng)),
            Shape::N(x) => Expr::negate(go(x, ne, nr, rng)),
        }
    }
    go(&pattern.shape(), entities, relations, rng).canonicalize()
}

/// Splits `g`'s edges into three cumulative graphs by edge index modulo 10
/// (0..8 train, 8 valid, 9 test).
pub fn modulo_split(g: &KnowledgeGraph) -> abductkg::GraphSplit {
    let mut parts: [Vec<Triple>; 3] = Default::default();
    for (i, t) in g.edges().iter().enumerate() {
        parts[match i % 10 {
            8 => 1,
            9 => 2,
            _ => 0,
        }]
        .push(*t);
    }
    abductkg::GraphSplit::from_partitions(g.entity_labels().clone(), g.relation_labels().clone(), parts, 0).unwrap()
}
