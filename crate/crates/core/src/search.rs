//! Brute-force one-hop search baseline.

use crate::exec::jaccard;
use crate::hypothesis::{Expr, HypothesisGraph};
use crate::kg::{EntityId, EntitySet, KnowledgeGraph, RelationId};

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub hypothesis: HypothesisGraph,
    pub relation: RelationId,
    pub head: EntityId,
    /// Jaccard of the hypothesis' conclusion on the search graph.
    pub jaccard: f64,
}

/// `(relation, head)` pairs of every edge landing in `obs`, ascending and
/// deduplicated.
pub fn candidates(obs: &EntitySet, g: &KnowledgeGraph) -> Vec<(RelationId, EntityId)> {
    let mut c: Vec<(RelationId, EntityId)> =
        obs.iter().filter(|&t| g.has_entity(t)).flat_map(|t| g.in_edges(t).iter().map(|&(h, r)| (r, h))).collect();
    c.sort_unstable();
    c.dedup();
    c
}

/// The one-hop hypothesis `r(h, V?)` with an edge into `obs` that
/// maximizes Jaccard against `obs` on `g`. Ties go to the smallest
/// `(relation, head)`. `None` when nothing points into `obs`.
pub fn one_hop_search(obs: &EntitySet, g: &KnowledgeGraph) -> Option<SearchResult> {
    let mut best: Option<(RelationId, EntityId, f64)> = None;
    for (r, h) in candidates(obs, g) {
        let answers = EntitySet::from_unsorted(g.out_neighbors(h, r).collect());
        let score = jaccard(&answers, obs);
        if best.is_none_or(|(_, _, b)| score > b) {
            best = Some((r, h, score));
        }
    }
    let (relation, head, jaccard) = best?;
    let hypothesis = HypothesisGraph::from_expr(&Expr::Project(relation, Box::new(Expr::Anchor(head))))
        .expect("a one-hop hypothesis is always valid");
    Some(SearchResult { hypothesis, relation, head, jaccard })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{parse_triples, TripleFormat};

    fn set(ids: &[u32]) -> EntitySet {
        ids.iter().map(|&i| EntityId(i)).collect()
    }

    #[test]
    fn finds_the_exact_explanation() {
        // a=0 b=1 c=2
        let g = parse_triples("a\tr\tb\na\tr\tc\n".as_bytes(), TripleFormat::LabelTsv).unwrap();
        let res = one_hop_search(&set(&[1, 2]), &g).unwrap();
        assert_eq!(res.hypothesis.to_expr().unwrap(), Expr::atom(0, 0));
        assert_eq!(res.jaccard, 1.0);
    }

    #[test]
    fn nothing_points_into_the_observation() {
        let g = parse_triples("a\tr\tb\n".as_bytes(), TripleFormat::LabelTsv).unwrap();
        assert!(one_hop_search(&set(&[0]), &g).is_none());
    }

    #[test]
    fn ties_go_to_smallest_relation_then_head() {
        // both 2 -r1-> 0 and 1 -r0-> 0 explain {0} exactly; r0 wins
        let g = crate::kg::KnowledgeGraph::from_id_triples(
            3,
            2,
            vec![crate::kg::Triple::new(2, 1, 0), crate::kg::Triple::new(1, 0, 0)],
        )
        .unwrap();
        let res = one_hop_search(&set(&[0]), &g).unwrap();
        assert_eq!((res.relation, res.head), (RelationId(0), EntityId(1)));
    }
}
