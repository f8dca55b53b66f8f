//! Seeded random graphs for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kg::{KnowledgeGraph, Triple};

/// A graph with `entities` nodes, `relations` relation types and up to
/// `edges` distinct uniformly drawn edges (fewer only if the graph would be
/// complete).
pub fn random_graph(entities: usize, relations: usize, edges: usize, seed: u64) -> KnowledgeGraph {
    assert!(entities > 0 && relations > 0, "empty id space");
    let capacity = entities * entities * relations;
    let target = edges.min(capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::with_capacity(target);
    let mut out = Vec::with_capacity(target);
    while out.len() < target {
        let t = Triple::new(
            rng.random_range(0..entities as u32),
            rng.random_range(0..relations as u32),
            rng.random_range(0..entities as u32),
        );
        if seen.insert(t) {
            out.push(t);
        }
    }
    KnowledgeGraph::from_id_triples(entities, relations, out).expect("ids drawn in range")
}
