//! Action tokens: serializing hypotheses depth-first, the stack parser that
//! inverts it, and the vocabulary shared with the sequence model.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::hypothesis::{EdgeLabel, HypothesisEdge, HypothesisGraph, HypothesisNode, NodeId, NodeKind, Violation};
use crate::kg::{EntityId, EntitySet, KnowledgeGraph, RelationId};

/// Variant order is the vocabulary order: specials, relations, entities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Token {
    Pad,
    Bos,
    Eos,
    Sep,
    Intersection,
    Union,
    Negation,
    Relation(RelationId),
    Entity(EntityId),
}

pub const SPECIALS: [(Token, &str); 7] = [
    (Token::Pad, "[PAD]"),
    (Token::Bos, "[BOS]"),
    (Token::Eos, "[EOS]"),
    (Token::Sep, "[SEP]"),
    (Token::Intersection, "[I]"),
    (Token::Union, "[U]"),
    (Token::Negation, "[N]"),
];

impl Token {
    /// Number of operands an operator token consumes; `None` for anchors and
    /// framing tokens.
    pub fn degree(self) -> Option<u32> {
        match self {
            Token::Intersection | Token::Union => Some(2),
            Token::Negation | Token::Relation(_) => Some(1),
            _ => None,
        }
    }

    fn edge_label(self) -> Option<EdgeLabel> {
        match self {
            Token::Intersection => Some(EdgeLabel::Intersection),
            Token::Union => Some(EdgeLabel::Union),
            Token::Negation => Some(EdgeLabel::Negation),
            Token::Relation(r) => Some(EdgeLabel::Projection(r)),
            _ => None,
        }
    }
}

pub type ActionSequence = Vec<Token>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty action sequence")]
    Empty,
    #[error("unknown token `{token}` at position {pos}")]
    UnknownToken { pos: usize, token: String },
    #[error("token at position {pos} is not an action")]
    NotAnAction { pos: usize },
    #[error("hypothesis already complete before position {pos}")]
    TrailingTokens { pos: usize },
    #[error("incomplete: {open} operator(s) still open")]
    Incomplete { open: usize },
    #[error("invalid hypothesis: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

impl ParseError {
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::Empty => "empty",
            ParseError::UnknownToken { .. } => "unknown_token",
            ParseError::NotAnAction { .. } => "not_an_action",
            ParseError::TrailingTokens { .. } => "trailing_tokens",
            ParseError::Incomplete { .. } => "incomplete",
            ParseError::Invalid(_) => "invalid_structure",
        }
    }
}

/// Depth-first serialization from the target, branches in canonical order.
pub fn hypothesis_to_actions(h: &HypothesisGraph) -> Result<ActionSequence, Vec<Violation>> {
    Ok(h.to_expr()?.canonicalize().tokens())
}

/// Stack parser: every token opens a node attached to the operator on top
/// of the stack; an anchor closes operand slots until one with capacity
/// left remains.
pub fn actions_to_hypothesis(actions: &[Token]) -> Result<HypothesisGraph, ParseError> {
    if actions.is_empty() {
        return Err(ParseError::Empty);
    }
    // (node, operator, remaining operand slots)
    let mut stack: Vec<(NodeId, EdgeLabel, u32)> = Vec::new();
    let mut nodes = Vec::with_capacity(actions.len());
    let mut edges = Vec::with_capacity(actions.len());

    for (pos, &a) in actions.iter().enumerate() {
        if pos > 0 && stack.is_empty() {
            return Err(ParseError::TrailingTokens { pos });
        }
        let id = pos as NodeId;
        if let Some(&(parent, label, _)) = stack.last() {
            edges.push(HypothesisEdge { child: id, parent, label });
        }
        match a {
            Token::Entity(e) => {
                nodes.push(HypothesisNode { id, kind: NodeKind::Anchor(e) });
                while let Some((node, label, d)) = stack.pop() {
                    if d > 1 {
                        stack.push((node, label, d - 1));
                        break;
                    }
                }
            }
            op => {
                let (Some(label), Some(d)) = (op.edge_label(), op.degree()) else {
                    return Err(ParseError::NotAnAction { pos });
                };
                let kind = if pos == 0 { NodeKind::Target } else { NodeKind::Variable };
                nodes.push(HypothesisNode { id, kind });
                stack.push((id, label, d));
            }
        }
    }
    if !stack.is_empty() {
        return Err(ParseError::Incomplete { open: stack.len() });
    }
    HypothesisGraph::assemble(nodes, edges, 0).map_err(ParseError::Invalid)
}

#[derive(Debug, Error)]
pub enum TokenizeError {
    #[error("entity {0} is not in the vocabulary")]
    UnknownEntity(EntityId),
    #[error("relation {0} is not in the vocabulary")]
    UnknownRelation(RelationId),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Bijective token table: specials, then relations by id, then entities by
/// id. Relation and entity tokens are their labels in brackets; a label
/// that would collide with an earlier token gets an `r:`/`e:` prefix.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    strings: Vec<String>,
    lookup: HashMap<String, u32>,
    num_relations: u32,
    num_entities: u32,
}

impl Vocabulary {
    pub fn from_graph(g: &KnowledgeGraph) -> Self {
        Self::from_labels(g.relation_labels(), g.entity_labels())
    }

    pub fn from_labels(relations: &[String], entities: &[String]) -> Self {
        let mut v = Vocabulary {
            strings: Vec::with_capacity(SPECIALS.len() + relations.len() + entities.len()),
            lookup: HashMap::new(),
            num_relations: relations.len() as u32,
            num_entities: entities.len() as u32,
        };
        for (_, s) in SPECIALS {
            v.push(s.to_owned());
        }
        for (i, l) in relations.iter().enumerate() {
            let s = v.free_name(l, "r", i);
            v.push(s);
        }
        for (i, l) in entities.iter().enumerate() {
            let s = v.free_name(l, "e", i);
            v.push(s);
        }
        v
    }

    fn free_name(&self, label: &str, prefix: &str, id: usize) -> String {
        [format!("[{label}]"), format!("[{prefix}:{label}]"), format!("[{prefix}:{label}#{id}]")]
            .into_iter()
            .find(|c| !self.lookup.contains_key(c))
            .unwrap_or_else(|| format!("[{prefix}#{id}]"))
    }

    fn push(&mut self, s: String) {
        self.lookup.insert(s.clone(), self.strings.len() as u32);
        self.strings.push(s);
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn id(&self, t: Token) -> Option<u32> {
        let base = SPECIALS.len() as u32;
        match t {
            Token::Relation(r) if r.0 < self.num_relations => Some(base + r.0),
            Token::Entity(e) if e.0 < self.num_entities => Some(base + self.num_relations + e.0),
            Token::Relation(_) | Token::Entity(_) => None,
            special => SPECIALS.iter().position(|(s, _)| *s == special).map(|p| p as u32),
        }
    }

    pub fn token(&self, id: u32) -> Option<Token> {
        let base = SPECIALS.len() as u32;
        if id < base {
            Some(SPECIALS[id as usize].0)
        } else if id < base + self.num_relations {
            Some(Token::Relation(RelationId(id - base)))
        } else if id < base + self.num_relations + self.num_entities {
            Some(Token::Entity(EntityId(id - base - self.num_relations)))
        } else {
            None
        }
    }

    pub fn token_str(&self, t: Token) -> Option<&str> {
        self.id(t).map(|i| self.strings[i as usize].as_str())
    }

    pub fn parse_token(&self, s: &str) -> Option<Token> {
        self.lookup.get(s).and_then(|&i| self.token(i))
    }

    pub fn to_strings(&self, tokens: &[Token]) -> Vec<String> {
        tokens.iter().map(|&t| self.token_str(t).map(str::to_owned).unwrap_or_else(|| format!("<?{t:?}>"))).collect()
    }

    pub fn parse_strings<S: AsRef<str>>(&self, strings: &[S]) -> Result<ActionSequence, ParseError> {
        strings
            .iter()
            .enumerate()
            .map(|(pos, s)| {
                self.parse_token(s.as_ref())
                    .ok_or_else(|| ParseError::UnknownToken { pos, token: s.as_ref().to_owned() })
            })
            .collect()
    }

    /// Parses token strings straight to a validated hypothesis.
    pub fn parse_hypothesis<S: AsRef<str>>(&self, strings: &[S]) -> Result<HypothesisGraph, ParseError> {
        actions_to_hypothesis(&self.parse_strings(strings)?)
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> {
        self.strings.iter().map(String::as_str)
    }

    /// One token per line; the line number is the id.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TokenizeError> {
        let mut w = BufWriter::new(File::create(path)?);
        for s in &self.strings {
            writeln!(w, "{s}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn encode_tokens(&self, tokens: &[Token]) -> Result<Vec<u32>, TokenizeError> {
        tokens
            .iter()
            .map(|&t| {
                self.id(t).ok_or(match t {
                    Token::Entity(e) => TokenizeError::UnknownEntity(e),
                    Token::Relation(r) => TokenizeError::UnknownRelation(r),
                    _ => unreachable!("specials are always present"),
                })
            })
            .collect()
    }
}

/// Entity token ids in ascending entity order.
pub fn encode_observation(obs: &EntitySet, vocab: &Vocabulary) -> Result<Vec<u32>, TokenizeError> {
    obs.iter().map(|e| vocab.id(Token::Entity(e)).ok_or(TokenizeError::UnknownEntity(e))).collect()
}

/// Model framing: observation tokens, `[SEP]`, actions, `[EOS]`.
pub fn frame_pair(obs: &EntitySet, actions: &[Token], vocab: &Vocabulary) -> Result<Vec<u32>, TokenizeError> {
    let mut ids = encode_observation(obs, vocab)?;
    ids.push(vocab.id(Token::Sep).expect("special"));
    ids.extend(vocab.encode_tokens(actions)?);
    ids.push(vocab.id(Token::Eos).expect("special"));
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{Expr, HypothesisPattern};
    use crate::kg::{parse_triples, TripleFormat};

    fn toy_vocab() -> Vocabulary {
        let rels: Vec<String> = ["r", "s"].map(String::from).into();
        let ents: Vec<String> = ["a", "b", "c"].map(String::from).into();
        Vocabulary::from_labels(&rels, &ents)
    }

    #[test]
    fn one_hop_serializes_relation_then_entity() {
        let h = HypothesisGraph::from_expr(&Expr::atom(1, 2)).unwrap();
        assert_eq!(
            hypothesis_to_actions(&h).unwrap(),
            vec![Token::Relation(RelationId(1)), Token::Entity(EntityId(2))]
        );
    }

    #[test]
    fn one_hop_parses() {
        let v = toy_vocab();
        let h = v.parse_hypothesis(&["[r]", "[c]"]).unwrap();
        assert_eq!(h.pattern, HypothesisPattern::P1);
        assert_eq!(h.to_expr().unwrap(), Expr::atom(0, 2));
    }

    #[test]
    fn truncated_sequence_is_incomplete() {
        let v = toy_vocab();
        let err = v.parse_hypothesis(&["[I]", "[r]", "[a]"]).unwrap_err();
        assert_eq!(err.kind(), "incomplete");
    }

    #[test]
    fn parser_errors() {
        let v = toy_vocab();
        assert_eq!(v.parse_hypothesis::<&str>(&[]).unwrap_err(), ParseError::Empty);
        assert_eq!(v.parse_hypothesis(&["[r]", "[zz]"]).unwrap_err().kind(), "unknown_token");
        assert_eq!(v.parse_hypothesis(&["[r]", "[a]", "[b]"]).unwrap_err().kind(), "trailing_tokens");
        assert_eq!(v.parse_hypothesis(&["[r]", "[EOS]"]).unwrap_err().kind(), "not_an_action");
        // a lone entity has no target
        assert_eq!(v.parse_hypothesis(&["[a]"]).unwrap_err().kind(), "invalid_structure");
        // well-formed stack discipline, but not one of the patterns
        assert_eq!(v.parse_hypothesis(&["[N]", "[r]", "[a]"]).unwrap_err().kind(), "invalid_structure");
    }

    #[test]
    fn vocabulary_layout() {
        let g = parse_triples("a\tr\tb\nb\ts\tc\n".as_bytes(), TripleFormat::LabelTsv).unwrap();
        let v = Vocabulary::from_graph(&g);
        let lines: Vec<&str> = v.lines().collect();
        assert_eq!(lines, ["[PAD]", "[BOS]", "[EOS]", "[SEP]", "[I]", "[U]", "[N]", "[r]", "[s]", "[a]", "[b]", "[c]"]);
        for id in 0..v.len() as u32 {
            let t = v.token(id).unwrap();
            assert_eq!(v.id(t), Some(id));
            assert_eq!(v.parse_token(v.token_str(t).unwrap()), Some(t));
        }
        assert_eq!(v.token(v.len() as u32), None);
    }

    #[test]
    fn colliding_labels_are_disambiguated() {
        // id-tsv graphs label entities and relations with the same numerals
        let g = parse_triples("0\t0\t1\n1\t1\t0\n".as_bytes(), TripleFormat::IdTsv).unwrap();
        let v = Vocabulary::from_graph(&g);
        let lines: Vec<&str> = v.lines().skip(7).collect();
        assert_eq!(lines, ["[0]", "[1]", "[e:0]", "[e:1]"]);
        let rels: Vec<String> = vec!["I".into()];
        let v = Vocabulary::from_labels(&rels, &[]);
        assert_eq!(v.token_str(Token::Relation(RelationId(0))), Some("[r:I]"));
    }

    #[test]
    fn observation_encoding_is_order_free() {
        let v = Vocabulary::from_labels(&[], &(0..10).map(|i| i.to_string()).collect::<Vec<_>>());
        let a: EntitySet = [5, 2, 9].map(EntityId).into_iter().collect();
        let b: EntitySet = [9, 5, 2].map(EntityId).into_iter().collect();
        assert_eq!(encode_observation(&a, &v).unwrap(), encode_observation(&b, &v).unwrap());
        assert_eq!(encode_observation(&EntitySet::singleton(EntityId(7)), &v).unwrap().len(), 1);
        let bad = EntitySet::singleton(EntityId(10));
        assert!(matches!(encode_observation(&bad, &v), Err(TokenizeError::UnknownEntity(_))));
    }

    #[test]
    fn framing() {
        let v = toy_vocab();
        let obs: EntitySet = [EntityId(1)].into_iter().collect();
        let ids = frame_pair(&obs, &[Token::Relation(RelationId(0)), Token::Entity(EntityId(0))], &v).unwrap();
        let strs: Vec<&str> = ids.iter().map(|&i| v.token_str(v.token(i).unwrap()).unwrap()).collect();
        assert_eq!(strs, ["[b]", "[SEP]", "[r]", "[a]", "[EOS]"]);
    }
}
