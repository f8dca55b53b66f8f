//! The hypothesis language: operator trees over anchors, in both the
//! node/edge graph form used for interchange and the recursive [`Expr`]
//! form used for evaluation.
//!
//! A hypothesis graph is a plan tree. Every non-anchor node computes an
//! entity set from its inputs; all of a node's in-edges carry that node's
//! operator. The root is the target variable. Anchors are leaves.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, RelationId};
use crate::tokenizer::Token;

pub type NodeId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Anchor(EntityId),
    Variable,
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HypothesisNode {
    pub id: NodeId,
    pub kind: NodeKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Projection(RelationId),
    Intersection,
    Union,
    Negation,
}

impl EdgeLabel {
    fn arity(self) -> usize {
        match self {
            EdgeLabel::Projection(_) | EdgeLabel::Negation => 1,
            EdgeLabel::Intersection | EdgeLabel::Union => 2,
        }
    }
}

/// `child` feeds `parent`; the label is `parent`'s operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HypothesisEdge {
    pub child: NodeId,
    pub parent: NodeId,
    pub label: EdgeLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HypothesisPattern {
    P1,
    P2,
    I2,
    I3,
    IP,
    PI,
    U2,
    UP,
    IN2,
    IN3,
    INP,
    PNI,
    PIN,
}

impl HypothesisPattern {
    pub const ALL: [HypothesisPattern; 13] = [
        HypothesisPattern::P1,
        HypothesisPattern::P2,
        HypothesisPattern::I2,
        HypothesisPattern::I3,
        HypothesisPattern::IP,
        HypothesisPattern::PI,
        HypothesisPattern::U2,
        HypothesisPattern::UP,
        HypothesisPattern::IN2,
        HypothesisPattern::IN3,
        HypothesisPattern::INP,
        HypothesisPattern::PNI,
        HypothesisPattern::PIN,
    ];

    pub fn name(self) -> &'static str {
        use HypothesisPattern::*;
        match self {
            P1 => "1p",
            P2 => "2p",
            I2 => "2i",
            I3 => "3i",
            IP => "ip",
            PI => "pi",
            U2 => "2u",
            UP => "up",
            IN2 => "2in",
            IN3 => "3in",
            INP => "inp",
            PNI => "pni",
            PIN => "pin",
        }
    }

    /// Negation-free patterns.
    pub fn is_epfo(self) -> bool {
        use HypothesisPattern::*;
        !matches!(self, IN2 | IN3 | INP | PNI | PIN)
    }

    /// The operator tree every hypothesis of this pattern instantiates.
    pub fn shape(self) -> Shape {
        use HypothesisPattern::*;
        use Shape::*;
        let pe = || Shape::p(E);
        let ppe = || Shape::p(Shape::p(E));
        match self {
            P1 => pe(),
            P2 => ppe(),
            I2 => Shape::i(pe(), pe()),
            I3 => Shape::i(Shape::i(pe(), pe()), pe()),
            IP => Shape::p(Shape::i(pe(), pe())),
            PI => Shape::i(ppe(), pe()),
            U2 => Shape::u(pe(), pe()),
            UP => Shape::p(Shape::u(pe(), pe())),
            IN2 => Shape::i(pe(), Shape::n(pe())),
            IN3 => Shape::i(Shape::i(pe(), pe()), Shape::n(pe())),
            INP => Shape::p(Shape::i(pe(), Shape::n(pe()))),
            PNI => Shape::i(Shape::n(ppe()), pe()),
            PIN => Shape::i(ppe(), Shape::n(pe())),
        }
    }
}

impl fmt::Display for HypothesisPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HypothesisPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HypothesisPattern::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown hypothesis pattern `{s}`"))
    }
}

impl Serialize for HypothesisPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for HypothesisPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ungrounded operator tree: `E` marks an anchor slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shape {
    E,
    P(Box<Shape>),
    I(Box<Shape>, Box<Shape>),
    U(Box<Shape>, Box<Shape>),
    N(Box<Shape>),
}

impl Shape {
    fn p(s: Shape) -> Shape {
        Shape::P(Box::new(s))
    }
    fn i(a: Shape, b: Shape) -> Shape {
        Shape::I(Box::new(a), Box::new(b))
    }
    fn u(a: Shape, b: Shape) -> Shape {
        Shape::U(Box::new(a), Box::new(b))
    }
    fn n(s: Shape) -> Shape {
        Shape::N(Box::new(s))
    }
}

/// Recursive form of a hypothesis.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Anchor(EntityId),
    Project(RelationId, Box<Expr>),
    Intersect(Box<Expr>, Box<Expr>),
    Union(Box<Expr>, Box<Expr>),
    Negate(Box<Expr>),
}

impl Expr {
    pub fn anchor(e: u32) -> Expr {
        Expr::Anchor(EntityId(e))
    }

    pub fn project(r: u32, x: Expr) -> Expr {
        Expr::Project(RelationId(r), Box::new(x))
    }

    pub fn intersect(a: Expr, b: Expr) -> Expr {
        Expr::Intersect(Box::new(a), Box::new(b))
    }

    pub fn union(a: Expr, b: Expr) -> Expr {
        Expr::Union(Box::new(a), Box::new(b))
    }

    pub fn negate(x: Expr) -> Expr {
        Expr::Negate(Box::new(x))
    }

    /// `r(e, V?)`.
    pub fn atom(r: u32, e: u32) -> Expr {
        Expr::project(r, Expr::anchor(e))
    }

    pub fn is_negation(&self) -> bool {
        matches!(self, Expr::Negate(_))
    }

    /// Pre-order operator/entity tokens, children in stored order.
    pub fn tokens(&self) -> Vec<Token> {
        let mut out = Vec::new();
        self.push_tokens(&mut out);
        out
    }

    fn push_tokens(&self, out: &mut Vec<Token>) {
        match self {
            Expr::Anchor(e) => out.push(Token::Entity(*e)),
            Expr::Project(r, x) => {
                out.push(Token::Relation(*r));
                x.push_tokens(out);
            }
            Expr::Intersect(a, b) => {
                out.push(Token::Intersection);
                a.push_tokens(out);
                b.push_tokens(out);
            }
            Expr::Union(a, b) => {
                out.push(Token::Union);
                a.push_tokens(out);
                b.push_tokens(out);
            }
            Expr::Negate(x) => {
                out.push(Token::Negation);
                x.push_tokens(out);
            }
        }
    }

    /// Orders every merge's branches by serialized tokens, negated branch
    /// last.
    pub fn canonicalize(self) -> Expr {
        match self {
            Expr::Anchor(_) => self,
            Expr::Project(r, x) => Expr::Project(r, Box::new(x.canonicalize())),
            Expr::Negate(x) => Expr::Negate(Box::new(x.canonicalize())),
            Expr::Intersect(a, b) => {
                let (a, b) = order_branches(a.canonicalize(), b.canonicalize());
                Expr::intersect(a, b)
            }
            Expr::Union(a, b) => {
                let (a, b) = order_branches(a.canonicalize(), b.canonicalize());
                Expr::union(a, b)
            }
        }
    }

    pub fn anchors(&self) -> Vec<EntityId> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Anchor(x) = e {
                out.push(*x);
            }
        });
        out
    }

    pub fn relations(&self) -> Vec<RelationId> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Project(r, _) = e {
                out.push(*r);
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Anchor(_) => {}
            Expr::Project(_, x) | Expr::Negate(x) => x.visit(f),
            Expr::Intersect(a, b) | Expr::Union(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Number of nodes in the plan tree.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Which of the 13 patterns this tree instantiates, if any. Branch
    /// order of merges is irrelevant, as is the nesting of a three-way
    /// conjunction.
    pub fn pattern(&self) -> Option<HypothesisPattern> {
        use HypothesisPattern::*;
        match self {
            Expr::Anchor(_) | Expr::Negate(_) => None,
            Expr::Project(_, x) => match x.as_ref() {
                Expr::Anchor(_) => Some(P1),
                e if is_pe(e) => Some(P2),
                Expr::Intersect(..) => {
                    let conj = conjuncts(x);
                    match classify_conjuncts(&conj)? {
                        (2, 0, 0, 0) => Some(IP),
                        (1, 0, 1, 0) => Some(INP),
                        _ => None,
                    }
                }
                Expr::Union(a, b) if is_pe(a) && is_pe(b) => Some(UP),
                _ => None,
            },
            Expr::Union(a, b) if is_pe(a) && is_pe(b) => Some(U2),
            Expr::Union(..) => None,
            Expr::Intersect(..) => {
                let conj = conjuncts(self);
                // (pe, ppe, npe, nppe)
                match classify_conjuncts(&conj)? {
                    (2, 0, 0, 0) => Some(I2),
                    (3, 0, 0, 0) => Some(I3),
                    (1, 0, 1, 0) => Some(IN2),
                    (2, 0, 1, 0) => Some(IN3),
                    (1, 1, 0, 0) => Some(PI),
                    (0, 1, 1, 0) => Some(PIN),
                    (1, 0, 0, 1) => Some(PNI),
                    _ => None,
                }
            }
        }
    }
}

fn order_branches(a: Expr, b: Expr) -> (Expr, Expr) {
    let key = |x: &Expr| (x.is_negation(), x.tokens());
    if key(&b) < key(&a) {
        (b, a)
    } else {
        (a, b)
    }
}

fn is_pe(e: &Expr) -> bool {
    matches!(e, Expr::Project(_, x) if matches!(x.as_ref(), Expr::Anchor(_)))
}

fn is_ppe(e: &Expr) -> bool {
    matches!(e, Expr::Project(_, x) if is_pe(x))
}

fn conjuncts(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Intersect(a, b) => {
            let mut v = conjuncts(a);
            v.extend(conjuncts(b));
            v
        }
        other => vec![other],
    }
}

/// Counts of conjunct kinds `(pe, ppe, ¬pe, ¬ppe)`; `None` if any conjunct
/// is none of those.
fn classify_conjuncts(conj: &[&Expr]) -> Option<(u8, u8, u8, u8)> {
    let mut c = (0, 0, 0, 0);
    for e in conj {
        match e {
            x if is_pe(x) => c.0 += 1,
            x if is_ppe(x) => c.1 += 1,
            Expr::Negate(x) if is_pe(x) => c.2 += 1,
            Expr::Negate(x) if is_ppe(x) => c.3 += 1,
            _ => return None,
        }
    }
    Some(c)
}

/// A structural problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("no nodes")]
    Empty,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("expected exactly one target node, found {0}")]
    TargetCount(usize),
    #[error("root {0} is not the target node")]
    RootNotTarget(NodeId),
    #[error("edge {child}->{parent} references a missing node")]
    DanglingEdge { child: NodeId, parent: NodeId },
    #[error("node {0} is not connected to the target")]
    DanglingNode(NodeId),
    #[error("node {0} has more than one parent")]
    MultipleParents(NodeId),
    #[error("target node {0} feeds another node")]
    TargetHasParent(NodeId),
    #[error("anchor node {0} has inputs")]
    AnchorWithInputs(NodeId),
    #[error("node {0} has in-edges with different operators")]
    MixedLabels(NodeId),
    #[error("arity: node {node} expects {expected} inputs, found {found}")]
    Arity { node: NodeId, expected: usize, found: usize },
    #[error("cycle through node {0}")]
    Cycle(NodeId),
    #[error("structure matches none of the 13 hypothesis patterns")]
    UnknownPattern,
    #[error("declared pattern {declared} but structure is {found}")]
    PatternMismatch { declared: HypothesisPattern, found: HypothesisPattern },
}

impl Violation {
    /// Short machine tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::Empty => "empty",
            Violation::DuplicateNode(_) => "duplicate_node",
            Violation::TargetCount(_) | Violation::RootNotTarget(_) => "target",
            Violation::DanglingEdge { .. } | Violation::DanglingNode(_) => "dangling",
            Violation::MultipleParents(_) | Violation::TargetHasParent(_) => "not_a_tree",
            Violation::AnchorWithInputs(_) | Violation::Arity { .. } => "arity",
            Violation::MixedLabels(_) => "mixed_labels",
            Violation::Cycle(_) => "cycle",
            Violation::UnknownPattern => "unknown_pattern",
            Violation::PatternMismatch { .. } => "pattern_mismatch",
        }
    }
}

/// A validated hypothesis in node/edge form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HypothesisGraph {
    pub nodes: Vec<HypothesisNode>,
    pub edges: Vec<HypothesisEdge>,
    pub root: NodeId,
    pub pattern: HypothesisPattern,
}

impl HypothesisGraph {
    /// Builds the canonical graph of `expr`: branches ordered as in
    /// [`Expr::canonicalize`], nodes numbered in pre-order.
    pub fn from_expr(expr: &Expr) -> Result<HypothesisGraph, Vec<Violation>> {
        let expr = expr.clone().canonicalize();
        let pattern = expr.pattern().ok_or_else(|| vec![Violation::UnknownPattern])?;
        let mut nodes = Vec::with_capacity(expr.size());
        let mut edges = Vec::with_capacity(expr.size().saturating_sub(1));
        number(&expr, None, &mut nodes, &mut edges);
        Ok(HypothesisGraph { nodes, edges, root: 0, pattern })
    }

    /// Validates raw parts and infers the pattern.
    pub fn assemble(
        nodes: Vec<HypothesisNode>,
        edges: Vec<HypothesisEdge>,
        root: NodeId,
    ) -> Result<HypothesisGraph, Vec<Violation>> {
        let expr = structure_to_expr(&nodes, &edges, root)?;
        let pattern = expr.pattern().ok_or_else(|| vec![Violation::UnknownPattern])?;
        Ok(HypothesisGraph { nodes, edges, root, pattern })
    }

    /// The recursive form, children ordered by node id.
    pub fn to_expr(&self) -> Result<Expr, Vec<Violation>> {
        structure_to_expr(&self.nodes, &self.edges, self.root)
    }

    /// This hypothesis renumbered into canonical form.
    pub fn canonical(&self) -> Result<HypothesisGraph, Vec<Violation>> {
        HypothesisGraph::from_expr(&self.to_expr()?)
    }

    /// JSON of the canonical form; a structurally invalid graph is written
    /// as-is.
    pub fn to_canonical_json(&self) -> String {
        let canonical = self.canonical().unwrap_or_else(|_| self.clone());
        serde_json::to_string(&HypothesisJson::from(&canonical)).expect("hypothesis serializes")
    }

    pub fn from_json_str(s: &str) -> Result<HypothesisGraph, HypothesisJsonError> {
        let raw: HypothesisJson = serde_json::from_str(s).map_err(|e| HypothesisJsonError::Syntax(e.to_string()))?;
        HypothesisGraph::try_from(raw)
    }
}

fn number(
    e: &Expr,
    parent: Option<(NodeId, EdgeLabel)>,
    nodes: &mut Vec<HypothesisNode>,
    edges: &mut Vec<HypothesisEdge>,
) {
    let id = nodes.len() as NodeId;
    let kind = match (e, parent) {
        (Expr::Anchor(x), _) => NodeKind::Anchor(*x),
        (_, None) => NodeKind::Target,
        _ => NodeKind::Variable,
    };
    nodes.push(HypothesisNode { id, kind });
    if let Some((p, label)) = parent {
        edges.push(HypothesisEdge { child: id, parent: p, label });
    }
    match e {
        Expr::Anchor(_) => {}
        Expr::Project(r, x) => number(x, Some((id, EdgeLabel::Projection(*r))), nodes, edges),
        Expr::Negate(x) => number(x, Some((id, EdgeLabel::Negation)), nodes, edges),
        Expr::Intersect(a, b) => {
            number(a, Some((id, EdgeLabel::Intersection)), nodes, edges);
            number(b, Some((id, EdgeLabel::Intersection)), nodes, edges);
        }
        Expr::Union(a, b) => {
            number(a, Some((id, EdgeLabel::Union)), nodes, edges);
            number(b, Some((id, EdgeLabel::Union)), nodes, edges);
        }
    }
}

/// Checks tree structure, arity and labels, returning the recursive form.
fn structure_to_expr(nodes: &[HypothesisNode], edges: &[HypothesisEdge], root: NodeId) -> Result<Expr, Vec<Violation>> {
    let mut v = Vec::new();
    if nodes.is_empty() {
        return Err(vec![Violation::Empty]);
    }
    let mut index: HashMap<NodeId, usize> = HashMap::with_capacity(nodes.len());
    for (i, n) in nodes.iter().enumerate() {
        if index.insert(n.id, i).is_some() {
            v.push(Violation::DuplicateNode(n.id));
        }
    }
    let targets = nodes.iter().filter(|n| n.kind == NodeKind::Target).count();
    if targets != 1 {
        v.push(Violation::TargetCount(targets));
    }
    match index.get(&root) {
        Some(&i) if nodes[i].kind == NodeKind::Target => {}
        _ => v.push(Violation::RootNotTarget(root)),
    }

    let mut parent: Vec<Option<usize>> = vec![None; nodes.len()];
    let mut children: Vec<Vec<(NodeId, EdgeLabel)>> = vec![Vec::new(); nodes.len()];
    for e in edges {
        let (Some(&c), Some(&p)) = (index.get(&e.child), index.get(&e.parent)) else {
            v.push(Violation::DanglingEdge { child: e.child, parent: e.parent });
            continue;
        };
        if parent[c].is_some() {
            v.push(Violation::MultipleParents(e.child));
        }
        parent[c] = Some(p);
        children[p].push((e.child, e.label));
    }

    for (i, n) in nodes.iter().enumerate() {
        let ch = &children[i];
        match n.kind {
            NodeKind::Target if parent[i].is_some() => v.push(Violation::TargetHasParent(n.id)),
            NodeKind::Anchor(_) if !ch.is_empty() => v.push(Violation::AnchorWithInputs(n.id)),
            _ => {}
        }
        if n.kind != NodeKind::Target && parent[i].is_none() {
            v.push(Violation::DanglingNode(n.id));
        }
        if !matches!(n.kind, NodeKind::Anchor(_)) {
            match ch.first() {
                None => v.push(Violation::Arity { node: n.id, expected: 1, found: 0 }),
                Some(&(_, label)) => {
                    if ch.iter().any(|&(_, l)| l != label) {
                        v.push(Violation::MixedLabels(n.id));
                    } else if ch.len() != label.arity() {
                        v.push(Violation::Arity { node: n.id, expected: label.arity(), found: ch.len() });
                    }
                }
            }
        }
    }

    // Walking parent pointers must reach a parentless node.
    for start in 0..nodes.len() {
        let mut cur = start;
        let mut steps = 0;
        while let Some(p) = parent[cur] {
            cur = p;
            steps += 1;
            if steps > nodes.len() {
                v.push(Violation::Cycle(nodes[start].id));
                break;
            }
        }
        if steps > nodes.len() {
            break;
        }
    }

    if !v.is_empty() {
        return Err(v);
    }
    for ch in children.iter_mut() {
        ch.sort_by_key(|&(id, _)| id);
    }
    let root_idx = index[&root];
    Ok(build_expr(root_idx, nodes, &children, &index))
}

fn build_expr(
    i: usize,
    nodes: &[HypothesisNode],
    children: &[Vec<(NodeId, EdgeLabel)>],
    index: &HashMap<NodeId, usize>,
) -> Expr {
    if let NodeKind::Anchor(e) = nodes[i].kind {
        return Expr::Anchor(e);
    }
    let ch = &children[i];
    let sub = |k: usize| Box::new(build_expr(index[&ch[k].0], nodes, children, index));
    match ch[0].1 {
        EdgeLabel::Projection(r) => Expr::Project(r, sub(0)),
        EdgeLabel::Negation => Expr::Negate(sub(0)),
        EdgeLabel::Intersection => Expr::Intersect(sub(0), sub(1)),
        EdgeLabel::Union => Expr::Union(sub(0), sub(1)),
    }
}

/// Full check: structure, pattern grammar, and the declared pattern.
pub fn validate(h: &HypothesisGraph) -> Result<(), Vec<Violation>> {
    let expr = h.to_expr()?;
    match expr.pattern() {
        None => Err(vec![Violation::UnknownPattern]),
        Some(p) if p != h.pattern => Err(vec![Violation::PatternMismatch { declared: h.pattern, found: p }]),
        Some(_) => Ok(()),
    }
}

/// The pattern of a hypothesis as determined from its structure.
pub fn pattern_of(h: &HypothesisGraph) -> Result<HypothesisPattern, Vec<Violation>> {
    h.to_expr()?.pattern().ok_or_else(|| vec![Violation::UnknownPattern])
}

#[derive(Debug, Error)]
pub enum HypothesisJsonError {
    #[error("malformed hypothesis json: {0}")]
    Syntax(String),
    #[error("invalid hypothesis: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Wire form: `{pattern, nodes:[{id,kind,entity?}], edges:[{child,parent,label,relation?}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisJson {
    pub pattern: HypothesisPattern,
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<EdgeJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: NodeId,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub entity: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeJson {
    pub child: NodeId,
    pub parent: NodeId,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relation: Option<u32>,
}

impl From<&HypothesisGraph> for HypothesisJson {
    fn from(h: &HypothesisGraph) -> Self {
        let nodes = h
            .nodes
            .iter()
            .map(|n| {
                let (kind, entity) = match n.kind {
                    NodeKind::Anchor(e) => ("anchor", Some(e.0)),
                    NodeKind::Variable => ("variable", None),
                    NodeKind::Target => ("target", None),
                };
                NodeJson { id: n.id, kind: kind.into(), entity }
            })
            .collect();
        let edges = h
            .edges
            .iter()
            .map(|e| {
                let (label, relation) = match e.label {
                    EdgeLabel::Projection(r) => ("projection", Some(r.0)),
                    EdgeLabel::Intersection => ("intersection", None),
                    EdgeLabel::Union => ("union", None),
                    EdgeLabel::Negation => ("negation", None),
                };
                EdgeJson { child: e.child, parent: e.parent, label: label.into(), relation }
            })
            .collect();
        HypothesisJson { pattern: h.pattern, nodes, edges }
    }
}

impl TryFrom<HypothesisJson> for HypothesisGraph {
    type Error = HypothesisJsonError;

    fn try_from(raw: HypothesisJson) -> Result<Self, Self::Error> {
        let syntax = |m: String| HypothesisJsonError::Syntax(m);
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for n in &raw.nodes {
            let kind = match (n.kind.as_str(), n.entity) {
                ("anchor", Some(e)) => NodeKind::Anchor(EntityId(e)),
                ("anchor", None) => return Err(syntax(format!("anchor node {} has no entity", n.id))),
                ("variable", _) => NodeKind::Variable,
                ("target", _) => NodeKind::Target,
                (k, _) => return Err(syntax(format!("unknown node kind `{k}`"))),
            };
            nodes.push(HypothesisNode { id: n.id, kind });
        }
        let mut edges = Vec::with_capacity(raw.edges.len());
        for e in &raw.edges {
            let label = match (e.label.as_str(), e.relation) {
                ("projection", Some(r)) => EdgeLabel::Projection(RelationId(r)),
                ("projection", None) => return Err(syntax("projection edge without relation".into())),
                ("intersection", _) => EdgeLabel::Intersection,
                ("union", _) => EdgeLabel::Union,
                ("negation", _) => EdgeLabel::Negation,
                (l, _) => return Err(syntax(format!("unknown edge label `{l}`"))),
            };
            edges.push(HypothesisEdge { child: e.child, parent: e.parent, label });
        }
        let root = nodes
            .iter()
            .find(|n| n.kind == NodeKind::Target)
            .map(|n| n.id)
            .ok_or(HypothesisJsonError::Invalid(vec![Violation::TargetCount(0)]))?;
        let h = HypothesisGraph { nodes, edges, root, pattern: raw.pattern };
        validate(&h).map_err(HypothesisJsonError::Invalid)?;
        Ok(h)
    }
}

impl Serialize for HypothesisGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        HypothesisJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HypothesisGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = HypothesisJson::deserialize(d)?;
        HypothesisGraph::try_from(raw).map_err(serde::de::Error::custom)
    }
}
