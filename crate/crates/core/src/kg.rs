//! Knowledge-graph storage: dense ids, adjacency indices, loading and
//! cumulative train/valid/test splits.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// A directed, labeled edge `relation(head, tail)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Triple { head: EntityId(head), relation: RelationId(relation), tail: EntityId(tail) }
    }
}

/// A set of entity ids, kept sorted and deduplicated.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntitySet(Vec<EntityId>);

impl EntitySet {
    pub fn new() -> Self {
        EntitySet(Vec::new())
    }

    pub fn singleton(e: EntityId) -> Self {
        EntitySet(vec![e])
    }

    pub fn from_unsorted(mut ids: Vec<EntityId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        EntitySet(ids)
    }

    /// All ids `0..n`.
    pub fn full(n: usize) -> Self {
        EntitySet((0..n as u32).map(EntityId).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.0.binary_search(&e).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[EntityId] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<EntityId> {
        self.0
    }

    pub fn intersection(&self, other: &EntitySet) -> EntitySet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len().min(b.len()));
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        EntitySet(out)
    }

    pub fn union(&self, other: &EntitySet) -> EntitySet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        EntitySet(out)
    }

    pub fn difference(&self, other: &EntitySet) -> EntitySet {
        let b = &other.0;
        let mut j = 0;
        let mut out = Vec::with_capacity(self.0.len());
        for &x in &self.0 {
            while j < b.len() && b[j] < x {
                j += 1;
            }
            if j >= b.len() || b[j] != x {
                out.push(x);
            }
        }
        EntitySet(out)
    }

    pub fn intersection_len(&self, other: &EntitySet) -> usize {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn is_subset(&self, other: &EntitySet) -> bool {
        self.intersection_len(other) == self.len()
    }

    /// `self ⊋ other`.
    pub fn is_strict_superset(&self, other: &EntitySet) -> bool {
        self.len() > other.len() && other.is_subset(self)
    }
}

impl FromIterator<EntityId> for EntitySet {
    fn from_iter<I: IntoIterator<Item = EntityId>>(iter: I) -> Self {
        EntitySet::from_unsorted(iter.into_iter().collect())
    }
}

/// Which member of a split a graph is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphTag {
    Train,
    Valid,
    Test,
    Other,
}

impl fmt::Display for GraphTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphTag::Train => "train",
            GraphTag::Valid => "valid",
            GraphTag::Test => "test",
            GraphTag::Other => "other",
        })
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no triples found")]
    Empty,
    #[error("{0} id {1} out of range")]
    IdOutOfRange(&'static str, u32),
    #[error("bad split directory: {0}")]
    Manifest(String),
}

impl LoadError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        LoadError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TripleFormat {
    /// `head<TAB>relation<TAB>tail` with arbitrary string labels.
    LabelTsv,
    /// The same layout with non-negative integer ids.
    IdTsv,
}

impl FromStr for TripleFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "label-tsv" | "label" => Ok(TripleFormat::LabelTsv),
            "id-tsv" | "id" => Ok(TripleFormat::IdTsv),
            other => Err(format!("unknown triple format `{other}`")),
        }
    }
}

/// Immutable directed multigraph with in/out adjacency indices.
///
/// Edges are stored sorted by `(head, relation, tail)`; `head_offsets`
/// slices that array per head. The in-index stores `(head, relation)`
/// pairs sorted by tail, sliced by `tail_offsets`.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entity_labels: Arc<[String]>,
    relation_labels: Arc<[String]>,
    edges: Vec<Triple>,
    head_offsets: Vec<u32>,
    in_pairs: Vec<(EntityId, RelationId)>,
    tail_offsets: Vec<u32>,
    tag: GraphTag,
}

impl KnowledgeGraph {
    /// Builds the indices. Duplicate triples are dropped.
    pub fn from_triples(
        entity_labels: Arc<[String]>,
        relation_labels: Arc<[String]>,
        mut edges: Vec<Triple>,
    ) -> Result<Self, LoadError> {
        let n_ent = entity_labels.len();
        let n_rel = relation_labels.len();
        for t in &edges {
            if t.head.index() >= n_ent {
                return Err(LoadError::IdOutOfRange("entity", t.head.0));
            }
            if t.tail.index() >= n_ent {
                return Err(LoadError::IdOutOfRange("entity", t.tail.0));
            }
            if t.relation.index() >= n_rel {
                return Err(LoadError::IdOutOfRange("relation", t.relation.0));
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let head_offsets = offsets(n_ent, edges.iter().map(|t| t.head.index()));

        let mut by_tail: Vec<(EntityId, EntityId, RelationId)> =
            edges.iter().map(|t| (t.tail, t.head, t.relation)).collect();
        by_tail.sort_unstable();
        let tail_offsets = offsets(n_ent, by_tail.iter().map(|x| x.0.index()));
        let in_pairs = by_tail.into_iter().map(|(_, h, r)| (h, r)).collect();

        Ok(KnowledgeGraph {
            entity_labels,
            relation_labels,
            edges,
            head_offsets,
            in_pairs,
            tail_offsets,
            tag: GraphTag::Other,
        })
    }

    /// Convenience constructor with synthetic labels `e0..`, `r0..`.
    pub fn from_id_triples(num_entities: usize, num_relations: usize, edges: Vec<Triple>) -> Result<Self, LoadError> {
        let ents: Vec<String> = (0..num_entities).map(|i| format!("e{i}")).collect();
        let rels: Vec<String> = (0..num_relations).map(|i| format!("r{i}")).collect();
        Self::from_triples(ents.into(), rels.into(), edges)
    }

    pub fn with_tag(mut self, tag: GraphTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn tag(&self) -> GraphTag {
        self.tag
    }

    pub fn num_entities(&self) -> usize {
        self.entity_labels.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Triple] {
        &self.edges
    }

    pub fn entity_labels(&self) -> &Arc<[String]> {
        &self.entity_labels
    }

    pub fn relation_labels(&self) -> &Arc<[String]> {
        &self.relation_labels
    }

    pub fn entity_label(&self, e: EntityId) -> Option<&str> {
        self.entity_labels.get(e.index()).map(String::as_str)
    }

    pub fn relation_label(&self, r: RelationId) -> Option<&str> {
        self.relation_labels.get(r.index()).map(String::as_str)
    }

    pub fn has_entity(&self, e: EntityId) -> bool {
        e.index() < self.num_entities()
    }

    pub fn has_relation(&self, r: RelationId) -> bool {
        r.index() < self.num_relations()
    }

    pub fn contains_edge(&self, t: &Triple) -> bool {
        self.out_edges(t.head).binary_search(t).is_ok()
    }

    /// All edges leaving `head`, sorted by relation then tail.
    pub fn out_edges(&self, head: EntityId) -> &[Triple] {
        match self.head_offsets.get(head.index()..=head.index() + 1) {
            Some(w) => &self.edges[w[0] as usize..w[1] as usize],
            None => &[],
        }
    }

    /// Tails reachable from `head` through `relation`, ascending.
    pub fn out_neighbors(&self, head: EntityId, relation: RelationId) -> impl Iterator<Item = EntityId> + '_ {
        let slice = self.out_edges(head);
        let lo = slice.partition_point(|t| t.relation < relation);
        let hi = slice.partition_point(|t| t.relation <= relation);
        slice[lo..hi].iter().map(|t| t.tail)
    }

    /// `{ t | ∃ h ∈ heads : relation(h, t) }`.
    pub fn out_image(&self, heads: &EntitySet, relation: RelationId) -> EntitySet {
        let mut out = Vec::new();
        for h in heads.iter() {
            out.extend(self.out_neighbors(h, relation));
        }
        if heads.len() <= 1 {
            // one head: already sorted and unique
            EntitySet(out)
        } else {
            EntitySet::from_unsorted(out)
        }
    }

    /// `(head, relation)` pairs of every edge ending at `tail`.
    pub fn in_edges(&self, tail: EntityId) -> &[(EntityId, RelationId)] {
        match self.tail_offsets.get(tail.index()..=tail.index() + 1) {
            Some(w) => &self.in_pairs[w[0] as usize..w[1] as usize],
            None => &[],
        }
    }

    /// Entities with at least one in-edge.
    pub fn entities_with_in_edges(&self) -> Vec<EntityId> {
        (0..self.num_entities() as u32).map(EntityId).filter(|&e| !self.in_edges(e).is_empty()).collect()
    }
}

fn offsets(n: usize, keys: impl Iterator<Item = usize>) -> Vec<u32> {
    let mut counts = vec![0u32; n + 1];
    for k in keys {
        counts[k + 1] += 1;
    }
    for i in 1..=n {
        counts[i] += counts[i - 1];
    }
    counts
}

/// Interns labels in first-appearance order.
#[derive(Default)]
struct Interner {
    ids: HashMap<String, u32>,
    labels: Vec<String>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.ids.insert(s.to_owned(), id);
        self.labels.push(s.to_owned());
        id
    }
}

/// Loads a triple file into an indexed graph.
pub fn load_triples(path: impl AsRef<Path>, format: TripleFormat) -> Result<KnowledgeGraph, LoadError> {
    load_triple_files(&[path], format)
}

/// Loads several triple files into one graph with shared id tables, e.g.
/// a dataset's `train.txt`, `valid.txt` and `test.txt`.
pub fn load_triple_files<P: AsRef<Path>>(paths: &[P], format: TripleFormat) -> Result<KnowledgeGraph, LoadError> {
    let mut parser = TripleParser::new(format);
    for path in paths {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| LoadError::io(path, e))?;
        parser.feed(BufReader::new(file)).map_err(|e| match e {
            LoadError::Io { source, .. } => LoadError::io(path, source),
            other => other,
        })?;
    }
    parser.finish()
}

/// Parses tab-separated triples. Blank lines are skipped; any other line
/// without exactly three non-empty fields is an error.
pub fn parse_triples<R: BufRead>(reader: R, format: TripleFormat) -> Result<KnowledgeGraph, LoadError> {
    let mut parser = TripleParser::new(format);
    parser.feed(reader)?;
    parser.finish()
}

struct TripleParser {
    format: TripleFormat,
    entities: Interner,
    relations: Interner,
    max_ent: Option<u32>,
    max_rel: Option<u32>,
    edges: Vec<Triple>,
}

impl TripleParser {
    fn new(format: TripleFormat) -> Self {
        TripleParser {
            format,
            entities: Interner::default(),
            relations: Interner::default(),
            max_ent: None,
            max_rel: None,
            edges: Vec::new(),
        }
    }

    fn feed<R: BufRead>(&mut self, reader: R) -> Result<(), LoadError> {
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| LoadError::io(Path::new("<input>"), e))?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(LoadError::Parse {
                    line: lineno,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            if fields.iter().any(|f| f.is_empty()) {
                return Err(LoadError::Parse { line: lineno, message: "empty field".into() });
            }
            let triple = match self.format {
                TripleFormat::LabelTsv => {
                    let h = self.entities.intern(fields[0]);
                    let r = self.relations.intern(fields[1]);
                    let t = self.entities.intern(fields[2]);
                    Triple::new(h, r, t)
                }
                TripleFormat::IdTsv => {
                    let parse = |s: &str| {
                        s.trim().parse::<u32>().map_err(|_| LoadError::Parse {
                            line: lineno,
                            message: format!("`{s}` is not a non-negative integer id"),
                        })
                    };
                    let (h, r, t) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                    self.max_ent = Some(self.max_ent.map_or(h.max(t), |m| m.max(h).max(t)));
                    self.max_rel = Some(self.max_rel.map_or(r, |m| m.max(r)));
                    Triple::new(h, r, t)
                }
            };
            self.edges.push(triple);
        }
        Ok(())
    }

    fn finish(self) -> Result<KnowledgeGraph, LoadError> {
        if self.edges.is_empty() {
            return Err(LoadError::Empty);
        }
        let (ents, rels): (Vec<String>, Vec<String>) = match self.format {
            TripleFormat::LabelTsv => (self.entities.labels, self.relations.labels),
            TripleFormat::IdTsv => (
                (0..=self.max_ent.unwrap_or(0)).map(|i| i.to_string()).collect(),
                (0..=self.max_rel.unwrap_or(0)).map(|i| i.to_string()).collect(),
            ),
        };
        KnowledgeGraph::from_triples(ents.into(), rels.into(), self.edges)
    }
}

/// Relative sizes of the three edge partitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: u32,
    pub valid: u32,
    pub test: u32,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 8, valid: 1, test: 1 }
    }
}

impl SplitRatios {
    /// Partition sizes for `total` edges. Validation and test sizes are
    /// rounded to nearest; training takes the remainder.
    pub fn sizes(&self, total: usize) -> SplitCounts {
        let sum = (self.train + self.valid + self.test) as f64;
        let valid = ((total as f64) * self.valid as f64 / sum).round() as usize;
        let test = ((total as f64) * self.test as f64 / sum).round() as usize;
        let valid = valid.min(total);
        let test = test.min(total - valid);
        SplitCounts { train: total - valid - test, valid, test }
    }
}

/// Number of edges first introduced by each graph of a split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// Cumulative split: train ⊂ valid ⊂ test.
#[derive(Clone, Debug)]
pub struct GraphSplit {
    pub train: KnowledgeGraph,
    pub valid: KnowledgeGraph,
    pub test: KnowledgeGraph,
    pub seed: u64,
    /// Edges new to each graph, in shuffled order.
    pub partitions: [Vec<Triple>; 3],
}

impl GraphSplit {
    pub fn counts(&self) -> SplitCounts {
        SplitCounts { train: self.partitions[0].len(), valid: self.partitions[1].len(), test: self.partitions[2].len() }
    }

    pub fn graph(&self, tag: GraphTag) -> Option<&KnowledgeGraph> {
        match tag {
            GraphTag::Train => Some(&self.train),
            GraphTag::Valid => Some(&self.valid),
            GraphTag::Test => Some(&self.test),
            GraphTag::Other => None,
        }
    }

    pub fn from_partitions(
        entity_labels: Arc<[String]>,
        relation_labels: Arc<[String]>,
        partitions: [Vec<Triple>; 3],
        seed: u64,
    ) -> Result<GraphSplit, LoadError> {
        let build = |upto: usize, tag| {
            let edges: Vec<Triple> = partitions[..=upto].iter().flatten().copied().collect();
            KnowledgeGraph::from_triples(entity_labels.clone(), relation_labels.clone(), edges).map(|g| g.with_tag(tag))
        };
        Ok(GraphSplit {
            train: build(0, GraphTag::Train)?,
            valid: build(1, GraphTag::Valid)?,
            test: build(2, GraphTag::Test)?,
            seed,
            partitions,
        })
    }

    /// Writes `entities.txt`, `relations.txt`, `{train,valid,test}.tsv` and
    /// `manifest.json` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), LoadError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| LoadError::io(dir, e))?;
        write_lines(&dir.join("entities.txt"), self.train.entity_labels.iter())?;
        write_lines(&dir.join("relations.txt"), self.train.relation_labels.iter())?;
        for (name, part) in ["train.tsv", "valid.tsv", "test.tsv"].iter().zip(&self.partitions) {
            let path = dir.join(name);
            let g = &self.train;
            write_lines(
                &path,
                part.iter().map(|t| {
                    format!(
                        "{}\t{}\t{}",
                        g.entity_labels[t.head.index()],
                        g.relation_labels[t.relation.index()],
                        g.entity_labels[t.tail.index()]
                    )
                }),
            )?;
        }
        let manifest = SplitManifest { seed: self.seed, counts: self.counts() };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| LoadError::io(&path, e))
    }

    /// Reads a directory produced by [`GraphSplit::write_dir`].
    pub fn read_dir(dir: impl AsRef<Path>) -> Result<GraphSplit, LoadError> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| LoadError::io(&path, e))?;
        let manifest: SplitManifest = serde_json::from_str(&text).map_err(|e| LoadError::Manifest(e.to_string()))?;
        let entities = read_lines(&dir.join("entities.txt"))?;
        let relations = read_lines(&dir.join("relations.txt"))?;
        let ent_ids: HashMap<&str, u32> = entities.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
        let rel_ids: HashMap<&str, u32> = relations.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();

        let mut partitions: [Vec<Triple>; 3] = Default::default();
        for (slot, name) in partitions.iter_mut().zip(["train.tsv", "valid.tsv", "test.tsv"]) {
            let path = dir.join(name);
            for (i, line) in read_lines(&path)?.iter().enumerate() {
                let f: Vec<&str> = line.split('\t').collect();
                let bad = |message: String| LoadError::Parse { line: i + 1, message };
                if f.len() != 3 {
                    return Err(bad(format!("{name}: expected 3 fields")));
                }
                let ent = |s: &str| ent_ids.get(s).copied().ok_or_else(|| bad(format!("{name}: unknown entity `{s}`")));
                let rel =
                    rel_ids.get(f[1]).copied().ok_or_else(|| bad(format!("{name}: unknown relation `{}`", f[1])))?;
                slot.push(Triple::new(ent(f[0])?, rel, ent(f[2])?));
            }
        }
        let split = Self::from_partitions(entities.into(), relations.into(), partitions, manifest.seed)?;
        if split.counts() != manifest.counts {
            return Err(LoadError::Manifest(format!(
                "manifest counts {:?} disagree with edge files {:?}",
                manifest.counts,
                split.counts()
            )));
        }
        Ok(split)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitManifest {
    seed: u64,
    counts: SplitCounts,
}

fn write_lines<S: AsRef<str>>(path: &Path, lines: impl Iterator<Item = S>) -> Result<(), LoadError> {
    let file = File::create(path).map_err(|e| LoadError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in lines {
        writeln!(w, "{}", l.as_ref()).map_err(|e| LoadError::io(path, e))?;
    }
    w.flush().map_err(|e| LoadError::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>, LoadError> {
    let text = fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
    Ok(text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l).to_owned()).collect())
}

/// Uniformly partitions the edges of `graph` under `seed` and builds the
/// cumulative train/valid/test graphs over the same id space.
pub fn split_edges(graph: &KnowledgeGraph, ratios: SplitRatios, seed: u64) -> GraphSplit {
    let mut edges = graph.edges().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);
    let sizes = ratios.sizes(edges.len());
    let test = edges.split_off(sizes.train + sizes.valid);
    let valid = edges.split_off(sizes.train);
    GraphSplit::from_partitions(graph.entity_labels.clone(), graph.relation_labels.clone(), [edges, valid, test], seed)
        .expect("edges of a valid graph stay in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> KnowledgeGraph {
        parse_triples("a\tr\tb\na\tr\tc\nd\ts\tc\n".as_bytes(), TripleFormat::LabelTsv).unwrap()
    }

    fn set(ids: &[u32]) -> EntitySet {
        ids.iter().map(|&i| EntityId(i)).collect()
    }

    #[test]
    fn load_counts() {
        let g = toy();
        assert_eq!((g.num_entities(), g.num_relations(), g.num_edges()), (4, 2, 3));
        // first-appearance order
        assert_eq!(&g.entity_labels()[..], &["a", "b", "c", "d"]);
    }

    #[test]
    fn arity_violation_reports_line() {
        let err = parse_triples("a\tr\n".as_bytes(), TripleFormat::LabelTsv).unwrap_err();
        assert!(matches!(err, LoadError::Parse { line: 1, .. }), "{err}");
        let err = parse_triples("a\tr\tb\nx\ty\n".as_bytes(), TripleFormat::LabelTsv).unwrap_err();
        assert!(matches!(err, LoadError::Parse { line: 2, .. }));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_triples("".as_bytes(), TripleFormat::LabelTsv), Err(LoadError::Empty)));
    }

    #[test]
    fn blank_lines_are_skipped() {
        let g = parse_triples("a\tr\tb\n\n\r\nb\tr\tc\n".as_bytes(), TripleFormat::LabelTsv).unwrap();
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn several_files_share_ids() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("train.txt"), dir.path().join("test.txt"));
        std::fs::write(&a, "x\tr\ty\n").unwrap();
        std::fs::write(&b, "y\tr\tz\nbad\n").unwrap();
        let err = load_triple_files(&[&a, &b], TripleFormat::LabelTsv).unwrap_err();
        assert!(matches!(err, LoadError::Parse { line: 2, .. }));
        std::fs::write(&b, "y\tr\tz").unwrap();
        let g = load_triple_files(&[&a, &b], TripleFormat::LabelTsv).unwrap();
        assert_eq!((g.num_entities(), g.num_relations(), g.num_edges()), (3, 1, 2));
    }

    #[test]
    fn duplicates_are_dropped() {
        let g = parse_triples("a\tr\tb\na\tr\tb\n".as_bytes(), TripleFormat::LabelTsv).unwrap();
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn id_format() {
        let g = parse_triples("0\t1\t4\n2\t0\t1\n".as_bytes(), TripleFormat::IdTsv).unwrap();
        assert_eq!((g.num_entities(), g.num_relations(), g.num_edges()), (5, 2, 2));
        assert!(parse_triples("0\tx\t1\n".as_bytes(), TripleFormat::IdTsv).is_err());
    }

    #[test]
    fn out_image_examples() {
        let g = toy();
        // a=0 b=1 c=2 d=3 ; r=0 s=1
        assert_eq!(g.out_image(&set(&[0]), RelationId(0)), set(&[1, 2]));
        assert_eq!(g.out_image(&EntitySet::new(), RelationId(0)), EntitySet::new());
        assert_eq!(g.out_image(&set(&[0, 3]), RelationId(1)), set(&[2]));
    }

    #[test]
    fn in_edges_examples() {
        let g = toy();
        let mut got = g.in_edges(EntityId(2)).to_vec();
        got.sort();
        assert_eq!(got, vec![(EntityId(0), RelationId(0)), (EntityId(3), RelationId(1))]);
        assert!(g.in_edges(EntityId(0)).is_empty());
    }

    #[test]
    fn indices_reconstruct_edges() {
        let g = toy();
        let mut from_in: Vec<Triple> = (0..g.num_entities() as u32)
            .flat_map(|t| {
                g.in_edges(EntityId(t)).iter().map(move |&(h, r)| Triple { head: h, relation: r, tail: EntityId(t) })
            })
            .collect();
        from_in.sort();
        assert_eq!(from_in, g.edges());
    }

    #[test]
    fn set_algebra() {
        let a = set(&[1, 2, 3, 7]);
        let b = set(&[2, 3, 4]);
        assert_eq!(a.intersection(&b), set(&[2, 3]));
        assert_eq!(a.union(&b), set(&[1, 2, 3, 4, 7]));
        assert_eq!(a.difference(&b), set(&[1, 7]));
        assert!(set(&[1, 2]).is_strict_superset(&set(&[2])));
        assert!(!set(&[2]).is_strict_superset(&set(&[2])));
    }

    #[test]
    fn split_sizes() {
        let r = SplitRatios::default();
        assert_eq!(r.sizes(10), SplitCounts { train: 8, valid: 1, test: 1 });
        assert_eq!(r.sizes(620_158), SplitCounts { train: 496_126, valid: 62_016, test: 62_016 });
        assert_eq!(r.sizes(185_164), SplitCounts { train: 148_132, valid: 18_516, test: 18_516 });
        assert_eq!(r.sizes(68_842), SplitCounts { train: 55_074, valid: 6_884, test: 6_884 });
    }

    #[test]
    fn split_is_cumulative_and_deterministic() {
        let edges: Vec<Triple> = (0..10).map(|i| Triple::new(i, 0, (i + 1) % 11)).collect();
        let g = KnowledgeGraph::from_id_triples(11, 1, edges).unwrap();
        let a = split_edges(&g, SplitRatios::default(), 3);
        let b = split_edges(&g, SplitRatios::default(), 3);
        assert_eq!(a.partitions, b.partitions);
        assert_eq!(a.counts(), SplitCounts { train: 8, valid: 1, test: 1 });
        assert!(a.train.edges().iter().all(|t| a.valid.contains_edge(t)));
        assert!(a.valid.edges().iter().all(|t| a.test.contains_edge(t)));
        assert_eq!(a.test.edges(), g.edges());
        assert_eq!(a.train.num_entities(), 11);
    }

    #[test]
    fn split_dir_round_trip() {
        let g = toy();
        let s = split_edges(&g, SplitRatios { train: 1, valid: 1, test: 1 }, 9);
        let dir = tempfile::tempdir().unwrap();
        s.write_dir(dir.path()).unwrap();
        let back = GraphSplit::read_dir(dir.path()).unwrap();
        assert_eq!(back.partitions, s.partitions);
        assert_eq!(back.seed, 9);
        assert_eq!(back.test.edges(), g.edges());
    }
}
