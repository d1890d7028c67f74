//! Scene graph formalism: entity and predicate vocabularies, per-frame graphs,
//! and take containers.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The closed predicate vocabulary. Declaration order is the canonical
/// enumeration order used for tie-breaking and report layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationClass {
    Assist,
    Cement,
    Clean,
    CloseTo,
    Cut,
    Drill,
    Hammer,
    Hold,
    LyingOn,
    Operate,
    Prepare,
    Saw,
    Suture,
    Touch,
}

impl RelationClass {
    pub const COUNT: usize = 14;

    pub const ALL: [RelationClass; Self::COUNT] = [
        RelationClass::Assist,
        RelationClass::Cement,
        RelationClass::Clean,
        RelationClass::CloseTo,
        RelationClass::Cut,
        RelationClass::Drill,
        RelationClass::Hammer,
        RelationClass::Hold,
        RelationClass::LyingOn,
        RelationClass::Operate,
        RelationClass::Prepare,
        RelationClass::Saw,
        RelationClass::Suture,
        RelationClass::Touch,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            RelationClass::Assist => "Assist",
            RelationClass::Cement => "Cement",
            RelationClass::Clean => "Clean",
            RelationClass::CloseTo => "CloseTo",
            RelationClass::Cut => "Cut",
            RelationClass::Drill => "Drill",
            RelationClass::Hammer => "Hammer",
            RelationClass::Hold => "Hold",
            RelationClass::LyingOn => "LyingOn",
            RelationClass::Operate => "Operate",
            RelationClass::Prepare => "Prepare",
            RelationClass::Saw => "Saw",
            RelationClass::Suture => "Suture",
            RelationClass::Touch => "Touch",
        }
    }

    /// Predicates whose direction carries no meaning.
    pub fn is_symmetric(self) -> bool {
        self == RelationClass::CloseTo
    }
}

impl fmt::Display for RelationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::BadSchema(format!("unknown predicate {s:?}")))
    }
}

/// Entity class name from a configurable vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityClass(String);

impl EntityClass {
    pub const HUMAN: &'static str = "human";
    pub const PATIENT: &'static str = "patient";
    pub const ANESTHESIA_MACHINE: &'static str = "anesthesia_machine";
    pub const OPERATING_TABLE: &'static str = "operating_table";
    pub const INSTRUMENT_TABLE: &'static str = "instrument_table";
    pub const SECONDARY_TABLE: &'static str = "secondary_table";
    pub const INSTRUMENT: &'static str = "instrument";

    pub const BUILTINS: [&'static str; 7] = [
        Self::HUMAN,
        Self::PATIENT,
        Self::ANESTHESIA_MACHINE,
        Self::OPERATING_TABLE,
        Self::INSTRUMENT_TABLE,
        Self::SECONDARY_TABLE,
        Self::INSTRUMENT,
    ];

    pub fn new(name: impl Into<String>) -> Self {
        EntityClass(name.into())
    }

    pub fn human() -> Self {
        Self::new(Self::HUMAN)
    }

    pub fn instrument() -> Self {
        Self::new(Self::INSTRUMENT)
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// Only the instrument class is virtual.
    pub fn is_virtual(&self) -> bool {
        self.0 == Self::INSTRUMENT
    }

    pub fn is_human(&self) -> bool {
        self.0 == Self::HUMAN || self.0 == Self::PATIENT
    }

    /// Physical, non-human scene objects.
    pub fn is_equipment(&self) -> bool {
        !self.is_human() && !self.is_virtual()
    }
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The closed set of entity classes admitted in one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityVocabulary {
    names: BTreeSet<String>,
}

impl Default for EntityVocabulary {
    fn default() -> Self {
        EntityVocabulary {
            names: EntityClass::BUILTINS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl EntityVocabulary {
    /// Builtins plus `extra`. Extra names must be non-empty identifiers.
    pub fn with_extra<I, S>(extra: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self::default();
        for name in extra {
            let name = name.as_ref();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::BadConfig(format!("invalid entity class name {name:?}")));
            }
            vocab.names.insert(name.to_string());
        }
        Ok(vocab)
    }

    pub fn contains(&self, class: &EntityClass) -> bool {
        self.names.contains(class.name())
    }

    pub fn check(&self, class: &EntityClass) -> Result<()> {
        if self.contains(class) {
            Ok(())
        } else {
            Err(Error::BadSchema(format!("entity class {class} not in vocabulary")))
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

pub type NodeId = u32;
pub type InstanceId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub class: EntityClass,
    pub instance_id: Option<InstanceId>,
}

/// A directed predicate triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    #[serde(rename = "sub")]
    pub subject: NodeId,
    #[serde(rename = "pred")]
    pub predicate: RelationClass,
    #[serde(rename = "obj")]
    pub object: NodeId,
}

impl Edge {
    pub fn new(subject: NodeId, predicate: RelationClass, object: NodeId) -> Self {
        Edge { subject, predicate, object }
    }

    /// Symmetric predicates are stored with the lower node id as subject.
    pub fn canonical(self) -> Self {
        if self.predicate.is_symmetric() && self.subject > self.object {
            Edge::new(self.object, self.predicate, self.subject)
        } else {
            self
        }
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonical()
    }

    pub fn touches(&self, node: NodeId) -> bool {
        self.subject == node || self.object == node
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.predicate, self.object)
    }
}

/// One frame's scene graph `G = (N, E)` with `E ⊆ N × R × N`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SceneGraph {
    pub frame_id: u64,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl SceneGraph {
    pub fn new(frame_id: u64) -> Self {
        SceneGraph { frame_id, nodes: Vec::new(), edges: Vec::new() }
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    /// Inserts a canonicalized edge unless it is already present.
    /// Returns whether the edge was new.
    pub fn add_edge(&mut self, edge: Edge) -> bool {
        let edge = edge.canonical();
        if self.edges.contains(&edge) {
            false
        } else {
            self.edges.push(edge);
            true
        }
    }

    /// Sorts nodes by id and edges by (subject, predicate, object).
    pub fn sort(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        self.edges.sort();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphViolation {
    DuplicateNode(NodeId),
    DanglingEndpoint { edge: Edge, node: NodeId },
    DuplicateTriple(Edge),
    SelfLoop(Edge),
    NonCanonicalSymmetric(Edge),
}

impl fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphViolation::DuplicateNode(id) => write!(f, "duplicate-node({id})"),
            GraphViolation::DanglingEndpoint { node, .. } => write!(f, "dangling-endpoint({node})"),
            GraphViolation::DuplicateTriple(e) => write!(f, "duplicate-triple{e}"),
            GraphViolation::SelfLoop(e) => write!(f, "self-loop{e}"),
            GraphViolation::NonCanonicalSymmetric(e) => write!(f, "non-canonical-symmetric{e}"),
        }
    }
}

/// Lists every invariant violation in `g`; an empty list means the graph is
/// well formed.
pub fn validate_graph(g: &SceneGraph) -> Vec<GraphViolation> {
    let mut violations = Vec::new();
    let mut ids = BTreeSet::new();
    for node in &g.nodes {
        if !ids.insert(node.id) {
            violations.push(GraphViolation::DuplicateNode(node.id));
        }
    }
    let mut seen = BTreeSet::new();
    for edge in &g.edges {
        for endpoint in [edge.subject, edge.object] {
            if !ids.contains(&endpoint) {
                violations.push(GraphViolation::DanglingEndpoint { edge: *edge, node: endpoint });
            }
        }
        if edge.subject == edge.object {
            violations.push(GraphViolation::SelfLoop(*edge));
        }
        if !edge.is_canonical() {
            violations.push(GraphViolation::NonCanonicalSymmetric(*edge));
        }
        if !seen.insert(edge.canonical()) {
            violations.push(GraphViolation::DuplicateTriple(*edge));
        }
    }
    violations
}

/// Outcome of comparing a predicted graph against ground truth.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeDiff {
    /// Predicted edges (prediction node ids) confirmed by ground truth.
    pub true_positives: Vec<Edge>,
    /// Predicted edges with no ground-truth counterpart.
    pub false_positives: Vec<Edge>,
    /// Ground-truth edges (ground-truth node ids) nobody predicted.
    pub false_negatives: Vec<Edge>,
}

/// Compares edges under a partial map from predicted to ground-truth node
/// ids. A predicted triple only counts when both endpoints map onto nodes
/// present in `gt` and the mapped triple exists there.
pub fn graph_edge_diff(
    gt: &SceneGraph,
    pred: &SceneGraph,
    correspondence: &BTreeMap<NodeId, NodeId>,
) -> Result<EdgeDiff> {
    let mut inverse: HashMap<NodeId, NodeId> = HashMap::new();
    for (&p, &g) in correspondence {
        if let Some(&first) = inverse.get(&g) {
            return Err(Error::AmbiguousCorrespondence { first, second: p, target: g });
        }
        inverse.insert(g, p);
    }

    let gt_nodes: BTreeSet<NodeId> = gt.nodes.iter().map(|n| n.id).collect();
    let mut unmatched: Vec<Edge> = Vec::with_capacity(gt.edges.len());
    let mut gt_index: HashMap<Edge, Vec<usize>> = HashMap::new();
    for e in &gt.edges {
        gt_index.entry(e.canonical()).or_default().push(unmatched.len());
        unmatched.push(*e);
    }
    let mut matched = vec![false; unmatched.len()];

    let map = |id: NodeId| correspondence.get(&id).copied().filter(|g| gt_nodes.contains(g));
    let mut diff = EdgeDiff::default();
    for e in &pred.edges {
        let hit = match (map(e.subject), map(e.object)) {
            (Some(s), Some(o)) => {
                let key = Edge::new(s, e.predicate, o).canonical();
                gt_index
                    .get(&key)
                    .and_then(|slots| slots.iter().copied().find(|&i| !matched[i]))
            }
            _ => None,
        };
        match hit {
            Some(i) => {
                matched[i] = true;
                diff.true_positives.push(*e);
            }
            None => diff.false_positives.push(*e),
        }
    }
    diff.false_negatives = unmatched
        .into_iter()
        .zip(matched)
        .filter_map(|(e, m)| (!m).then_some(e))
        .collect();
    Ok(diff)
}

/// Identity correspondence over a graph's node ids.
pub fn identity_correspondence(g: &SceneGraph) -> BTreeMap<NodeId, NodeId> {
    g.nodes.iter().map(|n| (n.id, n.id)).collect()
}

/// Correspondence pairing nodes that carry the same instance id.
pub fn instance_correspondence(gt: &SceneGraph, pred: &SceneGraph) -> BTreeMap<NodeId, NodeId> {
    let by_instance: HashMap<InstanceId, NodeId> = gt
        .nodes
        .iter()
        .filter_map(|n| n.instance_id.map(|i| (i, n.id)))
        .collect();
    pred.nodes
        .iter()
        .filter_map(|n| {
            let inst = n.instance_id?;
            by_instance.get(&inst).map(|&g| (n.id, g))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Number of takes per split; the standard plan is six/two/two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan { train: 6, val: 2, test: 2 }
    }
}

impl SplitPlan {
    /// Tags take ids in order: the first `train` ids are train, then val, then test.
    pub fn assign<'a>(&self, take_ids: &[&'a str]) -> Result<Vec<(&'a str, Split)>> {
        let total = self.train + self.val + self.test;
        if take_ids.len() != total {
            return Err(Error::InvalidTake(format!(
                "split plan covers {total} takes, got {}",
                take_ids.len()
            )));
        }
        Ok(take_ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let split = if i < self.train {
                    Split::Train
                } else if i < self.train + self.val {
                    Split::Val
                } else {
                    Split::Test
                };
                (*id, split)
            })
            .collect())
    }
}

/// Paths to a frame's geometric artifacts, relative to the take root.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeometryRefs {
    pub clouds: Vec<String>,
    pub poses: Option<String>,
    pub boxes: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: u64,
    /// Seconds since take start; frames are sampled at 1 Hz.
    pub timestamp: u64,
    pub graph: SceneGraph,
    pub geometry: GeometryRefs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Take {
    pub take_id: String,
    pub split: Split,
    pub frames: Vec<FrameRecord>,
}

impl Take {
    /// Frame ids and timestamps strictly increasing, timestamps exactly one
    /// second apart, and each graph tagged with its frame id.
    pub fn validate(&self) -> Result<()> {
        for pair in self.frames.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.frame_id <= a.frame_id {
                return Err(Error::InvalidTake(format!(
                    "frame ids not increasing: {} then {}",
                    a.frame_id, b.frame_id
                )));
            }
            if b.timestamp != a.timestamp + 1 {
                return Err(Error::InvalidTake(format!(
                    "timestamps {} and {} are not one second apart",
                    a.timestamp, b.timestamp
                )));
            }
        }
        if let Some(f) = self.frames.iter().find(|f| f.graph.frame_id != f.frame_id) {
            return Err(Error::InvalidTake(format!(
                "frame {} carries graph for frame {}",
                f.frame_id, f.graph.frame_id
            )));
        }
        Ok(())
    }
}
