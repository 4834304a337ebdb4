//! In-memory property graph linking platforms to their people, tags,
//! natures, regions and officer positions.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::domain::PlatformRecord;
use crate::error::{bail, Result};

pub const TAGS_FIELD: &str = "tags";
pub const NATURE_FIELD: &str = "nature";
pub const REGION_FIELD: &str = "region";

/// Length of the vector returned by [`kg_features`].
pub const KG_FEATURE_LEN: usize = 4;
/// Names of the entries returned by [`kg_features`], in order.
pub const KG_FEATURE_NAMES: [&str; KG_FEATURE_LEN] =
    ["missing_attributes", "max_problem_jaccard", "problem_officer_peers", "problem_region_peers"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Platform,
    Person,
    Position,
    Tag,
    Nature,
    Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    PlatformPerson,
    PlatformTag,
    PlatformNature,
    PlatformRegion,
    PersonPosition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub kind: EdgeKind,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    #[serde(skip)]
    lookup: HashMap<(NodeKind, String), usize>,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
}

impl KnowledgeGraph {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn find(&self, kind: NodeKind, key: &str) -> Option<usize> {
        self.lookup.get(&(kind, key.to_string())).copied()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Neighbor node ids of `node`, in edge insertion order.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[node].iter().map(move |&e| {
            let edge = self.edges[e];
            if edge.from == node {
                edge.to
            } else {
                edge.from
            }
        })
    }

    fn intern(&mut self, kind: NodeKind, key: &str) -> usize {
        if let Some(&id) = self.lookup.get(&(kind, key.to_string())) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(Node { kind, key: key.to_string() });
        self.adjacency.push(Vec::new());
        self.lookup.insert((kind, key.to_string()), id);
        id
    }

    fn link(&mut self, kind: EdgeKind, from: usize, to: usize, seen: &mut HashSet<Edge>) {
        let e = Edge { kind, from, to };
        if seen.insert(e) {
            let idx = self.edges.len();
            self.edges.push(e);
            self.adjacency[from].push(idx);
            self.adjacency[to].push(idx);
        }
    }

    /// Rebuilds lookup tables after deserialization and checks edge endpoints.
    pub fn reindex(&mut self) -> Result<()> {
        self.lookup = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| ((n.kind, n.key.clone()), i))
            .collect();
        if self.lookup.len() != self.nodes.len() {
            bail!(Data, "duplicate node key in graph");
        }
        self.adjacency = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            if e.from >= self.nodes.len() || e.to >= self.nodes.len() {
                bail!(Data, "edge {} has a dangling endpoint", i);
            }
            self.adjacency[e.from].push(i);
            self.adjacency[e.to].push(i);
        }
        Ok(())
    }

    fn platform(&self, id: &str) -> Result<usize> {
        match self.find(NodeKind::Platform, id) {
            Some(n) => Ok(n),
            None => bail!(Precondition, "platform '{}' is not in the graph", id),
        }
    }

    fn neighbors_of_kind(&self, node: usize, kinds: &[NodeKind]) -> BTreeSet<usize> {
        self.neighbors(node)
            .filter(|&n| kinds.contains(&self.nodes[n].kind))
            .collect()
    }

    /// Tag, nature and region neighbors of a platform.
    pub fn attribute_set(&self, platform: &str) -> Result<BTreeSet<usize>> {
        let p = self.platform(platform)?;
        Ok(self.neighbors_of_kind(p, &[NodeKind::Tag, NodeKind::Nature, NodeKind::Region]))
    }

    /// Platforms ranked by attribute-set Jaccard similarity to `platform`
    /// (descending, ties by id), excluding itself.
    pub fn most_similar(&self, platform: &str, n: usize) -> Result<Vec<(String, f64)>> {
        let mine = self.attribute_set(platform)?;
        let mut scored: Vec<(String, f64)> = self
            .nodes
            .iter()
            .filter(|node| node.kind == NodeKind::Platform && node.key != platform)
            .map(|node| {
                let other = self.attribute_set(&node.key).expect("platform node");
                (node.key.clone(), set_jaccard(&mine, &other))
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(n);
        Ok(scored)
    }
}

/// Jaccard index of two sets; two empty sets share nothing and score 0.
pub fn set_jaccard(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn kg_build(records: &[PlatformRecord]) -> Result<KnowledgeGraph> {
    let mut g = KnowledgeGraph::default();
    let mut seen = HashSet::new();
    for r in records {
        if g.find(NodeKind::Platform, &r.id).is_some() {
            bail!(Data, "duplicate platform id {}", r.id);
        }
        let p = g.intern(NodeKind::Platform, &r.id);
        for officer in r.officers.iter().filter(|o| !o.is_empty()) {
            let person = g.intern(NodeKind::Person, officer);
            g.link(EdgeKind::PlatformPerson, p, person, &mut seen);
            if let Some(role) = r.officer_roles.get(officer).filter(|s| !s.is_empty()) {
                let pos = g.intern(NodeKind::Position, role);
                g.link(EdgeKind::PersonPosition, person, pos, &mut seen);
            }
        }
        let attrs = [
            (TAGS_FIELD, NodeKind::Tag, EdgeKind::PlatformTag),
            (NATURE_FIELD, NodeKind::Nature, EdgeKind::PlatformNature),
            (REGION_FIELD, NodeKind::Region, EdgeKind::PlatformRegion),
        ];
        for (field, kind, edge) in attrs {
            if let Some(v) = r.static_categorical.get(field) {
                for value in v.values() {
                    let n = g.intern(kind, value);
                    g.link(edge, p, n, &mut seen);
                }
            }
        }
    }
    Ok(g)
}

/// Graph risk features of one platform:
/// `[missing attribute kinds, max Jaccard vs known problem platforms,
///   problem platforms sharing an officer, problem platforms in the same region]`.
/// The platform itself never counts as its own comparison partner.
pub fn kg_features(graph: &KnowledgeGraph, platform: &str, problem_ids: &HashSet<String>) -> Result<Vec<f64>> {
    let p = graph.platform(platform)?;
    let kinds = [NodeKind::Tag, NodeKind::Nature, NodeKind::Region, NodeKind::Person];
    let missing = kinds
        .iter()
        .filter(|k| !graph.neighbors(p).any(|n| graph.nodes[n].kind == **k))
        .count();

    let mine = graph.attribute_set(platform)?;
    let mut max_j: f64 = 0.0;
    for q in problem_ids.iter().filter(|q| q.as_str() != platform) {
        if graph.find(NodeKind::Platform, q).is_some() {
            max_j = max_j.max(set_jaccard(&mine, &graph.attribute_set(q)?));
        }
    }

    let mut officer_peers = BTreeSet::new();
    for person in graph.neighbors(p).filter(|&n| graph.nodes[n].kind == NodeKind::Person) {
        for other in graph.neighbors(person) {
            let node = &graph.nodes[other];
            if node.kind == NodeKind::Platform && other != p && problem_ids.contains(&node.key) {
                officer_peers.insert(other);
            }
        }
    }

    let mut region_peers = BTreeSet::new();
    for region in graph.neighbors(p).filter(|&n| graph.nodes[n].kind == NodeKind::Region) {
        for other in graph.neighbors(region) {
            if other != p && problem_ids.contains(&graph.nodes[other].key) {
                region_peers.insert(other);
            }
        }
    }

    Ok(vec![
        missing as f64,
        max_j,
        officer_peers.len() as f64,
        region_peers.len() as f64,
    ])
}
