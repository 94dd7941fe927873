use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::store::{EntityId, KnowledgeStore, RelationId, RelationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Question,
    Answer,
    Intermediate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub entity: EntityId,
    pub surface: String,
    pub role: NodeRole,
}

/// Typed edge between node positions (not entity ids).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphEdge {
    pub head: usize,
    pub relation: RelationId,
    pub tail: usize,
}

/// Extracted KG subgraph, before the question node is attached.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Subgraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractOptions {
    pub hops: usize,
    pub max_nodes: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { hops: 2, max_nodes: 200 }
    }
}

/// Collects question entities, answer entities and every entity on a simple
/// path of at most `hops` edges from a question entity to a different
/// answer entity. Paths ignore edge direction.
///
/// Node order: question entities, answer entities, intermediates, each
/// sorted by id. An entity in both input sets is tagged as a question entity.
/// Above `max_nodes`, intermediates with the lowest in-subgraph degree are
/// dropped first (ties: larger id first); question and answer entities are
/// never dropped.
pub fn extract_subgraph(
    q_entities: &BTreeSet<EntityId>,
    a_entities: &BTreeSet<EntityId>,
    store: &KnowledgeStore,
    opts: &ExtractOptions,
) -> Result<Subgraph> {
    if q_entities.is_empty() && a_entities.is_empty() {
        return Err(Error::Extraction("no question or answer entities".into()));
    }
    if opts.hops == 0 {
        return Err(Error::Extraction("hops must be at least 1".into()));
    }
    for &e in q_entities.iter().chain(a_entities) {
        if e.0 as usize >= store.num_entities() {
            return Err(Error::Extraction(format!("entity {e} not in store")));
        }
    }

    let dist_to_answer = bounded_bfs(store, a_entities, opts.hops);
    let mut on_path: BTreeSet<EntityId> = BTreeSet::new();
    let mut path = Vec::with_capacity(opts.hops + 1);
    for &q in q_entities {
        path.clear();
        path.push(q);
        walk(store, a_entities, &dist_to_answer, opts.hops, &mut path, &mut on_path);
    }

    let answers: Vec<EntityId> = a_entities.difference(q_entities).copied().collect();
    let mut intermediates: Vec<EntityId> = on_path
        .into_iter()
        .filter(|e| !q_entities.contains(e) && !a_entities.contains(e))
        .collect();

    let fixed = q_entities.len() + answers.len();
    if fixed + intermediates.len() > opts.max_nodes {
        let keep = opts.max_nodes.saturating_sub(fixed);
        let members: BTreeSet<EntityId> = q_entities.iter().chain(&answers).chain(&intermediates).copied().collect();
        let mut ranked: Vec<(usize, EntityId)> = intermediates
            .iter()
            .map(|&e| {
                let deg = store.neighbors(e).iter().filter(|n| members.contains(n)).count();
                (deg, e)
            })
            .collect();
        // highest degree first, smaller id wins ties
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        intermediates = ranked.into_iter().take(keep).map(|(_, e)| e).collect();
        intermediates.sort_unstable();
        log::debug!("subgraph truncated to {} nodes", fixed + intermediates.len());
    }

    let mut nodes = Vec::with_capacity(fixed + intermediates.len());
    let mut push = |e: EntityId, role| {
        nodes.push(GraphNode {
            entity: e,
            surface: store.surface(e).to_string(),
            role,
        })
    };
    q_entities.iter().for_each(|&e| push(e, NodeRole::Question));
    answers.iter().for_each(|&e| push(e, NodeRole::Answer));
    intermediates.iter().for_each(|&e| push(e, NodeRole::Intermediate));

    let position: HashMap<EntityId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.entity, i)).collect();
    let mut edges = Vec::new();
    for (i, n) in nodes.iter().enumerate() {
        for t in store.triples_from(n.entity) {
            if let Some(&j) = position.get(&t.tail) {
                edges.push(GraphEdge {
                    head: i,
                    relation: t.relation,
                    tail: j,
                });
            }
        }
    }
    edges.sort_unstable();
    let sub = Subgraph { nodes, edges };
    debug_assert!(sub.validate().is_ok());
    Ok(sub)
}

/// Distances (≤ `limit`) from any source, over undirected adjacency.
fn bounded_bfs(store: &KnowledgeStore, sources: &BTreeSet<EntityId>, limit: usize) -> HashMap<EntityId, usize> {
    let mut dist: HashMap<EntityId, usize> = sources.iter().map(|&s| (s, 0)).collect();
    let mut frontier: Vec<EntityId> = sources.iter().copied().collect();
    for d in 1..=limit {
        let mut next = Vec::new();
        for &u in &frontier {
            for &w in store.neighbors(u) {
                if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(w) {
                    slot.insert(d);
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    dist
}

fn walk(
    store: &KnowledgeStore,
    answers: &BTreeSet<EntityId>,
    dist_to_answer: &HashMap<EntityId, usize>,
    hops: usize,
    path: &mut Vec<EntityId>,
    on_path: &mut BTreeSet<EntityId>,
) {
    let depth = path.len() - 1;
    let u = *path.last().expect("non-empty path");
    if depth >= 1 && answers.contains(&u) {
        on_path.extend(path.iter().copied());
    }
    if depth == hops {
        return;
    }
    let budget = hops - depth - 1;
    for &w in store.neighbors(u) {
        if path.contains(&w) {
            continue;
        }
        if dist_to_answer.get(&w).is_some_and(|&d| d <= budget) {
            path.push(w);
            walk(store, answers, dist_to_answer, hops, path, on_path);
            path.pop();
        }
    }
}

impl Subgraph {
    /// Every edge endpoint must be a node position.
    pub fn validate(&self) -> Result<()> {
        for e in &self.edges {
            if e.head >= self.nodes.len() || e.tail >= self.nodes.len() {
                return Err(Error::Validation(format!("edge {e:?} references a missing node")));
            }
        }
        Ok(())
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.nodes.iter().map(|n| n.entity)
    }
}

/// Subgraph plus an optional question node at index `nodes.len()`.
///
/// QLink edges are stored with the question node as head and a question
/// entity as tail; no other edge touches the question node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub qlink: RelationId,
    pub has_question_node: bool,
}

impl RelationalGraph {
    pub fn num_entities(&self) -> usize {
        self.nodes.len()
    }

    /// Rows of the node-state matrix: entities plus the question node if present.
    pub fn num_rows(&self) -> usize {
        self.nodes.len() + usize::from(self.has_question_node)
    }

    pub fn question_index(&self) -> Option<usize> {
        self.has_question_node.then_some(self.nodes.len())
    }

    /// Question node only; used when entity linking finds nothing.
    pub fn question_only(qlink: RelationId) -> Self {
        RelationalGraph {
            nodes: Vec::new(),
            edges: Vec::new(),
            qlink,
            has_question_node: true,
        }
    }

    pub fn qlink_edges(&self) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(move |e| e.relation == self.qlink)
    }

    /// Copy with the question node and its QLink edges removed.
    pub fn without_question_node(&self) -> Self {
        RelationalGraph {
            nodes: self.nodes.clone(),
            edges: self.edges.iter().filter(|e| e.relation != self.qlink).copied().collect(),
            qlink: self.qlink,
            has_question_node: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rows = self.num_rows();
        let q = self.question_index();
        for e in &self.edges {
            if e.head >= rows || e.tail >= rows {
                return Err(Error::Validation(format!("edge {e:?} references a missing node")));
            }
            let touches_q = q.is_some_and(|q| e.head == q || e.tail == q);
            if (e.relation == self.qlink) != touches_q {
                return Err(Error::Validation(format!("edge {e:?} misuses the question relation")));
            }
            if e.relation == self.qlink && self.nodes[e.tail].role != NodeRole::Question {
                return Err(Error::Validation(format!("QLink edge {e:?} targets a non-question entity")));
            }
        }
        Ok(())
    }

    /// Applies a permutation to entity positions: entity `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.nodes.len();
        assert_eq!(perm.len(), n);
        let mut nodes = self.nodes.clone();
        for (i, node) in self.nodes.iter().enumerate() {
            nodes[perm[i]] = node.clone();
        }
        let map = |idx: usize| if idx < n { perm[idx] } else { idx };
        let mut edges: Vec<GraphEdge> = self
            .edges
            .iter()
            .map(|e| GraphEdge {
                head: map(e.head),
                relation: e.relation,
                tail: map(e.tail),
            })
            .collect();
        edges.sort_unstable();
        RelationalGraph {
            nodes,
            edges,
            qlink: self.qlink,
            has_question_node: self.has_question_node,
        }
    }
}

/// Appends the question node and links it to every question entity of
/// `sub` that appears in `q_entities`.
pub fn attach_question_node(sub: &Subgraph, q_entities: &BTreeSet<EntityId>, qlink: RelationId) -> RelationalGraph {
    let q = sub.nodes.len();
    let mut edges = sub.edges.clone();
    let mut linked = 0;
    for (i, n) in sub.nodes.iter().enumerate() {
        if n.role == NodeRole::Question && q_entities.contains(&n.entity) {
            edges.push(GraphEdge {
                head: q,
                relation: qlink,
                tail: i,
            });
            linked += 1;
        }
    }
    if linked == 0 {
        log::debug!("question node has no question-entity neighbors");
    }
    RelationalGraph {
        nodes: sub.nodes.clone(),
        edges,
        qlink,
        has_question_node: true,
    }
}

/// One line of a subgraph dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphRecord {
    pub example_id: String,
    pub candidate_idx: usize,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: u32,
    pub surface: String,
    pub role: NodeRole,
}

/// `h` and `t` are entity ids; `r` is the relation name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub h: u32,
    pub r: String,
    pub t: u32,
}

impl SubgraphRecord {
    pub fn from_subgraph(example_id: &str, candidate_idx: usize, sub: &Subgraph, relations: &RelationSet) -> Self {
        SubgraphRecord {
            example_id: example_id.to_string(),
            candidate_idx,
            nodes: sub
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.entity.0,
                    surface: n.surface.clone(),
                    role: n.role,
                })
                .collect(),
            edges: sub
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    h: sub.nodes[e.head].entity.0,
                    r: relations.name(e.relation).to_string(),
                    t: sub.nodes[e.tail].entity.0,
                })
                .collect(),
        }
    }

    pub fn to_subgraph(&self, relations: &RelationSet) -> Result<Subgraph> {
        let position: BTreeMap<u32, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let relation = relations
                .id(&e.r)
                .filter(|r| *r != relations.qlink())
                .ok_or_else(|| Error::Schema(format!("unknown relation `{}` in subgraph dump", e.r)))?;
            let (Some(&head), Some(&tail)) = (position.get(&e.h), position.get(&e.t)) else {
                return Err(Error::Validation(format!(
                    "{}#{}: edge endpoint missing from node list",
                    self.example_id, self.candidate_idx
                )));
            };
            edges.push(GraphEdge { head, relation, tail });
        }
        let sub = Subgraph {
            nodes: self
                .nodes
                .iter()
                .map(|n| GraphNode {
                    entity: EntityId(n.id),
                    surface: n.surface.clone(),
                    role: n.role,
                })
                .collect(),
            edges,
        };
        sub.validate()?;
        Ok(sub)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_store(triples: &[(&str, &str, &str)]) -> KnowledgeStore {
        KnowledgeStore::from_triples(RelationSet::default(), triples.iter().copied()).unwrap()
    }

    fn ids(store: &KnowledgeStore, names: &[&str]) -> BTreeSet<EntityId> {
        names.iter().map(|n| store.entity(n).unwrap()).collect()
    }

    fn surfaces(sub: &Subgraph) -> BTreeSet<String> {
        sub.nodes.iter().map(|n| n.surface.clone()).collect()
    }

    #[test]
    fn two_hop_chain_kept() {
        let s = chain_store(&[("a", "isa", "x"), ("x", "isa", "b")]);
        let sub = extract_subgraph(&ids(&s, &["a"]), &ids(&s, &["b"]), &s, &ExtractOptions::default()).unwrap();
        assert_eq!(surfaces(&sub), BTreeSet::from(["a".into(), "b".into(), "x".into()]));
        assert_eq!(sub.edges.len(), 2);
        assert_eq!(sub.nodes[2].role, NodeRole::Intermediate);
    }

    #[test]
    fn three_hop_chain_loses_intermediates() {
        let s = chain_store(&[("a", "isa", "x"), ("x", "isa", "y"), ("y", "isa", "b")]);
        let sub = extract_subgraph(&ids(&s, &["a"]), &ids(&s, &["b"]), &s, &ExtractOptions::default()).unwrap();
        assert_eq!(surfaces(&sub), BTreeSet::from(["a".into(), "b".into()]));
        assert!(sub.edges.is_empty());
    }

    #[test]
    fn empty_inputs_rejected() {
        let s = chain_store(&[("a", "isa", "b")]);
        let empty = BTreeSet::new();
        assert!(matches!(
            extract_subgraph(&empty, &empty, &s, &ExtractOptions::default()),
            Err(Error::Extraction(_))
        ));
    }

    #[test]
    fn node_cap_drops_low_degree_intermediates() {
        // a–m1–b, a–m2–b, m2–m1: m2 and m1 both degree 3 inside; add m3 with degree 2
        let s = chain_store(&[
            ("a", "isa", "m1"),
            ("m1", "isa", "b"),
            ("a", "isa", "m2"),
            ("m2", "isa", "b"),
            ("m2", "partof", "m1"),
            ("a", "isa", "m3"),
            ("m3", "isa", "b"),
        ]);
        let opts = ExtractOptions { hops: 2, max_nodes: 4 };
        let sub = extract_subgraph(&ids(&s, &["a"]), &ids(&s, &["b"]), &s, &opts).unwrap();
        assert_eq!(sub.nodes.len(), 4);
        assert_eq!(surfaces(&sub), BTreeSet::from(["a".into(), "b".into(), "m1".into(), "m2".into()]));
    }

    #[test]
    fn figure_one_fixture_links_question_entities_only() {
        let s = chain_store(&[
            ("guitar", "atlocation", "music_room"),
            ("free_period", "usedfor", "practice"),
            ("practice", "atlocation", "music_room"),
            ("guitar", "usedfor", "concert"),
            ("rock_band", "capableof", "concert"),
            ("guitar", "partof", "rock_band"),
        ]);
        let q = ids(&s, &["guitar", "free_period"]);
        let a = ids(&s, &["music_room"]);
        let sub = extract_subgraph(&q, &a, &s, &ExtractOptions::default()).unwrap();
        let g = attach_question_node(&sub, &q, s.relations().qlink());
        g.validate().unwrap();
        let linked: BTreeSet<&str> = g.qlink_edges().map(|e| g.nodes[e.tail].surface.as_str()).collect();
        assert_eq!(linked, BTreeSet::from(["free_period", "guitar"]));
        assert_eq!(g.num_rows(), sub.nodes.len() + 1);
    }

    #[test]
    fn question_node_with_no_question_entities() {
        let s = chain_store(&[("a", "isa", "b")]);
        let a = ids(&s, &["b"]);
        let sub = extract_subgraph(&BTreeSet::new(), &a, &s, &ExtractOptions::default()).unwrap();
        let g = attach_question_node(&sub, &BTreeSet::new(), s.relations().qlink());
        assert_eq!(g.qlink_edges().count(), 0);
        assert_eq!(g.num_rows(), 2);
    }

    #[test]
    fn attach_counts() {
        let s = chain_store(&[("a", "isa", "x"), ("x", "isa", "b"), ("c", "isa", "x")]);
        let q = ids(&s, &["a", "c"]);
        let sub = extract_subgraph(&q, &ids(&s, &["b"]), &s, &ExtractOptions::default()).unwrap();
        assert_eq!(sub.nodes.len(), 4);
        let g = attach_question_node(&sub, &q, s.relations().qlink());
        assert_eq!(g.num_rows(), 5);
        assert_eq!(g.qlink_edges().count(), 2);
    }

    #[test]
    fn dump_record_round_trip() {
        let s = chain_store(&[("a", "isa", "x"), ("x", "partof", "b")]);
        let sub = extract_subgraph(&ids(&s, &["a"]), &ids(&s, &["b"]), &s, &ExtractOptions::default()).unwrap();
        let rec = SubgraphRecord::from_subgraph("ex1", 2, &sub, s.relations());
        let line = serde_json::to_string(&rec).unwrap();
        assert!(line.contains("\"role\":\"intermediate\""));
        let back: SubgraphRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.to_subgraph(s.relations()).unwrap(), sub);
    }

    #[test]
    fn permutation_keeps_validity() {
        let s = chain_store(&[("a", "isa", "x"), ("x", "partof", "b")]);
        let q = ids(&s, &["a"]);
        let sub = extract_subgraph(&q, &ids(&s, &["b"]), &s, &ExtractOptions::default()).unwrap();
        let g = attach_question_node(&sub, &q, s.relations().qlink());
        let p = g.permuted(&[2, 0, 1]);
        p.validate().unwrap();
        assert_eq!(p.nodes[2].surface, "a");
    }
}
