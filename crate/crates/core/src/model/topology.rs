use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kg::RelationalGraph;
use crate::model::ModelConfig;

/// Message-passing neighborhoods derived from a graph under a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub num_entities: usize,
    pub question: Option<usize>,
    /// Per entity row: `(relation, sorted unique neighbor rows)`, ordered by relation.
    pub neighbors: Vec<Vec<(usize, Vec<usize>)>>,
    /// Question-entity rows linked to the question node.
    pub question_neighbors: Vec<usize>,
}

impl Topology {
    pub fn rows(&self) -> usize {
        self.num_entities + usize::from(self.question.is_some())
    }

    /// Relations with at least one neighbor list.
    pub fn active_relations(&self) -> Vec<usize> {
        let mut rels: Vec<usize> = self.neighbors.iter().flatten().map(|(r, _)| *r).collect();
        rels.sort_unstable();
        rels.dedup();
        rels
    }

    pub fn build(graph: &RelationalGraph, config: &ModelConfig) -> Result<Self> {
        let n = graph.num_entities();
        let qlink = graph.qlink.index();
        if qlink != config.qlink() {
            return Err(Error::Validation(format!(
                "graph QLink id {qlink} does not match model relation count {}",
                config.num_relations
            )));
        }
        let question = (config.question_node && graph.has_question_node).then_some(n);
        let mut lists: Vec<BTreeMap<usize, Vec<usize>>> = vec![BTreeMap::new(); n];
        let mut question_neighbors = Vec::new();
        for e in &graph.edges {
            let r = e.relation.index();
            if r == qlink {
                if question.is_none() {
                    continue;
                }
                // the question node is always the head of a QLink edge
                let (q, ent) = if e.head == n { (e.head, e.tail) } else { (e.tail, e.head) };
                lists[ent].entry(qlink).or_default().push(q);
                question_neighbors.push(ent);
                continue;
            }
            if r >= qlink {
                return Err(Error::Validation(format!("relation id {r} out of range")));
            }
            if e.head >= n || e.tail >= n {
                return Err(Error::Validation(format!("edge {e:?} outside entity rows")));
            }
            let r = if config.collapse_relations { 0 } else { r };
            lists[e.tail].entry(r).or_default().push(e.head);
            if config.bidirectional {
                lists[e.head].entry(r).or_default().push(e.tail);
            }
        }
        let neighbors = lists
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|(r, mut v)| {
                        v.sort_unstable();
                        v.dedup();
                        (r, v)
                    })
                    .collect()
            })
            .collect();
        question_neighbors.sort_unstable();
        question_neighbors.dedup();
        Ok(Topology {
            num_entities: n,
            question,
            neighbors,
            question_neighbors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{EntityId, GraphEdge, GraphNode, NodeRole, RelationId};

    fn graph() -> RelationalGraph {
        let node = |i: u32, role| GraphNode {
            entity: EntityId(i),
            surface: format!("e{i}"),
            role,
        };
        RelationalGraph {
            nodes: vec![
                node(0, NodeRole::Question),
                node(1, NodeRole::Answer),
                node(2, NodeRole::Intermediate),
            ],
            edges: vec![
                GraphEdge {
                    head: 0,
                    relation: RelationId(1),
                    tail: 2,
                },
                GraphEdge {
                    head: 2,
                    relation: RelationId(2),
                    tail: 1,
                },
                GraphEdge {
                    head: 3,
                    relation: RelationId(3),
                    tail: 0,
                },
            ],
            qlink: RelationId(3),
            has_question_node: true,
        }
    }

    fn config() -> ModelConfig {
        ModelConfig {
            num_relations: 4,
            ..Default::default()
        }
    }

    #[test]
    fn bidirectional_neighborhoods() {
        let t = Topology::build(&graph(), &config()).unwrap();
        assert_eq!(t.rows(), 4);
        assert_eq!(t.neighbors[0], vec![(1, vec![2]), (3, vec![3])]);
        assert_eq!(t.neighbors[2], vec![(1, vec![0]), (2, vec![1])]);
        assert_eq!(t.question_neighbors, vec![0]);
    }

    #[test]
    fn directed_and_collapsed() {
        let mut c = config();
        c.bidirectional = false;
        c.collapse_relations = true;
        let t = Topology::build(&graph(), &c).unwrap();
        assert_eq!(t.neighbors[2], vec![(0, vec![0])]);
        assert_eq!(t.neighbors[0], vec![(3, vec![3])]);
    }

    #[test]
    fn question_node_dropped() {
        let mut c = config();
        c.question_node = false;
        let t = Topology::build(&graph(), &c).unwrap();
        assert_eq!(t.rows(), 3);
        assert!(t.question_neighbors.is_empty());
        assert_eq!(t.neighbors[0], vec![(1, vec![2])]);
    }

    #[test]
    fn relation_count_mismatch() {
        let mut c = config();
        c.num_relations = 18;
        assert!(Topology::build(&graph(), &c).is_err());
    }
}
