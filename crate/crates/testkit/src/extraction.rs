//! Brute-force path enumeration over a raw triple list, the reference for
//! subgraph extraction.

use std::collections::BTreeSet;
use std::ops::Range;

use drgn::kg::{extract_subgraph, EntityId, ExtractOptions, KnowledgeStore, NodeRole, RelationSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub triples: Vec<(String, String, String)>,
    pub q: Vec<String>,
    pub a: Vec<String>,
}

fn relations() -> RelationSet {
    RelationSet::new(&["r0", "r1", "r2"]).unwrap()
}

/// Random KG plus a disjoint planted chain q* → x* → y* → a*, whose
/// intermediates lie only on a 3-hop path.
pub fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(20..50);
    let m = rng.random_range(n..3 * n);
    let name = |i: usize| format!("c{i}");
    let mut triples = Vec::new();
    while triples.len() < m {
        let (h, t) = (rng.random_range(0..n), rng.random_range(0..n));
        if h != t {
            triples.push((name(h), format!("r{}", rng.random_range(0..3)), name(t)));
        }
    }
    for (h, r, t) in [("qs", "r0", "xs"), ("xs", "r1", "ys"), ("ys", "r2", "as")] {
        triples.push((h.into(), r.into(), t.into()));
    }
    // only entities that occur in some triple exist in the store
    let mut present: Vec<String> = triples[..m]
        .iter()
        .flat_map(|(h, _, t)| [h.clone(), t.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    present.shuffle(&mut rng);
    let nq = rng.random_range(1..4);
    let na = rng.random_range(1..3);
    let mut q: Vec<String> = present[..nq].to_vec();
    let mut a: Vec<String> = present[nq..nq + na].to_vec();
    // occasionally an entity is on both sides
    if rng.random_bool(0.1) {
        a.push(q[0].clone());
    }
    q.push("qs".into());
    a.push("as".into());
    Fixture { triples, q, a }
}

/// Every entity on a sequence v0..vk (k ≤ hops) of distinct entities with
/// v0 a question entity, vk an answer entity other than v0, and each
/// consecutive pair joined by a triple in either direction.
pub fn oracle_nodes(f: &Fixture, hops: usize) -> BTreeSet<String> {
    let adjacent = |u: &str, v: &str| f.triples.iter().any(|(h, _, t)| (h == u && t == v) || (h == v && t == u));
    let entities: BTreeSet<&str> = f.triples.iter().flat_map(|(h, _, t)| [h.as_str(), t.as_str()]).collect();
    let mut out: BTreeSet<String> = f.q.iter().chain(&f.a).cloned().collect();
    fn extend<'a>(
        path: &mut Vec<&'a str>,
        hops: usize,
        entities: &BTreeSet<&'a str>,
        adjacent: &dyn Fn(&str, &str) -> bool,
        answers: &[String],
        out: &mut BTreeSet<String>,
    ) {
        let last = *path.last().unwrap();
        if path.len() > 1 && answers.iter().any(|a| a == last) {
            out.extend(path.iter().map(|s| s.to_string()));
        }
        if path.len() > hops {
            return;
        }
        for &e in entities {
            if !path.contains(&e) && adjacent(last, e) {
                path.push(e);
                extend(path, hops, entities, adjacent, answers, out);
                path.pop();
            }
        }
    }
    for q in &f.q {
        let mut path = vec![q.as_str()];
        extend(&mut path, hops, &entities, &adjacent, &f.a, &mut out);
    }
    out
}

/// Node surfaces, (head, relation, tail) edges and nodes with roles in
/// subgraph order.
pub type Extracted = (BTreeSet<String>, BTreeSet<(String, String, String)>, Vec<(String, NodeRole)>);

pub fn extract(f: &Fixture, hops: usize, shuffle_seed: Option<u64>) -> Extracted {
    let mut triples = f.triples.clone();
    if let Some(s) = shuffle_seed {
        triples.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
    }
    let store = KnowledgeStore::from_triples(relations(), triples.iter().map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str()))).unwrap();
    let ids = |names: &[String]| -> BTreeSet<EntityId> { names.iter().map(|n| store.entity(n).unwrap()).collect() };
    let sub = extract_subgraph(&ids(&f.q), &ids(&f.a), &store, &ExtractOptions { hops, max_nodes: 10_000 }).unwrap();
    let nodes = sub.nodes.iter().map(|n| n.surface.clone()).collect();
    let edges = sub
        .edges
        .iter()
        .map(|e| {
            (
                sub.nodes[e.head].surface.clone(),
                store.relations().name(e.relation).to_string(),
                sub.nodes[e.tail].surface.clone(),
            )
        })
        .collect();
    let roles = sub.nodes.iter().map(|n| (n.surface.clone(), n.role)).collect();
    (nodes, edges, roles)
}

pub fn oracle_edges(f: &Fixture, nodes: &BTreeSet<String>) -> BTreeSet<(String, String, String)> {
    f.triples
        .iter()
        .filter(|(h, _, t)| nodes.contains(h) && nodes.contains(t))
        .cloned()
        .collect()
}

/// Extracts 2-hop subgraphs for each fixture seed and returns one message
/// per disagreement with the oracle: node set, induced edges, the planted
/// 3-hop chain losing both intermediates, and node order by role.
pub fn two_hop_failures(seeds: Range<u64>) -> Vec<String> {
    let mut failures = Vec::new();
    for seed in seeds {
        let f = fixture(seed);
        let expected = oracle_nodes(&f, 2);
        let (nodes, edges, roles) = extract(&f, 2, None);
        if nodes != expected {
            failures.push(format!("fixture {seed}: nodes {nodes:?}, oracle {expected:?}"));
        }
        if edges != oracle_edges(&f, &expected) {
            failures.push(format!("fixture {seed}: induced edges differ"));
        }
        if !(nodes.contains("qs") && nodes.contains("as")) || nodes.contains("xs") || nodes.contains("ys") {
            failures.push(format!(
                "fixture {seed}: planted chain kept {:?}",
                ["qs", "xs", "ys", "as"].map(|s| nodes.contains(s))
            ));
        }
        let rank = |r: &NodeRole| match r {
            NodeRole::Question => 0,
            NodeRole::Answer => 1,
            NodeRole::Intermediate => 2,
        };
        if !roles.windows(2).all(|w| rank(&w[0].1) <= rank(&w[1].1)) {
            failures.push(format!("fixture {seed}: nodes not ordered question, answer, intermediate"));
        }
        let q_count = roles.iter().filter(|(_, r)| *r == NodeRole::Question).count();
        if q_count != f.q.iter().collect::<BTreeSet<_>>().len() {
            failures.push(format!("fixture {seed}: {q_count} question nodes"));
        }
    }
    failures
}
