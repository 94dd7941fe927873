//! Random graphs, embeddings and examples for property tests.

use drgn::kg::{EntityId, GraphEdge, GraphNode, NodeRole, RelationId, RelationalGraph};
use drgn::model::{CandidateInput, ExampleInput, ModelConfig};
use drgn::numerics::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random graph over `n` entities with `kg_relations` relation types; the
/// first `n_question` entities are question entities linked to the question node.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, kg_relations: u16, edges: usize, n_question: usize) -> RelationalGraph {
    let nodes = (0..n)
        .map(|i| GraphNode {
            entity: EntityId(i as u32),
            surface: format!("e{i}"),
            role: if i < n_question {
                NodeRole::Question
            } else if i == n - 1 {
                NodeRole::Answer
            } else {
                NodeRole::Intermediate
            },
        })
        .collect();
    let mut list = Vec::new();
    while list.len() < edges {
        let h = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if h == t {
            continue;
        }
        let e = GraphEdge {
            head: h,
            relation: RelationId(rng.random_range(0..kg_relations)),
            tail: t,
        };
        if !list.contains(&e) {
            list.push(e);
        }
    }
    let qlink = RelationId(kg_relations);
    for i in 0..n_question {
        list.push(GraphEdge {
            head: n,
            relation: qlink,
            tail: i,
        });
    }
    list.sort_unstable();
    RelationalGraph {
        nodes,
        edges: list,
        qlink,
        has_question_node: true,
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Rows rescaled to unit norm, like the embedding providers produce.
pub fn unit_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    let mut m = random_matrix(rng, rows, cols, 1.0);
    for r in 0..rows {
        let norm = m.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
        m.row_mut(r).iter_mut().for_each(|x| *x /= norm);
    }
    m
}

pub fn random_candidate(rng: &mut ChaCha8Rng, config: &ModelConfig, n: usize, edges: usize) -> CandidateInput<f64> {
    let graph = random_graph(rng, n, (config.num_relations - 1) as u16, edges, 2.min(n));
    CandidateInput {
        entity_embs: unit_rows(rng, n, config.lm_dim),
        h_cls: unit_rows(rng, 1, config.lm_dim).into_data(),
        graph,
    }
}

pub fn random_example(seed: u64, config: &ModelConfig, n: usize, edges: usize, candidates: usize) -> ExampleInput<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ExampleInput {
        id: format!("ex{seed}"),
        question: format!("question {seed}"),
        candidates: (0..candidates).map(|_| random_candidate(&mut rng, config, n, edges)).collect(),
        gold: (seed as usize) % candidates,
    }
}

/// [`random_example`] with every embedding and `h_cls` multiplied by `scale`.
pub fn scaled_example(seed: u64, config: &ModelConfig, n: usize, edges: usize, candidates: usize, scale: f64) -> ExampleInput<f64> {
    let mut ex = random_example(seed, config, n, edges, candidates);
    for c in &mut ex.candidates {
        c.entity_embs = c.entity_embs.scale(scale);
        c.h_cls.iter_mut().for_each(|x| *x *= scale);
    }
    ex
}
