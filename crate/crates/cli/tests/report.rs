//! The relevance listing in prediction dumps against sorting the relevance
//! rows of a forward pass directly.

use drgn::kg::{EntityId, GraphEdge, GraphNode, NodeRole, RelationId, RelationalGraph};
use drgn::model::{CandidateInput, ExampleInput, Model, ModelConfig};
use drgn::numerics::Matrix;
use drgn::training::evaluate;
use drgn_cli::report::{prediction_rows, predictions_tsv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn candidate(rng: &mut ChaCha8Rng, names: &[&str], lm_dim: usize) -> CandidateInput<f64> {
    let n = names.len();
    let nodes = names
        .iter()
        .enumerate()
        .map(|(i, s)| GraphNode {
            entity: EntityId(i as u32),
            surface: s.to_string(),
            role: if i == 0 { NodeRole::Question } else { NodeRole::Intermediate },
        })
        .collect();
    let mut edges: Vec<GraphEdge> = (1..n)
        .map(|i| GraphEdge {
            head: i - 1,
            relation: RelationId((i % 2) as u16),
            tail: i,
        })
        .collect();
    edges.push(GraphEdge {
        head: n,
        relation: RelationId(2),
        tail: 0,
    });
    let graph = RelationalGraph {
        nodes,
        edges,
        qlink: RelationId(2),
        has_question_node: true,
    };
    let draw = |rng: &mut ChaCha8Rng, len: usize| (0..len).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<f64>>();
    CandidateInput {
        entity_embs: Matrix::from_vec(n, lm_dim, draw(rng, n * lm_dim)).unwrap(),
        h_cls: draw(rng, lm_dim),
        graph,
    }
}

#[test]
fn listing_matches_sorted_relevance_rows() {
    let cfg = ModelConfig {
        hidden: 8,
        lm_dim: 6,
        layers: 3,
        num_relations: 3,
        scaled_relevance: true,
        dropout: 0.0,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = Model::<f64>::new(cfg.clone(), &mut rng).unwrap();
    let names = ["guitar", "free_period", "music_room", "concert", "rock_band"];
    let examples: Vec<ExampleInput<f64>> = (0..4)
        .map(|i| ExampleInput {
            id: format!("fig{i}"),
            question: "where was the student".into(),
            candidates: (0..3).map(|_| candidate(&mut rng, &names, cfg.lm_dim)).collect(),
            gold: i % 3,
        })
        .collect();
    let (_, preds) = evaluate(&model, &examples).unwrap();
    let k = 3;
    let rows = prediction_rows(&model, &examples, preds, k).unwrap();
    for (ex, row) in examples.iter().zip(&rows) {
        let cand = &ex.candidates[row.prediction.predicted];
        let trace = model.forward_candidate(cand, None).unwrap();
        let q = names.len();
        assert_eq!(row.top_relevance.len(), cfg.layers);
        for (layer, listed) in trace.layers.iter().zip(&row.top_relevance) {
            let m = &layer.mix.as_ref().unwrap().relevance.matrix;
            let mut oracle: Vec<(usize, f64)> = (0..m.cols()).filter(|&j| j != q).map(|j| (j, m.get(q, j))).collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let expected: Vec<(String, f64)> = oracle.into_iter().take(k).map(|(j, v)| (names[j].to_string(), v)).collect();
            assert_eq!(listed, &expected);
        }
    }
    let tsv = predictions_tsv(&rows);
    assert_eq!(tsv.lines().count(), 5);
    assert!(tsv.lines().nth(1).unwrap().starts_with("fig0\t0\t"));
}
