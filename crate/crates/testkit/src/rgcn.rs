//! Plain R-GCN written independently of the crate: dense `Vec` matrices,
//! its own GELU and a hand-written backward pass. With relevance off and no
//! question node the graph stack must reduce to it.

use std::collections::BTreeSet;

use drgn::kg::RelationalGraph;
use drgn::model::{layer_backward, layer_forward, CandidateInput, Model, ModelConfig, Topology};
use drgn::numerics::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Dense = Vec<Vec<f64>>;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / 2f64.sqrt()))
}

fn gelu_grad(x: f64) -> f64 {
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 * (1.0 + libm::erf(x / 2f64.sqrt())) + x * pdf
}

fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

fn mm(a: &Dense, b: &Dense) -> Dense {
    let mut out = zeros(a.len(), b[0].len());
    for i in 0..a.len() {
        for k in 0..b.len() {
            for j in 0..b[0].len() {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn tr(a: &Dense) -> Dense {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

fn add_into(acc: &mut Dense, x: &Dense) {
    for (a, b) in acc.iter_mut().zip(x) {
        for (p, q) in a.iter_mut().zip(b) {
            *p += q;
        }
    }
}

fn dense(m: &Matrix<f64>) -> Dense {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// Row-normalized adjacency per KG relation: entry (i, j) is 1/|N_i^r| when
/// j neighbors i under r. Edges count both ways; duplicates collapse.
fn adjacency(graph: &RelationalGraph, relations: usize) -> Vec<Dense> {
    let n = graph.num_entities();
    let mut sets = vec![vec![BTreeSet::new(); n]; relations];
    for e in &graph.edges {
        if e.relation == graph.qlink {
            continue;
        }
        let r = e.relation.index();
        sets[r][e.tail].insert(e.head);
        sets[r][e.head].insert(e.tail);
    }
    sets.iter()
        .map(|rows| {
            let mut a = zeros(n, n);
            for (i, nb) in rows.iter().enumerate() {
                for &j in nb {
                    a[i][j] = 1.0 / nb.len() as f64;
                }
            }
            a
        })
        .collect()
}

struct OracleLayer {
    w_rel: Vec<Dense>,
    w_self: Dense,
}

struct Pass {
    inputs: Vec<Dense>,
    pre: Vec<Dense>,
    out: Dense,
}

fn forward(adj: &[Dense], layers: &[OracleLayer], h0: &Dense) -> Pass {
    let mut h = h0.clone();
    let (mut inputs, mut pre) = (Vec::new(), Vec::new());
    for l in layers {
        let mut p = mm(&h, &l.w_self);
        for (a, w) in adj.iter().zip(&l.w_rel) {
            add_into(&mut p, &mm(&mm(a, &h), w));
        }
        inputs.push(h);
        h = p.iter().map(|row| row.iter().map(|&x| gelu(x)).collect()).collect();
        pre.push(p);
    }
    Pass { inputs, pre, out: h }
}

/// Gradients of `sum(c ⊙ out)`: per layer (dW_r, dW_0), then dH0.
fn backward(adj: &[Dense], layers: &[OracleLayer], pass: &Pass, c: &Dense) -> (Vec<(Vec<Dense>, Dense)>, Dense) {
    let mut dh = c.clone();
    let mut grads = Vec::new();
    for (l, layer) in layers.iter().enumerate().rev() {
        let dp: Dense = dh
            .iter()
            .zip(&pass.pre[l])
            .map(|(g, p)| g.iter().zip(p).map(|(a, b)| a * gelu_grad(*b)).collect())
            .collect();
        let h = &pass.inputs[l];
        let d_self = mm(&tr(h), &dp);
        let mut d_rel = Vec::new();
        let mut dx = mm(&dp, &tr(&layer.w_self));
        for (a, w) in adj.iter().zip(&layer.w_rel) {
            d_rel.push(mm(&tr(&mm(a, h)), &dp));
            add_into(&mut dx, &mm(&tr(a), &mm(&dp, &tr(w))));
        }
        grads.push((d_rel, d_self));
        dh = dx;
    }
    grads.reverse();
    (grads, dh)
}

fn max_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest absolute difference between the crate and the reference over
/// `trials` random graphs: embeddings, layer outputs, input gradient and
/// every weight gradient. Any gradient reaching the unused QLink weight
/// counts as a deviation too.
pub fn max_deviation(trials: u64, seed: u64) -> f64 {
    let kg_relations = 3;
    let config = ModelConfig {
        hidden: 6,
        lm_dim: 5,
        layers: 2,
        num_relations: kg_relations + 1,
        relevance: false,
        question_node: false,
        dropout: 0.0,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + trial);
        let n = rng.random_range(3..9);
        let edges = rng.random_range(n..2 * n + 2);
        let graph = crate::gen::random_graph(&mut rng, n, kg_relations as u16, edges, 1);
        let input = CandidateInput {
            entity_embs: crate::gen::unit_rows(&mut rng, n, config.lm_dim),
            h_cls: crate::gen::unit_rows(&mut rng, 1, config.lm_dim).into_data(),
            graph,
        };
        let model = Model::<f64>::new(config.clone(), &mut rng).unwrap();
        let p = &model.params;

        // crate side: full forward, then the layer stack backward from a random upstream gradient
        let trace = model.forward_candidate(&input, None).unwrap();
        let topo = Topology::build(&input.graph, &config).unwrap();
        let h0 = trace.initial.clone().unwrap();
        let mut h = h0.clone();
        let mut traces = Vec::new();
        for (l, lp) in model.layout.layers.iter().enumerate() {
            let t = layer_forward(&topo, &h, p, lp, &config, l).unwrap();
            h = t.output.clone();
            traces.push(t);
        }
        assert_eq!(&h, trace.states.as_ref().unwrap());
        let c = crate::gen::random_matrix(&mut rng, n, config.hidden, 1.0);
        let mut grads = p.grad_buffers();
        let mut dh = c.clone();
        for l in (0..config.layers).rev() {
            dh = layer_backward(&traces[l], &topo, p, &model.layout.layers[l], &config, &dh, &mut grads).unwrap();
        }

        // oracle side, starting from the raw embeddings and projection
        let adj = adjacency(&input.graph, kg_relations);
        let oracle_h0 = mm(&dense(&input.entity_embs), &dense(p.value(model.layout.projection)));
        worst = worst.max(max_diff(&oracle_h0, &dense(&h0)));
        let layers: Vec<OracleLayer> = model
            .layout
            .layers
            .iter()
            .map(|lp| OracleLayer {
                w_rel: lp.relation[..kg_relations].iter().map(|&id| dense(p.value(id))).collect(),
                w_self: dense(p.value(lp.self_weight)),
            })
            .collect();
        let pass = forward(&adj, &layers, &oracle_h0);
        worst = worst.max(max_diff(&pass.out, &dense(&h)));
        let (oracle_grads, oracle_dh0) = backward(&adj, &layers, &pass, &dense(&c));
        worst = worst.max(max_diff(&oracle_dh0, &dense(&dh)));
        for (lp, (d_rel, d_self)) in model.layout.layers.iter().zip(&oracle_grads) {
            worst = worst.max(max_diff(d_self, &dense(&grads[lp.self_weight.0])));
            for (id, d) in lp.relation.iter().zip(d_rel) {
                worst = worst.max(max_diff(d, &dense(&grads[id.0])));
            }
        }
        // no question node: nothing may flow into the QLink weight
        for lp in &model.layout.layers {
            worst = worst.max(grads[lp.relation[kg_relations].0].max_abs());
        }
    }
    worst
}
