//! Structural checks on the forward pass: relevance invariants, exact
//! scale sensitivity, relabeling equivariance and finite-difference
//! gradients. Each returns a measurement rather than asserting.

use drgn::model::{mean_loss, relevance_matrix, CandidateInput, Model, ModelConfig};
use drgn::numerics::{grad_check, Matrix};
use drgn::Scalar;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gen;

pub fn config(scaled: bool, state_norm: bool) -> ModelConfig {
    ModelConfig {
        hidden: 8,
        lm_dim: 6,
        layers: 3,
        num_relations: 4,
        scaled_relevance: scaled,
        state_norm,
        dropout: 0.0,
        ..Default::default()
    }
}

pub fn cast_input<T: Scalar>(c: &CandidateInput<f64>) -> CandidateInput<T> {
    CandidateInput {
        graph: c.graph.clone(),
        entity_embs: c.entity_embs.cast(),
        h_cls: c.h_cls.iter().map(|&x| T::of(x)).collect(),
    }
}

/// Unscaled relevance is cubic in the state scale per use; at unit-norm
/// inputs three layers overflow f32, at 0.7 they stay in range.
pub fn scale_down(c: &mut CandidateInput<f64>) {
    c.entity_embs = c.entity_embs.scale(0.7);
    c.h_cls.iter_mut().for_each(|x| *x *= 0.7);
}

/// Number of relevance matrices checked and the violations found, over 10
/// random inputs for each of the unscaled, scaled and scaled+norm variants.
/// Both uses per layer are checked against the states they were built from.
pub fn invariant_violations<T: Scalar>(tol: f64) -> (usize, Vec<String>) {
    let mut seen = 0;
    let mut bad = Vec::new();
    for (scaled, norm) in [(false, false), (true, false), (true, true)] {
        let cfg = config(scaled, norm);
        let scale = if scaled { T::one() / T::of(cfg.hidden as f64) } else { T::one() };
        for trial in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + trial);
            let n = rng.random_range(2..8);
            let mut input = gen::random_candidate(&mut rng, &cfg, n, 2 * n);
            scale_down(&mut input);
            let model = Model::<T>::new(cfg.clone(), &mut rng).unwrap();
            let trace = model.forward_candidate(&cast_input::<T>(&input), None).unwrap();
            for (l, layer) in trace.layers.iter().enumerate() {
                let mix = &layer.mix.as_ref().unwrap().relevance;
                let uses = [(layer.relevance.as_ref().unwrap(), &layer.input), (mix, &layer.intermediate)];
                for (use_, (m, h)) in uses.into_iter().enumerate() {
                    if let Err(e) = m.check_invariants(h, scale, T::of(tol)) {
                        bad.push(format!("scaled={scaled} norm={norm} trial {trial} layer {l} use {use_}: {e}"));
                    }
                    seen += 1;
                }
            }
        }
    }
    (seen, bad)
}

/// Whether M(2H) = 4·M(H) holds bit for bit on `trials` random state
/// matrices, scaled and unscaled at 64-bit and unscaled at 32-bit.
pub fn doubling_is_exact(trials: usize) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..trials).all(|_| {
        let (n, d) = (rng.random_range(1..10), rng.random_range(1..12));
        let h = gen::random_matrix(&mut rng, n, d, 3.0);
        let exact64 = [false, true].into_iter().all(|scaled| {
            let m1 = relevance_matrix(&h, scaled, 0).unwrap().matrix;
            relevance_matrix(&h.scale(2.0), scaled, 0).unwrap().matrix == m1.scale(4.0)
        });
        let h32: Matrix<f32> = h.cast();
        let m1 = relevance_matrix(&h32, false, 0).unwrap().matrix;
        exact64 && relevance_matrix(&h32.scale(2.0), false, 0).unwrap().matrix == m1.scale(4.0)
    })
}

/// Relabels the entity nodes by `perm` (Q stays last).
pub fn permute_input(c: &CandidateInput<f64>, perm: &[usize]) -> CandidateInput<f64> {
    let n = perm.len();
    let mut embs = Matrix::zeros(n, c.entity_embs.cols());
    for (i, &p) in perm.iter().enumerate() {
        embs.row_mut(p).copy_from_slice(c.entity_embs.row(i));
    }
    CandidateInput {
        graph: c.graph.permuted(perm),
        entity_embs: embs,
        h_cls: c.h_cls.clone(),
    }
}

/// Largest change in final states (matched through the relabeling) or in
/// the candidate score, over `trials` random relabelings for each of four
/// model variants at 64-bit.
pub fn permutation_max_deviation(trials: u64) -> f64 {
    let variants = [
        config(false, false),
        config(true, true),
        ModelConfig {
            relevance: false,
            ..config(false, false)
        },
        ModelConfig {
            question_node: false,
            ..config(true, false)
        },
    ];
    let mut worst: f64 = 0.0;
    for cfg in &variants {
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(700 + trial);
            let n = rng.random_range(2..9);
            let mut input = gen::random_candidate(&mut rng, cfg, n, 2 * n);
            scale_down(&mut input);
            let model = Model::<f64>::new(cfg.clone(), &mut rng).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let permuted = permute_input(&input, &perm);

            let a = model.forward_candidate(&input, None).unwrap();
            let b = model.forward_candidate(&permuted, None).unwrap();
            let (ha, hb) = (a.states.unwrap(), b.states.unwrap());
            if ha.rows() != hb.rows() {
                return f64::INFINITY;
            }
            for (i, &p) in perm.iter().enumerate() {
                for (x, y) in ha.row(i).iter().zip(hb.row(p)) {
                    worst = worst.max((x - y).abs());
                }
            }
            // the question row, when present, is not relabeled
            for r in n..ha.rows() {
                for (x, y) in ha.row(r).iter().zip(hb.row(r)) {
                    worst = worst.max((x - y).abs());
                }
            }
            worst = worst.max((a.scorer.score - b.scorer.score).abs());
        }
    }
    worst
}

/// Central differences (ε = 1e-4) over every parameter of a fresh model on
/// two random 6-entity, 3-candidate examples; returns the largest relative
/// error and the number of entries checked.
pub fn max_grad_error(config: &ModelConfig, seed: u64) -> (f64, usize) {
    // unnormalized relevance is cubic in the state scale; 0.7 keeps every
    // layer O(1) or below instead of overflowing the loss
    let examples: Vec<_> = (0..2).map(|i| gen::scaled_example(seed + i, config, 6, 8, 3, 0.7)).collect();
    let mut model = Model::<f64>::new(config.clone(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    model.compute_gradients(&examples).unwrap();
    let report = grad_check(&mut model.params, 1e-4, |p| mean_loss(config, p, &examples)).unwrap();
    (report.max_rel_error, report.checked)
}
