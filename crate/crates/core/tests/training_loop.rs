//! Training and evaluation behavior on small 64-bit fixtures.

use drgn::model::{ExampleInput, Model, ModelConfig};
use drgn::numerics::Matrix;
use drgn::training::{evaluate, train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: 8,
        layers: 2,
        batch_size: 4,
        scaled_relevance: true,
        state_norm: true,
        seed,
        ..TrainConfig::verification()
    }
}

fn model_config(tc: &TrainConfig) -> ModelConfig {
    tc.model_config(3, 6).unwrap()
}

fn examples(cfg: &ModelConfig, seeds: std::ops::Range<u64>, candidates: usize) -> Vec<ExampleInput<f64>> {
    seeds.map(|s| testkit::gen::random_example(s, cfg, 5, 8, candidates)).collect()
}

#[test]
fn single_example_is_overfit() {
    let tc = TrainConfig {
        lr_graph: 1e-2,
        max_epochs: 300,
        patience: 300,
        ..train_config(1)
    };
    let mc = model_config(&tc);
    let data = examples(&mc, 3..4, 4);
    let out = train(&data, &data, &mc, &tc).unwrap();
    assert_eq!(out.best_dev_accuracy, 1.0);
    let (m, _) = evaluate(&out.model, &data).unwrap();
    assert_eq!(m.accuracy, 1.0);
    let first = out.history.first().unwrap().train_loss;
    let last = out.history.last().unwrap().train_loss;
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn patience_stops_on_a_flat_dev_metric() {
    // a vanishing learning rate freezes the predictions, so dev accuracy never improves
    let tc = TrainConfig {
        lr_graph: 1e-300,
        lr_lm: 0.0,
        patience: 2,
        max_epochs: 50,
        ..train_config(2)
    };
    let mc = model_config(&tc);
    let out = train(&examples(&mc, 0..8, 3), &examples(&mc, 100..108, 3), &mc, &tc).unwrap();
    assert!(out.stopped_early);
    assert_eq!(out.best_epoch, 1);
    assert!(out.history.len() <= out.best_epoch + 3);
    assert_eq!(out.history.len(), out.best_epoch + tc.patience);
}

#[test]
fn training_is_bit_reproducible() {
    let tc = TrainConfig {
        max_epochs: 4,
        dropout: 0.2,
        ..train_config(3)
    };
    let mc = model_config(&tc);
    let (tr, dv) = (examples(&mc, 0..12, 3), examples(&mc, 50..56, 3));
    let a = train(&tr, &dv, &mc, &tc).unwrap();
    let b = train(&tr, &dv, &mc, &tc).unwrap();
    for (x, y) in a.history.iter().zip(&b.history) {
        assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
        assert_eq!(x.dev_loss.to_bits(), y.dev_loss.to_bits());
    }
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.params, b.model.params);
    let c = train(&tr, &dv, &mc, &TrainConfig { seed: 4, ..tc.clone() }).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn evaluation_is_repeatable() {
    let tc = train_config(5);
    let mc = model_config(&tc);
    let model = Model::<f64>::new(mc.clone(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let data = examples(&mc, 0..10, 4);
    assert_eq!(evaluate(&model, &data).unwrap(), evaluate(&model, &data).unwrap());
}

/// Scorer that reads only the first context coordinate.
fn first_coordinate_scorer(mc: &ModelConfig) -> Model<f64> {
    let mut model = Model::<f64>::new(mc.clone(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let (w1, w2) = (model.layout.out_w1, model.layout.out_w2);
    for id in [model.layout.out_w1, model.layout.out_b1, model.layout.out_w2, model.layout.out_b2] {
        model.params.get_mut(id).value.fill_zero();
    }
    model.params.get_mut(w1).value.set(0, 0, 1.0);
    model.params.get_mut(w2).value.set(0, 0, 1.0);
    model
}

#[test]
fn perfect_and_constant_predictors() {
    let tc = train_config(6);
    let mc = model_config(&tc);
    let mut data = examples(&mc, 0..50, 5);
    for (i, ex) in data.iter_mut().enumerate() {
        ex.gold = i % 5;
        for (j, c) in ex.candidates.iter_mut().enumerate() {
            c.h_cls[0] = if j == ex.gold { 1.0 } else { 0.0 };
        }
    }
    let perfect = first_coordinate_scorer(&mc);
    assert_eq!(evaluate(&perfect, &data).unwrap().0.accuracy, 1.0);

    // all-zero scorer: every score ties, the lowest index wins, gold is uniform over 5 slots
    let mut constant = perfect.clone();
    let w1 = constant.layout.out_w1;
    constant.params.get_mut(w1).value = Matrix::zeros(mc.lm_dim + 2 * mc.hidden, mc.hidden);
    let (m, preds) = evaluate(&constant, &data).unwrap();
    assert!(preds.iter().all(|p| p.predicted == 0));
    assert_eq!(m.accuracy, 0.2);
}
