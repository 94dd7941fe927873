use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{loss, predict, ExampleInput, Model, ModelConfig};
use crate::scalar::Scalar;
use crate::training::{is_negation_question, RAdamState, TrainConfig};

/// Accuracy over a dataset and over its negation subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub mean_loss: f64,
    pub negation_total: usize,
    pub negation_correct: usize,
    /// `None` when the subset is empty.
    pub negation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub gold: usize,
    pub predicted: usize,
    pub scores: Vec<f64>,
}

/// Scores every example with `model` (no dropout).
pub fn evaluate<T: Scalar>(model: &Model<T>, examples: &[ExampleInput<T>]) -> Result<(Metrics, Vec<Prediction>)> {
    let mut preds = Vec::with_capacity(examples.len());
    let (mut correct, mut neg_total, mut neg_correct) = (0, 0, 0);
    let mut loss_sum = 0.0;
    for ex in examples {
        let scores = model.scores(ex)?;
        let predicted = predict(&scores)?;
        loss_sum += loss(&scores, ex.gold)?.0.as_f64();
        let hit = predicted == ex.gold;
        correct += usize::from(hit);
        if is_negation_question(&ex.question) {
            neg_total += 1;
            neg_correct += usize::from(hit);
        }
        preds.push(Prediction {
            id: ex.id.clone(),
            gold: ex.gold,
            predicted,
            scores: scores.iter().map(|s| s.as_f64()).collect(),
        });
    }
    let total = examples.len();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok((
        Metrics {
            total,
            correct,
            accuracy: ratio(correct, total),
            mean_loss: if total == 0 { 0.0 } else { loss_sum / total as f64 },
            negation_total: neg_total,
            negation_correct: neg_correct,
            negation_accuracy: (neg_total > 0).then(|| ratio(neg_correct, neg_total)),
        },
        preds,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
    pub dev_loss: f64,
    pub steps: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the best dev accuracy.
    pub model: Model<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
    pub stopped_early: bool,
}

/// Checks every example against `config` before training touches anything.
pub fn validate_inputs<T: Scalar>(model: &Model<T>, examples: &[ExampleInput<T>], split: &str) -> Result<()> {
    for ex in examples {
        model
            .validate_example(ex)
            .map_err(|e| Error::Validation(format!("{split} example {}: {e}", ex.id)))?;
    }
    Ok(())
}

/// Trains with RAdam on mini-batches, early-stopping on dev accuracy.
///
/// Everything random (initialization, shuffling, dropout) derives from
/// `config.seed`, so a run at 64-bit precision is reproducible bit for bit.
pub fn train<T: Scalar>(
    train_set: &[ExampleInput<T>],
    dev_set: &[ExampleInput<T>],
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::Validation("training needs non-empty train and dev splits".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::<T>::new(model_config.clone(), &mut rng)?;
    validate_inputs(&model, train_set, "train")?;
    validate_inputs(&model, dev_set, "dev")?;

    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let use_dropout = model_config.dropout > 0.0;
    let mut opt = RAdamState::new(&model.params, config.optimizer());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, model.params.clone(), 0usize);
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.params.grad_buffers();
            for &i in batch {
                let drng: Option<&mut (dyn rand::RngCore + '_)> = if use_dropout { Some(&mut dropout_rng) } else { None };
                let (l, _) = model.loss_and_grads(&train_set[i], &mut grads, drng)?;
                loss_sum += l.as_f64();
            }
            model.params.zero_grad();
            model.params.accumulate(&grads)?;
            model.params.scale_grads(T::one() / T::of(batch.len() as f64));
            if let Some(clip) = config.grad_clip {
                model.params.clip_grad_norm(T::of(clip));
            }
            opt.step(&mut model.params)?;
        }
        let (dev, _) = evaluate(&model, dev_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            dev_accuracy: dev.accuracy,
            dev_loss: dev.mean_loss,
            steps: opt.t,
        };
        log::info!(
            "epoch {epoch}: train loss {:.4}, dev acc {:.4}, dev loss {:.4}",
            record.train_loss,
            record.dev_accuracy,
            record.dev_loss
        );
        history.push(record);
        if dev.accuracy > best.0 {
            best = (dev.accuracy, model.params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                log::info!("early stop after epoch {epoch}; best epoch {}", best.2);
                break;
            }
        }
    }

    model.params = best.1;
    model.params.zero_grad();
    Ok(TrainOutcome {
        model,
        history,
        best_epoch: best.2,
        best_dev_accuracy: best.0,
        stopped_early,
    })
}
