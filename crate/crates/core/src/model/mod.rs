//! The dynamic relevance graph network: relevance-weighted relational
//! layers, question-node updates, global relevance mixing, pooling, answer
//! scoring and the cross-entropy loss, each with an analytic backward pass.

mod checkpoint;
mod config;
mod layer;
mod params;
mod relevance;
mod scorer;
mod topology;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::ModelConfig;
pub use layer::{entity_update, global_mix, layer_backward, layer_forward, question_update, LayerTrace, MixTrace};
pub use params::{init_params, layout_for, LayerParams, Layout};
pub use relevance::{relevance_matrix, RelevanceMatrix};
pub use scorer::{loss, pool_graph, predict, score_backward, score_candidate, score_forward, ScorerTrace, ScorerWeights};
pub use topology::Topology;

use rand::{Rng, RngCore, SeedableRng};

use crate::encoding::init_node_states;
use crate::error::{Error, Result};
use crate::kg::RelationalGraph;
use crate::numerics::{axpy, rms_norm_rows, rms_norm_rows_backward, Matrix, ParamStore};
use crate::scalar::Scalar;

/// Everything the model consumes for one (question, candidate) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateInput<T> {
    pub graph: RelationalGraph,
    /// `|V| × d_lm`, one row per entity node.
    pub entity_embs: Matrix<T>,
    pub h_cls: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleInput<T> {
    pub id: String,
    /// Question text, kept for subset filtering and reports.
    pub question: String,
    pub candidates: Vec<CandidateInput<T>>,
    pub gold: usize,
}

#[derive(Debug, Clone)]
pub struct CandidateTrace<T> {
    pub topology: Option<Topology>,
    pub initial: Option<Matrix<T>>,
    projection_input: Option<Matrix<T>>,
    /// Pre-normalization states when `state_norm` is on: h^(0) first, then
    /// each layer output.
    unnormed: Vec<Matrix<T>>,
    pub layers: Vec<LayerTrace<T>>,
    dropout: Vec<Option<Matrix<T>>>,
    /// Final node states `h^(L)`.
    pub states: Option<Matrix<T>>,
    pub scorer: ScorerTrace<T>,
}

impl<T: Scalar> CandidateTrace<T> {
    pub fn score(&self) -> T {
        self.scorer.score
    }
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    pub layout: Layout,
}

impl<T: Scalar> Model<T> {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (params, layout) = init_params(&config, rng)?;
        Ok(Model { config, params, layout })
    }

    /// Wraps an existing store, checking it has the layout `config` implies.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let (reference, layout) = init_params::<T, _>(&config, &mut rng)?;
        if !reference.same_layout(&params) {
            return Err(Error::Checkpoint("parameter layout does not match model config".into()));
        }
        Ok(Model { config, params, layout })
    }

    fn scorer_weights(&self) -> ScorerWeights<'_, T> {
        ScorerWeights {
            w1: self.params.value(self.layout.out_w1),
            b1: self.params.value(self.layout.out_b1),
            w2: self.params.value(self.layout.out_w2),
            b2: self.params.value(self.layout.out_b2),
        }
    }

    fn check_input(&self, input: &CandidateInput<T>) -> Result<()> {
        if input.h_cls.len() != self.config.lm_dim {
            return Err(Error::Dimension {
                op: "h_cls",
                left: (1, input.h_cls.len()),
                right: (1, self.config.lm_dim),
            });
        }
        if self.config.use_subgraph
            && input.entity_embs.shape() != (input.graph.num_entities(), self.config.lm_dim)
            && !(input.graph.num_entities() == 0 && input.entity_embs.rows() == 0)
        {
            return Err(Error::Dimension {
                op: "entity embeddings",
                left: input.entity_embs.shape(),
                right: (input.graph.num_entities(), self.config.lm_dim),
            });
        }
        Ok(())
    }

    /// Shape, relation and label checks for one example.
    pub fn validate_example(&self, example: &ExampleInput<T>) -> Result<()> {
        if example.candidates.len() < 2 {
            return Err(Error::Validation(format!(
                "{} candidates; need at least 2",
                example.candidates.len()
            )));
        }
        if example.gold >= example.candidates.len() {
            return Err(Error::Validation(format!("gold index {} out of range", example.gold)));
        }
        for c in &example.candidates {
            self.check_input(c)?;
            c.graph.validate()?;
            Topology::build(&c.graph, &self.config)?;
        }
        Ok(())
    }

    /// Forward pass for one candidate. Dropout is active only when `rng` is given.
    pub fn forward_candidate(&self, input: &CandidateInput<T>, mut rng: Option<&mut (dyn RngCore + '_)>) -> Result<CandidateTrace<T>> {
        self.check_input(input)?;
        let d = self.config.hidden;
        if !self.config.use_subgraph {
            let zeros = vec![T::zero(); d];
            let scorer = score_forward(&input.h_cls, &zeros, &zeros, self.scorer_weights(), self.config.activation)?;
            return Ok(CandidateTrace {
                topology: None,
                initial: None,
                projection_input: None,
                unnormed: Vec::new(),
                layers: Vec::new(),
                dropout: Vec::new(),
                states: None,
                scorer,
            });
        }

        let topo = Topology::build(&input.graph, &self.config)?;
        let cls = topo.question.map(|_| input.h_cls.as_slice());
        let embs = if input.entity_embs.rows() == 0 {
            Matrix::zeros(0, self.config.lm_dim)
        } else {
            input.entity_embs.clone()
        };
        let projection_input = match cls {
            Some(c) => crate::numerics::concat(&[&embs, &Matrix::row_vector(c)?], crate::numerics::Axis::Rows)?,
            None => embs.clone(),
        };
        let mut initial = init_node_states(&embs, cls, self.params.value(self.layout.projection))?;
        let norm = self.config.state_norm;
        let mut unnormed = Vec::new();
        if norm {
            let normed = rms_norm_rows(&initial)?;
            unnormed.push(std::mem::replace(&mut initial, normed));
        }

        let mut h = initial.clone();
        let mut layers = Vec::with_capacity(self.config.layers);
        let mut dropout = Vec::with_capacity(self.config.layers);
        for (l, lp) in self.layout.layers.iter().enumerate() {
            let trace = layer_forward(&topo, &h, &self.params, lp, &self.config, l)?;
            h = if norm {
                unnormed.push(trace.output.clone());
                rms_norm_rows(&trace.output)?
            } else {
                trace.output.clone()
            };
            layers.push(trace);
            let last = l + 1 == self.config.layers;
            let mask = match rng.as_deref_mut() {
                Some(r) if self.config.dropout > 0.0 && !last => {
                    let keep = 1.0 - self.config.dropout;
                    let scale = T::of(1.0 / keep);
                    let data = (0..h.len())
                        .map(|_| if r.random::<f64>() < keep { scale } else { T::zero() })
                        .collect();
                    let mask = Matrix::from_vec(h.rows(), h.cols(), data)?;
                    h = h.hadamard(&mask)?;
                    Some(mask)
                }
                _ => None,
            };
            dropout.push(mask);
        }

        let h_q = topo.question.map_or_else(|| vec![T::zero(); d], |q| h.row(q).to_vec());
        let pooled = pool_graph(&h, topo.num_entities);
        let scorer = score_forward(&input.h_cls, &h_q, &pooled, self.scorer_weights(), self.config.activation)?;
        Ok(CandidateTrace {
            topology: Some(topo),
            initial: Some(initial),
            projection_input: Some(projection_input),
            unnormed,
            layers,
            dropout,
            states: Some(h),
            scorer,
        })
    }

    /// Adds `d_score · ∂score/∂θ` for every parameter into `grads`.
    pub fn backward_candidate(&self, trace: &CandidateTrace<T>, d_score: T, grads: &mut [Matrix<T>]) -> Result<()> {
        let act = self.config.activation;
        let sg = score_backward(&trace.scorer, self.scorer_weights(), act, d_score)?;
        grads[self.layout.out_w1.0].add_assign(&sg.w1)?;
        grads[self.layout.out_b1.0].add_assign(&sg.b1)?;
        grads[self.layout.out_w2.0].add_assign(&sg.w2)?;
        grads[self.layout.out_b2.0].add_assign(&sg.b2)?;

        let (Some(topo), Some(states)) = (&trace.topology, &trace.states) else {
            return Ok(());
        };
        let d = self.config.hidden;
        let lm = self.config.lm_dim;
        let dx = sg.input.row(0);
        let mut dh = Matrix::zeros(states.rows(), d);
        if let Some(q) = topo.question {
            dh.row_mut(q).copy_from_slice(&dx[lm..lm + d]);
        }
        if topo.num_entities > 0 {
            let inv = T::one() / T::of(topo.num_entities as f64);
            for i in 0..topo.num_entities {
                axpy(dh.row_mut(i), inv, &dx[lm + d..lm + 2 * d]);
            }
        }

        for l in (0..trace.layers.len()).rev() {
            if let Some(mask) = &trace.dropout[l] {
                dh = dh.hadamard(mask)?;
            }
            if let Some(x) = trace.unnormed.get(l + 1) {
                dh = rms_norm_rows_backward(x, &dh)?;
            }
            dh = layer_backward(
                &trace.layers[l],
                topo,
                &self.params,
                &self.layout.layers[l],
                &self.config,
                &dh,
                grads,
            )?;
        }
        if let Some(x) = trace.unnormed.first() {
            dh = rms_norm_rows_backward(x, &dh)?;
        }
        let x = trace.projection_input.as_ref().expect("projection input cached with topology");
        grads[self.layout.projection.0].add_assign(&x.t_matmul(&dh)?)?;
        Ok(())
    }

    /// Per layer, the `k` strongest relevance entries of the question-node
    /// row (row 0 without a question node) in the last relevance matrix the
    /// layer computes. Empty lists when relevance is ablated.
    pub fn top_relevance(&self, input: &CandidateInput<T>, k: usize) -> Result<Vec<Vec<(usize, T)>>> {
        let trace = self.forward_candidate(input, None)?;
        let Some(topo) = &trace.topology else {
            return Ok(Vec::new());
        };
        let row = topo.question.unwrap_or(0);
        Ok(trace
            .layers
            .iter()
            .map(|l| {
                let m = l.mix.as_ref().map(|m| &m.relevance).or(l.relevance.as_ref());
                match m {
                    Some(m) if row < m.matrix.rows() => m.top_in_row(row, k),
                    _ => Vec::new(),
                }
            })
            .collect())
    }

    /// Candidate scores without keeping traces.
    pub fn scores(&self, example: &ExampleInput<T>) -> Result<Vec<T>> {
        example
            .candidates
            .iter()
            .map(|c| Ok(self.forward_candidate(c, None)?.score()))
            .collect()
    }

    pub fn predict(&self, example: &ExampleInput<T>) -> Result<usize> {
        predict(&self.scores(example)?)
    }

    /// Loss for one example; gradients are added into `grads`.
    pub fn loss_and_grads(
        &self,
        example: &ExampleInput<T>,
        grads: &mut [Matrix<T>],
        mut rng: Option<&mut (dyn RngCore + '_)>,
    ) -> Result<(T, Vec<T>)> {
        let mut traces = Vec::with_capacity(example.candidates.len());
        for c in &example.candidates {
            traces.push(self.forward_candidate(c, rng.as_deref_mut())?);
        }
        let scores: Vec<T> = traces.iter().map(CandidateTrace::score).collect();
        let (value, d_scores) = loss(&scores, example.gold)?;
        for (trace, &ds) in traces.iter().zip(&d_scores) {
            self.backward_candidate(trace, ds, grads)?;
        }
        Ok((value, scores))
    }

    /// Loss only, no dropout.
    pub fn example_loss(&self, example: &ExampleInput<T>) -> Result<T> {
        Ok(loss(&self.scores(example)?, example.gold)?.0)
    }

    /// Mean loss over `examples`; analytic gradients (of the mean) replace
    /// whatever was stored in `self.params`.
    pub fn compute_gradients(&mut self, examples: &[ExampleInput<T>]) -> Result<T> {
        let mut grads = self.params.grad_buffers();
        let mut total = T::zero();
        for ex in examples {
            total += self.loss_and_grads(ex, &mut grads, None)?.0;
        }
        let inv = T::one() / T::of(examples.len().max(1) as f64);
        self.params.zero_grad();
        self.params.accumulate(&grads)?;
        self.params.scale_grads(inv);
        Ok(total * inv)
    }
}

/// Mean loss of `examples` under an arbitrary parameter store with the
/// layout `config` implies; the closure form gradient checking needs.
pub fn mean_loss<T: Scalar>(config: &ModelConfig, params: &ParamStore<T>, examples: &[ExampleInput<T>]) -> Result<T> {
    let model = Model::from_params(config.clone(), params.clone())?;
    let mut total = T::zero();
    for ex in examples {
        total += model.example_loss(ex)?;
    }
    Ok(total / T::of(examples.len().max(1) as f64))
}
