use rand::Rng;

use crate::error::Result;
use crate::model::ModelConfig;
use crate::numerics::{glorot_uniform, Matrix, ParamGroup, ParamId, ParamStore};
use crate::scalar::Scalar;

/// Handles for one graph layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `W_r`, one per relation including QLink.
    pub relation: Vec<ParamId>,
    /// `W_0`, self term.
    pub self_weight: ParamId,
    /// `W_Q`, applied to the summed `F_c` messages of the question node.
    pub question: ParamId,
    /// `F_c`: 2d → d → d.
    pub fc_w1: ParamId,
    pub fc_b1: ParamId,
    pub fc_w2: ParamId,
    pub fc_b2: ParamId,
    /// `W_g`, global relevance mixing.
    pub global: ParamId,
}

/// Where each model parameter lives in the [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub projection: ParamId,
    pub layers: Vec<LayerParams>,
    /// `f_out`: (d_lm + 2d) → d → 1.
    pub out_w1: ParamId,
    pub out_b1: ParamId,
    pub out_w2: ParamId,
    pub out_b2: ParamId,
}

/// Allocates every parameter with Glorot-uniform weights and zero biases.
///
/// Weights act on row vectors (`h × W`), so each matrix is `in × out`.
pub fn init_params<T: Scalar, R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<(ParamStore<T>, Layout)> {
    let d = config.hidden;
    let mut store = ParamStore::new();
    let projection = store.add("proj.w", ParamGroup::Encoder, glorot_uniform(config.lm_dim, d, rng))?;
    let mut layers = Vec::with_capacity(config.layers);
    for l in 0..config.layers {
        let mut relation = Vec::with_capacity(config.num_relations);
        for r in 0..config.num_relations {
            relation.push(store.add(format!("layer{l}.rel{r}.w"), ParamGroup::Graph, glorot_uniform(d, d, rng))?);
        }
        let self_weight = store.add(format!("layer{l}.self.w"), ParamGroup::Graph, glorot_uniform(d, d, rng))?;
        let question = store.add(format!("layer{l}.question.w"), ParamGroup::Graph, glorot_uniform(d, d, rng))?;
        let fc_w1 = store.add(format!("layer{l}.fc.w1"), ParamGroup::Graph, glorot_uniform(2 * d, d, rng))?;
        let fc_b1 = store.add(format!("layer{l}.fc.b1"), ParamGroup::Graph, Matrix::zeros(1, d))?;
        let fc_w2 = store.add(format!("layer{l}.fc.w2"), ParamGroup::Graph, glorot_uniform(d, d, rng))?;
        let fc_b2 = store.add(format!("layer{l}.fc.b2"), ParamGroup::Graph, Matrix::zeros(1, d))?;
        let global = store.add(format!("layer{l}.global.w"), ParamGroup::Graph, glorot_uniform(d, d, rng))?;
        layers.push(LayerParams {
            relation,
            self_weight,
            question,
            fc_w1,
            fc_b1,
            fc_w2,
            fc_b2,
            global,
        });
    }
    let out_w1 = store.add("out.w1", ParamGroup::Graph, glorot_uniform(config.scorer_input(), d, rng))?;
    let out_b1 = store.add("out.b1", ParamGroup::Graph, Matrix::zeros(1, d))?;
    let out_w2 = store.add("out.w2", ParamGroup::Graph, glorot_uniform(d, 1, rng))?;
    let out_b2 = store.add("out.b2", ParamGroup::Graph, Matrix::zeros(1, 1))?;
    Ok((
        store,
        Layout {
            projection,
            layers,
            out_w1,
            out_b1,
            out_w2,
            out_b2,
        },
    ))
}

/// Rebuilds the layout for a store created by [`init_params`] with the same
/// config (the id sequence is fixed by construction order).
pub fn layout_for(config: &ModelConfig) -> Layout {
    let mut next = 0usize;
    let mut take = || {
        let id = ParamId(next);
        next += 1;
        id
    };
    let projection = take();
    let layers = (0..config.layers)
        .map(|_| {
            let relation = (0..config.num_relations).map(|_| take()).collect();
            LayerParams {
                relation,
                self_weight: take(),
                question: take(),
                fc_w1: take(),
                fc_b1: take(),
                fc_w2: take(),
                fc_b2: take(),
                global: take(),
            }
        })
        .collect();
    Layout {
        projection,
        layers,
        out_w1: take(),
        out_b1: take(),
        out_w2: take(),
        out_b2: take(),
    }
}
