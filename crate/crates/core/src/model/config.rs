use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ActivationKind;

/// Architecture switches and sizes. Serialized into checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Graph hidden width d.
    pub hidden: usize,
    /// Context/embedding width d_lm.
    pub lm_dim: usize,
    pub layers: usize,
    /// Relation types including QLink (the last id).
    pub num_relations: usize,
    pub activation: ActivationKind,
    /// Divide inner products by d.
    pub scaled_relevance: bool,
    /// RMS-normalize the rows of h^(0) and of every layer output, which
    /// keeps the inner products from vanishing or overflowing with depth.
    #[serde(default)]
    pub state_norm: bool,
    /// When false, relevance is all-ones inside the updates and global mixing is skipped.
    pub relevance: bool,
    /// Map every KG relation onto relation 0 (QLink stays separate).
    pub collapse_relations: bool,
    pub question_node: bool,
    /// When false, the graph module is bypassed and only h_cls reaches the scorer.
    pub use_subgraph: bool,
    /// Messages flow both ways along KG edges under the same relation weight.
    pub bidirectional: bool,
    /// Inverted dropout on node states between layers, training only.
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 200,
            lm_dim: 1024,
            layers: 3,
            num_relations: 18,
            activation: ActivationKind::Gelu,
            scaled_relevance: false,
            state_norm: false,
            relevance: true,
            collapse_relations: false,
            question_node: true,
            use_subgraph: true,
            bidirectional: true,
            dropout: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.lm_dim == 0 {
            return Err(Error::Config("hidden and lm_dim must be positive".into()));
        }
        if self.num_relations < 2 {
            return Err(Error::Config("need at least one KG relation plus QLink".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn qlink(&self) -> usize {
        self.num_relations - 1
    }

    /// Width of the scorer input `[h_cls; h_Q; pooled]`.
    pub fn scorer_input(&self) -> usize {
        self.lm_dim + 2 * self.hidden
    }
}
