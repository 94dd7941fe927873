use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::ExtractOptions;
use crate::model::ModelConfig;
use crate::numerics::ActivationKind;
use crate::training::RAdamConfig;

/// Component switches for ablation runs. Flags compose; `drop_subgraph`
/// overrides the rest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub drop_subgraph: bool,
    /// Collapse every KG relation into one.
    pub drop_relational_edges: bool,
    pub drop_question_node: bool,
    /// Relevance forced to all-ones and global mixing off.
    pub drop_relevance: bool,
}

impl AblationSpec {
    pub const COMPONENTS: [&'static str; 4] = ["subgraph", "relational_edges", "question_node", "relevance"];

    pub fn is_empty(&self) -> bool {
        *self == AblationSpec::default()
    }

    /// The five rows of the incremental ablation ladder, from the bare
    /// context encoder up to the full model.
    pub fn ladder() -> [(&'static str, AblationSpec); 5] {
        let none = AblationSpec::default();
        [
            (
                "no-kg",
                AblationSpec {
                    drop_subgraph: true,
                    ..none
                },
            ),
            (
                "+subgraph",
                AblationSpec {
                    drop_relational_edges: true,
                    drop_question_node: true,
                    drop_relevance: true,
                    ..none
                },
            ),
            (
                "+relational-edges",
                AblationSpec {
                    drop_question_node: true,
                    drop_relevance: true,
                    ..none
                },
            ),
            (
                "+question-node",
                AblationSpec {
                    drop_relevance: true,
                    ..none
                },
            ),
            ("+relevance", none),
        ]
    }

    fn flag_mut(&mut self, component: &str) -> Option<&mut bool> {
        match component {
            "subgraph" => Some(&mut self.drop_subgraph),
            "relational_edges" => Some(&mut self.drop_relational_edges),
            "question_node" => Some(&mut self.drop_question_node),
            "relevance" => Some(&mut self.drop_relevance),
            _ => None,
        }
    }
}

/// Parses `component=off|on` items separated by commas, e.g.
/// `relevance=off,question_node=off`. Naming a component twice with
/// different settings is a contradiction.
impl FromStr for AblationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = AblationSpec::default();
        let mut seen: Vec<(String, bool)> = Vec::new();
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (name, state) = item
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("ablation item `{item}` is not component=on|off")))?;
            let name = name.trim().replace('-', "_");
            let drop = match state.trim() {
                "off" => true,
                "on" => false,
                other => return Err(Error::Validation(format!("ablation state `{other}` is not on|off"))),
            };
            if let Some((_, prev)) = seen.iter().find(|(n, _)| *n == name) {
                if *prev != drop {
                    return Err(Error::Validation(format!("contradictory ablation flags for `{name}`")));
                }
            }
            let flag = spec.flag_mut(&name).ok_or_else(|| {
                Error::Validation(format!(
                    "unknown ablation component `{name}` (expected one of {})",
                    AblationSpec::COMPONENTS.join(", ")
                ))
            })?;
            *flag = drop;
            seen.push((name, drop));
        }
        Ok(spec)
    }
}

impl fmt::Display for AblationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flags = [
            self.drop_subgraph,
            self.drop_relational_edges,
            self.drop_question_node,
            self.drop_relevance,
        ];
        let off: Vec<String> = AblationSpec::COMPONENTS
            .iter()
            .zip(flags)
            .filter(|(_, d)| *d)
            .map(|(c, _)| format!("{c}=off"))
            .collect();
        if off.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&off.join(","))
        }
    }
}

/// Returns `config` with the ablated components switched off.
pub fn apply_ablation(config: &ModelConfig, spec: &AblationSpec) -> Result<ModelConfig> {
    let mut out = config.clone();
    if spec.drop_subgraph {
        if !spec.is_empty()
            && *spec
                != (AblationSpec {
                    drop_subgraph: true,
                    ..Default::default()
                })
        {
            log::info!("drop_subgraph overrides the other ablation flags");
        }
        out.use_subgraph = false;
        out.validate()?;
        return Ok(out);
    }
    if spec.drop_relational_edges {
        out.collapse_relations = true;
    }
    if spec.drop_question_node {
        out.question_node = false;
    }
    if spec.drop_relevance {
        out.relevance = false;
    }
    out.validate()?;
    Ok(out)
}

/// Everything a training run needs besides data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub layers: usize,
    pub hidden: usize,
    pub lr_lm: f64,
    pub lr_graph: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub ablation: AblationSpec,
    pub scaled_relevance: bool,
    pub state_norm: bool,
    pub activation: ActivationKind,
    pub dropout: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Tokenizer limit of the language model; recorded only, the providers
    /// here do not truncate.
    pub max_seq_len: usize,
    pub hops: usize,
    pub max_nodes: usize,
    pub max_ngram: usize,
}

/// Hash-provider width used with [`TrainConfig::desk`].
pub const DESK_LM_DIM: usize = 128;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            layers: 3,
            hidden: 200,
            lr_lm: 1e-5,
            lr_graph: 1e-3,
            patience: 5,
            max_epochs: 50,
            seed: 0,
            ablation: AblationSpec::default(),
            scaled_relevance: false,
            state_norm: false,
            activation: ActivationKind::Gelu,
            dropout: 0.2,
            grad_clip: Some(1.0),
            max_seq_len: 128,
            hops: 2,
            max_nodes: 200,
            max_ngram: 4,
        }
    }
}

impl TrainConfig {
    /// Settings for gradient and determinism checks: no dropout, no clipping.
    pub fn verification() -> Self {
        TrainConfig {
            dropout: 0.0,
            grad_clip: None,
            ..Default::default()
        }
    }

    /// Preset for the synthetic desk experiments: small widths, both
    /// relevance stabilizers on. Pair with a [`DESK_LM_DIM`]-wide provider.
    pub fn desk() -> Self {
        TrainConfig {
            hidden: 64,
            scaled_relevance: true,
            state_norm: true,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be positive".into()));
        }
        if !(self.lr_lm >= 0.0 && self.lr_graph > 0.0) {
            return Err(Error::Config("learning rates must be non-negative (graph rate positive)".into()));
        }
        if let Some(c) = self.grad_clip {
            if c.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::Config(format!("grad_clip {c} must be positive")));
            }
        }
        if self.hops == 0 {
            return Err(Error::Config("hops must be at least 1".into()));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> RAdamConfig {
        RAdamConfig {
            lr_encoder: self.lr_lm,
            lr_graph: self.lr_graph,
            ..Default::default()
        }
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            hops: self.hops,
            max_nodes: self.max_nodes,
        }
    }

    /// Model config for `num_relations` KG relations (QLink added) and
    /// context width `lm_dim`, with the ablation applied.
    pub fn model_config(&self, num_kg_relations: usize, lm_dim: usize) -> Result<ModelConfig> {
        self.validate()?;
        let base = ModelConfig {
            hidden: self.hidden,
            lm_dim,
            layers: self.layers,
            num_relations: num_kg_relations + 1,
            activation: self.activation,
            scaled_relevance: self.scaled_relevance,
            state_norm: self.state_norm,
            dropout: self.dropout,
            ..Default::default()
        };
        apply_ablation(&base, &self.ablation)
    }
}
