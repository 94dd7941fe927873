//! Optimization, datasets, evaluation, ablations and the synthetic task.

mod config;
mod dataset;
mod prepare;
mod radam;
mod scaling;
mod synthetic;
mod trainer;

pub use config::{apply_ablation, AblationSpec, TrainConfig, DESK_LM_DIM};
pub use dataset::{
    filter_negation, is_negation_question, load_dataset, negation_tokens, validate_dataset, write_dataset, QAExample, NEGATION_WORDS,
};
pub use prepare::{build_subgraphs, example_input, extract_candidates, prepare_dataset, prepare_from_records};
pub use radam::{RAdamConfig, RAdamState, StepInfo};
pub use scaling::{dense_graph, loglog_slope, measure_depth_scaling, measure_scaling, ScalingReport, ScalingRow};
pub use synthetic::{gen_synthetic, SurfaceTriple, SyntheticTask, SyntheticTaskSpec};
pub use trainer::{evaluate, train, validate_inputs, EpochRecord, Metrics, Prediction, TrainOutcome};
