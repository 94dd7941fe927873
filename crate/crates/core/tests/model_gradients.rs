//! Full-model gradients against central finite differences.

use drgn::model::ModelConfig;
use drgn::numerics::ActivationKind;
use testkit::properties::max_grad_error;

fn small_config() -> ModelConfig {
    ModelConfig {
        hidden: 8,
        lm_dim: 8,
        layers: 2,
        num_relations: 4,
        ..Default::default()
    }
}

fn check(config: ModelConfig, seed: u64) -> f64 {
    let (err, checked) = max_grad_error(&config, seed);
    assert!(checked > 1000);
    err
}

#[test]
fn full_model_gradients_match_finite_differences() {
    assert!(check(small_config(), 11) < 1e-3);
}

#[test]
fn scaled_relevance_gradients() {
    let c = ModelConfig {
        scaled_relevance: true,
        ..small_config()
    };
    assert!(check(c, 21) < 1e-3);
}

#[test]
fn state_norm_gradients() {
    // unit-RMS rows without scaling give |M| ~ d, curvature that eps=1e-4
    // differences cannot resolve, so only the scaled pairing is checked
    for c in [
        ModelConfig {
            state_norm: true,
            scaled_relevance: true,
            ..small_config()
        },
        ModelConfig {
            state_norm: true,
            scaled_relevance: true,
            activation: ActivationKind::Tanh,
            ..small_config()
        },
    ] {
        assert!(check(c.clone(), 51) < 1e-3, "{c:?}");
    }
}

#[test]
fn ablated_variants_gradients() {
    for c in [
        ModelConfig {
            relevance: false,
            ..small_config()
        },
        ModelConfig {
            question_node: false,
            ..small_config()
        },
        ModelConfig {
            collapse_relations: true,
            bidirectional: false,
            ..small_config()
        },
    ] {
        assert!(check(c.clone(), 31) < 1e-3, "{c:?}");
    }
}

#[test]
fn no_subgraph_gradients() {
    let c = ModelConfig {
        use_subgraph: false,
        ..small_config()
    };
    assert!(check(c, 41) < 1e-3);
}
