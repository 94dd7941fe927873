//! Language-context vectors and initial node states.

mod provider;

pub use provider::{EmbeddingProvider, FileProvider, HashProvider};

use crate::error::{Error, Result};
use crate::kg::{normalize, RelationalGraph};
use crate::numerics::{concat, Axis, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ContextEncoding<T> {
    pub h_cls: Vec<T>,
    /// Per-token vectors of `[CLS] q [SEP] a`, when requested. Not consumed
    /// by the model.
    pub token_states: Option<Matrix<T>>,
}

/// Lookup key for a (question, candidate) pair: `[CLS] <q tokens> [SEP] <a tokens>`.
pub fn context_key(question: &str, candidate: &str) -> String {
    format!(
        "[CLS] {} [SEP] {}",
        normalize::tokens(question).join(" "),
        normalize::tokens(candidate).join(" ")
    )
}

pub fn encode_context<T: Scalar>(question: &str, candidate: &str, provider: &dyn EmbeddingProvider) -> Result<ContextEncoding<T>> {
    if question.trim().is_empty() || candidate.trim().is_empty() {
        return Err(Error::Validation("question and candidate must be non-empty".into()));
    }
    let h_cls = provider.context(&context_key(question, candidate))?;
    Ok(ContextEncoding {
        h_cls: h_cls.into_iter().map(T::of).collect(),
        token_states: None,
    })
}

/// Like [`encode_context`] but also returns one row per sequence token.
pub fn encode_context_with_tokens<T: Scalar>(
    question: &str,
    candidate: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<ContextEncoding<T>> {
    let mut enc = encode_context::<T>(question, candidate, provider)?;
    let mut rows = vec![enc.h_cls.clone()];
    let body = normalize::tokens(question)
        .into_iter()
        .map(Some)
        .chain(std::iter::once(None))
        .chain(normalize::tokens(candidate).into_iter().map(Some));
    for tok in body {
        let v = match tok {
            Some(t) => provider.token(&t)?,
            None => provider.token("[SEP]")?,
        };
        rows.push(v.into_iter().map(T::of).collect());
    }
    enc.token_states = Some(Matrix::from_rows(&rows)?);
    Ok(enc)
}

/// Mean of token embeddings over the `_`-separated parts of `surface`.
pub fn embed_surface<T: Scalar>(surface: &str, provider: &dyn EmbeddingProvider) -> Result<Vec<T>> {
    let parts: Vec<&str> = surface.split('_').filter(|p| !p.is_empty()).collect();
    if parts.is_empty() {
        return Err(Error::Lookup(surface.to_string()));
    }
    let mut acc = vec![0.0f64; provider.dim()];
    for p in &parts {
        for (a, x) in acc.iter_mut().zip(provider.token(p)?) {
            *a += x;
        }
    }
    let n = parts.len() as f64;
    Ok(acc.into_iter().map(|a| T::of(a / n)).collect())
}

/// One row per entity node (question node excluded), `|V| × d_lm`.
pub fn embed_entities<T: Scalar>(graph: &RelationalGraph, provider: &dyn EmbeddingProvider) -> Result<Matrix<T>> {
    let rows = graph
        .nodes
        .iter()
        .map(|n| embed_surface::<T>(&n.surface, provider))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, provider.dim()));
    }
    Matrix::from_rows(&rows)
}

/// `h⁽⁰⁾ = [entity_embs; h_cls] × W_proj`. With `h_cls = None` the question
/// row is omitted.
pub fn init_node_states<T: Scalar>(entity_embs: &Matrix<T>, h_cls: Option<&[T]>, w_proj: &Matrix<T>) -> Result<Matrix<T>> {
    let input = match h_cls {
        Some(cls) => {
            let cls = Matrix::row_vector(cls)?;
            concat(&[entity_embs, &cls], Axis::Rows)?
        }
        None => entity_embs.clone(),
    };
    input.matmul(w_proj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::EntityId;
    use crate::kg::{GraphNode, NodeRole, RelationId};

    fn graph(surfaces: &[&str]) -> RelationalGraph {
        RelationalGraph {
            nodes: surfaces
                .iter()
                .enumerate()
                .map(|(i, s)| GraphNode {
                    entity: EntityId(i as u32),
                    surface: s.to_string(),
                    role: NodeRole::Intermediate,
                })
                .collect(),
            edges: vec![],
            qlink: RelationId(17),
            has_question_node: true,
        }
    }

    #[test]
    fn context_is_deterministic_and_pair_specific() {
        let p = HashProvider::new(8, 1);
        let a = encode_context::<f64>("Where is a guitar?", "music room", &p).unwrap();
        let b = encode_context::<f64>("where is a guitar", "Music Room", &p).unwrap();
        assert_eq!(a, b);
        let c = encode_context::<f64>("where is a guitar", "concert", &p).unwrap();
        assert_ne!(a.h_cls, c.h_cls);
        assert!(encode_context::<f64>("", "x", &p).is_err());
    }

    #[test]
    fn token_states_have_one_row_per_token() {
        let p = HashProvider::new(4, 1);
        let enc = encode_context_with_tokens::<f64>("a b", "c", &p).unwrap();
        assert_eq!(enc.token_states.unwrap().shape(), (5, 4));
    }

    #[test]
    fn multi_token_entities_are_mean_pooled() {
        let p = HashProvider::new(8, 2);
        let g = graph(&["guitar", "music_room"]);
        let e = embed_entities::<f64>(&g, &p).unwrap();
        assert_eq!(e.row(0), p.token("guitar").unwrap().as_slice());
        let music = p.token("music").unwrap();
        let room = p.token("room").unwrap();
        for k in 0..8 {
            assert_eq!(e.get(1, k), (music[k] + room[k]) / 2.0);
        }
    }

    #[test]
    fn rows_match_per_entity_calls() {
        let p = HashProvider::new(6, 9);
        let names = ["a", "b_c", "d", "e_f_g", "h", "i", "j_k", "l", "m", "n_o"];
        let e = embed_entities::<f64>(&graph(&names), &p).unwrap();
        for (i, n) in names.iter().enumerate() {
            assert_eq!(e.row(i), embed_surface::<f64>(n, &p).unwrap().as_slice());
        }
    }

    #[test]
    fn identity_projection_and_zero_embeddings() {
        let e = Matrix::<f64>::from_f64(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let cls = [7.0, 8.0, 9.0];
        let h0 = init_node_states(&e, Some(&cls), &Matrix::identity(3)).unwrap();
        assert_eq!(h0.row(2), &cls);
        assert_eq!(h0.row(0), e.row(0));
        let z = init_node_states(&Matrix::<f64>::zeros(2, 3), Some(&[0.0; 3]), &Matrix::filled(3, 2, 0.3)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        assert!(init_node_states(&e, Some(&cls), &Matrix::identity(4)).is_err());
    }
}
