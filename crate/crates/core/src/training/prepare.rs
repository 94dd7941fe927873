use std::collections::{BTreeSet, HashMap};

use crate::encoding::{embed_entities, encode_context, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::kg::{
    attach_question_node, extract_subgraph, match_entities, ExtractOptions, KnowledgeStore, NodeRole, RelationSet, Subgraph, SubgraphRecord,
};
use crate::model::{CandidateInput, ExampleInput};
use crate::numerics::Matrix;
use crate::scalar::Scalar;
use crate::training::QAExample;

/// Per-choice subgraphs for one example. A choice where entity linking
/// finds nothing on either side gets an empty subgraph.
pub fn extract_candidates(ex: &QAExample, store: &KnowledgeStore, opts: &ExtractOptions, max_ngram: usize) -> Result<Vec<Subgraph>> {
    let q = match_entities(&ex.question_text(), store, max_ngram);
    ex.choices
        .iter()
        .map(|choice| {
            let a = match_entities(choice, store, max_ngram);
            if q.is_empty() && a.is_empty() {
                log::debug!("{}: no entities linked for choice `{choice}`", ex.id);
                return Ok(Subgraph::default());
            }
            extract_subgraph(&q, &a, store, opts)
        })
        .collect()
}

/// Dump records for every (example, choice) pair.
pub fn build_subgraphs(
    examples: &[QAExample],
    store: &KnowledgeStore,
    opts: &ExtractOptions,
    max_ngram: usize,
) -> Result<Vec<SubgraphRecord>> {
    let mut out = Vec::new();
    for ex in examples {
        for (i, sub) in extract_candidates(ex, store, opts, max_ngram)?.iter().enumerate() {
            out.push(SubgraphRecord::from_subgraph(&ex.id, i, sub, store.relations()));
        }
    }
    Ok(out)
}

/// Model input for one example from its per-choice subgraphs.
pub fn example_input<T: Scalar>(
    ex: &QAExample,
    subgraphs: &[Subgraph],
    relations: &RelationSet,
    provider: &dyn EmbeddingProvider,
) -> Result<ExampleInput<T>> {
    if subgraphs.len() != ex.choices.len() {
        return Err(Error::Validation(format!(
            "example {}: {} subgraphs for {} choices",
            ex.id,
            subgraphs.len(),
            ex.choices.len()
        )));
    }
    let question = ex.question_text();
    let candidates = ex
        .choices
        .iter()
        .zip(subgraphs)
        .map(|(choice, sub)| {
            let q_entities: BTreeSet<_> = sub
                .nodes
                .iter()
                .filter(|n| n.role == NodeRole::Question)
                .map(|n| n.entity)
                .collect();
            let graph = attach_question_node(sub, &q_entities, relations.qlink());
            let entity_embs = if graph.nodes.is_empty() {
                Matrix::zeros(0, provider.dim())
            } else {
                embed_entities(&graph, provider)?
            };
            let h_cls = encode_context::<T>(&question, choice, provider)?.h_cls;
            Ok(CandidateInput { graph, entity_embs, h_cls })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExampleInput {
        id: ex.id.clone(),
        question,
        candidates,
        gold: ex.answer_idx,
    })
}

/// Links, extracts and embeds a whole dataset against `store`.
pub fn prepare_dataset<T: Scalar>(
    examples: &[QAExample],
    store: &KnowledgeStore,
    provider: &dyn EmbeddingProvider,
    opts: &ExtractOptions,
    max_ngram: usize,
) -> Result<Vec<ExampleInput<T>>> {
    examples
        .iter()
        .map(|ex| {
            let subs = extract_candidates(ex, store, opts, max_ngram)?;
            example_input(ex, &subs, store.relations(), provider)
        })
        .collect()
}

/// Same as [`prepare_dataset`] but reads subgraphs from dump records,
/// which must cover every (example, choice) pair.
pub fn prepare_from_records<T: Scalar>(
    examples: &[QAExample],
    records: &[SubgraphRecord],
    relations: &RelationSet,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<ExampleInput<T>>> {
    let mut by_key: HashMap<(&str, usize), &SubgraphRecord> = HashMap::new();
    for r in records {
        if by_key.insert((r.example_id.as_str(), r.candidate_idx), r).is_some() {
            return Err(Error::Validation(format!(
                "duplicate subgraph record {}#{}",
                r.example_id, r.candidate_idx
            )));
        }
    }
    examples
        .iter()
        .map(|ex| {
            let subs = (0..ex.choices.len())
                .map(|i| {
                    by_key
                        .get(&(ex.id.as_str(), i))
                        .ok_or_else(|| Error::Validation(format!("no subgraph record for {}#{i}", ex.id)))?
                        .to_subgraph(relations)
                })
                .collect::<Result<Vec<_>>>()?;
            example_input(ex, &subs, relations, provider)
        })
        .collect()
}
