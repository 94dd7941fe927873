//! Missing-edge task: the answer sits at the end of a typed relation chain
//! starting at the question entity, and with probability `p_drop` one
//! chain edge is withheld from the KG used for subgraph extraction.
//!
//! Entity surfaces are `t<topic> w<word>`; every chain member shares the
//! question entity's topic token, so their embeddings are correlated even
//! when the static graph no longer connects them. Distractors come in three
//! kinds: an unconnected entity on another topic, a decoy path over
//! non-chain relations, and a decoy path over the chain relations in
//! reverse order. Decoy paths end on the question's topic, so topic
//! similarity alone cannot reject them: the first needs relation types and
//! the second needs to know which end is the question entity. Every entity
//! also carries one dangling anchor edge so it exists in the KG regardless
//! of which chain edge was dropped.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeStore, RelationSet};
use crate::training::{write_dataset, QAExample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskSpec {
    /// Chain length k (edges from question entity to answer).
    pub chain_length: usize,
    /// Distinct word tokens available for entity surfaces.
    pub vocab_size: usize,
    pub num_topics: usize,
    pub num_relations: usize,
    /// Wrong candidates per example.
    pub distractors: usize,
    pub p_drop: f64,
    /// Relative weights of unconnected, other-relation and reversed-chain distractors.
    pub distractor_mix: [f64; 3],
    pub train_examples: usize,
    pub dev_examples: usize,
    pub seed: u64,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        SyntheticTaskSpec {
            chain_length: 2,
            vocab_size: 50_000,
            num_topics: 64,
            num_relations: 4,
            distractors: 3,
            p_drop: 0.5,
            distractor_mix: [0.6, 0.2, 0.2],
            train_examples: 2000,
            dev_examples: 500,
            seed: 0,
        }
    }
}

impl SyntheticTaskSpec {
    /// Worst-case word tokens one example consumes.
    fn words_per_example(&self) -> usize {
        // chain k+1 plus an anchor each for e0 and the answer; each distractor
        // path has k entities plus an anchor
        self.chain_length + 3 + self.distractors * (self.chain_length + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.chain_length;
        if k < 2 {
            return Err(Error::Generation(format!("chain length {k} < 2")));
        }
        if self.num_relations <= k {
            return Err(Error::Generation(format!(
                "{} relations leave none outside the {k} chain relations",
                self.num_relations
            )));
        }
        if self.num_topics < 2 {
            return Err(Error::Generation("need at least 2 topics".into()));
        }
        if self.distractors == 0 {
            return Err(Error::Generation("need at least 1 distractor".into()));
        }
        if !(0.0..=1.0).contains(&self.p_drop) {
            return Err(Error::Generation(format!("p_drop {} outside [0, 1]", self.p_drop)));
        }
        if self.distractor_mix.iter().any(|w| w.is_nan() || *w < 0.0) || self.distractor_mix.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Generation(
                "distractor mix needs non-negative weights with a positive sum".into(),
            ));
        }
        let needed = (self.train_examples + self.dev_examples) * self.words_per_example();
        if self.vocab_size < needed {
            return Err(Error::Generation(format!(
                "vocab too small: {} words for {} needed",
                self.vocab_size, needed
            )));
        }
        Ok(())
    }
}

/// A surface-form triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SurfaceTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub spec: SyntheticTaskSpec,
    pub relations: RelationSet,
    pub train: Vec<QAExample>,
    pub dev: Vec<QAExample>,
    /// Every generated triple.
    pub full_kg: Vec<SurfaceTriple>,
    /// Chain edges withheld from extraction, with the example they belong to.
    pub withheld: Vec<(String, SurfaceTriple)>,
}

impl SyntheticTask {
    pub fn full_store(&self) -> Result<KnowledgeStore> {
        store(&self.relations, self.full_kg.iter())
    }

    /// The KG handed to subgraph extraction: full KG minus withheld edges.
    pub fn extraction_store(&self) -> Result<KnowledgeStore> {
        let withheld: std::collections::BTreeSet<&SurfaceTriple> = self.withheld.iter().map(|(_, t)| t).collect();
        store(&self.relations, self.full_kg.iter().filter(|t| !withheld.contains(t)))
    }

    /// Writes `train.jsonl`, `dev.jsonl`, `relations.txt`, `kg.tsv`
    /// (extraction KG), `kg_full.tsv` and `withheld.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_dataset(&self.train, &dir.join("train.jsonl"))?;
        write_dataset(&self.dev, &dir.join("dev.jsonl"))?;
        let rel_path = dir.join("relations.txt");
        fs::write(&rel_path, self.relations.names().join("\n") + "\n").map_err(|e| Error::io(&rel_path, e))?;
        crate::kg::write_triples(&self.extraction_store()?, &dir.join("kg.tsv"))?;
        crate::kg::write_triples(&self.full_store()?, &dir.join("kg_full.tsv"))?;
        let mut w = String::new();
        for (id, t) in &self.withheld {
            w.push_str(&format!("{id}\t{}\t{}\t{}\n", t.head, t.relation, t.tail));
        }
        let wpath = dir.join("withheld.tsv");
        fs::write(&wpath, w).map_err(|e| Error::io(&wpath, e))
    }
}

fn store<'a>(relations: &RelationSet, triples: impl Iterator<Item = &'a SurfaceTriple>) -> Result<KnowledgeStore> {
    KnowledgeStore::from_triples(
        relations.clone(),
        triples.map(|t| (t.head.as_str(), t.relation.as_str(), t.tail.as_str())),
    )
}

struct Generator {
    rng: ChaCha8Rng,
    words: Vec<u32>,
    next_word: usize,
    num_topics: usize,
    relation_names: Vec<String>,
    triples: Vec<SurfaceTriple>,
}

impl Generator {
    /// Fresh entity with the given topic; surfaces use a space so they read as text.
    fn entity(&mut self, topic: usize) -> String {
        let w = self.words[self.next_word];
        self.next_word += 1;
        format!("t{topic} w{w}")
    }

    fn other_topic(&mut self, topic: usize) -> usize {
        let t = self.rng.random_range(0..self.num_topics - 1);
        if t >= topic {
            t + 1
        } else {
            t
        }
    }

    fn edge(&mut self, head: &str, relation: usize, tail: &str) -> SurfaceTriple {
        let t = SurfaceTriple {
            head: head.to_string(),
            relation: self.relation_names[relation].clone(),
            tail: tail.to_string(),
        };
        self.triples.push(t.clone());
        t
    }

    fn anchor(&mut self, entity: &str, k: usize) {
        let topic = self.rng.random_range(0..self.num_topics);
        let a = self.entity(topic);
        let r = self.rng.random_range(k..self.relation_names.len());
        self.edge(entity, r, &a);
    }

    /// Path of `relations` from `start` through fresh off-topic entities to
    /// an end entity on `topic`; returns the end.
    fn path(&mut self, start: &str, relations: &[usize], topic: usize) -> String {
        let mut cur = start.to_string();
        for (i, &r) in relations.iter().enumerate() {
            let t = if i + 1 == relations.len() { topic } else { self.other_topic(topic) };
            let next = self.entity(t);
            self.edge(&cur, r, &next);
            cur = next;
        }
        cur
    }
}

pub fn gen_synthetic(spec: &SyntheticTaskSpec) -> Result<SyntheticTask> {
    spec.validate()?;
    let k = spec.chain_length;
    let relation_names: Vec<String> = (0..spec.num_relations).map(|r| format!("r{r}")).collect();
    let relations = RelationSet::new(&relation_names)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut words: Vec<u32> = (0..spec.vocab_size as u32).collect();
    words.shuffle(&mut rng);
    let mut g = Generator {
        rng,
        words,
        next_word: 0,
        num_topics: spec.num_topics,
        relation_names,
        triples: Vec::new(),
    };
    let mix_total: f64 = spec.distractor_mix.iter().sum();

    let mut withheld = Vec::new();
    let mut make = |split: &str, n: usize, g: &mut Generator| -> Vec<QAExample> {
        (0..n)
            .map(|i| {
                let id = format!("{split}-{i:05}");
                let topic = g.rng.random_range(0..spec.num_topics);
                let mut chain = vec![g.entity(topic)];
                let mut chain_edges = Vec::with_capacity(k);
                for r in 0..k {
                    let next = g.entity(topic);
                    let prev = chain[r].clone();
                    chain_edges.push(g.edge(&prev, r, &next));
                    chain.push(next);
                }
                let (e0, gold) = (chain[0].clone(), chain[k].clone());
                g.anchor(&e0, k);
                g.anchor(&gold, k);
                if g.rng.random::<f64>() < spec.p_drop {
                    let j = g.rng.random_range(0..k);
                    withheld.push((id.clone(), chain_edges[j].clone()));
                }

                let mut choices = Vec::with_capacity(spec.distractors + 1);
                for _ in 0..spec.distractors {
                    let u = g.rng.random::<f64>() * mix_total;
                    let d = if u < spec.distractor_mix[0] {
                        let t = g.other_topic(topic);
                        g.entity(t)
                    } else if u < spec.distractor_mix[0] + spec.distractor_mix[1] {
                        let rels: Vec<usize> = (0..k).map(|_| g.rng.random_range(k..spec.num_relations)).collect();
                        g.path(&e0, &rels, topic)
                    } else {
                        let rels: Vec<usize> = (0..k).rev().collect();
                        g.path(&e0, &rels, topic)
                    };
                    g.anchor(&d, k);
                    choices.push(d);
                }
                let answer_idx = g.rng.random_range(0..=spec.distractors);
                choices.insert(answer_idx, gold);
                QAExample {
                    id,
                    question: format!("which concept follows from {e0} ?"),
                    choices,
                    answer_idx,
                    fact: None,
                }
            })
            .collect()
    };
    let train = make("train", spec.train_examples, &mut g);
    let dev = make("dev", spec.dev_examples, &mut g);
    let mut full_kg = g.triples;
    full_kg.sort();
    Ok(SyntheticTask {
        spec: spec.clone(),
        relations,
        train,
        dev,
        full_kg,
        withheld,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(p_drop: f64) -> SyntheticTaskSpec {
        SyntheticTaskSpec {
            p_drop,
            train_examples: 60,
            dev_examples: 20,
            vocab_size: 2000,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = gen_synthetic(&small(0.5)).unwrap();
        let b = gen_synthetic(&small(0.5)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = gen_synthetic(&SyntheticTaskSpec { seed: 1, ..small(0.5) }).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn infeasible_specs() {
        let err = gen_synthetic(&SyntheticTaskSpec {
            vocab_size: 10,
            ..small(0.5)
        })
        .unwrap_err();
        assert!(err.to_string().contains("vocab too small"));
        assert!(gen_synthetic(&SyntheticTaskSpec {
            chain_length: 1,
            ..small(0.5)
        })
        .is_err());
        assert!(gen_synthetic(&SyntheticTaskSpec {
            num_relations: 2,
            ..small(0.5)
        })
        .is_err());
    }

    #[test]
    fn drop_rate_extremes() {
        assert!(gen_synthetic(&small(0.0)).unwrap().withheld.is_empty());
        let t = gen_synthetic(&small(1.0)).unwrap();
        assert_eq!(t.withheld.len(), 80);
        let ex = t.extraction_store().unwrap();
        assert_eq!(ex.num_triples() + 80, t.full_store().unwrap().num_triples());
    }

    #[test]
    fn examples_are_well_formed() {
        let t = gen_synthetic(&small(0.5)).unwrap();
        crate::training::validate_dataset(&t.train).unwrap();
        let full = t.full_store().unwrap();
        for ex in t.train.iter().chain(&t.dev) {
            assert_eq!(ex.choices.len(), 4);
            for c in &ex.choices {
                assert!(full.entity(&crate::kg::normalize::surface(c)).is_some(), "{c}");
            }
            let gold_topic = ex.choices[ex.answer_idx].split(' ').next().unwrap();
            assert!(ex.question.contains(&format!("{gold_topic} ")));
        }
    }
}
