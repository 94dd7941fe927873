//! Flat `key=value` run configuration.
//!
//! Resolution order: profile defaults, then the config file, then
//! positional overrides, then the `--seed` / `--precision` flags. Every key
//! is known up front; anything else is rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use drgn::training::{AblationSpec, SyntheticTaskSpec, TrainConfig, DESK_LM_DIM};
use drgn::Precision;

/// Key, help text. Defaults come from [`profile_defaults`].
pub const KEYS: &[(&str, &str)] = &[
    ("profile", "full | desk | verification: base for every other default"),
    ("seed", "single source of randomness (init, shuffling, dropout, generation)"),
    ("precision", "32 or 64"),
    ("out", "output directory"),
    ("kg", "triple file (head<TAB>relation<TAB>tail)"),
    ("relations", "relation-set file; empty means the 17 ConceptNet relations"),
    ("train", "training dataset (jsonl)"),
    ("dev", "dev dataset (jsonl)"),
    ("data", "dataset for eval / build-subgraphs (jsonl)"),
    ("checkpoint", "checkpoint to evaluate"),
    ("provider", "hash, or a path to an embedding file"),
    ("lm_dim", "hash provider width"),
    ("top_k", "relevance entries per layer in prediction dumps"),
    ("runs", "training runs per setting for ablate / sweep-layers, seeds seed..seed+runs"),
    ("batch_size", "examples per optimizer step"),
    ("layers", "graph layers"),
    ("hidden", "graph width d"),
    ("lr_lm", "encoder-group learning rate"),
    ("lr_graph", "graph-group learning rate"),
    ("patience", "early-stopping patience in epochs"),
    ("max_epochs", "epoch cap"),
    ("scaled_relevance", "divide relevance by d"),
    ("state_norm", "RMS-normalize node states between layers"),
    ("activation", "gelu | relu | identity | tanh"),
    ("dropout", "dropout on node states between layers"),
    ("grad_clip", "global gradient-norm clip, or none"),
    ("max_seq_len", "recorded tokenizer limit"),
    ("hops", "path length for subgraph extraction"),
    ("max_nodes", "node cap per subgraph"),
    ("max_ngram", "longest n-gram for entity matching"),
    ("ablation", "none, or component=off items joined by commas"),
    ("chain_length", "synth: chain edges from question entity to answer"),
    ("vocab_size", "synth: word tokens available"),
    ("num_topics", "synth: topic tokens"),
    ("synth_relations", "synth: relation types"),
    ("distractors", "synth: wrong candidates per question"),
    ("p_drop", "synth: probability of withholding one chain edge"),
    ("train_examples", "synth: training examples"),
    ("dev_examples", "synth: dev examples"),
    ("sizes", "scale: entity counts, comma separated"),
    ("depths", "scale: layer counts, comma separated"),
    ("scale_nodes", "scale: entity count for the depth sweep"),
    ("repeats", "scale: timing repeats per point"),
];

fn profile_defaults(profile: &str) -> Result<BTreeMap<&'static str, String>> {
    let (tc, lm_dim) = match profile {
        "full" => (TrainConfig::default(), 1024),
        "desk" => (TrainConfig::desk(), DESK_LM_DIM),
        // small, no dropout or clipping, stabilized so any data trains
        "verification" => (
            TrainConfig {
                hidden: 16,
                scaled_relevance: true,
                state_norm: true,
                ..TrainConfig::verification()
            },
            16,
        ),
        other => bail!("unknown profile `{other}` (expected full, desk or verification)"),
    };
    let synth = SyntheticTaskSpec::default();
    let clip = tc.grad_clip.map_or("none".to_string(), |c| c.to_string());
    let values: [(&str, String); 43] = [
        ("profile", profile.to_string()),
        ("seed", tc.seed.to_string()),
        ("precision", "32".into()),
        ("out", "out".into()),
        ("kg", String::new()),
        ("relations", String::new()),
        ("train", String::new()),
        ("dev", String::new()),
        ("data", String::new()),
        ("checkpoint", String::new()),
        ("provider", "hash".into()),
        ("lm_dim", lm_dim.to_string()),
        ("top_k", "3".into()),
        ("runs", "1".into()),
        ("batch_size", tc.batch_size.to_string()),
        ("layers", tc.layers.to_string()),
        ("hidden", tc.hidden.to_string()),
        ("lr_lm", tc.lr_lm.to_string()),
        ("lr_graph", tc.lr_graph.to_string()),
        ("patience", tc.patience.to_string()),
        ("max_epochs", tc.max_epochs.to_string()),
        ("scaled_relevance", tc.scaled_relevance.to_string()),
        ("state_norm", tc.state_norm.to_string()),
        ("activation", tc.activation.to_string()),
        ("dropout", tc.dropout.to_string()),
        ("grad_clip", clip),
        ("max_seq_len", tc.max_seq_len.to_string()),
        ("hops", tc.hops.to_string()),
        ("max_nodes", tc.max_nodes.to_string()),
        ("max_ngram", tc.max_ngram.to_string()),
        ("ablation", tc.ablation.to_string()),
        ("chain_length", synth.chain_length.to_string()),
        ("vocab_size", synth.vocab_size.to_string()),
        ("num_topics", synth.num_topics.to_string()),
        ("synth_relations", synth.num_relations.to_string()),
        ("distractors", synth.distractors.to_string()),
        ("p_drop", synth.p_drop.to_string()),
        ("train_examples", synth.train_examples.to_string()),
        ("dev_examples", synth.dev_examples.to_string()),
        ("sizes", "50,100,200,400".into()),
        ("depths", "1,2,3,4".into()),
        ("scale_nodes", "100".into()),
        ("repeats", "5".into()),
    ];
    debug_assert!(values.iter().map(|(k, _)| k).eq(KEYS.iter().map(|(k, _)| k)));
    Ok(values.into_iter().collect())
}

fn known(key: &str) -> Result<&'static str> {
    KEYS.iter()
        .map(|(k, _)| *k)
        .find(|k| *k == key)
        .ok_or_else(|| anyhow!("unknown config key `{key}`"))
}

fn split_pair(item: &str) -> Result<(&str, &str)> {
    let (k, v) = item.split_once('=').ok_or_else(|| anyhow!("expected key=value, got `{item}`"))?;
    Ok((k.trim(), v.trim()))
}

/// Parses a config file: `key = value` lines, `#` comments, blank lines.
pub fn parse_file(text: &str, path: &Path) -> Result<Vec<(&'static str, String)>> {
    let mut out: Vec<(&'static str, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ctx = || format!("{}:{}", path.display(), i + 1);
        let (k, v) = split_pair(line).with_context(ctx)?;
        let key = known(k).with_context(ctx)?;
        if out.iter().any(|(seen, _)| *seen == key) {
            bail!("{}: duplicate key `{key}`", ctx());
        }
        out.push((key, v.to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    pub fn resolve(file: Option<&Path>, overrides: &[String], seed: Option<u64>, precision: Option<&str>) -> Result<Self> {
        let file_pairs = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                parse_file(&text, p)?
            }
            None => Vec::new(),
        };
        let mut override_pairs = Vec::new();
        for item in overrides {
            let (k, v) = split_pair(item)?;
            let key = known(k)?;
            override_pairs.retain(|(seen, _): &(&str, String)| *seen != key);
            override_pairs.push((key, v.to_string()));
        }
        let mut layered: Vec<(&'static str, String)> = file_pairs.into_iter().chain(override_pairs).collect();
        if let Some(s) = seed {
            layered.push(("seed", s.to_string()));
        }
        if let Some(p) = precision {
            layered.push(("precision", p.to_string()));
        }
        let profile = layered
            .iter()
            .rev()
            .find(|(k, _)| *k == "profile")
            .map_or("full", |(_, v)| v.as_str())
            .to_string();
        let mut values = profile_defaults(&profile)?;
        for (k, v) in layered {
            values.insert(k, v);
        }
        let s = Settings { values };
        s.precision()?;
        Ok(s)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| anyhow!("config key `{key}`: cannot parse `{raw}`: {e}"))
    }

    /// A non-empty path value, or an error naming the key.
    pub fn path(&self, key: &str) -> Result<PathBuf> {
        match self.raw(key) {
            "" => bail!("missing required config key `{key}`"),
            p => Ok(PathBuf::from(p)),
        }
    }

    pub fn optional_path(&self, key: &str) -> Option<PathBuf> {
        Some(self.raw(key)).filter(|p| !p.is_empty()).map(PathBuf::from)
    }

    pub fn list(&self, key: &str) -> Result<Vec<usize>> {
        self.raw(key)
            .split(',')
            .map(|x| x.trim().parse().map_err(|e| anyhow!("config key `{key}`: `{x}`: {e}")))
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed")
    }

    pub fn precision(&self) -> Result<Precision> {
        self.get::<Precision>("precision")
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        self.values.insert(known(key)?, value.into());
        Ok(())
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let grad_clip = match self.raw("grad_clip") {
            "none" => None,
            _ => Some(self.get("grad_clip")?),
        };
        let ablation = match self.raw("ablation") {
            "none" | "" => AblationSpec::default(),
            _ => self.get("ablation")?,
        };
        let tc = TrainConfig {
            batch_size: self.get("batch_size")?,
            layers: self.get("layers")?,
            hidden: self.get("hidden")?,
            lr_lm: self.get("lr_lm")?,
            lr_graph: self.get("lr_graph")?,
            patience: self.get("patience")?,
            max_epochs: self.get("max_epochs")?,
            seed: self.seed()?,
            ablation,
            scaled_relevance: self.get("scaled_relevance")?,
            state_norm: self.get("state_norm")?,
            activation: self.get("activation")?,
            dropout: self.get("dropout")?,
            grad_clip,
            max_seq_len: self.get("max_seq_len")?,
            hops: self.get("hops")?,
            max_nodes: self.get("max_nodes")?,
            max_ngram: self.get("max_ngram")?,
        };
        tc.validate()?;
        Ok(tc)
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticTaskSpec> {
        Ok(SyntheticTaskSpec {
            chain_length: self.get("chain_length")?,
            vocab_size: self.get("vocab_size")?,
            num_topics: self.get("num_topics")?,
            num_relations: self.get("synth_relations")?,
            distractors: self.get("distractors")?,
            p_drop: self.get("p_drop")?,
            train_examples: self.get("train_examples")?,
            dev_examples: self.get("dev_examples")?,
            seed: self.seed()?,
            ..Default::default()
        })
    }

    /// The resolved config in file syntax, keys in declaration order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, _) in KEYS {
            let _ = writeln!(out, "{k}={}", self.values[k]);
        }
        out
    }

    /// One-line form for the log.
    pub fn one_line(&self) -> String {
        KEYS.iter()
            .map(|(k, _)| format!("{k}={}", self.values[k]))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        std::fs::write(&p, "# run\nprofile = desk\nhidden=32\nseed=4\n").unwrap();
        let s = Settings::resolve(Some(&p), &["hidden=48".into()], Some(9), None).unwrap();
        assert_eq!(s.raw("hidden"), "48");
        assert_eq!(s.raw("seed"), "9");
        // desk profile defaults apply where nothing overrides them
        assert_eq!(s.raw("lm_dim"), DESK_LM_DIM.to_string());
        assert!(s.train_config().unwrap().state_norm);
    }

    #[test]
    fn render_round_trips() {
        let s = Settings::resolve(None, &["ablation=relevance=off".into(), "grad_clip=none".into()], None, Some("64")).unwrap();
        let text = s.render();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.txt");
        std::fs::write(&p, &text).unwrap();
        let back = Settings::resolve(Some(&p), &[], None, None).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.train_config().unwrap().grad_clip, None);
        assert!(back.train_config().unwrap().ablation.drop_relevance);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(Settings::resolve(None, &["bogus=1".into()], None, None)
            .unwrap_err()
            .to_string()
            .contains("bogus"));
        assert!(Settings::resolve(None, &["hidden".into()], None, None).is_err());
        assert!(Settings::resolve(None, &[], None, Some("16")).is_err());
        assert!(Settings::resolve(None, &["profile=huge".into()], None, None).is_err());
        let s = Settings::resolve(None, &["hidden=wide".into()], None, None).unwrap();
        assert!(s.train_config().unwrap_err().to_string().contains("hidden"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        std::fs::write(&p, "seed=1\nseed=2\n").unwrap();
        let err = Settings::resolve(Some(&p), &[], None, None).unwrap_err();
        assert!(format!("{err:#}").contains(":2: duplicate key"));
    }
}
