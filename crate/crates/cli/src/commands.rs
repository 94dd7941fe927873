use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use drgn::encoding::{EmbeddingProvider, FileProvider, HashProvider};
use drgn::kg::{load_triples, KnowledgeStore, RelationSet};
use drgn::model::{Checkpoint, ExampleInput, Model};
use drgn::training::{
    build_subgraphs, evaluate, gen_synthetic, load_dataset, measure_depth_scaling, measure_scaling, prepare_dataset, train,
    validate_dataset, AblationSpec, QAExample, ScalingReport, TrainConfig, TrainOutcome,
};
use drgn::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::report::{metrics_jsonl, prediction_rows, predictions_tsv, summary_table, Outputs, TrainSummary};
use crate::settings::Settings;

/// Fixed seed of the hash provider. It stands in for a frozen pre-trained
/// encoder, so it does not follow the run seed.
pub const HASH_PROVIDER_SEED: u64 = 13;

/// What a command produced: files to commit and text for standard output.
pub struct Produced {
    pub outputs: Outputs,
    pub stdout: String,
}

fn relations(s: &Settings) -> Result<RelationSet> {
    match s.optional_path("relations") {
        Some(p) => Ok(RelationSet::load(&p)?),
        None => Ok(RelationSet::default()),
    }
}

fn knowledge_store(s: &Settings) -> Result<KnowledgeStore> {
    let path = s.path("kg")?;
    Ok(load_triples(&path, relations(s)?)?)
}

fn provider(s: &Settings) -> Result<Box<dyn EmbeddingProvider>> {
    match s.raw("provider") {
        "hash" => {
            let dim: usize = s.get("lm_dim")?;
            if dim == 0 {
                bail!("config key `lm_dim` must be positive");
            }
            Ok(Box::new(HashProvider::new(dim, HASH_PROVIDER_SEED)))
        }
        path => Ok(Box::new(FileProvider::load(Path::new(path))?)),
    }
}

fn dataset(s: &Settings, key: &str) -> Result<Vec<QAExample>> {
    let path = s.path(key)?;
    let data = load_dataset(&path)?;
    validate_dataset(&data).with_context(|| format!("dataset {}", path.display()))?;
    Ok(data)
}

/// Linked, extracted and embedded splits plus what is needed to build a model.
struct Prepared<T> {
    splits: Vec<Vec<ExampleInput<T>>>,
    num_relations: usize,
    lm_dim: usize,
}

fn prepare<T: Scalar>(s: &Settings, keys: &[&str], tc: &TrainConfig) -> Result<Prepared<T>> {
    let store = knowledge_store(s)?;
    let provider = provider(s)?;
    let opts = tc.extract_options();
    let splits = keys
        .iter()
        .map(|k| {
            Ok(prepare_dataset::<T>(
                &dataset(s, k)?,
                &store,
                provider.as_ref(),
                &opts,
                tc.max_ngram,
            )?)
        })
        .collect::<Result<_>>()?;
    log::info!("linked {} entities over {} triples", store.num_entities(), store.num_triples());
    Ok(Prepared {
        splits,
        num_relations: store.relations().len(),
        lm_dim: provider.dim(),
    })
}

fn checkpoint_json<T: Scalar>(model: &Model<T>) -> Result<String> {
    Ok(serde_json::to_string(&Checkpoint::from_model(model))?)
}

pub fn train_cmd<T: Scalar>(s: &Settings) -> Result<Produced> {
    let tc = s.train_config()?;
    let data = prepare::<T>(s, &["train", "dev"], &tc)?;
    let (tr, dv) = (&data.splits[0], &data.splits[1]);
    let mc = tc.model_config(data.num_relations, data.lm_dim)?;
    let out = train(tr, dv, &mc, &tc)?;
    let (metrics, preds) = evaluate(&out.model, dv)?;
    let rows = prediction_rows(&out.model, dv, preds, s.get("top_k")?)?;
    let summary = TrainSummary {
        best_epoch: out.best_epoch,
        stopped_early: out.stopped_early,
    };

    let table = summary_table(&[("dev", &metrics)]);
    let mut outputs = Outputs::default();
    outputs.add("checkpoint.json", checkpoint_json(&out.model)?);
    outputs.add("config.txt", s.render());
    outputs.add("metrics.jsonl", metrics_jsonl(&out.history, "dev", &metrics, Some(summary))?);
    outputs.add("predictions.tsv", predictions_tsv(&rows));
    outputs.add("summary.txt", table.clone());
    let stdout = format!(
        "{table}best epoch {} of {}{}\n",
        out.best_epoch,
        out.history.len(),
        if out.stopped_early { " (early stop)" } else { "" }
    );
    Ok(Produced { outputs, stdout })
}

pub fn eval_cmd<T: Scalar>(s: &Settings) -> Result<Produced> {
    let path = s.path("checkpoint")?;
    let text = fs::read_to_string(&path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let ckpt: Checkpoint = serde_json::from_str(&text).with_context(|| format!("parsing checkpoint {}", path.display()))?;
    let model: Model<T> = ckpt.into_model()?;
    let tc = s.train_config()?;
    let data = prepare::<T>(s, &["data"], &tc)?;
    if data.lm_dim != model.config.lm_dim {
        bail!(
            "provider width {} does not match checkpoint lm_dim {}",
            data.lm_dim,
            model.config.lm_dim
        );
    }
    if data.num_relations + 1 != model.config.num_relations {
        bail!(
            "relation set has {} relations, checkpoint was trained with {}",
            data.num_relations,
            model.config.num_relations - 1
        );
    }
    let examples = &data.splits[0];
    let (metrics, preds) = evaluate(&model, examples)?;
    let rows = prediction_rows(&model, examples, preds, s.get("top_k")?)?;
    let table = summary_table(&[("eval", &metrics)]);
    let mut outputs = Outputs::default();
    outputs.add("eval_config.txt", s.render());
    outputs.add("eval_metrics.jsonl", metrics_jsonl(&[], "eval", &metrics, None)?);
    outputs.add("eval_predictions.tsv", predictions_tsv(&rows));
    outputs.add("eval_summary.txt", table.clone());
    Ok(Produced { outputs, stdout: table })
}

#[derive(Serialize)]
struct RunRow {
    label: String,
    ablation: String,
    layers: usize,
    seeds: Vec<u64>,
    dev_accuracy: Vec<f64>,
    mean_dev_accuracy: f64,
}

fn run_seeds<T: Scalar>(label: String, tc: &TrainConfig, data: &Prepared<T>, runs: u64, rows: &mut Vec<RunRow>) -> Result<()> {
    let mc = tc.model_config(data.num_relations, data.lm_dim)?;
    let mut accs = Vec::new();
    let seeds: Vec<u64> = (0..runs).map(|r| tc.seed + r).collect();
    for &seed in &seeds {
        let TrainOutcome { best_dev_accuracy, .. } = train(&data.splits[0], &data.splits[1], &mc, &TrainConfig { seed, ..tc.clone() })?;
        log::info!("{label} seed {seed}: dev accuracy {best_dev_accuracy:.4}");
        accs.push(best_dev_accuracy);
    }
    rows.push(RunRow {
        label,
        ablation: tc.ablation.to_string(),
        layers: tc.layers,
        seeds,
        mean_dev_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
        dev_accuracy: accs,
    });
    Ok(())
}

fn run_table(rows: &[RunRow], first: &str) -> String {
    let mut out = format!("{first:<20} {:>10} {:>6}  per-seed\n", "mean_dev", "runs");
    for r in rows {
        let per = r.dev_accuracy.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "{:<20} {:>10.4} {:>6}  {per}", r.label, r.mean_dev_accuracy, r.seeds.len());
    }
    out
}

fn jsonl<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn runs(s: &Settings) -> Result<u64> {
    let runs: u64 = s.get("runs")?;
    if runs == 0 {
        bail!("config key `runs` must be at least 1");
    }
    Ok(runs)
}

pub fn ablate_cmd<T: Scalar>(s: &Settings, preset: &str) -> Result<Produced> {
    if preset != "table5" {
        bail!("unknown ablation preset `{preset}` (expected table5)");
    }
    let tc = s.train_config()?;
    if !tc.ablation.is_empty() {
        bail!("ablate sets the ablation per row; remove `ablation={}`", tc.ablation);
    }
    let data = prepare::<T>(s, &["train", "dev"], &tc)?;
    let runs = runs(s)?;
    let mut rows = Vec::new();
    for (label, spec) in AblationSpec::ladder() {
        run_seeds(
            label.to_string(),
            &TrainConfig {
                ablation: spec,
                ..tc.clone()
            },
            &data,
            runs,
            &mut rows,
        )?;
    }
    let table = run_table(&rows, "row");
    let mut outputs = Outputs::default();
    outputs.add("ablate_config.txt", s.render());
    outputs.add("ablation.jsonl", jsonl(&rows)?);
    outputs.add("ablation.txt", table.clone());
    Ok(Produced { outputs, stdout: table })
}

/// Inclusive `a..b` or a single number.
pub fn parse_layer_range(text: &str) -> Result<Vec<usize>> {
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (a.trim().parse::<usize>()?, b.trim().trim_start_matches('=').parse::<usize>()?),
        None => {
            let l = text.trim().parse::<usize>()?;
            (l, l)
        }
    };
    if lo == 0 || hi < lo {
        bail!("layer range `{text}` must be a..b with 1 <= a <= b");
    }
    Ok((lo..=hi).collect())
}

pub fn sweep_cmd<T: Scalar>(s: &Settings, range: &str) -> Result<Produced> {
    let depths = parse_layer_range(range).with_context(|| format!("--l {range}"))?;
    let tc = s.train_config()?;
    let data = prepare::<T>(s, &["train", "dev"], &tc)?;
    let runs = runs(s)?;
    let mut rows = Vec::new();
    for l in depths {
        run_seeds(format!("l={l}"), &TrainConfig { layers: l, ..tc.clone() }, &data, runs, &mut rows)?;
    }
    let table = run_table(&rows, "layers");
    let mut outputs = Outputs::default();
    outputs.add("sweep_config.txt", s.render());
    outputs.add("sweep.jsonl", jsonl(&rows)?);
    outputs.add("sweep.txt", table.clone());
    Ok(Produced { outputs, stdout: table })
}

pub fn build_subgraphs_cmd(s: &Settings) -> Result<Produced> {
    let tc = s.train_config()?;
    let store = knowledge_store(s)?;
    let data = dataset(s, "data")?;
    let records = build_subgraphs(&data, &store, &tc.extract_options(), tc.max_ngram)?;
    let empty = records.iter().filter(|r| r.nodes.is_empty()).count();
    let mut outputs = Outputs::default();
    outputs.add("build_config.txt", s.render());
    outputs.add("subgraphs.jsonl", jsonl(&records)?);
    let stdout = format!("{} subgraphs for {} examples ({empty} empty)\n", records.len(), data.len());
    Ok(Produced { outputs, stdout })
}

pub fn synth_cmd(s: &Settings, out: &Path) -> Result<Produced> {
    let task = gen_synthetic(&s.synthetic_spec()?)?;
    // the task writer targets a directory; stage there and read the files back
    let staging = out.with_file_name(format!(
        ".{}.synth-partial",
        out.file_name().map_or("out".into(), |n| n.to_string_lossy())
    ));
    let result = (|| -> Result<Outputs> {
        task.write(&staging)?;
        let mut outputs = Outputs::default();
        let mut names: Vec<_> = fs::read_dir(&staging)?
            .map(|e| e.map(|e| e.file_name()))
            .collect::<Result<_, _>>()?;
        names.sort();
        for name in names {
            let name = name.to_string_lossy().to_string();
            outputs.add(&name, fs::read(staging.join(&name))?);
        }
        Ok(outputs)
    })();
    let _ = fs::remove_dir_all(&staging);
    let mut outputs = result?;
    outputs.add("synth_config.txt", s.render());
    let stdout = format!(
        "{} train / {} dev examples, {} triples, {} chain edges withheld\n",
        task.train.len(),
        task.dev.len(),
        task.full_kg.len(),
        task.withheld.len()
    );
    Ok(Produced { outputs, stdout })
}

#[derive(Serialize)]
struct ScalingLine<'a> {
    sweep: &'static str,
    #[serde(flatten)]
    report: &'a ScalingReport,
}

pub fn scale_cmd<T: Scalar>(s: &Settings) -> Result<Produced> {
    let tc = s.train_config()?;
    let lm_dim: usize = s.get("lm_dim")?;
    let mc = tc.model_config(relations(s)?.len(), lm_dim)?;
    let seed = s.seed()?;
    let repeats: usize = s.get("repeats")?;
    let model = Model::<T>::new(mc.clone(), &mut ChaCha8Rng::seed_from_u64(seed))?;
    let sizes = measure_scaling(&model, &s.list("sizes")?, repeats, seed)?;
    let depths = measure_depth_scaling(
        |l| {
            Model::<T>::new(
                drgn::model::ModelConfig { layers: l, ..mc.clone() },
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
        },
        &s.list("depths")?,
        s.get("scale_nodes")?,
        repeats,
        seed,
    )?;
    let mut table = String::new();
    for (name, r) in [("|V|", &sizes), ("layers", &depths)] {
        let _ = writeln!(table, "{name:<8} {:>14} {:>16}", "median_ms", "relevance_cells");
        for row in &r.rows {
            let _ = writeln!(
                table,
                "{:<8} {:>14.4} {:>16}",
                row.x,
                row.median_seconds * 1e3,
                row.relevance_entries
            );
        }
        let _ = writeln!(table, "log-log slope {:.3}\n", r.exponent);
    }
    let lines = [
        ScalingLine {
            sweep: "nodes",
            report: &sizes,
        },
        ScalingLine {
            sweep: "layers",
            report: &depths,
        },
    ];
    let mut outputs = Outputs::default();
    outputs.add("scale_config.txt", s.render());
    outputs.add("scaling.jsonl", jsonl(&lines)?);
    outputs.add("scaling.txt", table.clone());
    Ok(Produced { outputs, stdout: table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_ranges() {
        assert_eq!(parse_layer_range("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_layer_range("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_layer_range("4").unwrap(), vec![4]);
        assert!(parse_layer_range("0..2").is_err());
        assert!(parse_layer_range("3..1").is_err());
        assert!(parse_layer_range("a..b").is_err());
    }
}
