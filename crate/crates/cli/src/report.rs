//! Report files: per-epoch metrics, summary tables and prediction dumps.
//! Every output of a command is staged in memory and committed at the end,
//! so a failing command leaves no partial files behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use drgn::model::{ExampleInput, Model};
use drgn::training::{EpochRecord, Metrics, Prediction};
use drgn::Scalar;
use serde::Serialize;

/// Files to write into one directory.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    /// Writes every file to a temporary name first, then renames them all.
    /// On error the temporaries are removed and nothing is renamed.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(e).with_context(|| format!("writing {}", tmp.display()));
            }
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, dest) in staged {
            fs::rename(&tmp, &dest).with_context(|| format!("renaming to {}", dest.display()))?;
            written.push(dest);
        }
        Ok(written)
    }
}

#[derive(Serialize)]
struct EpochLine<'a> {
    record: &'static str,
    #[serde(flatten)]
    epoch: &'a EpochRecord,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    record: &'static str,
    split: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stopped_early: Option<bool>,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

/// Training outcome fields that go into the summary record.
#[derive(Debug, Clone, Copy)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// One JSON object per epoch, then a summary record.
pub fn metrics_jsonl(history: &[EpochRecord], split: &str, metrics: &Metrics, train: Option<TrainSummary>) -> Result<String> {
    let mut out = String::new();
    for epoch in history {
        out.push_str(&serde_json::to_string(&EpochLine { record: "epoch", epoch })?);
        out.push('\n');
    }
    let summary = SummaryLine {
        record: "summary",
        split,
        best_epoch: train.map(|t| t.best_epoch),
        stopped_early: train.map(|t| t.stopped_early),
        metrics,
    };
    out.push_str(&serde_json::to_string(&summary)?);
    out.push('\n');
    Ok(out)
}

/// Overall and negation-subset accuracy, one row per labelled result.
pub fn summary_table(rows: &[(&str, &Metrics)]) -> String {
    let mut out = format!(
        "{:<12} {:>8} {:>9} {:>9} {:>9}\n",
        "split", "examples", "accuracy", "negation", "neg_acc"
    );
    for (label, m) in rows {
        let neg = m.negation_accuracy.map_or("-".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(
            out,
            "{label:<12} {:>8} {:>9.4} {:>9} {:>9}",
            m.total, m.accuracy, m.negation_total, neg
        );
    }
    out
}

/// A prediction with the strongest relevance entries of the predicted
/// candidate's graph, per layer, as (node surface, value).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub prediction: Prediction,
    pub top_relevance: Vec<Vec<(String, f64)>>,
}

pub const PREDICTIONS_HEADER: &str = "id\tgold\tpredicted\tscores\ttop_relevance";

pub fn prediction_rows<T: Scalar>(
    model: &Model<T>,
    examples: &[ExampleInput<T>],
    predictions: Vec<Prediction>,
    k: usize,
) -> Result<Vec<PredictionRow>> {
    examples
        .iter()
        .zip(predictions)
        .map(|(ex, p)| {
            let cand = &ex.candidates[p.predicted];
            let n = cand.graph.num_entities();
            let label = |i: usize| {
                if i < n {
                    cand.graph.nodes[i].surface.clone()
                } else {
                    "[Q]".to_string()
                }
            };
            let top = model
                .top_relevance(cand, k)?
                .into_iter()
                .map(|layer| layer.into_iter().map(|(j, v)| (label(j), v.as_f64())).collect())
                .collect();
            Ok(PredictionRow {
                prediction: p,
                top_relevance: top,
            })
        })
        .collect()
}

/// Tab-separated dump with a header line; scores are comma separated and
/// relevance layers are `l<layer>:node=value,...` joined by `;`.
pub fn predictions_tsv(rows: &[PredictionRow]) -> String {
    let mut out = String::from(PREDICTIONS_HEADER);
    out.push('\n');
    for r in rows {
        let p = &r.prediction;
        let scores = p.scores.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
        let top = r
            .top_relevance
            .iter()
            .enumerate()
            .map(|(l, entries)| {
                let items = entries.iter().map(|(s, v)| format!("{s}={v:.6}")).collect::<Vec<_>>().join(",");
                format!("l{}:{items}", l + 1)
            })
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(out, "{}\t{}\t{}\t{scores}\t{top}", p.id, p.gold, p.predicted);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(acc: f64) -> Metrics {
        Metrics {
            total: 4,
            correct: (acc * 4.0) as usize,
            accuracy: acc,
            mean_loss: 1.0,
            negation_total: 0,
            negation_correct: 0,
            negation_accuracy: None,
        }
    }

    #[test]
    fn empty_dump_is_header_only() {
        assert_eq!(predictions_tsv(&[]), format!("{PREDICTIONS_HEADER}\n"));
    }

    #[test]
    fn jsonl_has_epochs_then_summary() {
        let e = EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            dev_accuracy: 0.25,
            dev_loss: 1.2,
            steps: 3,
        };
        let text = metrics_jsonl(
            &[e],
            "dev",
            &metrics(0.25),
            Some(TrainSummary {
                best_epoch: 1,
                stopped_early: false,
            }),
        )
        .unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["record"], "epoch");
        assert_eq!(lines[0]["steps"], 3);
        assert_eq!(lines[1]["record"], "summary");
        assert_eq!(lines[1]["accuracy"], 0.25);
        assert_eq!(lines[1]["best_epoch"], 1);
        assert!(lines[1]["negation_accuracy"].is_null());
    }

    #[test]
    fn table_marks_empty_subset() {
        let t = summary_table(&[("dev", &metrics(0.5))]);
        assert!(t.lines().nth(1).unwrap().trim_end().ends_with('-'));
    }

    #[test]
    fn commit_writes_all_or_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::default();
        o.add("a.txt", "a");
        o.add("b.txt", "b");
        let written = o.commit(dir.path()).unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("b.txt")).unwrap(), "b");

        // a name that cannot be created fails before anything is renamed
        let mut o = Outputs::default();
        o.add("c.txt", "c");
        o.add("missing/d.txt", "d");
        assert!(o.commit(dir.path()).is_err());
        let mut names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names, ["a.txt", "b.txt"]);
    }
}
