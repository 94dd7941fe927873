use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One multiple-choice question, as stored one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub answer_idx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fact: Option<String>,
}

impl QAExample {
    /// Question text as the model sees it: a supporting fact, when present,
    /// is prepended to the question.
    pub fn question_text(&self) -> String {
        match self.fact.as_deref().map(str::trim) {
            Some(f) if !f.is_empty() => format!("{f} {}", self.question),
            _ => self.question.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("example with empty id".into()));
        }
        if self.question.trim().is_empty() {
            return Err(Error::Validation(format!("example {}: empty question", self.id)));
        }
        if self.choices.len() < 2 {
            return Err(Error::Validation(format!("example {}: need at least 2 choices", self.id)));
        }
        if self.choices.iter().any(|c| c.trim().is_empty()) {
            return Err(Error::Validation(format!("example {}: empty choice", self.id)));
        }
        if self.answer_idx >= self.choices.len() {
            return Err(Error::Validation(format!(
                "example {}: answer_idx {} out of range for {} choices",
                self.id,
                self.answer_idx,
                self.choices.len()
            )));
        }
        Ok(())
    }
}

/// Checks every example and that ids are unique.
pub fn validate_dataset(examples: &[QAExample]) -> Result<()> {
    let mut ids = HashSet::new();
    for ex in examples {
        ex.validate()?;
        if !ids.insert(ex.id.as_str()) {
            return Err(Error::Validation(format!("duplicate example id {}", ex.id)));
        }
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Vec<QAExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: QAExample = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(ex);
    }
    validate_dataset(&out)?;
    Ok(out)
}

pub fn write_dataset(examples: &[QAExample], path: &Path) -> Result<()> {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&serde_json::to_string(ex)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// `no, not, nothing, unlikely` plus `never` and the clitic `n't`.
pub const NEGATION_WORDS: [&str; 6] = ["no", "not", "nothing", "unlikely", "never", "n't"];

/// Lowercased word tokens with the `n't` clitic split off (`don't` → `do`, `n't`).
pub fn negation_tokens(text: &str) -> Vec<String> {
    let text = text.to_lowercase().replace('\u{2019}', "'");
    let mut out = Vec::new();
    for word in text.split(|c: char| !(c.is_alphanumeric() || c == '\'')) {
        let word = word.trim_matches('\'');
        if word.is_empty() {
            continue;
        }
        match word.strip_suffix("n't") {
            Some(stem) => {
                if !stem.is_empty() {
                    out.push(stem.to_string());
                }
                out.push("n't".to_string());
            }
            None => out.push(word.to_string()),
        }
    }
    out
}

pub fn is_negation_question(question: &str) -> bool {
    negation_tokens(question).iter().any(|t| NEGATION_WORDS.contains(&t.as_str()))
}

/// Examples whose question contains a negation word, in input order.
pub fn filter_negation(examples: &[QAExample]) -> Vec<QAExample> {
    examples.iter().filter(|e| is_negation_question(&e.question)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(id: &str, q: &str) -> QAExample {
        QAExample {
            id: id.into(),
            question: q.into(),
            choices: vec!["a".into(), "b".into()],
            answer_idx: 0,
            fact: None,
        }
    }

    #[test]
    fn tokenizer_splits_clitic() {
        assert_eq!(negation_tokens("Don't go"), ["do", "n't", "go"]);
        assert_eq!(negation_tokens("can’t stop"), ["ca", "n't", "stop"]);
        assert_eq!(negation_tokens("the dog's bone"), ["the", "dog's", "bone"]);
    }

    #[test]
    fn token_match_not_substring() {
        assert!(is_negation_question("he is not happy"));
        assert!(!is_negation_question("a notable musician"));
        assert!(!is_negation_question("knowledge is noble"));
        assert!(is_negation_question("You wouldn't find it where?"));
        assert!(is_negation_question("It is UNLIKELY to rain"));
    }

    #[test]
    fn filter_counts_and_order() {
        let data: Vec<QAExample> = [
            "where is it",
            "which is not red",
            "what has no legs",
            "a notable musician",
            "nothing happens when",
            "what is big",
            "never say where",
            "who runs",
            "where do cats sleep",
            "name a fruit",
        ]
        .iter()
        .enumerate()
        .map(|(i, q)| ex(&format!("q{i}"), q))
        .collect();
        let sub = filter_negation(&data);
        let ids: Vec<&str> = sub.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["q1", "q2", "q4", "q6"]);
        assert_eq!(filter_negation(&sub), sub);
    }

    #[test]
    fn fact_is_prepended() {
        let mut e = ex("a", "what melts ice?");
        e.fact = Some("heat melts ice".into());
        assert_eq!(e.question_text(), "heat melts ice what melts ice?");
    }

    #[test]
    fn validation() {
        let mut e = ex("a", "q");
        e.answer_idx = 2;
        assert!(e.validate().is_err());
        assert!(validate_dataset(&[ex("a", "q"), ex("a", "r")]).is_err());
        let mut e = ex("b", "q");
        e.choices.truncate(1);
        assert!(e.validate().is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let mut b = ex("b", "why not");
        b.fact = Some("because".into());
        let data = vec![ex("a", "what"), b];
        write_dataset(&data, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), data);
        std::fs::write(&path, "{\"id\":\"x\"}\n").unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
    }
}
