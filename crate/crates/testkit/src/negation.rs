//! Fixture for the negation subset.

use drgn::training::QAExample;

/// Twenty questions, eight with a planted negation cue. The others carry
/// near misses such as notable, nothingness or unlikeliest.
pub const QUESTIONS: [(&str, bool); 20] = [
    ("Where would you not find a penguin?", true),
    ("A notable musician plays what instrument?", false),
    ("What is nothing but air?", true),
    ("Where do people keep milk?", false),
    ("Which outcome is unlikely after rain?", true),
    ("What does a knotted rope hold?", false),
    ("Why don't fish drown?", true),
    ("What has no legs but moves?", true),
    ("Where is the nothingness museum?", false),
    ("What can a notebook store?", false),
    ("He never eats what?", true),
    ("Where do nomads sleep?", false),
    ("What is a snowman made of?", false),
    ("Which tool is unlikeliest to cut?", false),
    ("She isn't happy because of what?", true),
    ("What makes a piano sound?", false),
    ("Noon is what time of day?", false),
    ("Where does a cannot-miss shot land?", false),
    ("What did the NOT gate output?", true),
    ("Which bird knows the way home?", false),
];

pub fn fixture() -> Vec<QAExample> {
    QUESTIONS
        .iter()
        .enumerate()
        .map(|(i, (q, _))| QAExample {
            id: format!("q{i:02}"),
            question: q.to_string(),
            choices: vec!["a".into(), "b".into()],
            answer_idx: i % 2,
            fact: None,
        })
        .collect()
}

/// Ids of the planted negation questions, in order.
pub fn planted() -> Vec<String> {
    QUESTIONS
        .iter()
        .enumerate()
        .filter(|(_, (_, neg))| *neg)
        .map(|(i, _)| format!("q{i:02}"))
        .collect()
}
