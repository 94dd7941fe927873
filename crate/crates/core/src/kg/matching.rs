use std::collections::BTreeSet;

use crate::kg::normalize;
use crate::kg::store::{EntityId, KnowledgeStore};

/// Exact n-gram entity linking.
///
/// Every n-gram (n ≤ `max_ngram`) of the normalized text is looked up as a
/// surface form. A match whose token span lies strictly inside another
/// match's span is suppressed.
pub fn match_entities(text: &str, store: &KnowledgeStore, max_ngram: usize) -> BTreeSet<EntityId> {
    let toks = normalize::tokens(text);
    let max_n = max_ngram.max(1).min(toks.len());
    let mut spans: Vec<(usize, usize, EntityId)> = Vec::new();
    for n in 1..=max_n {
        for start in 0..=toks.len() - n {
            let key = toks[start..start + n].join("_");
            if let Some(id) = store.entity(&key) {
                spans.push((start, start + n, id));
            }
        }
    }
    spans
        .iter()
        .filter(|&&(s, e, _)| !spans.iter().any(|&(s2, e2, _)| s2 <= s && e <= e2 && (e2 - s2) > (e - s)))
        .map(|&(_, _, id)| id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::RelationSet;

    fn store(pairs: &[(&str, &str)]) -> KnowledgeStore {
        KnowledgeStore::from_triples(RelationSet::default(), pairs.iter().map(|&(h, t)| (h, "relatedto", t))).unwrap()
    }

    #[test]
    fn single_token_match() {
        let s = store(&[("guitar", "music room")]);
        let got = match_entities("the student practiced his guitar", &s, 3);
        assert_eq!(got, BTreeSet::from([s.entity("guitar").unwrap()]));
    }

    #[test]
    fn no_overlap_is_empty() {
        let s = store(&[("guitar", "music room")]);
        assert!(match_entities("completely unrelated words", &s, 3).is_empty());
    }

    #[test]
    fn longer_match_suppresses_subspans() {
        let s = store(&[("play", "baseball"), ("play baseball", "baseball")]);
        let got = match_entities("play baseball", &s, 3);
        assert_eq!(got, BTreeSet::from([s.entity("play_baseball").unwrap()]));
    }

    #[test]
    fn overlapping_but_not_nested_both_kept() {
        let s = store(&[("music room", "room key"), ("music", "room")]);
        let got = match_entities("music room key", &s, 3);
        let names: BTreeSet<&str> = got.iter().map(|&e| s.surface(e)).collect();
        assert_eq!(names, BTreeSet::from(["music_room", "room_key"]));
    }

    #[test]
    fn max_ngram_limits_span() {
        let s = store(&[("play baseball", "x"), ("play", "y")]);
        let got = match_entities("play baseball", &s, 1);
        assert_eq!(got, BTreeSet::from([s.entity("play").unwrap()]));
    }
}
