//! Text normalization shared by the triple loader and the entity matcher:
//! lowercase, punctuation stripped, multi-word concepts joined with `_`.
//! No lemmatization.

/// Splits text into normalized tokens. Any character that is not
/// alphanumeric separates tokens, except apostrophes, which are dropped.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if ch == '\'' || ch == '\u{2019}' {
            continue;
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Canonical surface form of a concept, e.g. `"Music Room"` → `"music_room"`.
pub fn surface(text: &str) -> String {
    tokens(text).join("_")
}
