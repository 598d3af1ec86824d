use std::collections::HashMap;

use crate::model::ItemCatalog;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedResponse {
    pub ids: Vec<u32>,
    pub unmatched_lines: usize,
}

/// Removes list markers, emphasis and surrounding quotes from one line.
fn clean(line: &str) -> String {
    let mut s = line.trim().replace("**", "");
    s = s.trim().to_string();
    for marker in ["- ", "* ", "• ", "#"] {
        if let Some(rest) = s.strip_prefix(marker) {
            s = rest.trim_start().to_string();
        }
    }
    let digits = s.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(r) = rest
            .strip_prefix(". ")
            .or_else(|| rest.strip_prefix(") "))
            .or_else(|| rest.strip_prefix(": "))
            .or_else(|| rest.strip_prefix(" - "))
        {
            s = r.trim_start().to_string();
        }
    }
    let quotes: &[char] = &['"', '\'', '`', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}'];
    s.trim().trim_matches(quotes).trim().to_string()
}

/// Maps an LLM reply to candidate ids.
///
/// Each line is cleaned and looked up among the candidate titles, exactly
/// first and then case-insensitively, with and without trailing punctuation.
/// Duplicates keep their first position; the result is cut to `n_r`.
pub fn parse_response(raw: &str, candidates: &[u32], catalog: &ItemCatalog, n_r: usize) -> ParsedResponse {
    let mut exact: HashMap<&str, u32> = HashMap::new();
    let mut folded: HashMap<String, u32> = HashMap::new();
    for &id in candidates {
        if let Some(t) = catalog.title(id) {
            exact.entry(t).or_insert(id);
            folded.entry(t.to_lowercase()).or_insert(id);
        }
    }
    let mut out = ParsedResponse::default();
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let c = clean(line);
        let bare = c.trim_end_matches(['.', ',', ';', ':']).trim_end();
        let hit = exact
            .get(c.as_str())
            .or_else(|| exact.get(bare))
            .or_else(|| folded.get(&c.to_lowercase()))
            .or_else(|| folded.get(&bare.to_lowercase()))
            .copied();
        match hit {
            Some(id) if !out.ids.contains(&id) => out.ids.push(id),
            Some(_) => {}
            None => out.unmatched_lines += 1,
        }
    }
    out.ids.truncate(n_r);
    out
}
