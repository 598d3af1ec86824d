use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::hex16;

pub const PROMPT_TEMPLATE: &str = include_str!("../../templates/prompt_v1.txt");

pub fn template_hash() -> String {
    hex16(&Sha256::digest(PROMPT_TEMPLATE.as_bytes()))
}

/// Fills the template with the history titles (oldest first), a numbered
/// candidate list and the requested count.
pub fn build_prompt(history: &[&str], candidates: &[&str], n_r: usize) -> Result<String> {
    if history.is_empty() || history.iter().any(|t| t.trim().is_empty()) {
        return Err(Error::InvalidArgument("prompt needs a title for every history item".into()));
    }
    if candidates.is_empty() || candidates.iter().any(|t| t.trim().is_empty()) {
        return Err(Error::InvalidArgument("prompt needs a nonempty candidate list".into()));
    }
    if n_r == 0 {
        return Err(Error::InvalidArgument("requested count must be at least 1".into()));
    }
    let hist: Vec<String> = history.iter().map(|t| format!("- {t}")).collect();
    let cands: Vec<String> = candidates
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{}. {t}", i + 1))
        .collect();
    Ok(PROMPT_TEMPLATE
        .replace("{history}", &hist.join("\n"))
        .replace("{candidates}", &cands.join("\n"))
        .replace("{n_r}", &n_r.to_string()))
}
