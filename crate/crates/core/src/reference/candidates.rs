use crate::autodiff::SeededRng;
use crate::error::{Error, Result};
use crate::model::{state_key, Window};

/// `n_c` distinct catalog ids, uniformly without replacement, in draw order.
pub fn sample_candidates(item_count: usize, n_c: usize, rng: &mut SeededRng) -> Result<Vec<u32>> {
    if n_c == 0 {
        return Err(Error::InvalidArgument("candidate count must be at least 1".into()));
    }
    if n_c > item_count {
        return Err(Error::InvalidArgument(format!(
            "candidate count {n_c} exceeds catalog size {item_count}"
        )));
    }
    Ok(rng
        .sample_without_replacement(item_count, n_c)
        .into_iter()
        .map(|i| i as u32 + 1)
        .collect())
}

/// Candidates for a state, fixed by the state key and the global seed.
pub fn state_candidates(window: &Window, item_count: usize, n_c: usize, seed: u64) -> Result<Vec<u32>> {
    let mut rng = SeededRng::derive(seed, &format!("candidates:{}", state_key(window)));
    sample_candidates(item_count, n_c, &mut rng)
}
