//! Exact policy evaluation on finite MDPs.

use crate::data::synthetic::SyntheticMDP;
use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 1_000_000;

fn check(mdp: &SyntheticMDP, policy: &[Vec<f64>]) -> Result<()> {
    if !(0.0..1.0).contains(&mdp.gamma) {
        return Err(Error::InvalidArgument(format!(
            "policy evaluation needs gamma in [0, 1), got {}",
            mdp.gamma
        )));
    }
    if policy.len() != mdp.states() || policy.iter().any(|p| p.len() != mdp.actions()) {
        return Err(Error::shape(
            "exact_q",
            &[mdp.states(), mdp.actions()],
            &[policy.len(), policy.first().map_or(0, Vec::len)],
        ));
    }
    Ok(())
}

/// `Q^pi(s, a)` by iterating the Bellman evaluation operator until successive
/// iterates differ by less than 1e-10 in sup-norm.
pub fn exact_q(mdp: &SyntheticMDP, policy: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check(mdp, policy)?;
    let (s_n, a_n) = (mdp.states(), mdp.actions());
    let mut q = mdp.reward.clone();
    let mut v = vec![0.0; s_n];
    for _ in 0..MAX_SWEEPS {
        for s in 0..s_n {
            v[s] = policy[s].iter().zip(&q[s]).map(|(p, x)| p * x).sum();
        }
        let mut delta: f64 = 0.0;
        for s in 0..s_n {
            for a in 0..a_n {
                let next: f64 = mdp.transition[s][a].iter().zip(&v).map(|(p, x)| p * x).sum();
                let value = mdp.reward[s][a] + mdp.gamma * next;
                delta = delta.max((value - q[s][a]).abs());
                q[s][a] = value;
            }
        }
        if delta < TOLERANCE {
            return Ok(q);
        }
    }
    Err(Error::InvalidArgument("policy evaluation did not converge".into()))
}

/// `V^pi(s) = sum_a pi(a|s) Q^pi(s, a)`.
pub fn exact_v(mdp: &SyntheticMDP, policy: &[Vec<f64>]) -> Result<Vec<f64>> {
    let q = exact_q(mdp, policy)?;
    Ok(policy
        .iter()
        .zip(&q)
        .map(|(p, row)| p.iter().zip(row).map(|(a, b)| a * b).sum())
        .collect())
}
