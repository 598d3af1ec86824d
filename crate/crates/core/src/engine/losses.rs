//! The three critic loss terms, built on the tape so they can be trained.
//!
//! All inputs are `[batch, items]` tables whose column `j` is item `j + 1`.
//! Each loss is a batch mean.

use crate::autodiff::{Graph, Tensor, Var};
use crate::data::Transition;
use crate::engine::config::TdTargetMode;
use crate::error::{Error, Result};
use crate::model::Window;
use crate::reference::ReferencePolicyTable;

/// A minibatch with the reference distribution of every state.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub windows: Vec<Window>,
    /// Action column indices (`id - 1`).
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_windows: Vec<Window>,
    pub terminal: Vec<bool>,
    /// `[batch, items]` rows of `pi_LLM(. | s)`.
    pub reference: Tensor,
}

impl Batch {
    pub fn new(transitions: &[&Transition], reference: &ReferencePolicyTable) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::Empty("minibatch"));
        }
        let n = reference.item_count();
        let mut rows = Vec::with_capacity(transitions.len() * n);
        let mut actions = Vec::with_capacity(transitions.len());
        for t in transitions {
            if t.action == 0 || t.action as usize > n {
                return Err(Error::IndexOutOfRange {
                    what: "action id",
                    index: t.action as usize,
                    size: n + 1,
                });
            }
            actions.push(t.action as usize - 1);
            rows.extend(reference.policy_or_fallback(&t.window)?);
        }
        Ok(Self {
            windows: transitions.iter().map(|t| t.window).collect(),
            actions,
            rewards: transitions.iter().map(|t| t.reward).collect(),
            next_windows: transitions.iter().map(|t| t.next_window).collect(),
            terminal: transitions.iter().map(|t| t.terminal).collect(),
            reference: Tensor::matrix(transitions.len(), n, rows)?,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// `L = mean_s [ f(s, pi) - f(s, pi_LLM) ]` with exact expectations.
pub fn adversarial_gap(g: &mut Graph, values: Var, policy: Var, reference: Var) -> Result<Var> {
    let vp = g.mul(values, policy)?;
    let f_pi = g.sum_rows(vp)?;
    let vr = g.mul(values, reference)?;
    let f_ref = g.sum_rows(vr)?;
    let diff = g.sub(f_pi, f_ref)?;
    Ok(g.mean(diff))
}

/// `E_g = mean_s [ (f(s, a) - f(s, pi_LLM))^2 ]` for the logged action `a`.
pub fn grounding_loss(g: &mut Graph, values: Var, reference: Var, actions: &[usize]) -> Result<Var> {
    let f_a = g.pick(values, actions)?;
    let vr = g.mul(values, reference)?;
    let f_ref = g.sum_rows(vr)?;
    let diff = g.sub(f_a, f_ref)?;
    let sq = g.square(diff);
    Ok(g.mean(sq))
}

/// `E_td = mean [ (f(s, a) - y)^2 ]` against fixed targets `y`.
pub fn td_loss(g: &mut Graph, values: Var, actions: &[usize], targets: &[f64]) -> Result<Var> {
    let f_a = g.pick(values, actions)?;
    let y = g.constant(Tensor::vector(targets.to_vec()));
    let diff = g.sub(f_a, y)?;
    let sq = g.square(diff);
    Ok(g.mean(sq))
}

/// `y = r + gamma * (1 - terminal) * T(s')`.
pub fn td_targets(rewards: &[f64], terminal: &[bool], gamma: f64, successor: &[f64]) -> Result<Vec<f64>> {
    if gamma >= 1.0 && terminal.iter().any(|t| !t) {
        return Err(Error::InvalidArgument(format!(
            "gamma = {gamma} cannot bootstrap non-terminal transitions"
        )));
    }
    if rewards.len() != terminal.len() || rewards.len() != successor.len() {
        return Err(Error::shape("td_targets", &[rewards.len()], &[successor.len()]));
    }
    Ok(rewards
        .iter()
        .zip(terminal)
        .zip(successor)
        .map(|((&r, &done), &t)| if done { r } else { r + gamma * t })
        .collect())
}

/// Successor values `T(s')` from a `[batch, items]` value table.
///
/// Exact mode takes the expectation under `next_policy`; sampled mode reads
/// the value at the pre-drawn action column of each row.
pub fn successor_values(
    values: &Tensor,
    next_policy: &Tensor,
    mode: TdTargetMode,
    sampled: &[usize],
) -> Result<Vec<f64>> {
    if values.shape() != next_policy.shape() {
        return Err(Error::shape("successor_values", values.shape(), next_policy.shape()));
    }
    Ok((0..values.rows())
        .map(|i| match mode {
            TdTargetMode::Exact => values.row(i).iter().zip(next_policy.row(i)).map(|(v, p)| v * p).sum(),
            TdTargetMode::Sampled => values.row(i)[sampled[i]],
        })
        .collect())
}

/// Elementwise minimum of two equally shaped tables.
pub fn elementwise_min(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::shape("elementwise_min", a.shape(), b.shape()));
    }
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(x, y)| x.min(*y)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(build: impl FnOnce(&mut Graph) -> Result<Var>) -> f64 {
        let mut g = Graph::new();
        let v = build(&mut g).unwrap();
        g.value(v).item()
    }

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn gap_is_zero_for_identical_policies() {
        let v = t(&[vec![1.0, -2.0, 7.0], vec![0.5, 3.0, 1.0]]);
        let p = t(&[vec![0.2, 0.3, 0.5], vec![1.0, 0.0, 0.0]]);
        let gap = eval(|g| {
            let (v, a, b) = (g.constant(v), g.constant(p.clone()), g.constant(p));
            adversarial_gap(g, v, a, b)
        });
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn gap_is_zero_for_constant_critic() {
        let v = t(&[vec![4.0; 3], vec![4.0; 3]]);
        let p = t(&[vec![0.2, 0.3, 0.5], vec![1.0, 0.0, 0.0]]);
        let q = t(&[vec![0.0, 0.0, 1.0], vec![0.5, 0.5, 0.0]]);
        let gap = eval(|g| {
            let (v, a, b) = (g.constant(v), g.constant(p), g.constant(q));
            adversarial_gap(g, v, a, b)
        });
        assert!(gap.abs() < 1e-15);
    }

    #[test]
    fn gap_matches_hand_computation() {
        // State 1: f(pi) = 0.5*1 + 0.5*2 = 1.5, f(ref) = 3; state 2: f(pi) = 4, f(ref) = 0.5*4 + 0.5*6 = 5.
        let v = t(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let p = t(&[vec![0.5, 0.5, 0.0], vec![1.0, 0.0, 0.0]]);
        let q = t(&[vec![0.0, 0.0, 1.0], vec![0.5, 0.0, 0.5]]);
        let gap = eval(|g| {
            let (v, a, b) = (g.constant(v), g.constant(p), g.constant(q));
            adversarial_gap(g, v, a, b)
        });
        assert!((gap - ((1.5 - 3.0) + (4.0 - 5.0)) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn grounding_single_sample() {
        let v = t(&[vec![2.0, 5.0]]);
        let q = t(&[vec![0.0, 1.0]]);
        let e = eval(|g| {
            let (v, q) = (g.constant(v), g.constant(q));
            grounding_loss(g, v, q, &[0])
        });
        assert_eq!(e, 9.0);
    }

    #[test]
    fn td_examples() {
        let y = td_targets(&[2.0], &[false], 0.5, &[2.0]).unwrap();
        let v = t(&[vec![3.0, 0.0]]);
        assert_eq!(eval(|g| {
            let v = g.constant(v);
            td_loss(g, v, &[0], &y)
        }), 0.0);
        assert_eq!(td_targets(&[4.0], &[true], 0.9, &[100.0]).unwrap(), vec![4.0]);
        assert!(td_targets(&[1.0], &[false], 1.0, &[0.0]).is_err());
        assert!(td_targets(&[1.0], &[true], 1.0, &[0.0]).is_ok());
    }

    #[test]
    fn successor_modes() {
        let v = t(&[vec![1.0, 3.0], vec![2.0, 8.0]]);
        let p = t(&[vec![0.25, 0.75], vec![0.5, 0.5]]);
        assert_eq!(successor_values(&v, &p, TdTargetMode::Exact, &[]).unwrap(), vec![2.5, 5.0]);
        assert_eq!(successor_values(&v, &p, TdTargetMode::Sampled, &[1, 0]).unwrap(), vec![3.0, 2.0]);
        let m = elementwise_min(&v, &t(&[vec![0.0, 9.0], vec![9.0, 0.0]])).unwrap();
        assert_eq!(m.data(), &[0.0, 3.0, 2.0, 0.0]);
    }
}
