//! One critic update and one actor update.

use std::collections::HashMap;

use crate::autodiff::{Adam, Binding, Gradients, Graph, Parameterized, SeededRng, Tensor, Var};
use crate::engine::config::{DoubleQMode, LaacConfig, TdTargetMode};
use crate::engine::losses::{adversarial_gap, elementwise_min, grounding_loss, successor_values, td_loss, td_targets, Batch};
use crate::error::{Error, Result};
use crate::model::{Critic, CriticPair, PolicyNetwork, Window};

/// Policy used to evaluate successor states in the TD target.
pub trait NextPolicy {
    fn next_distribution(&self, windows: &[Window]) -> Result<Tensor>;
}

impl NextPolicy for PolicyNetwork {
    fn next_distribution(&self, windows: &[Window]) -> Result<Tensor> {
        self.distribution(windows)
    }
}

/// Fixed per-state distributions, e.g. a known behavior policy.
#[derive(Clone, Debug, Default)]
pub struct TabularPolicy {
    pub item_count: usize,
    pub rows: HashMap<Window, Vec<f64>>,
}

impl NextPolicy for TabularPolicy {
    fn next_distribution(&self, windows: &[Window]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(windows.len() * self.item_count);
        for w in windows {
            let row = self
                .rows
                .get(w)
                .ok_or_else(|| Error::InvalidArgument(format!("no tabular policy row for {w:?}")))?;
            data.extend_from_slice(row);
        }
        Tensor::matrix(windows.len(), self.item_count, data)
    }
}

/// Weights of the critic objective `gap * L + alpha * E_g + beta * E_td`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticObjective {
    pub gap: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CriticObjective {
    pub fn from_config(config: &LaacConfig) -> Self {
        Self {
            gap: 1.0,
            alpha: config.alpha,
            beta: config.beta,
        }
    }

    pub fn td_only() -> Self {
        Self {
            gap: 0.0,
            alpha: 0.0,
            beta: 1.0,
        }
    }
}

/// Unweighted loss components of one critic step, per critic.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CriticRecord {
    pub gap: [f64; 2],
    pub grounding: [f64; 2],
    pub td: [f64; 2],
    pub total: [f64; 2],
    pub grad_norm: [f64; 2],
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActorRecord {
    /// `-L(f1, pi)`.
    pub loss: f64,
    pub grad_norm: f64,
}

/// Gradients of `vars` in order, with their global L2 norm.
pub(crate) fn collect_grads(grads: &Gradients, vars: &[Var]) -> (Vec<Tensor>, f64) {
    let gs: Vec<Tensor> = vars.iter().map(|&v| grads.wrt(v)).collect();
    let norm = gs.iter().map(|g| g.data().iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
    (gs, norm)
}

fn ensure_finite(what: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss(format!("{what} = {value}")))
    }
}

/// Successor values for both critics, all computed before either critic
/// moves.
fn successor_pair(
    batch: &Batch,
    critics: &CriticPair,
    next_policy: &dyn NextPolicy,
    config: &LaacConfig,
    rng: &mut SeededRng,
) -> Result<[Vec<f64>; 2]> {
    let pi_next = next_policy.next_distribution(&batch.next_windows)?;
    let sampled: Vec<usize> = match config.td_target_mode {
        TdTargetMode::Sampled => (0..batch.len()).map(|i| rng.categorical(pi_next.row(i))).collect(),
        TdTargetMode::Exact => Vec::new(),
    };
    let v1 = critics.f1.value_table(&batch.next_windows)?;
    let v2 = critics.f2.value_table(&batch.next_windows)?;
    let mode = config.td_target_mode;
    Ok(match config.double_q_mode {
        DoubleQMode::PerCritic => [
            successor_values(&v1, &pi_next, mode, &sampled)?,
            successor_values(&v2, &pi_next, mode, &sampled)?,
        ],
        DoubleQMode::MinTarget => {
            let t = successor_values(&elementwise_min(&v1, &v2)?, &pi_next, mode, &sampled)?;
            [t.clone(), t]
        }
    })
}

/// Builds one critic's objective on a fresh tape and returns the gradient
/// step inputs.
fn critic_objective(
    critic: &Critic,
    batch: &Batch,
    policy: &Tensor,
    targets: &[f64],
    objective: CriticObjective,
) -> Result<(Vec<Tensor>, f64, [f64; 4])> {
    let mut g = Graph::new();
    let fwd = critic.values(&mut g, Binding::Trainable, &batch.windows)?;
    let p = g.constant(policy.clone());
    let r = g.constant(batch.reference.clone());
    let gap = adversarial_gap(&mut g, fwd.output, p, r)?;
    let ground = grounding_loss(&mut g, fwd.output, r, &batch.actions)?;
    let td = td_loss(&mut g, fwd.output, &batch.actions, targets)?;
    let a = g.scale(gap, objective.gap);
    let b = g.scale(ground, objective.alpha);
    let c = g.scale(td, objective.beta);
    let ab = g.add(a, b)?;
    let total = g.add(ab, c)?;
    let parts = [g.value(gap).item(), g.value(ground).item(), g.value(td).item(), g.value(total).item()];
    for (name, v) in ["L", "E_g", "E_td", "l_critic"].iter().zip(parts) {
        ensure_finite(&format!("{name} of {}", critic.params()[0].name), v)?;
    }
    let grads = g.backward(total)?;
    let (gs, norm) = collect_grads(&grads, &fwd.params);
    Ok((gs, norm, parts))
}

/// One Adam step for each critic on `gap * L + alpha * E_g + beta * E_td`.
///
/// `actor` supplies `pi(. | s)` for the gap term; `next_policy` supplies the
/// successor distribution for the TD target. Neither is modified.
#[allow(clippy::too_many_arguments)]
pub fn critic_step(
    batch: &Batch,
    critics: &mut CriticPair,
    optimizers: &mut [Adam; 2],
    actor: &PolicyNetwork,
    next_policy: &dyn NextPolicy,
    objective: CriticObjective,
    config: &LaacConfig,
    rng: &mut SeededRng,
) -> Result<CriticRecord> {
    let policy = actor.distribution(&batch.windows)?;
    let successors = successor_pair(batch, critics, next_policy, config, rng)?;
    let mut record = CriticRecord::default();
    let mut updates = Vec::with_capacity(2);
    for (i, succ) in successors.iter().enumerate() {
        let targets = td_targets(&batch.rewards, &batch.terminal, config.gamma, succ)?;
        let (grads, norm, parts) = critic_objective(critics.get(i), batch, &policy, &targets, objective)?;
        record.gap[i] = parts[0];
        record.grounding[i] = parts[1];
        record.td[i] = parts[2];
        record.total[i] = parts[3];
        record.grad_norm[i] = norm;
        updates.push(grads);
    }
    for (i, grads) in updates.iter().enumerate() {
        optimizers[i].step(&mut critics.get_mut(i).params_mut(), grads)?;
    }
    Ok(record)
}

/// One Adam step for the actor on `-L(f1, pi)`; the critic is read only.
pub fn actor_step(batch: &Batch, actor: &mut PolicyNetwork, optimizer: &mut Adam, f1: &Critic) -> Result<ActorRecord> {
    let values = f1.value_table(&batch.windows)?;
    let mut g = Graph::new();
    let fwd = actor.probabilities(&mut g, Binding::Trainable, &batch.windows)?;
    let v = g.constant(values);
    let r = g.constant(batch.reference.clone());
    let gap = adversarial_gap(&mut g, v, fwd.output, r)?;
    let loss = g.scale(gap, -1.0);
    let value = g.value(loss).item();
    ensure_finite("actor loss", value)?;
    let grads = g.backward(loss)?;
    let (gs, norm) = collect_grads(&grads, &fwd.params);
    optimizer.step(&mut actor.params_mut(), &gs)?;
    Ok(ActorRecord { loss: value, grad_norm: norm })
}
