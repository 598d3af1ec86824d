use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, Binding, Graph, Parameterized, SeededRng};
use crate::data::Transition;
use crate::engine::config::LaacConfig;
use crate::engine::losses::Batch;
use crate::engine::steps::{actor_step, collect_grads, critic_step, CriticObjective};
use crate::error::{Error, Result};
use crate::model::{CriticPair, NetworkDims, PolicyNetwork, Window};
use crate::reference::ReferencePolicyTable;

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub l_f1: f64,
    pub l_f2: f64,
    pub e_g_f1: f64,
    pub e_g_f2: f64,
    pub e_td_f1: f64,
    pub e_td_f2: f64,
    pub actor_loss: f64,
    pub grad_norm_f1: f64,
    pub grad_norm_f2: f64,
    pub grad_norm_actor: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

pub const TRAIN_LOG_HEADER: &str = "step,L_f1,L_f2,E_g_f1,E_g_f2,E_td_f1,E_td_f2,actor_loss";

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAIN_LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.step, r.l_f1, r.l_f2, r.e_g_f1, r.e_g_f2, r.e_td_f1, r.e_td_f2, r.actor_loss
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct LaacOutput {
    pub actor: PolicyNetwork,
    pub critics: CriticPair,
    pub log: TrainLog,
}

#[derive(Clone, Debug)]
pub struct BaselineOutput {
    pub actor: PolicyNetwork,
    /// Cross-entropy per step.
    pub losses: Vec<f64>,
}

pub fn network_dims(item_count: usize, config: &LaacConfig) -> NetworkDims {
    NetworkDims::new(item_count, config.embed_dim, config.hidden_dim)
}

/// Uniform minibatch indices, drawn with replacement.
pub fn sample_indices(rng: &mut SeededRng, n: usize, batch: usize) -> Vec<usize> {
    (0..batch).map(|_| rng.below(n)).collect()
}

fn guard(step: usize, what: &'static str, value: f64, threshold: f64) -> Result<()> {
    if !value.is_finite() || value.abs() > threshold {
        log::error!("step {step}: {what} = {value} exceeds {threshold}");
        return Err(Error::Diverged { step, what, value });
    }
    Ok(())
}

/// Freshly initialised actor and critics for a seed.
pub fn init_networks(item_count: usize, config: &LaacConfig) -> (PolicyNetwork, CriticPair) {
    let dims = network_dims(item_count, config);
    let actor = PolicyNetwork::new(dims, &mut SeededRng::derive(config.seed, "actor-init"));
    let critics = CriticPair::new(dims, &mut SeededRng::derive(config.seed, "critic-init"));
    (actor, critics)
}

/// Alternating critic and actor updates for `config.steps` iterations.
pub fn train_laac(train: &[Transition], reference: &ReferencePolicyTable, config: &LaacConfig) -> Result<LaacOutput> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let (mut actor, mut critics) = init_networks(reference.item_count(), config);
    let mut critic_opt = [Adam::new(config.eta_critic), Adam::new(config.eta_critic)];
    let mut actor_opt = Adam::new(config.eta_actor);
    let mut batch_rng = SeededRng::derive(config.seed, "minibatch");
    let mut td_rng = SeededRng::derive(config.seed, "td-sample");
    let objective = CriticObjective::from_config(config);
    let mut log = TrainLog::default();
    let threshold = config.divergence_threshold;

    for step in 0..config.steps {
        let idx = sample_indices(&mut batch_rng, train.len(), config.batch_size);
        let picked: Vec<&Transition> = idx.iter().map(|&i| &train[i]).collect();
        let batch = Batch::new(&picked, reference)?;
        let c = critic_step(
            &batch,
            &mut critics,
            &mut critic_opt,
            &actor,
            &actor,
            objective,
            config,
            &mut td_rng,
        )?;
        for i in 0..2 {
            guard(step, "L", c.gap[i], threshold)?;
            guard(step, "E_g", c.grounding[i], threshold)?;
            guard(step, "E_td", c.td[i], threshold)?;
        }
        let a = actor_step(&batch, &mut actor, &mut actor_opt, &critics.f1)?;
        guard(step, "actor_loss", a.loss, threshold)?;
        log.records.push(TrainRecord {
            step,
            l_f1: c.gap[0],
            l_f2: c.gap[1],
            e_g_f1: c.grounding[0],
            e_g_f2: c.grounding[1],
            e_td_f1: c.td[0],
            e_td_f2: c.td[1],
            actor_loss: a.loss,
            grad_norm_f1: c.grad_norm[0],
            grad_norm_f2: c.grad_norm[1],
            grad_norm_actor: a.grad_norm,
        });
        if (step + 1) % 1000 == 0 {
            log::info!("step {}: L_f1 {:.4} E_td_f1 {:.4}", step + 1, c.gap[0], c.td[0]);
        }
    }
    Ok(LaacOutput { actor, critics, log })
}

/// Mean next-item cross-entropy `-log pi(a | s)` and its tape.
pub fn cross_entropy(g: &mut Graph, actor: &PolicyNetwork, windows: &[Window], actions: &[usize]) -> Result<(crate::autodiff::Var, Vec<crate::autodiff::Var>)> {
    let fwd = actor.logits(g, Binding::Trainable, windows)?;
    let logp = g.log_softmax(fwd.output);
    let picked = g.pick(logp, actions)?;
    let mean = g.mean(picked);
    Ok((g.scale(mean, -1.0), fwd.params))
}

/// Supervised next-item baseline with the actor's architecture.
pub fn train_supervised_baseline(train: &[Transition], item_count: usize, config: &LaacConfig) -> Result<BaselineOutput> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let mut actor = PolicyNetwork::new(
        network_dims(item_count, config),
        &mut SeededRng::derive(config.seed, "baseline-init"),
    );
    let mut opt = Adam::new(config.eta_baseline);
    let mut rng = SeededRng::derive(config.seed, "baseline-minibatch");
    let mut losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let idx = sample_indices(&mut rng, train.len(), config.batch_size);
        let windows: Vec<Window> = idx.iter().map(|&i| train[i].window).collect();
        let actions: Vec<usize> = idx.iter().map(|&i| train[i].action as usize - 1).collect();
        let mut g = Graph::new();
        let (loss, params) = cross_entropy(&mut g, &actor, &windows, &actions)?;
        let value = g.value(loss).item();
        guard(step, "cross_entropy", value, config.divergence_threshold)?;
        let grads = g.backward(loss)?;
        let (gs, _) = collect_grads(&grads, &params);
        opt.step(&mut actor.params_mut(), &gs)?;
        losses.push(value);
    }
    Ok(BaselineOutput { actor, losses })
}
