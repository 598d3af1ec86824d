//! The adversarial actor-critic optimiser and the supervised baseline.

pub mod config;
pub mod losses;
pub mod steps;
pub mod train;

pub use config::{DoubleQMode, LaacConfig, TdTargetMode};
pub use losses::{adversarial_gap, grounding_loss, successor_values, td_loss, td_targets, Batch};
pub use steps::{actor_step, critic_step, ActorRecord, CriticObjective, CriticRecord, NextPolicy, TabularPolicy};
pub use train::{
    cross_entropy, init_networks, network_dims, sample_indices, train_laac, train_supervised_baseline, BaselineOutput, LaacOutput,
    TrainLog, TrainRecord, TRAIN_LOG_HEADER,
};
