//! Catalog, state encoder, actor and critic networks, checkpoints.

mod catalog;
mod checkpoint;
mod network;

pub use catalog::{
    parse_state_key, shift_append, state_key, CatalogItem, ItemCatalog, Window, PAD, WINDOW,
};
pub(crate) use catalog::hex16;
pub use checkpoint::{Checkpoint, Variant, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use network::{
    expected_value, Critic, CriticPair, Forward, GruEncoder, ItemScorer, NetworkDims, PolicyNetwork,
};
