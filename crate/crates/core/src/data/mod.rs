//! Dataset construction: MovieLens ingestion, transitions, popularity and
//! synthetic MDPs.

pub mod dp;
pub mod movielens;
pub mod popularity;
pub mod synthetic;
pub mod transitions;

pub use dp::{exact_q, exact_v};
pub use movielens::{ingest_interactions, ingest_movielens, IngestOptions, IngestStats, Ingested, Interaction, UserInfo, UserSequence};
pub use popularity::popularity_split;
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticData, SyntheticMDP};
pub use transitions::{build_transitions, sequence_transitions, OfflineDataset, Split, Transition, TransitionOptions};
