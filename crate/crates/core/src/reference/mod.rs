//! The LLM-derived reference policy: prompts, providers, response parsing
//! and the per-state suggestion table.

pub mod cache;
pub mod candidates;
pub mod parse;
pub mod prompt;
pub mod providers;
pub mod table;

pub use cache::{read_cache, table_from_records, write_cache, CacheWriter, ProviderRecord, RecordStatus, TableStats};
pub use candidates::{sample_candidates, state_candidates};
pub use parse::{parse_response, ParsedResponse};
pub use prompt::{build_prompt, template_hash, PROMPT_TEMPLATE};
pub use providers::{
    build_cache, prompt_for_state, CacheBuildOptions, CacheBuildSummary, LiveConfig, LiveProvider, PromptRequest, Provider,
    ReplayProvider, StubProvider,
};
pub use table::{ReferencePolicyTable, Suggestion};
