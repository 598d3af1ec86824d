//! Command-line front end: ingestion, synthetic data, reference caching,
//! training, evaluation and sweeps.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod pipeline;

use laac_core::par::ExecMode;

pub use args::Cli;
pub use config::RunConfig;
pub use manifest::RunManifest;

/// A bad flag, missing input or invalid configuration (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// 2 for usage and configuration errors, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<laac_core::Error>() {
            match e {
                laac_core::Error::Config(_) => return 2,
                laac_core::Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => return 2,
                _ => {}
            }
        }
    }
    1
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let mode = if cli.sequential { ExecMode::Sequential } else { ExecMode::default() };
    use args::Command::*;
    match &cli.command {
        Ingest(a) => commands::ingest(a),
        Synth(a) => commands::synth(a),
        BuildCache(a) => commands::build_cache_cmd(a),
        Train(a) => commands::train(a),
        Eval(a) => commands::eval(a, mode),
        Sweep(a) => commands::sweep(a, mode),
    }
}
