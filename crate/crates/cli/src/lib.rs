//! Command-line front end and local HTTP service for `harlstm`.
//!
//! Every batch command writes its outputs together with a run manifest
//! (`*-manifest.json`) recording the full argument set and the SHA-256 of
//! each input and output; `rerun` replays a manifest.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod service;
pub mod trace;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use commands::Outcome;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "harlstm", version, about = "Wrist accelerometer activity recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "parameters", rename_all = "lowercase")]
pub enum Command {
    /// Cut annotated spans out of recordings into per-label segment files
    Ingest(commands::IngestArgs),
    /// Balance segments, slice sliding windows and split train/test
    Window(commands::WindowArgs),
    /// Train the stacked LSTM and report on the test split
    Train(commands::TrainArgs),
    /// Score a checkpoint against a windowed dataset
    Eval(commands::EvalArgs),
    /// Per-window class probabilities from a checkpoint
    Predict(commands::PredictArgs),
    /// Serve the upload and annotation API
    Serve(service::ServeArgs),
    /// Repeat the command recorded in a run manifest
    Rerun {
        manifest: PathBuf,
    },
}

impl Command {
    /// Rebuilds a command from a manifest's `command` and `parameters`.
    pub fn from_manifest(m: &manifest::RunManifest) -> Result<Self, CliError> {
        let value = serde_json::json!({ "command": m.command, "parameters": m.parameters });
        serde_json::from_value(value).map_err(|e| CliError::Data(format!("manifest parameters: {e}")))
    }
}

/// Runs one batch command. `serve` blocks until the server stops.
pub fn run(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Window(a) => commands::window(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict_cmd(a),
        Command::Serve(a) => {
            let rt = tokio::runtime::Runtime::new().map_err(CliError::io(&a.store))?;
            rt.block_on(service::serve(a)).map_err(CliError::io(&a.store))?;
            Ok(Outcome::default())
        }
        Command::Rerun { manifest } => {
            let m = manifest::RunManifest::read(manifest)?;
            match Command::from_manifest(&m)? {
                Command::Rerun { .. } | Command::Serve(_) => {
                    Err(CliError::Data(format!("{}: not a replayable command", manifest.display())))
                }
                inner => run(&inner),
            }
        }
    }
}
