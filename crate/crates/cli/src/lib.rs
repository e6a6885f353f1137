//! Command implementations behind the `vecuq` binary: CSV and model-file I/O
//! plus the `fit`, `rank`, `eval` and `synth` subcommands.

pub mod commands;
pub mod csvio;
pub mod error;
pub mod model_file;

pub use error::{CliError, Result};
