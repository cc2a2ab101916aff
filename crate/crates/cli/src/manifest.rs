use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::args::Cli;
use crate::CliError;

/// Everything needed to reproduce a run: the resolved model and the full
/// parsed command line. The thread count is deliberately absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub model_source: String,
    pub model: serde_json::Value,
    pub config: Cli,
    pub seed: u64,
    pub tool_version: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}
