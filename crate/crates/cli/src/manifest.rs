use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::Command;
use crate::input::{read_input, CliError, CliResult, EXIT_IO};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: usize,
}

/// What a run read, resolved and wrote, filled in while it executes.
#[derive(Debug, Default)]
pub struct RunRecord {
    pub inputs: Vec<InputRecord>,
    pub resolved: Map<String, Value>,
    pub outputs: Vec<String>,
    pub diagnostics: Map<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Full invocation with absolute paths; replaying it reproduces the
    /// outputs byte for byte.
    pub invocation: Command,
    pub resolved: Map<String, Value>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    /// Timing and cache statistics. Not part of the reproducible outputs.
    pub diagnostics: Map<String, Value>,
    pub wall_clock_secs: f64,
}

impl Manifest {
    pub fn new(invocation: Command, record: RunRecord, wall_clock_secs: f64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            invocation,
            resolved: record.resolved,
            inputs: record.inputs,
            outputs: record.outputs,
            diagnostics: record.diagnostics,
            wall_clock_secs,
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(self).expect("serialisable");
        text.push('\n');
        std::fs::create_dir_all(dir)
            .and_then(|()| std::fs::write(&path, text))
            .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let file = read_input(path)?;
        serde_json::from_str(&file.text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    /// Fails if any recorded input changed since the run.
    pub fn check_inputs(&self) -> CliResult<()> {
        for input in &self.inputs {
            let now = read_input(&input.path)?;
            if now.sha256 != input.sha256 {
                return Err(CliError::input(format!(
                    "{} changed since the recorded run (sha256 {} != {})",
                    input.path.display(),
                    now.sha256,
                    input.sha256
                )));
            }
        }
        Ok(())
    }
}
