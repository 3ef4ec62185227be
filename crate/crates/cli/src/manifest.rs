use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use curbflow::{Error, Result, ScenarioConfig};

/// Written next to every output set. Everything except `wall_time_s` is a
/// pure function of the inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: Option<PathBuf>,
    pub parameters: Option<ScenarioConfig>,
    pub tool_version: &'static str,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, scenario: Option<&Path>, parameters: Option<&ScenarioConfig>) -> Self {
        RunManifest {
            command: command.to_string(),
            scenario: scenario.map(Path::to_path_buf),
            parameters: parameters.cloned(),
            tool_version: env!("CARGO_PKG_VERSION"),
            outputs: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn write(mut self, path: &Path, started: Instant) -> Result<()> {
        self.wall_time_s = started.elapsed().as_secs_f64();
        write_json(path, &self)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
