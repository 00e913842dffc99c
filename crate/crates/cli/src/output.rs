use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{io_err, CliResult};

/// Output directory plus the effective config echoed into every file.
pub struct Sink {
    dir: PathBuf,
    command: &'static str,
    config_json: String,
}

#[derive(Serialize)]
struct Echo<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
}

impl Sink {
    pub fn new(command: &'static str, config: &ExperimentConfig) -> CliResult<Self> {
        let dir = config.out_dir.clone();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let config_json =
            serde_json::to_string(&Echo { command, config }).map_err(eesim_core::Error::from)?;
        Ok(Self {
            dir,
            command,
            config_json,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV with a `# config: {...}` first line.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        let mut text = format!("# config: {}\n{}\n", self.config_json, header.join(","));
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    /// CSV whose body is produced by `body` after the config line.
    pub fn csv_with(
        &self,
        name: &str,
        body: impl FnOnce(&mut Vec<u8>) -> CliResult<()>,
    ) -> CliResult<PathBuf> {
        let mut buf = format!("# config: {}\n", self.config_json).into_bytes();
        body(&mut buf)?;
        self.write(name, &buf)
    }

    /// Pretty JSON object `{command, config, result}`.
    pub fn json<T: Serialize>(&self, name: &str, result: &T) -> CliResult<PathBuf> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            command: &'a str,
            config: serde_json::Value,
            result: &'a T,
        }
        let config: serde_json::Value =
            serde_json::from_str(&self.config_json).map_err(eesim_core::Error::from)?;
        let doc = Doc {
            command: self.command,
            config: config["config"].clone(),
            result,
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(eesim_core::Error::from)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        Ok(path)
    }
}

pub fn cell(x: impl Display) -> String {
    x.to_string()
}

pub fn opt_cell(x: Option<f64>) -> String {
    x.map(cell).unwrap_or_default()
}

pub fn reads(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(io_err(path))
}
