use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARMA_BUILD_VERSION");

/// Where an experiment leaves its artifacts.
pub struct Sink {
    dir: PathBuf,
    header: Vec<String>,
    meta: Value,
}

impl Sink {
    pub fn new(dir: &Path, config: &ExperimentConfig) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let echo = serde_json::to_string(&echoed(config)).expect("config serializes");
        Ok(Sink {
            dir: dir.to_path_buf(),
            header: vec![
                format!("# carma {VERSION}"),
                format!("# seed {}", config.seed),
                format!("# config {echo}"),
            ],
            meta: metadata(config),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV file with the metadata header; `body` writes the column header and rows.
    pub fn csv(
        &self,
        name: &str,
        extra: &[String],
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> CliResult<PathBuf> {
        let path = self.path(name);
        let io = |e| CliError::io(&path, e);
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        for line in self.header.iter().chain(extra) {
            writeln!(w, "{line}").map_err(io)?;
        }
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        Ok(path)
    }

    pub fn json(&self, name: &str, result: &impl Serialize) -> CliResult<PathBuf> {
        let path = self.path(name);
        let doc = envelope(&self.meta, result);
        let text = serde_json::to_string_pretty(&doc).expect("result serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

pub fn metadata(config: &ExperimentConfig) -> Value {
    json!({
        "version": VERSION,
        "seed": config.seed,
        "config": echoed(config),
    })
}

/// The config as recorded in artifacts; the output location is not part of the experiment.
fn echoed(config: &ExperimentConfig) -> ExperimentConfig {
    let mut c = config.clone();
    c.out = None;
    c
}

pub fn envelope(meta: &Value, result: &impl Serialize) -> Value {
    json!({ "meta": meta, "result": result })
}
