//! Result files: JSON summaries and CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;

/// Collects the files a command writes and emits the summary last.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    /// Writes a headed CSV table.
    pub fn table<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        fs::write(self.path(name), text + "\n")?;
        Ok(())
    }

    /// Writes `summary.json` and returns its contents.
    pub fn finish<C: Serialize, R: Serialize>(mut self, command: &str, seed: u64, config: &C, result: &R) -> Result<Value> {
        let mut artifacts = self.written.clone();
        artifacts.push("summary.json".into());
        let summary = json!({
            "command": command,
            "tass_version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "config": config,
            "result": result,
            "artifacts": artifacts,
        });
        let path = self.path("summary.json");
        fs::write(path, serde_json::to_string_pretty(&summary)? + "\n")?;
        Ok(summary)
    }
}

/// Shortest round-trip text for a float.
pub fn num(v: f64) -> String {
    v.to_string()
}
