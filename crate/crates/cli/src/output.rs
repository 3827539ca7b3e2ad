//! Output files. Every file records the hash of the config that produced it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};

use crate::config::ExperimentConfig;

pub struct Output {
    pub dir: PathBuf,
    pub hash: String,
    quiet: bool,
}

impl Output {
    pub fn new(cfg: &ExperimentConfig, quiet: bool) -> Result<Self> {
        let mut hashed = cfg.clone();
        // the output location does not change any result
        hashed.out = PathBuf::new();
        Ok(Output {
            dir: cfg.out.clone(),
            hash: hashed.hash(),
            quiet,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, body: &str) -> Result<()> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.path(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes `payload` (an object) with a `config_hash` entry added.
    pub fn json(&self, name: &str, payload: Value) -> Result<()> {
        let mut doc = Map::new();
        doc.insert("config_hash".into(), Value::String(self.hash.clone()));
        match payload {
            Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("data".into(), other);
            }
        }
        self.write(name, &(serde_json::to_string_pretty(&Value::Object(doc))? + "\n"))
    }

    /// CSV preceded by a `# config_hash=` comment line.
    pub fn csv(&self, name: &str, body: &str) -> Result<()> {
        self.write(name, &format!("# config_hash={}\n{body}", self.hash))
    }

    /// Text whose records already carry the hash.
    pub fn text(&self, name: &str, body: &str) -> Result<()> {
        self.write(name, body)
    }

    /// Reads `key` from a file written by [`Output::json`], refusing files
    /// produced by a different config.
    pub fn read_json(&self, path: &Path, key: &str) -> Result<Value> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let hash = doc.get("config_hash").and_then(Value::as_str).unwrap_or_default();
        if hash != self.hash {
            bail!(
                "{} was produced by config {} but the current config hashes to {}",
                path.display(),
                if hash.is_empty() { "<unknown>" } else { hash },
                self.hash
            );
        }
        doc.get_mut(key)
            .map(Value::take)
            .with_context(|| format!("{} has no `{key}` entry", path.display()))
    }

    pub fn say(&self, msg: String) {
        if !self.quiet {
            println!("{msg}");
        }
    }
}
