//! Output directory handling: every file written is recorded in the manifest.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::RunConfig;

pub struct ReportDir {
    root: PathBuf,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    files: &'a [String],
}

impl ReportDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(value).with_context(|| format!("serializing {name}"))?;
        self.write(name, &text)
    }

    /// Writes `manifest.json`: command, crate version, seed, resolved
    /// configuration and the files produced.
    pub fn finish(mut self, command: &str, config: &RunConfig) -> anyhow::Result<PathBuf> {
        self.files.push("manifest.json".into());
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config,
            files: &self.files,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self.root)
    }
}
