use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hinsim::ErrorKind;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub tag: String,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Usage, tag: "usage".into(), message: message.into() }
    }

    pub fn numeric(tag: &str, message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Numeric, tag: tag.into(), message: message.into() }
    }

    pub fn to_json(&self) -> String {
        let kind = match self.kind {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
        };
        json!({ "error": self.tag, "kind": kind, "message": self.message }).to_string()
    }
}

impl From<hinsim::Error> for CliError {
    fn from(e: hinsim::Error) -> Self {
        CliError { kind: e.kind(), tag: e.tag().into(), message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        hinsim::Error::from(e).into()
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Output directory of one command run; tracks written files for the
/// manifest.
pub struct OutDir {
    pub root: PathBuf,
    written: Vec<PathBuf>,
    started: Instant,
}

impl OutDir {
    /// Refuses a non-empty existing directory unless `force`.
    pub fn prepare(root: &Path, force: bool) -> CliResult<Self> {
        if root.is_file() {
            return Err(CliError::usage(format!("{} is a file, expected a directory", root.display())));
        }
        if root.is_dir() && !force {
            let occupied = fs::read_dir(root).map_err(|e| hinsim::Error::io(root, e))?.next().is_some();
            if occupied {
                return Err(CliError::usage(format!(
                    "{} already exists and is not empty; pass --force to overwrite",
                    root.display()
                )));
            }
        }
        fs::create_dir_all(root).map_err(|e| hinsim::Error::io(root, e))?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new(), started: Instant::now() })
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn record(&mut self, path: impl Into<PathBuf>) {
        self.written.push(path.into());
    }

    pub fn write(&mut self, rel: impl AsRef<Path>, body: &str) -> CliResult<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| hinsim::Error::io(parent, e))?;
        }
        fs::write(&path, body).map_err(|e| hinsim::Error::io(&path, e))?;
        self.record(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, &text)
    }

    /// `manifest.json`: command, full config, version, argv, outputs and
    /// wall-clock.
    pub fn finish(mut self, command: &str, config: Value, extra: Value) -> CliResult<()> {
        let outputs: Vec<String> = self
            .written
            .iter()
            .map(|p| p.strip_prefix(&self.root).unwrap_or(p).display().to_string())
            .collect();
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "argv": std::env::args().collect::<Vec<_>>(),
            "config": config,
            "outputs": outputs,
            "results": extra,
            "timings": { "total_seconds": self.started.elapsed().as_secs_f64() },
        });
        self.write_json("manifest.json", &manifest)?;
        log::info!("{command}: wrote {} files under {}", self.written.len(), self.root.display());
        Ok(())
    }
}
