//! Run manifests: what was run, with which inputs, and what it produced.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: String,
    /// SHA-256 of the effective configuration as JSON.
    pub config_digest: Option<String>,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    /// Set when the command failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Bookkeeping for one command invocation. Outputs go through the `write_*`
/// helpers so they are recorded.
#[derive(Debug)]
pub struct Run {
    command: String,
    argv: Vec<String>,
    out: PathBuf,
    started_at: String,
    config_digest: Option<String>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(command: &str, argv: Vec<String>, out: &Path) -> CliResult<Self> {
        Ok(Self {
            command: command.to_string(),
            argv,
            out: out.to_path_buf(),
            started_at: now(),
            config_digest: None,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    /// Registers an input file; fails with a usage error naming the path if
    /// it does not exist.
    pub fn input(&mut self, path: &Path) -> CliResult<PathBuf> {
        if !path.exists() || path.is_dir() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
        Ok(path.to_path_buf())
    }

    pub fn config<T: Serialize>(&mut self, config: &T) {
        let json = serde_json::to_vec(config).expect("config serializes");
        self.config_digest = Some(sha256_hex(&json));
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Path of `name` under the output directory, parents created.
    pub fn output_path(&mut self, name: &str) -> CliResult<PathBuf> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        if !self.outputs.contains(&path) {
            self.outputs.push(path.clone());
        }
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = self.output_path(name)?;
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("output serializes");
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Line-delimited JSON writer, flushed after every record.
    pub fn json_lines(&mut self, name: &str) -> CliResult<JsonLines> {
        let path = self.output_path(name)?;
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(JsonLines {
            path,
            inner: BufWriter::new(file),
        })
    }

    pub fn finish(self, error: Option<String>) -> CliResult<()> {
        let artifacts = |paths: &[PathBuf]| -> CliResult<Vec<Artifact>> {
            paths
                .iter()
                .filter(|p| p.is_file())
                .map(|p| {
                    let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
                    Ok(Artifact {
                        path: p.clone(),
                        sha256: sha256_hex(&bytes),
                        bytes: bytes.len() as u64,
                    })
                })
                .collect()
        };
        let manifest = RunManifest {
            command: self.command.clone(),
            argv: self.argv.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: self.config_digest.clone(),
            seed: self.seed,
            started_at: self.started_at.clone(),
            finished_at: now(),
            inputs: artifacts(&self.inputs)?,
            outputs: artifacts(&self.outputs)?,
            error,
        };
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        let path = self.out.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

pub struct JsonLines {
    path: PathBuf,
    inner: BufWriter<fs::File>,
}

impl JsonLines {
    pub fn write<T: Serialize>(&mut self, value: &T) -> CliResult<()> {
        let line = serde_json::to_string(value).expect("record serializes");
        writeln!(self.inner, "{line}")
            .and_then(|_| self.inner.flush())
            .map_err(|e| CliError::io(&self.path, e))
    }
}
