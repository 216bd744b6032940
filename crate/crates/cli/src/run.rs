//! Per-invocation bookkeeping: input fingerprints, output files and the
//! run manifest written next to them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::Format;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize)]
pub struct FileFingerprint {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    /// Every flag after parsing, defaults included.
    pub flags: serde_json::Value,
    pub argv: Vec<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub inputs: Vec<FileFingerprint>,
    pub outputs: Vec<FileFingerprint>,
    pub started_at: String,
    pub finished_at: String,
    pub status: String,
    pub exit_code: i32,
}

pub struct Run {
    pub out_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    inputs: Vec<FileFingerprint>,
    outputs: Vec<FileFingerprint>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Run {
    pub fn new(out_dir: PathBuf, format: Format, seed: u64) -> CliResult<Self> {
        fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
        Ok(Self { out_dir, format, seed, inputs: Vec::new(), outputs: Vec::new() })
    }

    /// Reads an input file and records its content hash.
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileFingerprint { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> CliResult<String> {
        let bytes = self.read(path)?;
        String::from_utf8(bytes).map_err(|_| CliError::usage(format!("{} is not valid UTF-8", path.display())))
    }

    /// Writes `name` (relative to the output directory) and records its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(FileFingerprint { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(chaingraph::Error::from)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn into_manifest(self, header: ManifestHeader, status: String, exit_code: i32) -> (PathBuf, RunManifest) {
        let manifest = RunManifest {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: header.subcommand,
            flags: header.flags,
            argv: header.argv,
            seed: self.seed,
            threads: header.threads,
            inputs: self.inputs,
            outputs: self.outputs,
            started_at: header.started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
            status,
            exit_code,
        };
        (self.out_dir.join(MANIFEST_FILE), manifest)
    }
}

pub struct ManifestHeader {
    pub subcommand: String,
    pub flags: serde_json::Value,
    pub argv: Vec<String>,
    pub threads: Option<usize>,
    pub started_at: String,
}
