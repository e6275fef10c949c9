//! Run artifacts: inputs are digested when read, outputs are staged in
//! memory and only written once the whole command has succeeded.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gsanatomy::ingest::to_canonical_json;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub fn read_input(path: &Path) -> CliResult<(Vec<u8>, InputDigest)> {
    let bytes = fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let digest = InputDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len(),
    };
    Ok((bytes, digest))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub inputs: &'a [InputDigest],
    pub seed: u64,
    pub tool: &'static str,
    pub version: &'static str,
    pub outputs: Vec<OutputDigest>,
}

/// Files produced by one command, keyed by name inside the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        let name = name.into();
        debug_assert!(name != MANIFEST && !self.files.iter().any(|(n, _)| *n == name));
        self.files.push((name, bytes.into()));
    }

    pub fn add_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = to_canonical_json(value).map_err(|e| CliError::Internal(e.to_string()))?;
        self.add(name, text);
        Ok(())
    }

    /// Adds the manifest and writes everything to `dir`, each file through a
    /// temporary sibling and a rename.
    pub fn commit<C: Serialize>(
        mut self,
        dir: &Path,
        command: &str,
        config: &C,
        inputs: &[InputDigest],
        seed: u64,
    ) -> CliResult<Vec<PathBuf>> {
        self.files.sort_by(|a, b| a.0.cmp(&b.0));
        let manifest = RunManifest {
            command,
            config,
            inputs,
            seed,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            outputs: self
                .files
                .iter()
                .map(|(n, b)| OutputDigest {
                    path: n.clone(),
                    sha256: sha256_hex(b),
                })
                .collect(),
        };
        let text = to_canonical_json(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        self.files.push((MANIFEST.to_string(), text.into_bytes()));

        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|source| CliError::Write {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            write_atomic(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(err(e));
    }
    Ok(())
}
