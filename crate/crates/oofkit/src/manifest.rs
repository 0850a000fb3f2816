//! Run manifests and all-or-nothing output staging.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats::write_json;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest { path: path.display().to_string(), sha256: sha256_file(path)? })
}

/// Config snapshot plus input and output digests of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest(path)?);
        Ok(())
    }

    /// Records `staged`'s digest under its final name `target`.
    pub fn output(&mut self, staged: &Path, target: &Path) -> Result<()> {
        self.outputs.push(FileDigest { path: target.display().to_string(), sha256: sha256_file(staged)? });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// `<file>.manifest.json` next to a file output.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Output files written under temporary names and renamed into place only
/// by [`Staging::commit`]; dropped stagings delete their temporaries.
#[derive(Default)]
pub struct Staging {
    pending: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl Staging {
    pub fn new() -> Self {
        Self::default()
    }

    /// Temporary path to write instead of `target`.
    pub fn file(&mut self, target: &Path) -> Result<PathBuf> {
        if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(Error::io(parent))?;
        }
        let mut name = target.file_name().ok_or_else(|| Error::Usage(format!("bad output path {}", target.display())))?.to_os_string();
        name.push(format!(".partial-{}", std::process::id()));
        let tmp = target.with_file_name(name);
        self.pending.push((tmp.clone(), target.to_path_buf()));
        Ok(tmp)
    }

    /// Temporary directory standing in for `target`, which must not exist
    /// or be empty.
    pub fn dir(&mut self, target: &Path) -> Result<PathBuf> {
        if target.exists() && std::fs::read_dir(target).map_err(Error::io(target))?.next().is_some() {
            return Err(Error::Usage(format!("output directory is not empty: {}", target.display())));
        }
        let tmp = self.file(target)?;
        std::fs::create_dir_all(&tmp).map_err(Error::io(&tmp))?;
        Ok(tmp)
    }

    pub fn commit(mut self) -> Result<()> {
        for (tmp, target) in &self.pending {
            if target.is_dir() {
                std::fs::remove_dir(target).map_err(Error::io(target))?;
            }
            std::fs::rename(tmp, target).map_err(Error::io(target))?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for (tmp, _) in &self.pending {
            if tmp.is_dir() {
                let _ = std::fs::remove_dir_all(tmp);
            } else {
                let _ = std::fs::remove_file(tmp);
            }
        }
    }
}
