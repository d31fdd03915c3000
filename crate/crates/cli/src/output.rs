//! Output directory bookkeeping and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use planar_flow::Warning;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::svg::{render_svg, Item, Style};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy)]
pub struct Emit {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

/// Files written so far, in write order.
pub struct Output {
    dir: PathBuf,
    emit: Emit,
    files: Vec<FileEntry>,
}

impl Output {
    pub fn create(dir: &Path, emit: Emit) -> Result<Output, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            emit,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        if !self.emit.csv {
            return Ok(());
        }
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &buf)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        if !self.emit.json {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn svg(&mut self, name: &str, items: &[Item], style: &Style) -> Result<(), CliError> {
        if !self.emit.svg {
            return Ok(());
        }
        let doc = render_svg(items, None, style)?;
        self.write(name, doc.as_bytes())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub config: std::collections::BTreeMap<String, std::collections::BTreeMap<String, String>>,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub files: Vec<FileEntry>,
    pub warnings: Vec<Warning>,
    /// Headline numbers of the run.
    pub summary: serde_json::Value,
}

pub const MANIFEST: &str = "manifest.json";

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        let path = dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
    }
}
