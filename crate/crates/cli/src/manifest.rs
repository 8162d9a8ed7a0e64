//! Run manifests: the resolved config, input checksums, tool version and
//! output digests, so a run can be re-executed and verified.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL: &str = "maskprobe";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    /// File count under a directory input; 1 for a file.
    pub files: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a file, or of a directory as the sorted list of
/// `relative-path TAB file-digest` lines over its non-hidden files.
pub fn digest_input(role: &str, path: &Path) -> Result<InputDigest> {
    let meta =
        fs::metadata(path).with_context(|| format!("cannot read input {}", path.display()))?;
    if meta.is_file() {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        return Ok(InputDigest {
            role: role.to_string(),
            path: path.to_path_buf(),
            files: 1,
            sha256: sha256_hex(&bytes),
        });
    }
    let mut listing = String::new();
    let mut files = 0;
    let walker = WalkDir::new(path)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
    for entry in walker {
        let entry = entry.with_context(|| format!("cannot walk {}", path.display()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(path)
            .expect("walk stays under root");
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let bytes = fs::read(entry.path())
            .with_context(|| format!("cannot read {}", entry.path().display()))?;
        listing.push_str(&format!("{rel}\t{}\n", sha256_hex(&bytes)));
        files += 1;
    }
    Ok(InputDigest {
        role: role.to_string(),
        path: path.to_path_buf(),
        files,
        sha256: sha256_hex(listing.as_bytes()),
    })
}

/// Output directory that remembers what was written, in write order.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<OutputDigest>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    pub fn write(&mut self, file: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(file);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
        fs::write(&path, bytes.as_ref())
            .with_context(|| format!("cannot write {}", path.display()))?;
        self.record(file)?;
        Ok(path)
    }

    /// Records a file some library call wrote directly.
    pub fn record(&mut self, file: &str) -> Result<()> {
        let path = self.path(file);
        let bytes =
            fs::read(&path).with_context(|| format!("cannot read back {}", path.display()))?;
        self.written.retain(|o| o.file != file);
        self.written.push(OutputDigest {
            file: file.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn finish(mut self, config: RunConfig, inputs: Vec<InputDigest>) -> Result<Manifest> {
        self.written.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = Manifest {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs,
            outputs: self.written,
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(manifest)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read manifest {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("{} is not a maskprobe manifest", path.display()))
}

/// Differences between a recorded and a replayed set of outputs.
pub fn diff_outputs(recorded: &[OutputDigest], replayed: &[OutputDigest]) -> Vec<String> {
    let mut diffs = Vec::new();
    for r in recorded {
        match replayed.iter().find(|o| o.file == r.file) {
            None => diffs.push(format!("{}: not produced by the replay", r.file)),
            Some(o) if o.sha256 != r.sha256 => diffs.push(format!("{}: content differs", r.file)),
            Some(_) => {}
        }
    }
    for o in replayed {
        if !recorded.iter().any(|r| r.file == o.file) {
            diffs.push(format!("{}: not in the original run", o.file));
        }
    }
    diffs
}
