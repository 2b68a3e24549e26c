//! Run manifests: which command ran, on which input bytes, with which
//! parameters. A manifest plus the referenced input files is enough to
//! reproduce a run byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const OUT_ROOT_ENV: &str = "IUN_OUT_ROOT";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input: InputRef,
    pub params: serde_json::Value,
    pub seeds: Vec<u64>,
    pub output_dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputRef {
    pub path: String,
    /// File name -> SHA-256 of its bytes.
    pub sha256: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(64);
    for byte in Sha256::digest(bytes) {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Input reference for a single-file input such as a scenario document.
pub fn file_input(path: &Path) -> Result<InputRef> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(InputRef {
        path: path.display().to_string(),
        sha256: BTreeMap::from([(name, sha256_hex(&bytes))]),
    })
}

/// Input reference for a graph directory holding nodes.csv and edges.csv.
pub fn graph_dir_input(dir: &Path) -> Result<InputRef> {
    let mut sha256 = BTreeMap::new();
    for name in ["nodes.csv", "edges.csv"] {
        let file = dir.join(name);
        let bytes = fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
        sha256.insert(name.to_string(), sha256_hex(&bytes));
    }
    Ok(InputRef {
        path: dir.display().to_string(),
        sha256,
    })
}

/// Confirms the referenced inputs still hash to what the manifest recorded.
pub fn verify_input(input: &InputRef) -> Result<()> {
    let base = PathBuf::from(&input.path);
    for (name, want) in &input.sha256 {
        let file = if base.is_dir() { base.join(name) } else { base.clone() };
        let bytes = fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
        let got = sha256_hex(&bytes);
        if got != *want {
            bail!(
                "input {} changed since the recorded run (sha256 {got}, manifest has {want})",
                file.display()
            );
        }
    }
    Ok(())
}

pub fn resolve_out(explicit: Option<PathBuf>, command: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        std::env::var_os(OUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(command)
    })
}

pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.join(MANIFEST_FILE).exists() && !force {
        bail!(
            "{} already holds a recorded run; pass --force to overwrite",
            dir.display()
        );
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    let file = dir.join(MANIFEST_FILE);
    fs::write(&file, text + "\n").with_context(|| format!("writing {}", file.display()))
}

pub fn read(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
