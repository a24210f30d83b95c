//! Output-directory manifest: inputs, config hash, and a git-style content
//! hash per artifact (sha256 over `blob <len>\0<bytes>`).

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn blob_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write `manifest.txt` into `out_dir`, listing the given inputs, the config
/// hash, and a content hash for every file currently in the directory.
pub fn write_manifest(
    out_dir: &Path,
    inputs: &[(String, String)],
    config_text: &str,
) -> Result<PathBuf> {
    let mut entries: Vec<(String, String)> = Vec::new();
    let mut names: Vec<PathBuf> = fs::read_dir(out_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != "manifest.txt"))
        .collect();
    names.sort();
    for path in names {
        let bytes = fs::read(&path)?;
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        entries.push((name, blob_hash(&bytes)));
    }

    let mut body = String::new();
    body.push_str(&format!("config_hash={}\n", blob_hash(config_text.as_bytes())));
    for (k, v) in inputs {
        body.push_str(&format!("input {k}={v}\n"));
    }
    for (name, hash) in &entries {
        body.push_str(&format!("artifact {hash} {name}\n"));
    }
    let path = out_dir.join("manifest.txt");
    fs::write(&path, body)?;
    Ok(path)
}
