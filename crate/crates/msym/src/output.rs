//! Artifact files: CSV tables and the run manifest.
//!
//! Every file is written to a temporary sibling first and renamed into
//! place, so readers never observe a partially written artifact.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Renders a CSV table with a header row.
pub fn csv<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.as_ref().join(","));
        s.push('\n');
    }
    s
}

/// Hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `git describe` of the build, or `unknown`.
pub fn git_describe() -> &'static str {
    env!("MSYM_GIT_DESCRIBE")
}

/// Self-describing record of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<C: Serialize, S: Serialize> {
    /// Subcommand name.
    pub command: String,
    /// Fully resolved configuration.
    pub config: C,
    /// SHA-256 of the resolved configuration as JSON.
    pub config_sha256: String,
    /// Seed used.
    pub seed: u64,
    /// Build identification.
    pub git_describe: String,
    /// Wall-clock duration in seconds.
    pub wall_time_seconds: f64,
    /// Files written next to the manifest.
    pub outputs: Vec<String>,
    /// Command-specific results.
    pub summary: S,
}
