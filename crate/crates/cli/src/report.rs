//! The JSON report written next to every run's CSV tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Kind, Overrides};

pub const TOOL: &str = "rbsde-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Git-style content hash: sha256 of `blob <len>\0` followed by the bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// One pass/fail verdict with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Which implication of a two-sided statement is tested, if any.
    pub direction: Option<String>,
    pub passed: bool,
    pub metrics: Value,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, metrics: Value) -> Self {
        Self {
            name: name.into(),
            direction: None,
            passed,
            metrics,
        }
    }

    pub fn directed(mut self, direction: &str) -> Self {
        self.direction = Some(direction.to_string());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub monte_carlo: u64,
    pub apriori: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: Kind,
    pub config_hash: String,
    pub overrides: Overrides,
    /// The parsed configuration with every default filled in.
    pub config: ExperimentConfig,
    pub seeds: Seeds,
    /// Tolerances in force for this run, including derived ones.
    pub tolerances: Value,
    /// No checks were requested.
    pub exploratory: bool,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub results: Value,
    /// File names written next to the report.
    pub artifacts: Vec<String>,
}

/// Write `bytes` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&target).map_err(|e| e.error)?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_git_blob_id_scheme() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(
            config_hash(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", b"one").unwrap();
        let p = write_atomic(dir.path(), "a.txt", b"two").unwrap();
        assert_eq!(std::fs::read(p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
