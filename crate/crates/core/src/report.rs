//! Persisted experiment outputs: JSON envelopes, CSV tables, and collision-checked writes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// `git describe` of the source tree at build time, or `v<crate version>` outside a checkout.
pub const VERSION: &str = env!("HAARFLOW_VERSION");

/// Hex digest length used in output file names.
pub const HASH_PREFIX: usize = 12;

/// Common wrapper for every JSON report.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<C, R> {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: C,
    pub result: R,
}

impl<C: Serialize, R: Serialize> Envelope<C, R> {
    pub fn new(subcommand: &str, seed: u64, config: C, result: R) -> Result<Self> {
        Ok(Self {
            subcommand: subcommand.to_string(),
            version: VERSION.to_string(),
            seed,
            config_hash: config_hash(&config)?,
            config,
            result,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// SHA-256 of the compact JSON encoding of `config`, as lowercase hex.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// File stem `{subcommand}_{hash prefix}_seed{seed}`.
pub fn stem(subcommand: &str, hash: &str, seed: u64) -> String {
    format!("{subcommand}_{}_seed{seed}", &hash[..HASH_PREFIX.min(hash.len())])
}

/// Files queued for one run; nothing is written until every target is known to be free.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, String)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, path: PathBuf, contents: String) {
        self.files.push((path, contents));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Writes all files. Existing targets are an error unless `overwrite` is set.
    pub fn commit(self, overwrite: bool) -> Result<Vec<PathBuf>> {
        if !overwrite {
            if let Some(p) = self.paths().find(|p| p.exists()) {
                return Err(Error::Validation(format!(
                    "{} already exists; pass --overwrite to replace it",
                    p.display()
                )));
            }
        }
        let mut written = Vec::with_capacity(self.files.len());
        for (path, contents) in self.files {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, contents)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// CSV rows `m,distance,predicted,stderr`.
pub fn distance_csv(rows: &[(usize, f64, f64, f64)]) -> String {
    let mut out = String::from("m,distance,predicted,stderr\n");
    for (m, d, p, se) in rows {
        out.push_str(&format!("{m},{d},{p},{se}\n"));
    }
    out
}
