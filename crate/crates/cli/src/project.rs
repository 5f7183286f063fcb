// SPDX-License-Identifier: Apache-2.0
//! Project directory: artifacts plus a manifest recording, for each one,
//! its content hash, the command that produced it, and the hashes of the
//! artifacts it was derived from.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use debugfabric_core::Error;

pub const MANIFEST: &str = "manifest.json";

pub const ARCH: &str = "arch.json";
pub const NETLIST: &str = "netlist.blif";
pub const PLACEMENT: &str = "placement.json";
pub const ROUTING: &str = "routing.json";
pub const MINW: &str = "minw.json";
pub const OVERLAY: &str = "overlay.json";
pub const OVERLAY_REPORT: &str = "overlay_report.json";
pub const TRIGGER_FABRIC: &str = "trigger_fabric.json";
pub const DEBUG_CONFIG: &str = "debug_config.json";
pub const TRIGGER_CONFIG: &str = "trigger_config.json";
pub const VERIFY_REPORT: &str = "verify_report.json";
pub const STATS: &str = "stats.json";
pub const TRIGGER_SPEEDUP: &str = "trigger_speedup.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub sha256: String,
    /// Arguments of the producing command, without the project directory.
    pub command: String,
    /// Input artifact → its hash when this one was produced.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, ArtifactRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with a trailing newline; the on-disk form of every artifact.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn invalid(msg: String) -> anyhow::Error {
    Error::Validation(msg).into()
}

/// One command's view of a project: inputs read so far are recorded so that
/// outputs can list what they were derived from.
pub struct Project {
    dir: PathBuf,
    manifest: Manifest,
    command: String,
    reads: BTreeMap<String, String>,
}

impl Project {
    pub fn open(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating project directory {}", dir.display()))?;
        let path = dir.join(MANIFEST);
        let manifest = if path.exists() {
            let text = fs::read_to_string(&path)?;
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
        } else {
            Manifest::default()
        };
        Ok(Project { dir: dir.to_path_buf(), manifest, command: command.to_string(), reads: BTreeMap::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn exists(&self, name: &str) -> bool {
        self.dir.join(name).exists()
    }

    /// Hash of an artifact as it is on disk now.
    pub fn current_hash(&self, name: &str) -> Option<String> {
        fs::read(self.dir.join(name)).ok().map(|b| sha256_hex(&b))
    }

    /// Why `name` cannot be trusted, if anything: edited after it was
    /// produced, or derived from inputs that have changed since.
    pub fn staleness(&self, name: &str) -> Option<String> {
        self.staleness_from(name, &mut BTreeSet::new())
    }

    /// Checks `name` and, transitively, everything it was derived from.
    fn staleness_from(&self, name: &str, seen: &mut BTreeSet<String>) -> Option<String> {
        if !seen.insert(name.to_string()) {
            return None;
        }
        let rec = self.manifest.artifacts.get(name)?;
        let now = self.current_hash(name)?;
        if now != rec.sha256 {
            return Some(format!("`{name}` was modified after `{}` produced it", rec.command));
        }
        for (input, h) in &rec.inputs {
            if self.current_hash(input).as_ref() != Some(h) {
                return Some(format!(
                    "`{name}` is stale: input `{input}` changed since `{}` produced it; re-run that command",
                    rec.command
                ));
            }
            if let Some(why) = self.staleness_from(input, seen) {
                return Some(format!("`{name}` is stale: {why}"));
            }
        }
        None
    }

    fn read_bytes(&mut self, name: &str) -> Result<Vec<u8>> {
        let path = self.dir.join(name);
        if !path.exists() {
            return Err(invalid(format!("missing input `{name}` in {}", self.dir.display())));
        }
        if let Some(why) = self.staleness(name) {
            return Err(invalid(why));
        }
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        self.reads.insert(name.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn read_text(&mut self, name: &str) -> Result<String> {
        String::from_utf8(self.read_bytes(name)?).map_err(|_| invalid(format!("`{name}` is not UTF-8")))
    }

    pub fn read_json<T: DeserializeOwned>(&mut self, name: &str) -> Result<T> {
        let bytes = self.read_bytes(name)?;
        serde_json::from_slice(&bytes).map_err(|e| invalid(format!("`{name}`: {e}")))
    }

    /// Reads a file from outside the project; recorded as an input by path.
    pub fn read_external(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        self.reads.insert(path.display().to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).map_err(|_| invalid(format!("{} is not UTF-8", path.display())))
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        let mut inputs = self.reads.clone();
        inputs.remove(name);
        let rec = ArtifactRecord { sha256: sha256_hex(text.as_bytes()), command: self.command.clone(), inputs };
        self.manifest.artifacts.insert(name.to_string(), rec);
        self.save_manifest()
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write_text(name, &to_json(value)?)
    }

    fn save_manifest(&self) -> Result<()> {
        fs::write(self.dir.join(MANIFEST), to_json(&self.manifest)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edits_and_upstream_changes_are_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let mut p = Project::open(tmp.path(), "gen a").unwrap();
        p.write_text("a.txt", "one").unwrap();
        let mut q = Project::open(tmp.path(), "derive b").unwrap();
        q.read_text("a.txt").unwrap();
        q.write_text("b.txt", "two").unwrap();
        let r = Project::open(tmp.path(), "check").unwrap();
        assert_eq!(r.staleness("b.txt"), None);
        assert_eq!(r.manifest().artifacts["b.txt"].inputs["a.txt"], sha256_hex(b"one"));

        fs::write(tmp.path().join("a.txt"), "changed").unwrap();
        let mut r = Project::open(tmp.path(), "check").unwrap();
        assert!(r.staleness("a.txt").unwrap().contains("modified"));
        assert!(r.staleness("b.txt").unwrap().contains("stale"));
        assert!(r.read_text("b.txt").is_err());
    }

    #[test]
    fn missing_input_is_a_validation_error() {
        let tmp = tempfile::tempdir().unwrap();
        let mut p = Project::open(tmp.path(), "x").unwrap();
        let e = p.read_text(NETLIST).unwrap_err();
        assert!(matches!(e.downcast_ref::<Error>(), Some(Error::Validation(_))));
    }
}
