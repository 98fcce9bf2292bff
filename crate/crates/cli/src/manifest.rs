//! Digest record of every pipeline unit, used to skip up-to-date work.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    /// Keyed by unit name, e.g. `ablate/umbc/mcrae/colour/sentence`.
    pub units: BTreeMap<String, UnitRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    /// Digest of the unit's parameters (seeds, hyperparameters).
    pub params: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// A unit whose inputs have been digested, ready to run or skip.
#[derive(Debug, Clone)]
pub struct PendingUnit {
    pub key: String,
    pub fresh: bool,
    record: UnitRecord,
}

pub fn digest_file(path: &Path) -> Result<String> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    io::copy(&mut BufReader::with_capacity(1 << 16, file), &mut h)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(h.finalize()))
}

pub fn digest_value<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("parameters serialise");
    hex::encode(Sha256::digest(&json))
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            units: BTreeMap::new(),
        }
    }

    /// Loads `dir/manifest.json`, starting fresh when absent or when written
    /// by another tool version.
    pub fn load_or_new(dir: &Path, config_hash: String) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::new(config_hash));
        }
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut m: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.tool_version != env!("CARGO_PKG_VERSION") {
            log::info!("manifest from version {}; rebuilding", m.tool_version);
            return Ok(Self::new(config_hash));
        }
        m.config_hash = config_hash;
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&tmp, text + "\n").with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &path).with_context(|| format!("replacing {}", path.display()))
    }

    /// Digests `inputs` and reports whether the recorded run of `key` used the
    /// same params and inputs and its outputs are still intact.
    pub fn prepare<P: Serialize>(&self, root: &Path, key: &str, params: &P, inputs: &[PathBuf]) -> Result<PendingUnit> {
        let mut record = UnitRecord {
            params: digest_value(params),
            ..UnitRecord::default()
        };
        for p in inputs {
            record.inputs.insert(display(root, p), digest_file(p)?);
        }
        let fresh = match self.units.get(key) {
            Some(old) if old.params == record.params && old.inputs == record.inputs => old
                .outputs
                .iter()
                .all(|(p, d)| digest_file(&root.join(p)).is_ok_and(|now| &now == d)),
            _ => false,
        };
        Ok(PendingUnit {
            key: key.to_string(),
            fresh,
            record,
        })
    }

    /// Records a completed unit with the digests of its outputs.
    pub fn commit(&mut self, root: &Path, mut unit: PendingUnit, outputs: &[PathBuf]) -> Result<()> {
        for p in outputs {
            unit.record.outputs.insert(display(root, p), digest_file(p)?);
        }
        self.units.insert(unit.key, unit.record);
        Ok(())
    }

    pub fn output_digest(&self, key: &str, path: &str) -> Option<&str> {
        self.units.get(key)?.outputs.get(path).map(String::as_str)
    }
}

/// Paths under `root` are recorded relative to it, so an output directory can
/// be moved without invalidating the manifest.
fn display(root: &Path, p: &Path) -> String {
    match p.strip_prefix(root) {
        Ok(rel) => rel.to_string_lossy().replace('\\', "/"),
        Err(_) => p.to_string_lossy().into_owned(),
    }
}
