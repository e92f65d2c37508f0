//! Static CA registry: `ca_id_hex public_key_hex delta_seconds` per line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::authdict::{CaId, CaPublicKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CaEntry {
    pub key: CaPublicKey,
    pub delta: u64,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CaRegistry {
    entries: BTreeMap<CaId, CaEntry>,
}

impl CaRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: CaId, key: CaPublicKey, delta: u64) {
        self.entries.insert(id, CaEntry { key, delta });
    }

    pub fn get(&self, id: &CaId) -> Option<&CaEntry> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = CaId> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let mut reg = CaRegistry::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| RegistryError::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [id, key, delta] = fields[..] else {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            };
            let id: CaId = id.parse().map_err(|e| err(format!("ca id: {e}")))?;
            let key: CaPublicKey = key.parse().map_err(|e| err(format!("public key: {e}")))?;
            let delta: u64 = delta.parse().map_err(|e| err(format!("delta: {e}")))?;
            if delta == 0 {
                return Err(err("delta must be positive".into()));
            }
            reg.insert(id, key, delta);
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, e) in &self.entries {
            let _ = writeln!(out, "{} {} {}", id.to_hex(), e.key.to_hex(), e.delta);
        }
        out
    }
}
