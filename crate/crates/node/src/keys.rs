//! CA key files: one line per CA, `ca_id_hex seed_hex`. `#` starts a
//! comment.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use rand::RngCore;
use ritm_core::authdict::{CaId, CaSigningKey};
use ritm_core::registry::CaRegistry;

pub struct KeyFile {
    pub keys: Vec<(CaId, CaSigningKey)>,
}

impl KeyFile {
    pub fn generate<R: RngCore>(cas: usize, rng: &mut R) -> Self {
        let keys = (0..cas)
            .map(|i| {
                let mut seed = [0u8; 32];
                rng.fill_bytes(&mut seed);
                (CaId::from_u64(i as u64 + 1), CaSigningKey::from_seed(seed))
            })
            .collect();
        KeyFile { keys }
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut keys = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [id, seed] = fields[..] else {
                bail!("line {}: expected `ca_id_hex seed_hex`", i + 1)
            };
            let id: CaId = id.parse().map_err(|_| anyhow::anyhow!("line {}: bad CA id", i + 1))?;
            let seed: [u8; 32] = hex::decode(seed)
                .ok()
                .and_then(|b| b.try_into().ok())
                .with_context(|| format!("line {}: seed must be 32 bytes of hex", i + 1))?;
            keys.push((id, CaSigningKey::from_seed(seed)));
        }
        Ok(KeyFile { keys })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, k) in &self.keys {
            let _ = writeln!(out, "{} {}", id.to_hex(), hex::encode(k.to_seed()));
        }
        out
    }

    pub fn get(&self, id: &CaId) -> Option<&CaSigningKey> {
        self.keys.iter().find(|(i, _)| i == id).map(|(_, k)| k)
    }

    pub fn registry(&self, delta: u64) -> CaRegistry {
        let mut r = CaRegistry::new();
        for (id, k) in &self.keys {
            r.insert(*id, k.public(), delta);
        }
        r
    }
}
