//! Truncated SHA-256 and hash-chain evaluation.

use std::fmt;

use sha2::{Digest as _, Sha256};

/// Digest length in bytes. SHA-256 output is truncated to this prefix.
pub const DIGEST_LEN: usize = 20;

/// A 20-byte truncated SHA-256 value.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub const fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        let arr: [u8; DIGEST_LEN] = bytes.try_into().ok()?;
        Some(Digest(arr))
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

fn truncate(full: &[u8]) -> Digest {
    let mut out = [0u8; DIGEST_LEN];
    out.copy_from_slice(&full[..DIGEST_LEN]);
    Digest(out)
}

/// SHA-256 of `data`, truncated to the first 20 bytes.
pub fn hash(data: &[u8]) -> Digest {
    truncate(&Sha256::digest(data))
}

/// Hash the concatenation of several parts without allocating.
pub fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    truncate(&h.finalize())
}

/// Applies the hash `k` times: `H^k(seed)`, with `H^0(seed) = seed`.
pub fn chain_evaluate(seed: &Digest, k: u64) -> Digest {
    let mut cur = *seed;
    for _ in 0..k {
        cur = hash(&cur.0);
    }
    cur
}
