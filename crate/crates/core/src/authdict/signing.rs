//! CA keys, signed roots, and hash-chain freshness statements.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};

use super::digest::{chain_evaluate, hash, Digest, DIGEST_LEN};
use super::dictionary::Dictionary;
use super::serial::CaId;

pub const SIGNATURE_LEN: usize = 64;
pub const SIGNED_ROOT_LEN: usize = 8 + DIGEST_LEN + 8 + DIGEST_LEN + 8 + SIGNATURE_LEN;
const SIGNED_PART_LEN: usize = SIGNED_ROOT_LEN - SIGNATURE_LEN;

/// Default hash-chain length: one day of one-second periods.
pub const DEFAULT_CHAIN_LENGTH: u64 = 86_400;

/// Tolerated clock skew, in seconds, for timestamps ahead of the verifier.
pub const MAX_CLOCK_SKEW: u64 = 60;

/// Ed25519 signing key held by a CA.
#[derive(Clone)]
pub struct CaSigningKey(SigningKey);

impl CaSigningKey {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        CaSigningKey(SigningKey::generate(rng))
    }

    pub fn from_seed(seed: [u8; 32]) -> Self {
        CaSigningKey(SigningKey::from_bytes(&seed))
    }

    pub fn to_seed(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn public(&self) -> CaPublicKey {
        CaPublicKey(self.0.verifying_key())
    }

    pub fn sign(&self, msg: &[u8]) -> [u8; SIGNATURE_LEN] {
        self.0.sign(msg).to_bytes()
    }
}

impl fmt::Debug for CaSigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CaSigningKey({})", self.public().to_hex())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct CaPublicKey(VerifyingKey);

impl CaPublicKey {
    pub fn from_bytes(bytes: &[u8; 32]) -> Option<Self> {
        VerifyingKey::from_bytes(bytes).ok().map(CaPublicKey)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn verify(&self, msg: &[u8], sig: &[u8; SIGNATURE_LEN]) -> bool {
        let sig = Signature::from_bytes(sig);
        self.0.verify_strict(msg, &sig).is_ok()
    }
}

impl fmt::Debug for CaPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CaPublicKey({})", self.to_hex())
    }
}

impl FromStr for CaPublicKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s.trim(), &mut out).map_err(|e| e.to_string())?;
        CaPublicKey::from_bytes(&out).ok_or_else(|| "not a valid ed25519 point".to_string())
    }
}

/// CA commitment `{root, n, H^m(v), time}` under the CA key.
#[derive(Clone, PartialEq, Eq)]
pub struct SignedRoot {
    pub ca_id: CaId,
    pub root: Digest,
    pub n: u64,
    pub anchor: Digest,
    pub timestamp: u64,
    pub signature: [u8; SIGNATURE_LEN],
}

impl fmt::Debug for SignedRoot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignedRoot")
            .field("ca_id", &self.ca_id)
            .field("root", &self.root)
            .field("n", &self.n)
            .field("anchor", &self.anchor)
            .field("timestamp", &self.timestamp)
            .finish_non_exhaustive()
    }
}

impl SignedRoot {
    fn signed_part(ca_id: &CaId, root: &Digest, n: u64, anchor: &Digest, timestamp: u64) -> [u8; SIGNED_PART_LEN] {
        let mut out = [0u8; SIGNED_PART_LEN];
        out[0..8].copy_from_slice(&ca_id.0);
        out[8..28].copy_from_slice(&root.0);
        out[28..36].copy_from_slice(&n.to_be_bytes());
        out[36..56].copy_from_slice(&anchor.0);
        out[56..64].copy_from_slice(&timestamp.to_be_bytes());
        out
    }

    pub fn sign(key: &CaSigningKey, ca_id: CaId, root: Digest, n: u64, anchor: Digest, timestamp: u64) -> Self {
        let msg = Self::signed_part(&ca_id, &root, n, &anchor, timestamp);
        SignedRoot {
            ca_id,
            root,
            n,
            anchor,
            timestamp,
            signature: key.sign(&msg),
        }
    }

    pub fn verify(&self, key: &CaPublicKey) -> bool {
        let msg = Self::signed_part(&self.ca_id, &self.root, self.n, &self.anchor, self.timestamp);
        key.verify(&msg, &self.signature)
    }

    /// `ca_id(8) ‖ root(20) ‖ n(8) ‖ anchor(20) ‖ timestamp(8) ‖ signature(64)`
    pub fn to_bytes(&self) -> [u8; SIGNED_ROOT_LEN] {
        let mut out = [0u8; SIGNED_ROOT_LEN];
        out[..SIGNED_PART_LEN].copy_from_slice(&Self::signed_part(
            &self.ca_id,
            &self.root,
            self.n,
            &self.anchor,
            self.timestamp,
        ));
        out[SIGNED_PART_LEN..].copy_from_slice(&self.signature);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Option<Self> {
        if buf.len() != SIGNED_ROOT_LEN {
            return None;
        }
        let u64_at = |i: usize| u64::from_be_bytes(buf[i..i + 8].try_into().unwrap());
        Some(SignedRoot {
            ca_id: CaId(buf[0..8].try_into().unwrap()),
            root: Digest::from_slice(&buf[8..28])?,
            n: u64_at(28),
            anchor: Digest::from_slice(&buf[36..56])?,
            timestamp: u64_at(56),
            signature: buf[64..].try_into().unwrap(),
        })
    }

    /// Same dictionary content (root and size), regardless of chain anchor.
    pub fn same_content(&self, other: &SignedRoot) -> bool {
        self.ca_id == other.ca_id && self.n == other.n && self.root == other.root
    }
}

/// CA-private hash-chain seed behind one signed root.
#[derive(Clone, Debug)]
pub struct HashChainSecret {
    pub seed: Digest,
    pub length: u64,
    pub anchored_at: u64,
}

impl HashChainSecret {
    pub fn anchor(&self) -> Digest {
        chain_evaluate(&self.seed, self.length)
    }
}

/// `H^{m-p}(v)`: proof that the CA re-attested its dictionary in period `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreshnessStatement {
    pub value: Digest,
}

impl FreshnessStatement {
    pub const LEN: usize = DIGEST_LEN;

    pub fn to_bytes(&self) -> [u8; DIGEST_LEN] {
        self.value.0
    }

    pub fn from_bytes(buf: &[u8]) -> Option<Self> {
        Digest::from_slice(buf).map(|value| FreshnessStatement { value })
    }
}

/// Signs the dictionary's current root with a fresh hash chain.
pub fn make_signed_root<R: RngCore + CryptoRng>(
    key: &CaSigningKey,
    dict: &Dictionary,
    now: u64,
    chain_length: u64,
    rng: &mut R,
) -> (SignedRoot, HashChainSecret) {
    assert!(chain_length >= 1, "chain length must be at least 1");
    let mut raw = [0u8; 32];
    rng.fill_bytes(&mut raw);
    let secret = HashChainSecret {
        seed: hash(&raw),
        length: chain_length,
        anchored_at: now,
    };
    let sr = SignedRoot::sign(key, dict.ca_id(), dict.root(), dict.len(), secret.anchor(), now);
    (sr, secret)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Refresh {
    Statement(FreshnessStatement),
    /// `p ≥ m`: the chain is exhausted and a new signed root is required.
    NeedNewRoot,
}

/// Period index of `now` relative to a signed root issued at `timestamp`.
pub fn period_of(timestamp: u64, now: u64, delta: u64) -> u64 {
    now.saturating_sub(timestamp) / delta
}

/// Returns `H^{m-p}(v)` for the current period `p`.
pub fn refresh(secret: &HashChainSecret, sr: &SignedRoot, now: u64, delta: u64) -> Refresh {
    let p = period_of(sr.timestamp, now, delta);
    if p >= secret.length {
        return Refresh::NeedNewRoot;
    }
    Refresh::Statement(FreshnessStatement {
        value: chain_evaluate(&secret.seed, secret.length - p),
    })
}

/// Number of hash applications that take `value` to `anchor`, searching at
/// most `max_steps`.
pub fn chain_distance(value: &Digest, anchor: &Digest, max_steps: u64) -> Option<u64> {
    let mut cur = *value;
    for k in 0..=max_steps {
        if &cur == anchor {
            return Some(k);
        }
        if k < max_steps {
            cur = hash(&cur.0);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (CaSigningKey, Dictionary, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let key = CaSigningKey::generate(&mut rng);
        let dict = Dictionary::new(CaId::from_u64(1));
        (key, dict, rng)
    }

    #[test]
    fn signed_root_verifies_and_round_trips() {
        let (key, dict, mut rng) = setup();
        let (sr, secret) = make_signed_root(&key, &dict, 1000, 16, &mut rng);
        assert!(sr.verify(&key.public()));
        assert_eq!(sr.anchor, chain_evaluate(&secret.seed, 16));
        let bytes = sr.to_bytes();
        assert_eq!(bytes.len(), 128);
        assert_eq!(SignedRoot::from_bytes(&bytes).unwrap(), sr);
        let other = CaSigningKey::generate(&mut rng);
        assert!(!sr.verify(&other.public()));
    }

    #[test]
    fn fresh_anchor_each_call() {
        let (key, dict, mut rng) = setup();
        let (a, _) = make_signed_root(&key, &dict, 1000, 16, &mut rng);
        let (b, _) = make_signed_root(&key, &dict, 1000, 16, &mut rng);
        assert_eq!((a.root, a.n), (b.root, b.n));
        assert_ne!(a.anchor, b.anchor);
    }

    #[test]
    fn refresh_periods() {
        let (key, dict, mut rng) = setup();
        let delta = 10;
        let (sr, secret) = make_signed_root(&key, &dict, 1000, 5, &mut rng);
        assert_eq!(
            refresh(&secret, &sr, 1000, delta),
            Refresh::Statement(FreshnessStatement { value: sr.anchor })
        );
        let Refresh::Statement(fs1) = refresh(&secret, &sr, 1000 + delta, delta) else {
            panic!("expected statement")
        };
        assert_eq!(fs1.value, chain_evaluate(&secret.seed, 4));
        assert_eq!(hash(&fs1.value.0), sr.anchor);
        assert_eq!(refresh(&secret, &sr, 1000 + 5 * delta, delta), Refresh::NeedNewRoot);
        assert!(matches!(refresh(&secret, &sr, 1000 + 5 * delta - 1, delta), Refresh::Statement(_)));
    }

    #[test]
    fn chain_distance_finds_period() {
        let seed = hash(b"v");
        let anchor = chain_evaluate(&seed, 9);
        assert_eq!(chain_distance(&chain_evaluate(&seed, 6), &anchor, 9), Some(3));
        assert_eq!(chain_distance(&anchor, &anchor, 0), Some(0));
        assert_eq!(chain_distance(&seed, &anchor, 8), None);
    }
}
