//! Authenticated dictionary of revoked serial numbers.
//!
//! A CA keeps its revocations as leaves `(serial, index)` of a hash tree
//! sorted by serial. The tree root, leaf count, and hash-chain anchor are
//! signed together; chain preimages released once per period `Δ` act as
//! freshness statements. An untrusted prover (the RA) answers membership
//! queries with proofs the client checks against the signed root.

mod dictionary;
mod digest;
mod serial;
mod signing;
mod status;
pub mod tree;

use thiserror::Error;

pub use dictionary::{update, Dictionary};
pub use digest::{chain_evaluate, hash, hash_parts, Digest, DIGEST_LEN};
pub use serial::{CaId, Leaf, SerialNumber, MAX_SERIAL_LEN};
pub use signing::{
    chain_distance, make_signed_root, period_of, refresh, CaPublicKey, CaSigningKey, FreshnessStatement,
    HashChainSecret, Refresh, SignedRoot, DEFAULT_CHAIN_LENGTH, MAX_CLOCK_SKEW, SIGNATURE_LEN, SIGNED_ROOT_LEN,
};
pub use status::{
    check_freshness, verify_status, InvalidReason, MembershipProof, ProofKind, RevocationStatus, Verdict,
    MAX_CHAIN_WALK,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DictError {
    #[error("serial {0} already revoked")]
    DuplicateSerial(SerialNumber),
    #[error("invalid serial number: {0}")]
    BadSerial(String),
    #[error("dictionary does not match the signed root")]
    DictRootMismatch,
    #[error("invalid dictionary storage: {0}")]
    BadStorage(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UpdateError {
    #[error("signed root has an invalid signature")]
    BadSignature,
    #[error("signed root is older than the replica's current root")]
    StaleTimestamp,
    #[error("signed root timestamp is in the future")]
    FutureTimestamp,
    #[error("rebuilt root differs from the signed root")]
    RootMismatch,
    #[error("leaf count mismatch: signed {expected}, rebuilt {got}")]
    CountMismatch { expected: u64, got: u64 },
    #[error("signed root belongs to another CA")]
    WrongCa,
    #[error("serial {0} already present in replica")]
    DuplicateSerial(SerialNumber),
}

impl UpdateError {
    /// Root or count mismatches mean the replica is out of sync (or the CA
    /// misbehaves); the sync client restarts from its confirmed count.
    pub fn is_desync(&self) -> bool {
        matches!(
            self,
            UpdateError::RootMismatch | UpdateError::CountMismatch { .. } | UpdateError::DuplicateSerial(_)
        )
    }
}
