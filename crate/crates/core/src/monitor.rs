//! Cross-party root comparison, equivocation proofs and history audits.

use thiserror::Error;

use crate::authdict::{CaId, CaPublicKey, Dictionary, SignedRoot, SIGNED_ROOT_LEN};
use crate::dissemination::IssuanceMessage;

/// Two validly signed roots of one CA with equal size and different
/// content.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MisbehaviorProof {
    pub ca_id: CaId,
    pub root_a: SignedRoot,
    pub root_b: SignedRoot,
}

impl MisbehaviorProof {
    pub const LEN: usize = 2 * SIGNED_ROOT_LEN;

    /// `SignedRoot_a ‖ SignedRoot_b`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.extend_from_slice(&self.root_a.to_bytes());
        out.extend_from_slice(&self.root_b.to_bytes());
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Option<Self> {
        if buf.len() != Self::LEN {
            return None;
        }
        let root_a = SignedRoot::from_bytes(&buf[..SIGNED_ROOT_LEN])?;
        let root_b = SignedRoot::from_bytes(&buf[SIGNED_ROOT_LEN..])?;
        Some(MisbehaviorProof {
            ca_id: root_a.ca_id,
            root_a,
            root_b,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Comparison {
    Consistent,
    /// Different sizes; an append-only dictionary legitimately grows.
    Incomparable,
    Misbehavior(MisbehaviorProof),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    A,
    B,
    Both,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("forged signed root ({0:?})")]
    BadSignature(Which),
    #[error("roots belong to different CAs")]
    CaMismatch,
}

pub fn compare_roots(a: &SignedRoot, b: &SignedRoot, key: &CaPublicKey) -> Result<Comparison, CompareError> {
    if a.ca_id != b.ca_id {
        return Err(CompareError::CaMismatch);
    }
    match (a.verify(key), b.verify(key)) {
        (true, true) => {}
        (false, true) => return Err(CompareError::BadSignature(Which::A)),
        (true, false) => return Err(CompareError::BadSignature(Which::B)),
        (false, false) => return Err(CompareError::BadSignature(Which::Both)),
    }
    if a.n != b.n {
        return Ok(Comparison::Incomparable);
    }
    if a.root == b.root {
        return Ok(Comparison::Consistent);
    }
    Ok(Comparison::Misbehavior(MisbehaviorProof {
        ca_id: a.ca_id,
        root_a: a.clone(),
        root_b: b.clone(),
    }))
}

/// Checks a proof using nothing but its bytes and the CA key.
pub fn verify_misbehavior(proof: &MisbehaviorProof, key: &CaPublicKey) -> bool {
    let (a, b) = (&proof.root_a, &proof.root_b);
    a.ca_id == proof.ca_id
        && b.ca_id == proof.ca_id
        && a.n == b.n
        && a.root != b.root
        && a.verify(key)
        && b.verify(key)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuditFailure {
    BadSignature,
    WrongCa,
    DuplicateSerial,
    /// Replayed size differs from the signed size.
    CountMismatch,
    RootMismatch,
    /// Timestamps must increase from one signed root to the next.
    Regression,
    /// The final replayed root is not the claimed one.
    FinalMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuditOutcome {
    Pass,
    /// First failing message (index into the history; the history length
    /// for the final comparison).
    Fail { at: usize, reason: AuditFailure },
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum AuditError {
    #[error("history ends at {have} revocations, claimed root covers {claimed}")]
    HistoryGap { have: u64, claimed: u64 },
}

/// Rebuilds a CA's dictionary from its full issuance history and checks
/// every intermediate signed root along the way.
pub fn audit_replay(
    history: &[IssuanceMessage],
    claimed: &SignedRoot,
    key: &CaPublicKey,
) -> Result<AuditOutcome, AuditError> {
    let ca = claimed.ca_id;
    let mut dict = Dictionary::new(ca);
    let mut last_ts: Option<u64> = None;
    let fail = |at, reason| Ok(AuditOutcome::Fail { at, reason });
    for (i, msg) in history.iter().enumerate() {
        let sr = &msg.signed_root;
        if msg.ca_id != ca || sr.ca_id != ca {
            return fail(i, AuditFailure::WrongCa);
        }
        if !sr.verify(key) {
            return fail(i, AuditFailure::BadSignature);
        }
        if last_ts.is_some_and(|t| sr.timestamp <= t) {
            return fail(i, AuditFailure::Regression);
        }
        last_ts = Some(sr.timestamp);
        if !msg.serials.is_empty() {
            dict = match dict.insert(&msg.serials) {
                Ok(d) => d,
                Err(_) => return fail(i, AuditFailure::DuplicateSerial),
            };
        }
        if dict.len() != sr.n {
            return fail(i, AuditFailure::CountMismatch);
        }
        if dict.root() != sr.root {
            return fail(i, AuditFailure::RootMismatch);
        }
    }
    if dict.len() < claimed.n {
        return Err(AuditError::HistoryGap {
            have: dict.len(),
            claimed: claimed.n,
        });
    }
    if !claimed.verify(key) {
        return fail(history.len(), AuditFailure::BadSignature);
    }
    if dict.len() != claimed.n || dict.root() != claimed.root {
        return fail(history.len(), AuditFailure::FinalMismatch);
    }
    Ok(AuditOutcome::Pass)
}
