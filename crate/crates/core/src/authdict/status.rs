//! Revocation statuses: proof + signed root + freshness statement, their
//! wire encoding, and verification.

use super::digest::hash;
use super::serial::{Leaf, SerialNumber};
use super::signing::{CaPublicKey, FreshnessStatement, SignedRoot, MAX_CLOCK_SKEW, SIGNED_ROOT_LEN};
use super::tree::{common_ancestor_level, empty_root, fold_path, position_from_path, tree_height, AuthPath};

/// Verifiers refuse to walk hash chains longer than this many periods.
pub const MAX_CHAIN_WALK: u64 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProofKind {
    Absent = 0,
    Present = 1,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipProof {
    pub kind: ProofKind,
    pub leaves: Vec<Leaf>,
    /// For a two-leaf absence proof the second path stops below the
    /// leaves' common ancestor; the remainder is shared with the first.
    pub paths: Vec<AuthPath>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RevocationStatus {
    pub proof: MembershipProof,
    pub signed_root: SignedRoot,
    pub freshness: FreshnessStatement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InvalidReason {
    BadSignature,
    BadProof,
    StaleFreshness,
    MalformedStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Revoked,
    NotRevoked,
    Invalid(InvalidReason),
}

impl RevocationStatus {
    /// `kind(1) ‖ leaf_count(1) ‖ leaves ‖ path_count(1) ‖ paths ‖
    /// SignedRoot(128) ‖ freshness(20)`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(self.proof.kind as u8);
        out.push(self.proof.leaves.len() as u8);
        for l in &self.proof.leaves {
            l.encode_into(&mut out);
        }
        out.push(self.proof.paths.len() as u8);
        for p in &self.proof.paths {
            p.encode_into(&mut out);
        }
        out.extend_from_slice(&self.signed_root.to_bytes());
        out.extend_from_slice(&self.freshness.to_bytes());
        out
    }

    pub fn encoded_len(&self) -> usize {
        3 + self.proof.leaves.iter().map(Leaf::encoded_len).sum::<usize>()
            + self.proof.paths.iter().map(AuthPath::encoded_len).sum::<usize>()
            + SIGNED_ROOT_LEN
            + FreshnessStatement::LEN
    }

    pub fn from_bytes(buf: &[u8]) -> Option<Self> {
        let (&kind, rest) = buf.split_first()?;
        let kind = match kind {
            0 => ProofKind::Absent,
            1 => ProofKind::Present,
            _ => return None,
        };
        let (&leaf_count, mut rest) = rest.split_first()?;
        if leaf_count > 2 {
            return None;
        }
        let mut leaves = Vec::with_capacity(leaf_count as usize);
        for _ in 0..leaf_count {
            let (leaf, r) = Leaf::decode_prefix(rest).ok()?;
            leaves.push(leaf);
            rest = r;
        }
        let (&path_count, mut rest) = rest.split_first()?;
        if path_count != leaf_count {
            return None;
        }
        let mut paths = Vec::with_capacity(path_count as usize);
        for _ in 0..path_count {
            let (p, r) = AuthPath::decode_prefix(rest)?;
            paths.push(p);
            rest = r;
        }
        if rest.len() != SIGNED_ROOT_LEN + FreshnessStatement::LEN {
            return None;
        }
        let signed_root = SignedRoot::from_bytes(&rest[..SIGNED_ROOT_LEN])?;
        let freshness = FreshnessStatement::from_bytes(&rest[SIGNED_ROOT_LEN..])?;
        Some(RevocationStatus {
            proof: MembershipProof { kind, leaves, paths },
            signed_root,
            freshness,
        })
    }
}

/// Checks that `value` is the chain element of a period whose staleness
/// `(now - t) - p·Δ` lies within `[-MAX_CLOCK_SKEW, 2Δ]`. Returns `p`.
pub fn check_freshness(value: &FreshnessStatement, sr: &SignedRoot, now: u64, delta: u64) -> Option<u64> {
    assert!(delta > 0, "delta must be positive");
    if sr.timestamp > now + MAX_CLOCK_SKEW {
        return None;
    }
    let elapsed = now as i128 - sr.timestamp as i128;
    let d = delta as i128;
    // smallest p with elapsed - p·Δ ≤ 2Δ
    let lo = ((elapsed - 2 * d) + d - 1).div_euclid(d).max(0);
    // largest p with elapsed - p·Δ ≥ -skew
    let hi = (elapsed + MAX_CLOCK_SKEW as i128).div_euclid(d);
    if hi < lo || lo as u64 > MAX_CHAIN_WALK {
        return None;
    }
    let (lo, hi) = (lo as u64, (hi as u64).min(MAX_CHAIN_WALK));
    let mut cur = value.value;
    for p in 0..=hi {
        if cur == sr.anchor {
            return (p >= lo).then_some(p);
        }
        cur = hash(&cur.0);
    }
    None
}

fn check_index(leaf: &Leaf, n: u64) -> bool {
    leaf.index >= 1 && leaf.index <= n
}

fn verify_proof(proof: &MembershipProof, serial: &SerialNumber, sr: &SignedRoot) -> Result<ProofKind, InvalidReason> {
    use InvalidReason::*;
    let n = sr.n;
    let height = tree_height(n);
    if proof.leaves.len() != proof.paths.len() {
        return Err(MalformedStatus);
    }
    match (proof.kind, proof.leaves.as_slice()) {
        (ProofKind::Present, [leaf]) => {
            if &leaf.serial != serial || !check_index(leaf, n) {
                return Err(BadProof);
            }
            let pos = position_from_path(n, &proof.paths[0]).ok_or(BadProof)?;
            let f = fold_path(n, pos, leaf.hash(), &proof.paths[0], height).ok_or(BadProof)?;
            if f.node != sr.root {
                return Err(BadProof);
            }
            Ok(ProofKind::Present)
        }
        (ProofKind::Present, _) => Err(MalformedStatus),
        (ProofKind::Absent, []) => {
            if n == 0 && sr.root == empty_root() {
                Ok(ProofKind::Absent)
            } else {
                Err(BadProof)
            }
        }
        (ProofKind::Absent, [leaf]) => {
            if !check_index(leaf, n) {
                return Err(BadProof);
            }
            let pos = position_from_path(n, &proof.paths[0]).ok_or(BadProof)?;
            let f = fold_path(n, pos, leaf.hash(), &proof.paths[0], height).ok_or(BadProof)?;
            if f.node != sr.root {
                return Err(BadProof);
            }
            let before_first = pos == 0 && serial < &leaf.serial;
            let after_last = pos == n - 1 && serial > &leaf.serial;
            if before_first || after_last {
                Ok(ProofKind::Absent)
            } else {
                Err(BadProof)
            }
        }
        (ProofKind::Absent, [left, right]) => {
            if !(left.serial < *serial && *serial < right.serial) || !check_index(left, n) || !check_index(right, n) {
                return Err(BadProof);
            }
            let pos = position_from_path(n, &proof.paths[0]).ok_or(BadProof)?;
            let next = pos + 1;
            if next >= n {
                return Err(BadProof);
            }
            let f = fold_path(n, pos, left.hash(), &proof.paths[0], height).ok_or(BadProof)?;
            if f.node != sr.root {
                return Err(BadProof);
            }
            let h = common_ancestor_level(pos, next);
            let sub = fold_path(n, next, right.hash(), &proof.paths[1], h - 1).ok_or(BadProof)?;
            if f.siblings.get(h - 1).copied().flatten() != Some(sub.node) {
                return Err(BadProof);
            }
            Ok(ProofKind::Absent)
        }
        (ProofKind::Absent, _) => Err(MalformedStatus),
    }
}

/// Verifies signature, proof, and freshness (in that order) of `st` for
/// `serial`, trusting only `ca_key`.
pub fn verify_status(st: &RevocationStatus, serial: &SerialNumber, ca_key: &CaPublicKey, now: u64, delta: u64) -> Verdict {
    if !st.signed_root.verify(ca_key) {
        return Verdict::Invalid(InvalidReason::BadSignature);
    }
    let kind = match verify_proof(&st.proof, serial, &st.signed_root) {
        Ok(k) => k,
        Err(r) => return Verdict::Invalid(r),
    };
    if check_freshness(&st.freshness, &st.signed_root, now, delta).is_none() {
        return Verdict::Invalid(InvalidReason::StaleFreshness);
    }
    match kind {
        ProofKind::Present => Verdict::Revoked,
        ProofKind::Absent => Verdict::NotRevoked,
    }
}
