//! Messages carried by the dissemination network and their framing.

use crate::authdict::{CaId, FreshnessStatement, SerialNumber, SignedRoot, DIGEST_LEN, SIGNED_ROOT_LEN};

/// Revoked serials together with the signed root that covers them. An
/// empty serial list re-anchors the current root with a new hash chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IssuanceMessage {
    pub ca_id: CaId,
    pub serials: Vec<SerialNumber>,
    pub signed_root: SignedRoot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreshnessMessage {
    pub ca_id: CaId,
    pub statement: FreshnessStatement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Publication {
    Issuance(IssuanceMessage),
    Freshness(FreshnessMessage),
}

impl Publication {
    pub fn ca_id(&self) -> CaId {
        match self {
            Publication::Issuance(m) => m.ca_id,
            Publication::Freshness(m) => m.ca_id,
        }
    }
}

impl IssuanceMessage {
    /// Revocation number of the first serial in this batch.
    pub fn first_index(&self) -> u64 {
        self.signed_root.n - self.serials.len() as u64 + 1
    }

    /// Leaf count before this batch.
    pub fn prior_count(&self) -> u64 {
        self.signed_root.n - self.serials.len() as u64
    }

    pub fn is_reanchor(&self) -> bool {
        self.serials.is_empty()
    }

    /// `ca_id(8) ‖ count(4) ‖ (len(1) ‖ serial)* ‖ SignedRoot(128)`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.ca_id.0);
        out.extend_from_slice(&(self.serials.len() as u32).to_be_bytes());
        for s in &self.serials {
            s.encode_into(&mut out);
        }
        out.extend_from_slice(&self.signed_root.to_bytes());
        out
    }

    pub fn encoded_len(&self) -> usize {
        12 + self.serials.iter().map(|s| 1 + s.len()).sum::<usize>() + SIGNED_ROOT_LEN
    }

    pub fn from_bytes(buf: &[u8]) -> Option<Self> {
        if buf.len() < 12 + SIGNED_ROOT_LEN {
            return None;
        }
        let ca_id = CaId(buf[0..8].try_into().unwrap());
        let count = u32::from_be_bytes(buf[8..12].try_into().unwrap()) as usize;
        let mut rest = &buf[12..];
        let mut serials = Vec::with_capacity(count.min(rest.len() / 2));
        for _ in 0..count {
            let (s, r) = SerialNumber::decode_prefix(rest).ok()?;
            serials.push(s);
            rest = r;
        }
        let signed_root = SignedRoot::from_bytes(rest)?;
        if signed_root.ca_id != ca_id || signed_root.n < serials.len() as u64 {
            return None;
        }
        Some(IssuanceMessage {
            ca_id,
            serials,
            signed_root,
        })
    }
}

impl FreshnessMessage {
    pub const LEN: usize = 8 + DIGEST_LEN;

    /// `ca_id(8) ‖ value(20)`
    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        let mut out = [0u8; Self::LEN];
        out[..8].copy_from_slice(&self.ca_id.0);
        out[8..].copy_from_slice(&self.statement.to_bytes());
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Option<Self> {
        if buf.len() != Self::LEN {
            return None;
        }
        Some(FreshnessMessage {
            ca_id: CaId(buf[..8].try_into().unwrap()),
            statement: FreshnessStatement::from_bytes(&buf[8..])?,
        })
    }
}

/// Concatenates messages, each behind a 4-byte big-endian length.
pub fn frame<'a>(messages: impl IntoIterator<Item = &'a [u8]>) -> Vec<u8> {
    let mut out = Vec::new();
    for m in messages {
        out.extend_from_slice(&(m.len() as u32).to_be_bytes());
        out.extend_from_slice(m);
    }
    out
}

pub fn unframe(mut buf: &[u8]) -> Option<Vec<&[u8]>> {
    let mut out = Vec::new();
    while !buf.is_empty() {
        if buf.len() < 4 {
            return None;
        }
        let len = u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize;
        let rest = &buf[4..];
        if rest.len() < len {
            return None;
        }
        out.push(&rest[..len]);
        buf = &rest[len..];
    }
    Some(out)
}

pub fn encode_issuances(msgs: &[IssuanceMessage]) -> Vec<u8> {
    let encoded: Vec<Vec<u8>> = msgs.iter().map(IssuanceMessage::to_bytes).collect();
    frame(encoded.iter().map(Vec::as_slice))
}

pub fn decode_issuances(buf: &[u8]) -> Option<Vec<IssuanceMessage>> {
    unframe(buf)?.into_iter().map(IssuanceMessage::from_bytes).collect()
}
