//! Compact test certificate format used by the stub servers.
//!
//! Layout: serial (len ‖ bytes) ‖ issuer ca_id(8) ‖ subject (u16 len ‖ utf8)
//! ‖ not_after(8) ‖ signature(64) over everything before it.

use crate::authdict::{CaId, CaPublicKey, CaSigningKey, SerialNumber};

const SIG_LEN: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub serial: SerialNumber,
    pub issuer: CaId,
    pub subject: String,
    pub not_after: u64,
    pub signature: [u8; SIG_LEN],
}

impl Certificate {
    pub fn issue(key: &CaSigningKey, issuer: CaId, serial: SerialNumber, subject: &str, not_after: u64) -> Self {
        let mut cert = Certificate {
            serial,
            issuer,
            subject: subject.to_string(),
            not_after,
            signature: [0; SIG_LEN],
        };
        cert.signature = key.sign(&cert.tbs_bytes());
        cert
    }

    fn tbs_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + self.subject.len());
        self.serial.encode_into(&mut out);
        out.extend_from_slice(&self.issuer.0);
        out.extend_from_slice(&(self.subject.len() as u16).to_be_bytes());
        out.extend_from_slice(self.subject.as_bytes());
        out.extend_from_slice(&self.not_after.to_be_bytes());
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.tbs_bytes();
        out.extend_from_slice(&self.signature);
        out
    }

    pub fn parse(buf: &[u8]) -> Option<Self> {
        let (serial, rest) = SerialNumber::decode_prefix(buf).ok()?;
        if rest.len() < 10 {
            return None;
        }
        let issuer = CaId(rest[..8].try_into().unwrap());
        let slen = u16::from_be_bytes([rest[8], rest[9]]) as usize;
        let rest = &rest[10..];
        if rest.len() != slen + 8 + SIG_LEN {
            return None;
        }
        let subject = String::from_utf8(rest[..slen].to_vec()).ok()?;
        let not_after = u64::from_be_bytes(rest[slen..slen + 8].try_into().unwrap());
        let signature = rest[slen + 8..].try_into().unwrap();
        Some(Certificate {
            serial,
            issuer,
            subject,
            not_after,
            signature,
        })
    }

    pub fn verify(&self, key: &CaPublicKey, now: u64) -> bool {
        now <= self.not_after && key.verify(&self.tbs_bytes(), &self.signature)
    }
}
