//! Serial numbers, CA identifiers and dictionary leaves.

use std::fmt;
use std::str::FromStr;

use super::digest::{hash_parts, Digest};
use super::DictError;

/// Longest serial number accepted, in bytes.
pub const MAX_SERIAL_LEN: usize = 20;

const LEAF_TAG: u8 = 0x00;

/// Canonical big-endian unsigned serial number, 1 to 20 bytes, no leading
/// zero byte (zero itself is the single byte `00`).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SerialNumber(Vec<u8>);

impl SerialNumber {
    /// Accepts only the canonical encoding.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DictError> {
        if bytes.is_empty() || bytes.len() > MAX_SERIAL_LEN {
            return Err(DictError::BadSerial(format!("length {}", bytes.len())));
        }
        if bytes.len() > 1 && bytes[0] == 0 {
            return Err(DictError::BadSerial("leading zero byte".into()));
        }
        Ok(SerialNumber(bytes.to_vec()))
    }

    /// Strips leading zero bytes of an arbitrary big-endian integer.
    pub fn from_be_lenient(bytes: &[u8]) -> Result<Self, DictError> {
        let first = bytes.iter().position(|b| *b != 0);
        match first {
            None => Ok(SerialNumber(vec![0])),
            Some(i) => Self::from_bytes(&bytes[i..]),
        }
    }

    pub fn from_u64(v: u64) -> Self {
        Self::from_be_lenient(&v.to_be_bytes()).expect("u64 fits")
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    /// `len(1) ‖ bytes`
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.0.len() as u8);
        out.extend_from_slice(&self.0);
    }

    /// Decodes `len(1) ‖ bytes` from the front of `buf`, returning the rest.
    pub fn decode_prefix(buf: &[u8]) -> Result<(Self, &[u8]), DictError> {
        let (&len, rest) = buf
            .split_first()
            .ok_or_else(|| DictError::BadSerial("truncated".into()))?;
        let len = len as usize;
        if rest.len() < len {
            return Err(DictError::BadSerial("truncated".into()));
        }
        let (body, rest) = rest.split_at(len);
        Ok((Self::from_bytes(body)?, rest))
    }
}

impl fmt::Debug for SerialNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SN({})", self.to_hex())
    }
}

impl fmt::Display for SerialNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for SerialNumber {
    type Err = DictError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().trim_start_matches("0x");
        let padded;
        let s = if s.len() % 2 == 1 {
            padded = format!("0{s}");
            &padded
        } else {
            s
        };
        let bytes = hex::decode(s).map_err(|e| DictError::BadSerial(e.to_string()))?;
        Self::from_be_lenient(&bytes)
    }
}

/// Opaque 8-byte CA identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CaId(pub [u8; 8]);

impl CaId {
    pub fn from_u64(v: u64) -> Self {
        CaId(v.to_be_bytes())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for CaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CaId({})", self.to_hex())
    }
}

impl fmt::Display for CaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for CaId {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 8];
        hex::decode_to_slice(s.trim(), &mut out)?;
        Ok(CaId(out))
    }
}

/// One revocation: the serial and its 1-based revocation number.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Leaf {
    pub serial: SerialNumber,
    pub index: u64,
}

impl Leaf {
    pub fn new(serial: SerialNumber, index: u64) -> Self {
        Leaf { serial, index }
    }

    /// `len(1) ‖ serial ‖ index(8, big-endian)`
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        self.serial.encode_into(out);
        out.extend_from_slice(&self.index.to_be_bytes());
    }

    pub fn encoded_len(&self) -> usize {
        1 + self.serial.len() + 8
    }

    pub fn decode_prefix(buf: &[u8]) -> Result<(Self, &[u8]), DictError> {
        let (serial, rest) = SerialNumber::decode_prefix(buf)?;
        if rest.len() < 8 {
            return Err(DictError::BadSerial("truncated leaf index".into()));
        }
        let (idx, rest) = rest.split_at(8);
        let index = u64::from_be_bytes(idx.try_into().unwrap());
        Ok((Leaf { serial, index }, rest))
    }

    /// `H(0x00 ‖ canonical leaf bytes)`
    pub fn hash(&self) -> Digest {
        let mut buf = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut buf);
        hash_parts(&[&[LEAF_TAG], &buf])
    }
}
