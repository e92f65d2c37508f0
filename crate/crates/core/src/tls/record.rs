//! TLS record layer framing.

pub const CT_CHANGE_CIPHER_SPEC: u8 = 20;
pub const CT_ALERT: u8 = 21;
pub const CT_HANDSHAKE: u8 = 22;
pub const CT_APPLICATION_DATA: u8 = 23;
pub const CT_HEARTBEAT: u8 = 24;
/// Dedicated content type carrying an injected revocation status.
pub const CT_REVOCATION_STATUS: u8 = 0x52;

pub const RECORD_HEADER_LEN: usize = 5;
/// Plaintext limit; records built here never exceed it.
pub const MAX_PLAINTEXT: usize = 1 << 14;
/// Protected records may expand by up to 2048 bytes.
pub const MAX_CIPHERTEXT: usize = MAX_PLAINTEXT + 2048;

pub const VERSION_TLS12: u16 = 0x0303;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TlsRecord {
    pub content_type: u8,
    pub version: u16,
    pub payload: Vec<u8>,
}

impl TlsRecord {
    pub fn new(content_type: u8, version: u16, payload: Vec<u8>) -> Self {
        assert!(payload.len() <= MAX_PLAINTEXT, "record payload exceeds 2^14");
        TlsRecord {
            content_type,
            version,
            payload,
        }
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.content_type);
        out.extend_from_slice(&self.version.to_be_bytes());
        out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.payload);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RECORD_HEADER_LEN + self.payload.len());
        self.encode_into(&mut out);
        out
    }
}

/// Header fields of a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecordHeader {
    pub content_type: u8,
    pub version: u16,
    pub length: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeaderCheck {
    Valid(RecordHeader),
    /// Fewer than five bytes, or the bytes so far are plausible.
    Incomplete,
    Invalid,
}

fn known_content_type(ct: u8) -> bool {
    matches!(ct, CT_CHANGE_CIPHER_SPEC..=CT_HEARTBEAT | CT_REVOCATION_STATUS)
}

/// Validates a record header at the front of `buf`.
pub fn check_header(buf: &[u8]) -> HeaderCheck {
    if let Some(&ct) = buf.first() {
        if !known_content_type(ct) {
            return HeaderCheck::Invalid;
        }
    }
    if let Some(&major) = buf.get(1) {
        if major != 3 {
            return HeaderCheck::Invalid;
        }
    }
    if buf.len() < RECORD_HEADER_LEN {
        return HeaderCheck::Incomplete;
    }
    let length = u16::from_be_bytes([buf[3], buf[4]]) as usize;
    if length > MAX_CIPHERTEXT {
        return HeaderCheck::Invalid;
    }
    HeaderCheck::Valid(RecordHeader {
        content_type: buf[0],
        version: u16::from_be_bytes([buf[1], buf[2]]),
        length,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RecordParse {
    /// A full record and the number of bytes it occupied.
    Complete(TlsRecord, usize),
    Incomplete,
    Invalid,
}

pub fn parse_record(buf: &[u8]) -> RecordParse {
    match check_header(buf) {
        HeaderCheck::Invalid => RecordParse::Invalid,
        HeaderCheck::Incomplete => RecordParse::Incomplete,
        HeaderCheck::Valid(h) => {
            let total = RECORD_HEADER_LEN + h.length;
            if buf.len() < total {
                return RecordParse::Incomplete;
            }
            RecordParse::Complete(
                TlsRecord {
                    content_type: h.content_type,
                    version: h.version,
                    payload: buf[RECORD_HEADER_LEN..total].to_vec(),
                },
                total,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_partial() {
        let r = TlsRecord::new(CT_HANDSHAKE, VERSION_TLS12, vec![1, 2, 3]);
        let b = r.to_bytes();
        assert_eq!(b, vec![22, 3, 3, 0, 3, 1, 2, 3]);
        assert_eq!(parse_record(&b), RecordParse::Complete(r, 8));
        assert_eq!(parse_record(&b[..4]), RecordParse::Incomplete);
        assert_eq!(parse_record(&b[..7]), RecordParse::Incomplete);
    }

    #[test]
    fn rejects_non_tls() {
        assert_eq!(parse_record(b"GET / HTTP/1.1\r\n"), RecordParse::Invalid);
        assert_eq!(parse_record(&[22, 2, 0, 0, 1]), RecordParse::Invalid);
        assert_eq!(parse_record(&[23, 3, 3, 0xff, 0xff]), RecordParse::Invalid);
        assert_eq!(check_header(&[22]), HeaderCheck::Incomplete);
    }
}
