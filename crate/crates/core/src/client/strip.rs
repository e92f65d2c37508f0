//! Removes injected status records from the server→client stream.

use thiserror::Error;

use crate::authdict::RevocationStatus;
use crate::ra::UNKNOWN_CA_NOTICE;
use crate::tls::{RecordScanner, ScanEvent, CT_REVOCATION_STATUS};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StatusItem {
    Status(RevocationStatus),
    UnknownCa,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("malformed revocation status record")]
pub struct MalformedStatusRecord;

fn collect_status(ct: u8) -> bool {
    ct == CT_REVOCATION_STATUS
}

/// Streaming stripper. Holds back at most one record header until its
/// content type is known.
#[derive(Debug)]
pub struct StatusStripper {
    scan: RecordScanner,
    held: Vec<u8>,
    holding: bool,
    dropping: bool,
}

impl Default for StatusStripper {
    fn default() -> Self {
        StatusStripper {
            scan: RecordScanner::new(collect_status),
            held: Vec::new(),
            holding: false,
            dropping: false,
        }
    }
}

impl StatusStripper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the clean server bytes of this segment and the statuses
    /// found in it.
    pub fn feed(&mut self, input: &[u8]) -> Result<(Vec<u8>, Vec<StatusItem>), MalformedStatusRecord> {
        let mut out = Vec::with_capacity(input.len());
        let mut items = Vec::new();
        for ev in self.scan.feed(input) {
            match ev {
                ScanEvent::Boundary => self.holding = true,
                ScanEvent::Data(s, e) => {
                    if self.dropping {
                        continue;
                    }
                    if self.holding {
                        self.held.extend_from_slice(&input[s..e]);
                    } else {
                        out.extend_from_slice(&input[s..e]);
                    }
                }
                ScanEvent::Header(h) => {
                    self.holding = false;
                    if h.content_type == CT_REVOCATION_STATUS {
                        self.held.clear();
                        self.dropping = true;
                    } else {
                        out.append(&mut self.held);
                    }
                }
                ScanEvent::End(h, payload) => {
                    if h.content_type == CT_REVOCATION_STATUS {
                        self.dropping = false;
                        items.push(decode_item(payload.as_deref().unwrap_or_default())?);
                    }
                }
                ScanEvent::Opaque => {
                    self.holding = false;
                    out.append(&mut self.held);
                }
            }
        }
        Ok((out, items))
    }

    /// Fails if the stream ended inside a status record; returns any
    /// held header bytes otherwise.
    pub fn finish(&mut self) -> Result<Vec<u8>, MalformedStatusRecord> {
        if self.dropping || self.scan.current().is_some_and(|h| h.content_type == CT_REVOCATION_STATUS) {
            return Err(MalformedStatusRecord);
        }
        if self.held.first() == Some(&CT_REVOCATION_STATUS) {
            return Err(MalformedStatusRecord);
        }
        self.holding = false;
        Ok(std::mem::take(&mut self.held))
    }
}

fn decode_item(payload: &[u8]) -> Result<StatusItem, MalformedStatusRecord> {
    if payload == [UNKNOWN_CA_NOTICE] {
        return Ok(StatusItem::UnknownCa);
    }
    RevocationStatus::from_bytes(payload)
        .map(StatusItem::Status)
        .ok_or(MalformedStatusRecord)
}

/// One-shot stripping of a complete stream.
pub fn strip_status(stream: &[u8]) -> Result<(Vec<u8>, Vec<StatusItem>), MalformedStatusRecord> {
    let mut s = StatusStripper::new();
    let (mut clean, items) = s.feed(stream)?;
    clean.extend(s.finish()?);
    Ok((clean, items))
}
