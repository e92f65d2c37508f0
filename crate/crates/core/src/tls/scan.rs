//! Incremental record-boundary scanner for an in-order byte stream.
//!
//! The scanner never buffers stream bytes on behalf of the caller; it
//! reports where records start and end so callers can forward, hold or
//! splice at boundaries. Payloads are copied only for the content types
//! the caller asks for.

use super::record::{check_header, HeaderCheck, RecordHeader, RECORD_HEADER_LEN};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScanEvent {
    /// A new record is about to start (emitted before its first byte).
    Boundary,
    /// `input[start..end]` belongs to the stream at this point.
    Data(usize, usize),
    /// The header of the current record is complete.
    Header(RecordHeader),
    /// The current record is complete; payload is present when collected.
    End(RecordHeader, Option<Vec<u8>>),
    /// The stream stopped looking like TLS; everything after is opaque.
    Opaque,
}

#[derive(Clone, Debug)]
pub struct RecordScanner {
    opaque: bool,
    hdr: Vec<u8>,
    cur: Option<RecordHeader>,
    remaining: usize,
    payload: Option<Vec<u8>>,
    collect: fn(u8) -> bool,
}

fn collect_nothing(_: u8) -> bool {
    false
}

impl Default for RecordScanner {
    fn default() -> Self {
        Self::new(collect_nothing)
    }
}

impl RecordScanner {
    pub fn new(collect: fn(u8) -> bool) -> Self {
        RecordScanner {
            opaque: false,
            hdr: Vec::with_capacity(RECORD_HEADER_LEN),
            cur: None,
            remaining: 0,
            payload: None,
            collect,
        }
    }

    pub fn set_collect(&mut self, collect: fn(u8) -> bool) {
        self.collect = collect;
    }

    pub fn is_opaque(&self) -> bool {
        self.opaque
    }

    /// Gives up on record tracking; later input is reported as plain data.
    pub fn make_opaque(&mut self) {
        self.opaque = true;
        self.hdr.clear();
        self.cur = None;
        self.payload = None;
    }

    /// True between records (no partial header or payload outstanding).
    pub fn at_boundary(&self) -> bool {
        !self.opaque && self.hdr.is_empty() && self.cur.is_none()
    }

    /// Header of the record currently being read, if any.
    pub fn current(&self) -> Option<RecordHeader> {
        self.cur
    }

    pub fn feed(&mut self, input: &[u8]) -> Vec<ScanEvent> {
        let mut ev = Vec::new();
        let mut i = 0;
        while i < input.len() {
            if self.opaque {
                ev.push(ScanEvent::Data(i, input.len()));
                break;
            }
            match self.cur {
                None => {
                    if self.hdr.is_empty() {
                        ev.push(ScanEvent::Boundary);
                    }
                    let take = (RECORD_HEADER_LEN - self.hdr.len()).min(input.len() - i);
                    self.hdr.extend_from_slice(&input[i..i + take]);
                    match check_header(&self.hdr) {
                        HeaderCheck::Invalid => {
                            self.make_opaque();
                            ev.push(ScanEvent::Opaque);
                            // the bytes just inspected are still stream data
                            ev.push(ScanEvent::Data(i, input.len()));
                            break;
                        }
                        HeaderCheck::Incomplete => {
                            ev.push(ScanEvent::Data(i, i + take));
                            i += take;
                        }
                        HeaderCheck::Valid(h) => {
                            ev.push(ScanEvent::Data(i, i + take));
                            i += take;
                            self.hdr.clear();
                            self.remaining = h.length;
                            self.payload = (self.collect)(h.content_type).then(|| Vec::with_capacity(h.length));
                            ev.push(ScanEvent::Header(h));
                            if h.length == 0 {
                                ev.push(ScanEvent::End(h, self.payload.take()));
                            } else {
                                self.cur = Some(h);
                            }
                        }
                    }
                }
                Some(h) => {
                    let take = self.remaining.min(input.len() - i);
                    if let Some(p) = self.payload.as_mut() {
                        p.extend_from_slice(&input[i..i + take]);
                    }
                    ev.push(ScanEvent::Data(i, i + take));
                    i += take;
                    self.remaining -= take;
                    if self.remaining == 0 {
                        self.cur = None;
                        ev.push(ScanEvent::End(h, self.payload.take()));
                    }
                }
            }
        }
        ev
    }
}
