//! Plaintext TLS 1.2-shaped server used by the harness and the loopback
//! tools. Key exchange and record protection are not performed; the
//! message flow and framing are those of a full handshake.

use super::handshake::{
    certificate_message, handshake_records, split_handshake_messages, HandshakeMessage, ServerHello,
    HS_CLIENT_HELLO, HS_FINISHED, HS_SERVER_HELLO_DONE,
};
use super::record::{TlsRecord, CT_APPLICATION_DATA, CT_CHANGE_CIPHER_SPEC, CT_HANDSHAKE, MAX_PLAINTEXT, VERSION_TLS12};
use super::scan::{RecordScanner, ScanEvent};

pub const FINISHED_LEN: usize = 12;

fn collect_hs_app(ct: u8) -> bool {
    ct == CT_HANDSHAKE || ct == CT_APPLICATION_DATA
}

pub fn finished_message() -> HandshakeMessage {
    HandshakeMessage {
        msg_type: HS_FINISHED,
        body: vec![0x5a; FINISHED_LEN],
    }
}

pub fn change_cipher_spec(version: u16) -> Vec<u8> {
    TlsRecord::new(CT_CHANGE_CIPHER_SPEC, version, vec![1]).to_bytes()
}

pub fn application_records(version: u16, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() + 5);
    for chunk in data.chunks(MAX_PLAINTEXT) {
        TlsRecord::new(CT_APPLICATION_DATA, version, chunk.to_vec()).encode_into(&mut out);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ServerPhase {
    AwaitHello,
    AwaitFinished,
    Established,
    Failed,
}

#[derive(Debug)]
pub struct StubServer {
    chain: Vec<Vec<u8>>,
    scan: RecordScanner,
    hs: Vec<u8>,
    client_ccs: bool,
    phase: ServerPhase,
    app_received: Vec<u8>,
}

impl StubServer {
    /// `chain` holds encoded certificates, leaf first.
    pub fn new(chain: Vec<Vec<u8>>) -> Self {
        StubServer {
            chain,
            scan: RecordScanner::new(collect_hs_app),
            hs: Vec::new(),
            client_ccs: false,
            phase: ServerPhase::AwaitHello,
            app_received: Vec::new(),
        }
    }

    pub fn phase(&self) -> ServerPhase {
        self.phase
    }

    pub fn take_app_data(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.app_received)
    }

    /// Bytes the server sends for its first flight.
    pub fn first_flight(&self) -> Vec<u8> {
        let msgs = [
            ServerHello {
                random: [0x42; 32],
                ..Default::default()
            }
            .to_message(),
            certificate_message(&self.chain),
            HandshakeMessage {
                msg_type: HS_SERVER_HELLO_DONE,
                body: vec![],
            },
        ];
        let mut out = Vec::new();
        for m in &msgs {
            out.extend(handshake_records(VERSION_TLS12, std::slice::from_ref(m)));
        }
        out
    }

    pub fn on_client_bytes(&mut self, input: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for ev in self.scan.feed(input) {
            match ev {
                ScanEvent::Opaque => self.phase = ServerPhase::Failed,
                ScanEvent::End(h, p) => match h.content_type {
                    CT_CHANGE_CIPHER_SPEC => self.client_ccs = true,
                    CT_APPLICATION_DATA => self.app_received.extend(p.unwrap_or_default()),
                    CT_HANDSHAKE => {
                        self.hs.extend(p.unwrap_or_default());
                        let (msgs, used) = split_handshake_messages(&self.hs);
                        self.hs.drain(..used);
                        for m in msgs {
                            match (self.phase, m.msg_type) {
                                (ServerPhase::AwaitHello, HS_CLIENT_HELLO) => {
                                    out.extend(self.first_flight());
                                    self.phase = ServerPhase::AwaitFinished;
                                }
                                (ServerPhase::AwaitFinished, HS_FINISHED) if self.client_ccs => {
                                    out.extend(change_cipher_spec(VERSION_TLS12));
                                    out.extend(handshake_records(VERSION_TLS12, &[finished_message()]));
                                    self.phase = ServerPhase::Established;
                                }
                                _ => {}
                            }
                        }
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        out
    }

    pub fn app_data(&self, data: &[u8]) -> Vec<u8> {
        application_records(VERSION_TLS12, data)
    }
}
