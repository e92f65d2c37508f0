//! Client end of a harness TLS connection.

use std::sync::Arc;

use super::strip::{StatusItem, StatusStripper};
use super::{emit_client_hello, ClientPolicy, ClientSession, ConnState, Decision, InterruptReason, RejectReason};
use crate::authdict::Verdict;
use crate::monitor::MisbehaviorProof;
use crate::tls::handshake::{handshake_records, split_handshake_messages, HandshakeMessage, HandshakeView};
use crate::tls::stub::{application_records, change_cipher_spec, finished_message};
use crate::tls::{
    Certificate, ClientHello, HandshakeKind, RecordScanner, ScanEvent, CT_APPLICATION_DATA, CT_CHANGE_CIPHER_SPEC,
    CT_HANDSHAKE, HS_CLIENT_KEY_EXCHANGE, HS_SERVER_HELLO_DONE, VERSION_TLS12,
};

/// One line of the client report: `timestamp event reason`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientEvent {
    pub time: u64,
    pub event: &'static str,
    pub reason: String,
}

impl std::fmt::Display for ClientEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}", self.time, self.event, self.reason)
    }
}

fn collect_hs_app(ct: u8) -> bool {
    ct == CT_HANDSHAKE || ct == CT_APPLICATION_DATA
}

#[derive(Debug)]
pub struct RitmClient {
    policy: Arc<ClientPolicy>,
    ritm: bool,
    session: ClientSession,
    strip: StatusStripper,
    scan: RecordScanner,
    hs: Vec<u8>,
    cert: Option<Certificate>,
    statuses: Vec<StatusItem>,
    server_ccs: bool,
    app_received: usize,
    events: Vec<ClientEvent>,
    evidence: Vec<MisbehaviorProof>,
}

impl RitmClient {
    /// `ritm` controls whether the ClientHello carries the extension.
    pub fn new(policy: Arc<ClientPolicy>, ritm: bool) -> Self {
        RitmClient {
            policy,
            ritm,
            session: ClientSession::new(),
            strip: StatusStripper::new(),
            scan: RecordScanner::new(collect_hs_app),
            hs: Vec::new(),
            cert: None,
            statuses: Vec::new(),
            server_ccs: false,
            app_received: 0,
            events: Vec::new(),
            evidence: Vec::new(),
        }
    }

    pub fn hello(&mut self, now: u64) -> Vec<u8> {
        self.log(now, "hello", if self.ritm { "ritm" } else { "plain" }.into());
        let ch = ClientHello {
            random: [0x17; 32],
            ..Default::default()
        };
        if self.ritm {
            emit_client_hello(ch)
        } else {
            handshake_records(ch.version, &[ch.to_message()])
        }
    }

    pub fn state(&self) -> ConnState {
        self.session.state()
    }

    pub fn session(&self) -> &ClientSession {
        &self.session
    }

    pub fn is_open(&self) -> bool {
        matches!(self.state(), ConnState::Handshaking | ConnState::Accepted { .. })
    }

    pub fn events(&self) -> &[ClientEvent] {
        &self.events
    }

    pub fn take_evidence(&mut self) -> Vec<MisbehaviorProof> {
        std::mem::take(&mut self.evidence)
    }

    pub fn app_bytes_received(&self) -> usize {
        self.app_received
    }

    pub fn deadline(&self) -> Option<u64> {
        self.session.deadline(&self.policy)
    }

    fn log(&mut self, time: u64, event: &'static str, reason: String) {
        self.events.push(ClientEvent { time, event, reason });
    }

    fn transition_log(&mut self, before: ConnState, now: u64) {
        let after = self.state();
        if before == after {
            return;
        }
        match after {
            ConnState::Accepted { protected } => {
                self.log(now, "accepted", if protected { "protected" } else { "unprotected" }.into())
            }
            ConnState::Rejected(r) => self.log(now, "rejected", r.to_string()),
            ConnState::Interrupted(r) => self.log(now, "interrupted", r.to_string()),
            ConnState::Handshaking => {}
        }
    }

    /// Liveness check; returns the state afterwards.
    pub fn tick(&mut self, now: u64) -> ConnState {
        let before = self.state();
        self.session.liveness_check(&self.policy, now);
        self.transition_log(before, now);
        self.state()
    }

    pub fn send_app(&self, data: &[u8]) -> Vec<u8> {
        application_records(VERSION_TLS12, data)
    }

    /// Consumes server bytes and returns what the client sends back.
    pub fn on_server_bytes(&mut self, input: &[u8], now: u64) -> Vec<u8> {
        let before = self.state();
        let out = self.process(input, now);
        self.transition_log(before, now);
        out
    }

    fn process(&mut self, input: &[u8], now: u64) -> Vec<u8> {
        if !self.is_open() {
            return Vec::new();
        }
        let (clean, items) = match self.strip.feed(input) {
            Ok(x) => x,
            Err(_) => {
                match self.state() {
                    ConnState::Handshaking => self.session.reject(RejectReason::MalformedStatusRecord),
                    _ => {
                        self.session.verdict.state = ConnState::Interrupted(InterruptReason::MalformedStatusRecord)
                    }
                }
                return Vec::new();
            }
        };
        for item in items {
            if self.state() == ConnState::Handshaking {
                self.statuses.push(item);
                continue;
            }
            let verdict = self.cert.as_ref().and_then(|c| super::check_status(c, &item, &self.policy, now));
            let what = match verdict {
                Some(Verdict::NotRevoked) => "valid",
                Some(Verdict::Revoked) => "revoked",
                Some(Verdict::Invalid(_)) => "invalid",
                None => "notice",
            };
            self.log(now, "status", what.into());
            self.session.on_status(&item, &self.policy, now);
        }
        let mut out = Vec::new();
        for ev in self.scan.feed(&clean) {
            let ScanEvent::End(h, p) = ev else { continue };
            match h.content_type {
                CT_CHANGE_CIPHER_SPEC => self.server_ccs = true,
                CT_APPLICATION_DATA => self.app_received += p.map_or(0, |p| p.len()),
                CT_HANDSHAKE => {
                    self.hs.extend(p.unwrap_or_default());
                    let (msgs, used) = split_handshake_messages(&self.hs);
                    self.hs.drain(..used);
                    for m in msgs {
                        out.extend(self.handshake_message(&m, now));
                    }
                }
                _ => {}
            }
            if !self.is_open() {
                break;
            }
        }
        out
    }

    fn handshake_message(&mut self, m: &HandshakeMessage, now: u64) -> Vec<u8> {
        let Ok(view) = HandshakeView::from_message(m) else {
            self.session.reject(RejectReason::BadCertificate);
            return Vec::new();
        };
        match view.kind {
            HandshakeKind::Certificate => {
                self.cert = view.certificates.first().and_then(|c| Certificate::parse(c));
                if self.cert.is_none() {
                    self.session.reject(RejectReason::BadCertificate);
                }
                Vec::new()
            }
            HandshakeKind::Other(HS_SERVER_HELLO_DONE) => {
                let cke = HandshakeMessage {
                    msg_type: HS_CLIENT_KEY_EXCHANGE,
                    body: vec![0; 32],
                };
                let mut out = handshake_records(VERSION_TLS12, &[cke]);
                out.extend(change_cipher_spec(VERSION_TLS12));
                out.extend(handshake_records(VERSION_TLS12, &[finished_message()]));
                out
            }
            HandshakeKind::Finished if self.server_ccs => {
                let Some(cert) = self.cert.clone() else {
                    self.session.reject(RejectReason::BadCertificate);
                    return Vec::new();
                };
                let statuses = std::mem::take(&mut self.statuses);
                let acc = self.session.on_handshake(cert, &statuses, &self.policy, now);
                if let Some(p) = acc.evidence {
                    self.log(now, "misbehavior", p.ca_id.to_hex());
                    self.evidence.push(p);
                }
                debug_assert!(!matches!(acc.decision, Decision::Accepted { .. }) || self.is_open());
                Vec::new()
            }
            _ => Vec::new(),
        }
    }
}
