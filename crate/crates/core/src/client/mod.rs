//! RITM client: opt-in ClientHello, status stripping, certificate
//! acceptance and mid-connection liveness.

mod connection;
mod strip;

use std::fmt;

use crate::authdict::{verify_status, InvalidReason, Verdict};
use crate::monitor::{compare_roots, Comparison, MisbehaviorProof};
use crate::registry::CaRegistry;
use crate::tls::{handshake_records, Certificate, ClientHello, EXT_RITM};

pub use connection::{ClientEvent, RitmClient};
pub use strip::{strip_status, MalformedStatusRecord, StatusItem, StatusStripper};

pub const DEFAULT_GRACE: u64 = 2;

#[derive(Clone, Debug)]
pub struct ClientPolicy {
    /// Fallback refresh interval for CAs without one in the registry.
    pub delta: u64,
    pub registry: CaRegistry,
    pub grace: u64,
    /// Treat a missing status as an attack.
    pub expect_ritm: bool,
}

impl ClientPolicy {
    pub fn new(registry: CaRegistry, delta: u64) -> Self {
        assert!(delta > 0, "delta must be positive");
        ClientPolicy {
            delta,
            registry,
            grace: DEFAULT_GRACE,
            expect_ritm: true,
        }
    }

    fn delta_for(&self, cert: &Certificate) -> u64 {
        self.registry.get(&cert.issuer).map_or(self.delta, |e| e.delta)
    }
}

/// ClientHello records carrying the RITM extension (empty payload).
pub fn emit_client_hello(mut base: ClientHello) -> Vec<u8> {
    if !base.has_extension(EXT_RITM) {
        base.extensions.push((EXT_RITM, Vec::new()));
    }
    handshake_records(base.version, &[base.to_message()])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    Revoked,
    NoStatus,
    InvalidStatus,
    BadCertificate,
    MalformedStatusRecord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterruptReason {
    StaleStatus,
    Revoked,
    MalformedStatusRecord,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for InterruptReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// `protected` is false when no status was required or received.
    Accepted { protected: bool },
    Rejected(RejectReason),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Acceptance {
    pub decision: Decision,
    /// Set when two validated statuses contradict each other.
    pub evidence: Option<MisbehaviorProof>,
}

/// Verdict of one status for `cert`; statuses about another CA are
/// invalid.
pub fn check_status(cert: &Certificate, item: &StatusItem, policy: &ClientPolicy, now: u64) -> Option<Verdict> {
    let StatusItem::Status(st) = item else {
        return None;
    };
    let Some(entry) = policy.registry.get(&cert.issuer) else {
        return Some(Verdict::Invalid(InvalidReason::BadSignature));
    };
    if st.signed_root.ca_id != cert.issuer {
        return Some(Verdict::Invalid(InvalidReason::BadSignature));
    }
    Some(verify_status(st, &cert.serial, &entry.key, now, entry.delta))
}

pub fn accept_certificate(cert: &Certificate, statuses: &[StatusItem], policy: &ClientPolicy, now: u64) -> Acceptance {
    let reject = |r| Acceptance {
        decision: Decision::Rejected(r),
        evidence: None,
    };
    let Some(entry) = policy.registry.get(&cert.issuer) else {
        return reject(RejectReason::BadCertificate);
    };
    if !cert.verify(&entry.key, now) {
        return reject(RejectReason::BadCertificate);
    }
    let mut revoked = Vec::new();
    let mut clean = Vec::new();
    let mut any_status = false;
    for item in statuses {
        let StatusItem::Status(st) = item else { continue };
        any_status = true;
        match check_status(cert, item, policy, now) {
            Some(Verdict::Revoked) => revoked.push(&st.signed_root),
            Some(Verdict::NotRevoked) => clean.push(&st.signed_root),
            _ => {}
        }
    }
    if !revoked.is_empty() {
        let evidence = revoked.iter().find_map(|a| {
            clean.iter().find_map(|b| match compare_roots(a, b, &entry.key) {
                Ok(Comparison::Misbehavior(p)) => Some(p),
                _ => None,
            })
        });
        return Acceptance {
            decision: Decision::Rejected(RejectReason::Revoked),
            evidence,
        };
    }
    if !clean.is_empty() {
        return Acceptance {
            decision: Decision::Accepted { protected: true },
            evidence: None,
        };
    }
    if any_status {
        return reject(RejectReason::InvalidStatus);
    }
    if policy.expect_ritm {
        return reject(RejectReason::NoStatus);
    }
    Acceptance {
        decision: Decision::Accepted { protected: false },
        evidence: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnState {
    Handshaking,
    Accepted { protected: bool },
    Rejected(RejectReason),
    Interrupted(InterruptReason),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConnVerdict {
    pub state: ConnState,
    pub last_valid_status: u64,
}

/// Client-side verdict tracking for one connection.
#[derive(Clone, Debug)]
pub struct ClientSession {
    pub verdict: ConnVerdict,
    cert: Option<Certificate>,
    delta: u64,
}

impl Default for ClientSession {
    fn default() -> Self {
        ClientSession {
            verdict: ConnVerdict {
                state: ConnState::Handshaking,
                last_valid_status: 0,
            },
            cert: None,
            delta: 0,
        }
    }
}

impl ClientSession {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> ConnState {
        self.verdict.state
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.cert.as_ref()
    }

    pub fn reject(&mut self, reason: RejectReason) {
        if self.verdict.state == ConnState::Handshaking {
            self.verdict.state = ConnState::Rejected(reason);
        }
    }

    pub fn on_handshake(&mut self, cert: Certificate, statuses: &[StatusItem], policy: &ClientPolicy, now: u64) -> Acceptance {
        let acc = accept_certificate(&cert, statuses, policy, now);
        if self.verdict.state == ConnState::Handshaking {
            self.verdict.state = match acc.decision {
                Decision::Accepted { protected } => ConnState::Accepted { protected },
                Decision::Rejected(r) => ConnState::Rejected(r),
            };
            if acc.decision == (Decision::Accepted { protected: true }) {
                self.verdict.last_valid_status = now;
            }
        }
        self.delta = policy.delta_for(&cert);
        self.cert = Some(cert);
        acc
    }

    /// Applies a status that arrived after the handshake.
    pub fn on_status(&mut self, item: &StatusItem, policy: &ClientPolicy, now: u64) {
        let (ConnState::Accepted { protected: true }, Some(cert)) = (self.verdict.state, &self.cert) else {
            return;
        };
        match check_status(cert, item, policy, now) {
            Some(Verdict::NotRevoked) => self.verdict.last_valid_status = now,
            Some(Verdict::Revoked) => self.verdict.state = ConnState::Interrupted(InterruptReason::Revoked),
            _ => {}
        }
    }

    /// Time at which a protected connection without new statuses is cut.
    pub fn deadline(&self, policy: &ClientPolicy) -> Option<u64> {
        match self.verdict.state {
            ConnState::Accepted { protected: true } => {
                Some(self.verdict.last_valid_status + 2 * self.delta + policy.grace)
            }
            _ => None,
        }
    }

    pub fn liveness_check(&mut self, policy: &ClientPolicy, now: u64) -> ConnState {
        if let Some(d) = self.deadline(policy) {
            if now >= d {
                self.verdict.state = ConnState::Interrupted(InterruptReason::StaleStatus);
            }
        }
        self.verdict.state
    }
}
