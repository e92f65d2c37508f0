//! Revocation agent: an inline stream element that attaches revocation
//! statuses to RITM-enabled TLS connections.
//!
//! Bytes are forwarded as soon as they are seen. The only bytes ever held
//! back are at most one record header (on RITM connections) and an
//! upstream agent's status record while deciding whether to replace it.

mod state;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use log::{debug, warn};

use crate::authdict::{CaId, RevocationStatus, SerialNumber};
use crate::dissemination::{ProveError, ReplicaSet};
use crate::monitor::{compare_roots, Comparison, MisbehaviorProof};
use crate::tls::{
    split_handshake_messages, Certificate, HandshakeKind, HandshakeView, RecordScanner, ScanEvent, TlsRecord,
    CT_CHANGE_CIPHER_SPEC, CT_HANDSHAKE, CT_REVOCATION_STATUS, EXT_RITM, VERSION_TLS12,
};

pub use state::{ConnKey, ConnState, ConnTable, Stage};

/// Payload of the record sent when the issuer is not replicated here.
pub const UNKNOWN_CA_NOTICE: u8 = 0x00;
/// Inactivity after which connection state is dropped.
pub const STATE_TIMEOUT: u64 = 300;
/// Give up on handshakes whose buffered messages grow past this.
const MAX_HANDSHAKE_BUFFER: usize = 1 << 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

#[derive(Debug, Default)]
pub struct AgentStats {
    pub statuses_injected: AtomicU64,
    pub notices_injected: AtomicU64,
    pub upstream_forwarded: AtomicU64,
    pub upstream_replaced: AtomicU64,
}

fn collect_handshake(ct: u8) -> bool {
    ct == CT_HANDSHAKE || ct == CT_REVOCATION_STATUS
}

fn collect_status(ct: u8) -> bool {
    ct == CT_REVOCATION_STATUS
}

#[derive(Clone, Debug)]
enum Inject {
    /// Status prepared when the certificate was seen.
    Handshake(Vec<u8>),
    Periodic,
}

#[derive(Clone, Debug)]
enum Hold {
    Idle,
    /// Holding the next record's header bytes; an injection may be due.
    Header(Option<Inject>),
    /// Holding an upstream status record until it is complete.
    Upstream(Option<Inject>),
}

/// Parser state for one connection, owned by whoever moves its bytes.
#[derive(Debug)]
pub struct Connection {
    key: ConnKey,
    c2s: RecordScanner,
    c2s_hs: Vec<u8>,
    s2c: RecordScanner,
    s2c_hs: Vec<u8>,
    ritm: bool,
    server_ccs: bool,
    version: u16,
    pending: Option<Inject>,
    hold: Hold,
    held: Vec<u8>,
}

impl Connection {
    pub fn new(key: ConnKey) -> Self {
        Connection {
            key,
            c2s: RecordScanner::new(collect_handshake),
            c2s_hs: Vec::new(),
            s2c: RecordScanner::new(collect_handshake),
            s2c_hs: Vec::new(),
            ritm: false,
            server_ccs: false,
            version: VERSION_TLS12,
            pending: None,
            hold: Hold::Idle,
            held: Vec::new(),
        }
    }

    pub fn key(&self) -> ConnKey {
        self.key
    }

    /// True once a RITM ClientHello was seen and not abandoned since.
    pub fn is_ritm(&self) -> bool {
        self.ritm
    }
}

/// Issuer and serial of the leaf certificate in a Certificate message.
pub fn leaf_identity(view: &HandshakeView) -> Option<(CaId, SerialNumber)> {
    let cert = Certificate::parse(view.certificates.first()?)?;
    Some((cert.issuer, cert.serial))
}

/// Scans a server→client handshake stream for the leaf certificate.
pub fn extract_server_identity(stream: &[u8]) -> Option<(CaId, SerialNumber)> {
    let mut scan = RecordScanner::new(|ct| ct == CT_HANDSHAKE);
    let mut hs = Vec::new();
    for ev in scan.feed(stream) {
        match ev {
            ScanEvent::Opaque => return None,
            ScanEvent::End(_, Some(p)) => {
                hs.extend_from_slice(&p);
                let (msgs, used) = split_handshake_messages(&hs);
                hs.drain(..used);
                for m in msgs {
                    let view = HandshakeView::from_message(&m).ok()?;
                    if view.kind == HandshakeKind::Certificate {
                        return leaf_identity(&view);
                    }
                }
            }
            _ => {}
        }
    }
    None
}

pub struct RevocationAgent {
    replicas: Arc<ReplicaSet>,
    delta: u64,
    table: Mutex<ConnTable>,
    reports: Mutex<Vec<MisbehaviorProof>>,
    pub stats: AgentStats,
}

impl RevocationAgent {
    /// `delta` is used for CAs the registry gives no interval for.
    pub fn new(replicas: Arc<ReplicaSet>, delta: u64) -> Self {
        assert!(delta > 0, "delta must be positive");
        RevocationAgent {
            replicas,
            delta,
            table: Mutex::new(ConnTable::default()),
            reports: Mutex::new(Vec::new()),
            stats: AgentStats::default(),
        }
    }

    pub fn replicas(&self) -> &Arc<ReplicaSet> {
        &self.replicas
    }

    pub fn table_len(&self) -> usize {
        self.table.lock().unwrap().len()
    }

    pub fn state(&self, key: &ConnKey) -> Option<ConnState> {
        self.table.lock().unwrap().get(key).cloned()
    }

    /// Equivocation evidence seen in upstream statuses since the last call.
    pub fn take_reports(&self) -> Vec<MisbehaviorProof> {
        std::mem::take(&mut self.reports.lock().unwrap())
    }

    pub fn close(&self, conn: &Connection) {
        self.table.lock().unwrap().remove(&conn.key);
    }

    pub fn evict_idle(&self, now: u64) -> usize {
        self.table.lock().unwrap().evict_idle(now, STATE_TIMEOUT)
    }

    fn delta_for(&self, ca: Option<CaId>) -> u64 {
        ca.and_then(|c| self.replicas.registry().get(&c).map(|e| e.delta))
            .unwrap_or(self.delta)
    }

    /// Creates the initial state for a RITM ClientHello, replacing any
    /// state left by an earlier handshake on the same 4-tuple.
    pub fn on_client_hello(&self, key: ConnKey, hello: &HandshakeView, now: u64) -> bool {
        if !hello.has_extension(EXT_RITM) {
            return false;
        }
        let old = self.table.lock().unwrap().insert(ConnState::new(key, now));
        if old.is_some() {
            debug!("{key:?}: new handshake supersedes existing state");
        }
        true
    }

    /// Handles the server's certificate: proves the leaf serial and
    /// returns the record to inject. `None` means the connection is not
    /// (or no longer) tracked.
    pub fn on_server_hello(&self, key: ConnKey, cert: &HandshakeView, version: u16, now: u64) -> Option<Vec<u8>> {
        let (ca, sn) = leaf_identity(cert)?;
        let mut table = self.table.lock().unwrap();
        let st = table.get_mut(&key)?;
        if st.stage != Stage::ClientHello {
            return None;
        }
        let record = self.status_record(&ca, &sn, version, true)?;
        st.stage = Stage::ServerHello;
        st.last_status = now.max(1);
        st.ca = Some(ca);
        st.sn = Some(sn);
        st.last_activity = now;
        Some(record)
    }

    pub fn on_finished(&self, key: &ConnKey) {
        let mut table = self.table.lock().unwrap();
        if let Some(st) = table.get_mut(key) {
            if st.stage == Stage::ServerHello {
                st.advance(Stage::Established);
            }
        }
    }

    /// Fresh status for an established connection if one is due.
    pub fn periodic_status(&self, key: &ConnKey, version: u16, now: u64) -> Option<Vec<u8>> {
        let mut table = self.table.lock().unwrap();
        let st = table.get_mut(key)?;
        if st.stage != Stage::Established || now.saturating_sub(st.last_status) < self.delta_for(st.ca) {
            return None;
        }
        let (ca, sn) = (st.ca?, st.sn.clone()?);
        let record = self.status_record(&ca, &sn, version, false)?;
        st.last_status = now.max(1);
        // an injection keeps a quiet but open connection alive
        st.last_activity = now;
        Some(record)
    }

    fn status_record(&self, ca: &CaId, sn: &SerialNumber, version: u16, notice: bool) -> Option<Vec<u8>> {
        match self.replicas.prove(ca, sn) {
            Ok(st) => {
                self.stats.statuses_injected.fetch_add(1, Ordering::Relaxed);
                Some(TlsRecord::new(CT_REVOCATION_STATUS, version, st.to_bytes()).to_bytes())
            }
            Err(e) => {
                match &e {
                    ProveError::UnknownCa(_) | ProveError::NotSynced(_) => debug!("no status for {ca}: {e}"),
                    ProveError::Dict(_) => warn!("replica for {ca} inconsistent: {e}"),
                }
                notice.then(|| {
                    self.stats.notices_injected.fetch_add(1, Ordering::Relaxed);
                    TlsRecord::new(CT_REVOCATION_STATUS, version, vec![UNKNOWN_CA_NOTICE]).to_bytes()
                })
            }
        }
    }

    /// Processes one in-order segment of one direction and returns the
    /// bytes to forward in that direction.
    pub fn inspect(&self, conn: &mut Connection, dir: Direction, input: &[u8], now: u64) -> Vec<u8> {
        if conn.ritm {
            if let Some(st) = self.table.lock().unwrap().get_mut(&conn.key) {
                st.last_activity = now;
            }
        }
        match dir {
            Direction::ClientToServer => {
                self.client_bytes(conn, input, now);
                input.to_vec()
            }
            Direction::ServerToClient => self.server_bytes(conn, input, now),
        }
    }

    /// Standalone injection toward the client, for when the server is
    /// silent. Only possible at a record boundary.
    pub fn poll(&self, conn: &mut Connection, now: u64) -> Option<Vec<u8>> {
        if !conn.ritm || !matches!(conn.hold, Hold::Idle) || !conn.s2c.at_boundary() {
            return None;
        }
        if !self.tracked(conn) {
            self.abandon(conn);
            return None;
        }
        match conn.pending.take() {
            Some(inject) => self.materialize(conn, inject, now),
            None => self.periodic_status(&conn.key, conn.version, now),
        }
    }

    fn tracked(&self, conn: &Connection) -> bool {
        self.table.lock().unwrap().get(&conn.key).is_some()
    }

    fn client_bytes(&self, conn: &mut Connection, input: &[u8], now: u64) {
        if conn.c2s.is_opaque() {
            return;
        }
        for ev in conn.c2s.feed(input) {
            match ev {
                ScanEvent::Header(h) if h.content_type != CT_HANDSHAKE => {
                    conn.c2s.make_opaque();
                    return;
                }
                ScanEvent::End(_, Some(p)) => {
                    conn.c2s_hs.extend_from_slice(&p);
                    let (msgs, used) = split_handshake_messages(&conn.c2s_hs);
                    conn.c2s_hs.drain(..used);
                    if let Some(m) = msgs.first() {
                        match HandshakeView::from_message(m) {
                            Ok(view) if view.kind == HandshakeKind::ClientHello => {
                                if self.on_client_hello(conn.key, &view, now) {
                                    conn.ritm = true;
                                }
                            }
                            Ok(_) => {}
                            Err(e) => warn!("{:?}: unparsable ClientHello ({e}), passing through", conn.key),
                        }
                        conn.c2s.make_opaque();
                        conn.c2s_hs = Vec::new();
                        return;
                    }
                    if conn.c2s_hs.len() > MAX_HANDSHAKE_BUFFER {
                        conn.c2s.make_opaque();
                        return;
                    }
                }
                ScanEvent::Opaque => return,
                _ => {}
            }
        }
    }

    /// Stops tracking: releases held bytes unchanged and drops state.
    fn abandon(&self, conn: &mut Connection) -> Vec<u8> {
        self.table.lock().unwrap().remove(&conn.key);
        conn.ritm = false;
        conn.pending = None;
        conn.hold = Hold::Idle;
        conn.s2c_hs = Vec::new();
        conn.s2c.make_opaque();
        std::mem::take(&mut conn.held)
    }

    fn materialize(&self, conn: &Connection, inject: Inject, now: u64) -> Option<Vec<u8>> {
        match inject {
            Inject::Handshake(rec) => Some(rec),
            Inject::Periodic => self.periodic_status(&conn.key, conn.version, now),
        }
    }

    fn server_bytes(&self, conn: &mut Connection, input: &[u8], now: u64) -> Vec<u8> {
        if !conn.ritm {
            return input.to_vec();
        }
        if !self.tracked(conn) {
            let mut out = self.abandon(conn);
            out.extend_from_slice(input);
            return out;
        }
        let mut out = Vec::with_capacity(input.len() + 700);
        let events = conn.s2c.feed(input);
        for (i, ev) in events.iter().enumerate() {
            match ev {
                ScanEvent::Boundary => {
                    let due = self.is_due(&conn.key, now);
                    let inject = conn.pending.take().or(due.then_some(Inject::Periodic));
                    conn.hold = Hold::Header(inject);
                }
                ScanEvent::Data(s, e) => {
                    if matches!(conn.hold, Hold::Idle) {
                        out.extend_from_slice(&input[*s..*e]);
                    } else {
                        conn.held.extend_from_slice(&input[*s..*e]);
                    }
                }
                ScanEvent::Header(h) => {
                    conn.version = h.version;
                    let Hold::Header(inject) = std::mem::replace(&mut conn.hold, Hold::Idle) else {
                        continue;
                    };
                    if h.content_type == CT_REVOCATION_STATUS && self.stage(&conn.key) >= Some(Stage::ServerHello) {
                        conn.hold = Hold::Upstream(inject);
                        continue;
                    }
                    if let Some(inj) = inject {
                        if let Some(rec) = self.materialize(conn, inj, now) {
                            out.extend_from_slice(&rec);
                        }
                    }
                    out.append(&mut conn.held);
                }
                ScanEvent::End(h, payload) => match h.content_type {
                    CT_REVOCATION_STATUS => {
                        if let Hold::Upstream(inject) = std::mem::replace(&mut conn.hold, Hold::Idle) {
                            let upstream = std::mem::take(&mut conn.held);
                            let payload = payload.as_deref().unwrap_or_default();
                            out.extend(self.coexist(conn, &upstream, payload, inject.is_some(), now));
                        }
                    }
                    CT_CHANGE_CIPHER_SPEC => conn.server_ccs = true,
                    CT_HANDSHAKE => {
                        if conn.server_ccs {
                            // first protected handshake record is Finished
                            self.on_finished(&conn.key);
                            conn.s2c.set_collect(collect_status);
                            continue;
                        }
                        let Some(p) = payload else { continue };
                        if let Err(why) = self.server_handshake(conn, p, now) {
                            warn!("{:?}: {why}, passing through", conn.key);
                            out.extend(self.abandon(conn));
                            for rest in &events[i + 1..] {
                                if let ScanEvent::Data(s, e) = rest {
                                    out.extend_from_slice(&input[*s..*e]);
                                }
                            }
                            return out;
                        }
                    }
                    _ => {}
                },
                ScanEvent::Opaque => {
                    warn!("{:?}: server stream is not TLS, passing through", conn.key);
                    out.extend(self.abandon(conn));
                }
            }
        }
        out
    }

    fn stage(&self, key: &ConnKey) -> Option<Stage> {
        self.table.lock().unwrap().get(key).map(|s| s.stage)
    }

    fn is_due(&self, key: &ConnKey, now: u64) -> bool {
        let table = self.table.lock().unwrap();
        table.get(key).is_some_and(|st| {
            st.stage == Stage::Established && now.saturating_sub(st.last_status) >= self.delta_for(st.ca)
        })
    }

    fn server_handshake(&self, conn: &mut Connection, payload: &[u8], now: u64) -> Result<(), String> {
        conn.s2c_hs.extend_from_slice(payload);
        let (msgs, used) = split_handshake_messages(&conn.s2c_hs);
        conn.s2c_hs.drain(..used);
        if conn.s2c_hs.len() > MAX_HANDSHAKE_BUFFER {
            return Err("oversized handshake message".into());
        }
        for m in msgs {
            let view = HandshakeView::from_message(&m).map_err(|e| e.to_string())?;
            match view.kind {
                HandshakeKind::Certificate => {
                    if self.stage(&conn.key) != Some(Stage::ClientHello) {
                        continue;
                    }
                    if leaf_identity(&view).is_none() {
                        return Err("unparsable leaf certificate".into());
                    }
                    if let Some(rec) = self.on_server_hello(conn.key, &view, conn.version, now) {
                        conn.pending = Some(Inject::Handshake(rec));
                    }
                }
                HandshakeKind::Finished => self.on_finished(&conn.key),
                _ => {}
            }
        }
        Ok(())
    }

    /// Decides between an upstream agent's status record and our own.
    fn coexist(&self, conn: &mut Connection, upstream: &[u8], payload: &[u8], had_pending: bool, now: u64) -> Vec<u8> {
        let (ca, sn) = {
            let table = self.table.lock().unwrap();
            match table.get(&conn.key) {
                Some(st) => (st.ca, st.sn.clone()),
                None => (None, None),
            }
        };
        let forward = |agent: &Self| {
            agent.stats.upstream_forwarded.fetch_add(1, Ordering::Relaxed);
            agent.touch_status(&conn.key, now);
            upstream.to_vec()
        };
        let (Some(ca), Some(sn)) = (ca, sn) else {
            return forward(self);
        };
        let local = self.replicas.snapshot(&ca).and_then(|r| r.signed_root.clone());
        let replace = match (RevocationStatus::from_bytes(payload), &local) {
            (Some(theirs), Some(ours)) => {
                if ours.n > theirs.signed_root.n {
                    true
                } else {
                    if ours.n == theirs.signed_root.n && ours.root != theirs.signed_root.root {
                        self.report(ours, &theirs);
                    }
                    false
                }
            }
            (None, Some(_)) => payload == [UNKNOWN_CA_NOTICE],
            _ => false,
        };
        if replace {
            if let Some(rec) = self.status_record(&ca, &sn, conn.version, false) {
                self.stats.upstream_replaced.fetch_add(1, Ordering::Relaxed);
                self.touch_status(&conn.key, now);
                return rec;
            }
        }
        if had_pending {
            debug!("{:?}: upstream status present, not adding ours", conn.key);
        }
        forward(self)
    }

    fn touch_status(&self, key: &ConnKey, now: u64) {
        if let Some(st) = self.table.lock().unwrap().get_mut(key) {
            st.last_status = now.max(1);
        }
    }

    fn report(&self, ours: &crate::authdict::SignedRoot, theirs: &RevocationStatus) {
        let Some(entry) = self.replicas.registry().get(&ours.ca_id) else {
            return;
        };
        if let Ok(Comparison::Misbehavior(p)) = compare_roots(ours, &theirs.signed_root, &entry.key) {
            warn!("CA {} equivocates at n = {}", ours.ca_id, ours.n);
            self.reports.lock().unwrap().push(p);
        }
    }
}
