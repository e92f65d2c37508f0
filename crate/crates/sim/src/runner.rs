//! Deterministic discrete-event runner. Every party is the real
//! implementation; only time and the links between parties are simulated.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::rc::Rc;
use std::sync::Arc;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ritm_core::authdict::{CaId, CaSigningKey, SerialNumber, SignedRoot};
use ritm_core::ca::CertificateAuthority;
use ritm_core::client::{ClientPolicy, ConnState, RitmClient, StatusItem, StatusStripper};
use ritm_core::dissemination::{
    bandwidth_account, DistributionPoint, EdgeServer, Endpoint, FetchError, Publication, PublicationRecord,
    ReplicaSet, Response, UpdateSource,
};
use ritm_core::monitor::{compare_roots, Comparison, MisbehaviorProof};
use ritm_core::ra::{ConnKey, Connection, Direction, RevocationAgent};
use ritm_core::registry::CaRegistry;
use ritm_core::tls::{Certificate, StubServer};

use crate::metrics::{ConnectionLog, Detection, Finding, MetricsReport};
use crate::scenario::{Fault, Scenario, ScenarioInvalid, TraceSource};
use crate::trace::{ca_id_for, generate_trace, RevocationTrace, TraceParams};

/// Absolute time of scenario second 0.
pub const START: u64 = 1_600_000_000;
/// Server certificates use 4-byte serials so they never collide with
/// 3-byte trace serials.
pub const SERVER_SERIAL_BASE: u64 = 0x7f00_0000;
const FORK_SERIAL_BASE: u64 = 0x7e00_0000;
const APP_CHUNK: &[u8] = &[0x5a; 64];

/// Builds the trace a scenario asks for. Times are scenario offsets.
pub fn scenario_trace(s: &Scenario) -> Result<RevocationTrace, ScenarioInvalid> {
    let tr = &s.trace;
    let trace = match tr.profile {
        TraceSource::None => RevocationTrace::default(),
        TraceSource::Csv => {
            let path = tr.path.as_ref().expect("validated");
            RevocationTrace::from_csv_file(path).map_err(|e| ScenarioInvalid {
                location: "trace.path".into(),
                msg: e.to_string(),
            })?
        }
        TraceSource::Steady | TraceSource::Heartbleed => {
            let span = if tr.span == 0 { s.duration - tr.start } else { tr.span };
            let params = TraceParams {
                cas: s.topology.cas,
                per_ca_mean: tr.per_ca_mean,
                total: tr.total,
                start: tr.start,
                span,
                ca_sigma: tr.ca_sigma,
                peak_multiple: tr.peak_multiple,
                peak_at: tr.peak_at,
            };
            generate_trace(tr.profile().expect("synthetic"), &params, s.seed)
        }
    };
    if trace.cas_referenced() > s.topology.cas {
        return Err(ScenarioInvalid {
            location: "trace".into(),
            msg: format!("trace references {} CAs, topology has {}", trace.cas_referenced(), s.topology.cas),
        });
    }
    if trace.events.last().is_some_and(|e| e.time >= s.duration) {
        return Err(ScenarioInvalid {
            location: "trace".into(),
            msg: "events after scenario end".into(),
        });
    }
    Ok(trace)
}

pub fn run_scenario(s: &Scenario) -> Result<MetricsReport, ScenarioInvalid> {
    s.validate()?;
    let trace = scenario_trace(s)?;
    Ok(Sim::new(s, &trace).run())
}

/// CA registry a scenario runs with; keys are derived from the seed.
pub fn scenario_registry(s: &Scenario) -> CaRegistry {
    let mut key_rng = ChaCha8Rng::seed_from_u64(s.seed);
    key_rng.set_stream(1);
    let mut registry = CaRegistry::new();
    for i in 0..s.topology.cas {
        let key = CaSigningKey::generate(&mut key_rng);
        let (ca, _) = CertificateAuthority::new(ca_id_for(i), key, s.delta, s.chain_length, START, &mut key_rng);
        registry.insert(ca.ca_id(), ca.public_key(), s.delta);
    }
    registry
}

/// Runs with an explicit trace instead of the one the scenario describes.
pub fn run_with_trace(s: &Scenario, trace: &RevocationTrace) -> Result<MetricsReport, ScenarioInvalid> {
    s.validate()?;
    trace.validate().map_err(|e| ScenarioInvalid {
        location: "trace".into(),
        msg: e.to_string(),
    })?;
    Ok(Sim::new(s, trace).run())
}

#[derive(Clone)]
struct SharedDp(Rc<RefCell<DistributionPoint>>);

impl UpdateSource for SharedDp {
    fn fetch(&mut self, ep: &Endpoint, now: u64) -> Result<Response, FetchError> {
        self.0.borrow_mut().fetch(ep, now)
    }
}

type Edge = EdgeServer<SharedDp>;

/// Edge link to one RA that loses responses.
struct Lossy<'a> {
    inner: &'a mut Edge,
    p: f64,
    rng: &'a mut ChaCha8Rng,
    dropped: &'a mut u64,
}

impl UpdateSource for Lossy<'_> {
    fn fetch(&mut self, ep: &Endpoint, now: u64) -> Result<Response, FetchError> {
        let r = self.inner.fetch(ep, now)?;
        if self.p > 0.0 && self.rng.gen_bool(self.p) {
            *self.dropped += 1;
            return Err(FetchError::Unreachable);
        }
        Ok(r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    Fault(usize),
    FaultEnd(usize),
    Refresh { ca: usize, gen: u64 },
    Revocations(usize),
    RaPoll(usize),
    Connect(usize),
    ServerData(usize),
    AgentPoll(usize),
    Deadline(usize),
    Monitor,
}

struct CaNode {
    main: CertificateAuthority,
    fork: Option<CertificateAuthority>,
    gen: u64,
}

struct RaNode {
    agent: Arc<RevocationAgent>,
    edge: usize,
    drop_p: f64,
}

struct Conn {
    ra: usize,
    opened: u64,
    client: RitmClient,
    server: StubServer,
    link: Connection,
    observer: StatusStripper,
    observer_ok: bool,
    suppressed: bool,
    statuses: u64,
    ended: Option<u64>,
    deadline_pending: bool,
}

struct Sim<'a> {
    s: &'a Scenario,
    trace: &'a RevocationTrace,
    now: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<(u64, u64, Ev)>>,
    key_rng: ChaCha8Rng,
    poll_rng: ChaCha8Rng,
    drop_rng: ChaCha8Rng,
    monitor_rng: ChaCha8Rng,
    registry: CaRegistry,
    policy: Arc<ClientPolicy>,
    cas: Vec<CaNode>,
    dps: Vec<Rc<RefCell<DistributionPoint>>>,
    edges: Vec<Edge>,
    ras: Vec<RaNode>,
    conns: Vec<Option<Conn>>,
    certs: Vec<Certificate>,
    batches: Vec<(usize, Vec<SerialNumber>)>,
    records: Vec<PublicationRecord>,
    seen_proofs: HashSet<Vec<u8>>,
    forks: u64,
    report: MetricsReport,
}

impl<'a> Sim<'a> {
    fn new(s: &'a Scenario, trace: &'a RevocationTrace) -> Self {
        let t = &s.topology;
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(s.seed);
            r.set_stream(k);
            r
        };
        let mut key_rng = stream(1);
        let mut registry = CaRegistry::new();
        let mut cas = Vec::with_capacity(t.cas);
        let mut initial = Vec::with_capacity(t.cas);
        for i in 0..t.cas {
            let key = CaSigningKey::generate(&mut key_rng);
            let (ca, msg) = CertificateAuthority::new(ca_id_for(i), key, s.delta, s.chain_length, START, &mut key_rng);
            registry.insert(ca.ca_id(), ca.public_key(), s.delta);
            cas.push(CaNode {
                main: ca,
                fork: None,
                gen: 0,
            });
            initial.push(msg);
        }
        let dps: Vec<_> = (0..t.dps)
            .map(|_| Rc::new(RefCell::new(DistributionPoint::new(registry.clone()))))
            .collect();
        let edges = (0..t.edges)
            .map(|e| EdgeServer::new(SharedDp(dps[e % t.dps].clone()), t.edge_ttl))
            .collect();
        let ras = (0..t.ras)
            .map(|r| RaNode {
                agent: Arc::new(RevocationAgent::new(Arc::new(ReplicaSet::new(registry.clone())), s.delta)),
                edge: r % t.edges,
                drop_p: 0.0,
            })
            .collect();
        let certs = (0..t.connections)
            .map(|i| {
                let ca = &cas[i % t.cas].main;
                let serial = SerialNumber::from_u64(SERVER_SERIAL_BASE + i as u64);
                let not_after = START + s.duration + 10 * 365 * 86_400;
                Certificate::issue(ca.signing_key(), ca.ca_id(), serial, &format!("server{i}.test"), not_after)
            })
            .collect();
        let mut policy = ClientPolicy::new(registry.clone(), s.delta);
        policy.grace = t.grace;
        policy.expect_ritm = t.expect_ritm;

        let mut sim = Sim {
            s,
            trace,
            now: START,
            seq: 0,
            queue: BinaryHeap::new(),
            key_rng,
            poll_rng: stream(2),
            drop_rng: stream(3),
            monitor_rng: stream(4),
            registry,
            policy: Arc::new(policy),
            cas,
            dps,
            edges,
            ras,
            conns: (0..t.connections).map(|_| None).collect(),
            certs,
            batches: Vec::new(),
            records: Vec::new(),
            seen_proofs: HashSet::new(),
            forks: 0,
            report: MetricsReport {
                seed: s.seed,
                delta: s.delta,
                duration: s.duration,
                cas: t.cas,
                bandwidth: vec![vec![0; s.duration.div_ceil(s.delta) as usize]; t.ras],
                trace_daily: trace.daily_counts(0),
                permanent_faults: s.faults.iter().any(Fault::is_permanent),
                ..Default::default()
            },
        };
        for (i, msg) in initial.into_iter().enumerate() {
            sim.publish(i, false, Publication::Issuance(msg));
            let p = sim.cas[i].main.refresh(START, &mut sim.key_rng);
            sim.publish(i, false, p);
            sim.at(START + s.delta, Ev::Refresh { ca: i, gen: 0 });
        }
        sim
    }

    fn at(&mut self, time: u64, ev: Ev) {
        self.seq += 1;
        self.queue.push(Reverse((time, self.seq, ev)));
    }

    fn rel(&self) -> u64 {
        self.now - START
    }

    fn run(mut self) -> MetricsReport {
        let s = self.s;
        let mut last_key = None;
        for e in &self.trace.events {
            if last_key == Some((e.time, e.ca)) {
                self.batches.last_mut().expect("batch").1.push(e.serial.clone());
                continue;
            }
            last_key = Some((e.time, e.ca));
            self.batches.push((e.ca, vec![e.serial.clone()]));
            let idx = self.batches.len() - 1;
            self.at(START + e.time, Ev::Revocations(idx));
        }
        for (i, f) in s.faults.iter().enumerate() {
            let (from, until) = match f {
                Fault::RevokeServerCert { at, .. } | Fault::Equivocate { at, .. } => (*at, None),
                Fault::SuppressStatuses { from, .. } => (*from, None),
                Fault::DropDeliveries { from, until, .. } | Fault::DpOutage { from, until, .. } => (*from, *until),
            };
            self.at(START + from, Ev::Fault(i));
            if let Some(u) = until {
                self.at(START + u, Ev::FaultEnd(i));
            }
        }
        for r in 0..self.ras.len() {
            self.at(START, Ev::RaPoll(r));
        }
        for c in 0..self.conns.len() {
            let t = START + s.topology.connect_at + c as u64 * s.topology.connect_spacing;
            self.at(t, Ev::Connect(c));
        }
        if s.monitor.enabled {
            self.at(START + s.monitor_interval(), Ev::Monitor);
        }

        let end = START + s.duration;
        while let Some(Reverse((t, _, ev))) = self.queue.pop() {
            if t >= end {
                break;
            }
            self.now = t;
            self.handle(ev);
        }
        self.now = end;
        self.finish()
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::Fault(i) => self.fault(i, true),
            Ev::FaultEnd(i) => self.fault(i, false),
            Ev::Refresh { ca, gen } => self.refresh(ca, gen),
            Ev::Revocations(b) => {
                let (ca, serials) = self.batches[b].clone();
                self.revoke(ca, &serials);
            }
            Ev::RaPoll(r) => self.ra_poll(r),
            Ev::Connect(c) => self.connect(c),
            Ev::ServerData(c) => self.server_data(c),
            Ev::AgentPoll(c) => self.agent_poll(c),
            Ev::Deadline(c) => self.deadline(c),
            Ev::Monitor => self.monitor(),
        }
    }

    fn publish(&mut self, ca: usize, fork: bool, msg: Publication) {
        let forked = self.cas[ca].fork.is_some();
        if !fork {
            if let Publication::Issuance(m) = &msg {
                self.report.revocations_published += m.serials.len() as u64;
            }
            self.records.push(PublicationRecord {
                time: self.now,
                message: msg.clone(),
            });
        }
        for (d, dp) in self.dps.iter().enumerate() {
            let target = if !forked { true } else if fork { d == 1 } else { d != 1 };
            if target {
                if let Err(e) = dp.borrow_mut().publish(msg.clone()) {
                    warn!("dp{d} rejected publication for CA {ca}: {e}");
                }
            }
        }
    }

    fn branches(&mut self, ca: usize) -> Vec<(bool, &mut CertificateAuthority)> {
        let node = &mut self.cas[ca];
        let mut out = vec![(false, &mut node.main)];
        if let Some(f) = node.fork.as_mut() {
            out.push((true, f));
        }
        out
    }

    fn refresh(&mut self, ca: usize, gen: u64) {
        if self.cas[ca].gen != gen {
            return;
        }
        let now = self.now;
        let mut rng = std::mem::replace(&mut self.key_rng, ChaCha8Rng::seed_from_u64(0));
        let pubs: Vec<(bool, Publication)> = self
            .branches(ca)
            .into_iter()
            .map(|(fork, c)| (fork, c.refresh(now, &mut rng)))
            .collect();
        self.key_rng = rng;
        let reanchor = pubs.iter().any(|(_, p)| matches!(p, Publication::Issuance(_)));
        for (fork, p) in pubs {
            self.publish(ca, fork, p);
        }
        if reanchor {
            self.cas[ca].gen += 1;
        }
        let gen = self.cas[ca].gen;
        self.at(now + self.s.delta, Ev::Refresh { ca, gen });
    }

    /// Revokes on every branch, then publishes a fresh statement.
    fn revoke(&mut self, ca: usize, serials: &[SerialNumber]) {
        let now = self.now;
        let mut rng = std::mem::replace(&mut self.key_rng, ChaCha8Rng::seed_from_u64(0));
        let mut pubs = Vec::new();
        for (fork, c) in self.branches(ca) {
            match c.revoke(serials, now, &mut rng) {
                Ok(m) => {
                    pubs.push((fork, Publication::Issuance(m)));
                    pubs.push((fork, c.refresh(now, &mut rng)));
                }
                Err(e) => warn!("CA {ca} cannot revoke batch: {e}"),
            }
        }
        self.key_rng = rng;
        if pubs.is_empty() {
            return;
        }
        for (fork, p) in pubs {
            self.publish(ca, fork, p);
        }
        self.cas[ca].gen += 1;
        let gen = self.cas[ca].gen;
        self.at(now + self.s.delta, Ev::Refresh { ca, gen });
    }

    fn fault(&mut self, i: usize, start: bool) {
        let f = self.s.faults[i].clone();
        debug!("t={} fault {} {}", self.rel(), f.name(), if start { "begins" } else { "ends" });
        match f {
            Fault::RevokeServerCert { connection, .. } => {
                let ca = connection % self.cas.len();
                let serial = self.certs[connection].serial.clone();
                self.revoke(ca, &[serial]);
                self.report.detections.push(Detection {
                    connection,
                    published: self.rel(),
                    detected: None,
                    state: ConnState::Handshaking,
                });
            }
            Fault::SuppressStatuses { connection, .. } => {
                for (c, conn) in self.conns.iter_mut().enumerate() {
                    if connection.is_none_or(|x| x == c) {
                        if let Some(conn) = conn {
                            conn.suppressed = true;
                        }
                    }
                }
            }
            Fault::Equivocate { ca, .. } => {
                let now = self.now;
                if self.cas[ca].fork.is_some() {
                    return;
                }
                let mut fork = self.cas[ca].main.clone();
                let a = SerialNumber::from_u64(FORK_SERIAL_BASE + 2 * self.forks);
                let b = SerialNumber::from_u64(FORK_SERIAL_BASE + 2 * self.forks + 1);
                self.forks += 1;
                let ma = self.cas[ca].main.revoke(&[a], now, &mut self.key_rng).expect("fresh serial");
                let fa = self.cas[ca].main.refresh(now, &mut self.key_rng);
                let mb = fork.revoke(&[b], now, &mut self.key_rng).expect("fresh serial");
                let fb = fork.refresh(now, &mut self.key_rng);
                self.cas[ca].fork = Some(fork);
                self.publish(ca, false, Publication::Issuance(ma));
                self.publish(ca, false, fa);
                self.publish(ca, true, Publication::Issuance(mb));
                self.publish(ca, true, fb);
                self.cas[ca].gen += 1;
                let gen = self.cas[ca].gen;
                self.at(now + self.s.delta, Ev::Refresh { ca, gen });
            }
            Fault::DropDeliveries { ra, probability, .. } => {
                self.ras[ra].drop_p = if start { probability } else { 0.0 };
            }
            Fault::DpOutage { dp, .. } => self.dps[dp].borrow_mut().set_reachable(!start),
        }
    }

    fn window(&self) -> usize {
        (self.rel() / self.s.delta) as usize
    }

    fn sync_ra(&mut self, r: usize, lossy: bool) {
        let now = self.now;
        let node = &self.ras[r];
        let mut dropped = 0;
        let results = {
            let mut src = Lossy {
                inner: &mut self.edges[node.edge],
                p: if lossy { node.drop_p } else { 0.0 },
                rng: &mut self.drop_rng,
                dropped: &mut dropped,
            };
            node.agent.replicas().sync_all(&mut src, now)
        };
        self.report.dropped_deliveries += dropped;
        let mut bytes = 0u64;
        for res in results.values() {
            match res {
                Ok(rep) => bytes += rep.bytes as u64,
                Err(_) => self.report.sync_failures += 1,
            }
        }
        let w = self.window();
        if let Some(slot) = self.report.bandwidth[r].get_mut(w) {
            *slot += bytes;
        }
    }

    fn ra_poll(&mut self, r: usize) {
        self.sync_ra(r, true);
        self.ras[r].agent.evict_idle(self.now);
        let d = self.s.delta;
        let lo = ((d as f64) * (1.0 - self.s.topology.poll_jitter)).ceil().max(1.0) as u64;
        let next = self.now + self.poll_rng.gen_range(lo.min(d)..=d);
        self.at(next, Ev::RaPoll(r));
    }

    fn connect(&mut self, c: usize) {
        let t = &self.s.topology;
        let ra = c % t.ras;
        let key = ConnKey::new(
            ([10, 0, (c >> 8) as u8, c as u8], 40_000).into(),
            ([192, 0, 2, 1], 443).into(),
        );
        let suppressed = self.s.faults.iter().any(|f| match f {
            Fault::SuppressStatuses { connection, from } => {
                connection.is_none_or(|x| x == c) && START + from <= self.now
            }
            _ => false,
        });
        let mut conn = Conn {
            ra,
            opened: self.rel(),
            client: RitmClient::new(self.policy.clone(), t.client_ritm),
            server: StubServer::new(vec![self.certs[c].to_bytes()]),
            link: Connection::new(key),
            observer: StatusStripper::new(),
            observer_ok: true,
            suppressed,
            statuses: 0,
            ended: None,
            deadline_pending: false,
        };
        let agent = self.ras[ra].agent.clone();
        let hello = conn.client.hello(self.now);
        let up = agent.inspect(&mut conn.link, Direction::ClientToServer, &hello, self.now);
        let reply = conn.server.on_client_bytes(&up);
        self.conns[c] = Some(conn);
        self.server_sends(c, reply);
        if self.is_open(c) {
            self.at(self.now + self.s.delta, Ev::AgentPoll(c));
            if t.app_interval > 0 {
                self.at(self.now + t.app_interval, Ev::ServerData(c));
            }
        }
    }

    fn is_open(&self, c: usize) -> bool {
        self.conns[c].as_ref().is_some_and(|x| x.ended.is_none())
    }

    /// Server bytes through the RA to the client, then the exchange runs
    /// until both ends are quiet.
    fn server_sends(&mut self, c: usize, bytes: Vec<u8>) {
        let now = self.now;
        let Some(conn) = self.conns[c].as_mut() else { return };
        let agent = self.ras[conn.ra].agent.clone();
        let mut down = bytes;
        while !down.is_empty() {
            let out = agent.inspect(&mut conn.link, Direction::ServerToClient, &down, now);
            let reply = Self::deliver(conn, out, now, &mut self.report.status_sizes);
            if reply.is_empty() {
                break;
            }
            let up = agent.inspect(&mut conn.link, Direction::ClientToServer, &reply, now);
            down = conn.server.on_client_bytes(&up);
        }
        self.after_client(c);
    }

    /// RA → client link: observes statuses, applies suppression.
    fn deliver(conn: &mut Conn, bytes: Vec<u8>, now: u64, sizes: &mut Vec<usize>) -> Vec<u8> {
        let mut clean = None;
        if conn.observer_ok {
            match conn.observer.feed(&bytes) {
                Ok((c, items)) => {
                    for item in items {
                        conn.statuses += 1;
                        if let StatusItem::Status(st) = item {
                            sizes.push(st.encoded_len());
                        }
                    }
                    clean = Some(c);
                }
                Err(_) => conn.observer_ok = false,
            }
        }
        let delivered = match (conn.suppressed, clean) {
            (true, Some(c)) => c,
            _ => bytes,
        };
        if delivered.is_empty() {
            return Vec::new();
        }
        conn.client.on_server_bytes(&delivered, now)
    }

    fn after_client(&mut self, c: usize) {
        let now = self.now;
        let rel = self.rel();
        let Some(conn) = self.conns[c].as_mut() else { return };
        if conn.ended.is_none() && !conn.client.is_open() {
            conn.ended = Some(rel);
            self.ras[conn.ra].agent.close(&conn.link);
            for d in self.report.detections.iter_mut().filter(|d| d.connection == c && d.detected.is_none()) {
                d.detected = Some(rel);
                d.state = conn.client.state();
            }
            return;
        }
        if conn.ended.is_none() && !conn.deadline_pending {
            if let Some(d) = conn.client.deadline() {
                conn.deadline_pending = true;
                self.at(d.max(now), Ev::Deadline(c));
            }
        }
    }

    fn deadline(&mut self, c: usize) {
        let now = self.now;
        if let Some(conn) = self.conns[c].as_mut() {
            conn.deadline_pending = false;
            conn.client.tick(now);
        }
        self.after_client(c);
    }

    fn agent_poll(&mut self, c: usize) {
        if !self.is_open(c) {
            return;
        }
        let now = self.now;
        let conn = self.conns[c].as_mut().expect("open");
        let agent = self.ras[conn.ra].agent.clone();
        if let Some(rec) = agent.poll(&mut conn.link, now) {
            let reply = Self::deliver(conn, rec, now, &mut self.report.status_sizes);
            if !reply.is_empty() {
                let up = agent.inspect(&mut conn.link, Direction::ClientToServer, &reply, now);
                let down = conn.server.on_client_bytes(&up);
                self.server_sends(c, down);
            }
        }
        self.after_client(c);
        if !self.is_open(c) {
            return;
        }
        let conn = self.conns[c].as_ref().expect("open");
        let d = self.s.delta;
        if let Some(st) = agent.state(&conn.link.key()) {
            let due = st.last_status + d;
            let next = if due > now { due } else { now + (d / 10).max(1) };
            self.at(next, Ev::AgentPoll(c));
        }
    }

    fn server_data(&mut self, c: usize) {
        if !self.is_open(c) {
            return;
        }
        let data = self.conns[c].as_ref().expect("open").server.app_data(APP_CHUNK);
        self.server_sends(c, data);
        if self.is_open(c) {
            self.at(self.now + self.s.topology.app_interval, Ev::ServerData(c));
        }
    }

    fn record_finding(&mut self, source: &'static str, proof: MisbehaviorProof) {
        if self.seen_proofs.insert(proof.to_bytes().to_vec()) {
            self.report.misbehavior.push(Finding {
                time: self.rel(),
                source,
                proof,
            });
        }
    }

    fn compare(&mut self, source: &'static str, a: &SignedRoot, b: &SignedRoot) {
        let Some(entry) = self.registry.get(&a.ca_id) else { return };
        self.report.comparisons += 1;
        if let Ok(Comparison::Misbehavior(p)) = compare_roots(a, b, &entry.key) {
            self.record_finding(source, p);
        }
    }

    fn local_root(&self, r: usize, ca: &CaId) -> Option<SignedRoot> {
        self.ras[r].agent.replicas().snapshot(ca)?.signed_root.clone()
    }

    fn collect_evidence(&mut self) {
        for r in 0..self.ras.len() {
            for p in self.ras[r].agent.take_reports() {
                self.record_finding("agent", p);
            }
        }
        for c in 0..self.conns.len() {
            let ev = self.conns[c].as_mut().map(|x| x.client.take_evidence()).unwrap_or_default();
            for p in ev {
                self.record_finding("client", p);
            }
        }
    }

    /// One round: every RA checks its replicas against a random edge, and
    /// wired pairs exchange their roots.
    fn monitor(&mut self) {
        let now = self.now;
        self.report.monitor_rounds += 1;
        let ids: Vec<CaId> = self.registry.ids().collect();
        for r in 0..self.ras.len() {
            let e = self.monitor_rng.gen_range(0..self.edges.len());
            for ca in &ids {
                let remote = match self.edges[e].fetch(&Endpoint::Root { ca: *ca }, now) {
                    Ok(resp) if resp.status == 200 => SignedRoot::from_bytes(&resp.body),
                    _ => None,
                };
                if let (Some(local), Some(remote)) = (self.local_root(r, ca), remote) {
                    self.compare("monitor", &local, &remote);
                }
            }
        }
        for [a, b] in self.s.monitor.pairs.clone() {
            for ca in &ids {
                if let (Some(x), Some(y)) = (self.local_root(a, ca), self.local_root(b, ca)) {
                    self.compare("pair", &x, &y);
                }
            }
        }
        self.collect_evidence();
        self.at(now + self.s.monitor_interval(), Ev::Monitor);
    }

    fn finish(mut self) -> MetricsReport {
        self.collect_evidence();
        // one quiescent round so late revocations are included
        for r in 0..self.ras.len() {
            self.sync_ra(r, false);
        }
        let per_ca = self.trace.per_ca(self.cas.len());
        for r in 0..self.ras.len() {
            let reps = self.ras[r].agent.replicas().clone();
            let mut converged = true;
            let mut conserved = true;
            for (i, node) in self.cas.iter().enumerate() {
                let Some(rep) = reps.snapshot(&node.main.ca_id()) else {
                    converged = false;
                    continue;
                };
                converged &= rep.dict.len() == node.main.dictionary().len() && rep.dict.root() == node.main.dictionary().root();
                let mut counted: BTreeMap<&SerialNumber, usize> = BTreeMap::new();
                for l in rep.dict.leaves() {
                    *counted.entry(&l.serial).or_default() += 1;
                }
                conserved &= per_ca[i].iter().all(|s| counted.get(s) == Some(&1));
            }
            self.report.converged.push(converged);
            self.report.conserved.push(conserved);
            self.report.storage.push(reps.storage_bytes() as u64);
        }
        let ids: Vec<CaId> = self.registry.ids().collect();
        self.report.published_bandwidth =
            bandwidth_account(&self.records, &ids, self.s.delta, START, START + self.s.duration);
        for (id, conn) in self.conns.iter_mut().enumerate() {
            let Some(conn) = conn else { continue };
            let events = conn
                .client
                .events()
                .iter()
                .map(|e| {
                    let mut e = e.clone();
                    e.time -= START;
                    e
                })
                .collect();
            self.report.connections.push(ConnectionLog {
                id,
                ra: conn.ra,
                opened: conn.opened,
                state: conn.client.state(),
                ended: conn.ended,
                last_valid_status: conn.client.session().verdict.last_valid_status.saturating_sub(START),
                statuses: conn.statuses,
                events,
            });
        }
        self.report
    }
}
