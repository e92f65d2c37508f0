#![allow(dead_code)]

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ritm_core::authdict::{CaId, CaSigningKey, SerialNumber};
use ritm_core::ca::CertificateAuthority;
use ritm_core::client::{ClientPolicy, RitmClient};
use ritm_core::dissemination::{DistributionPoint, Publication, ReplicaSet};
use ritm_core::ra::{ConnKey, Connection, Direction, RevocationAgent};
use ritm_core::registry::CaRegistry;
use ritm_core::tls::{Certificate, StubServer};

pub const DELTA: u64 = 10;
pub const T0: u64 = 1_700_000_000;

pub struct World {
    pub rng: ChaCha8Rng,
    pub cas: Vec<CertificateAuthority>,
    pub registry: CaRegistry,
    pub dp: DistributionPoint,
}

impl World {
    pub fn new(n_cas: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut registry = CaRegistry::new();
        let mut cas = Vec::new();
        let mut initial = Vec::new();
        for i in 0..n_cas {
            let key = CaSigningKey::generate(&mut rng);
            let (ca, msg) = CertificateAuthority::new(CaId::from_u64(100 + i as u64), key, DELTA, 10_000, T0, &mut rng);
            registry.insert(ca.ca_id(), ca.public_key(), DELTA);
            cas.push(ca);
            initial.push(msg);
        }
        let mut dp = DistributionPoint::new(registry.clone());
        for m in initial {
            dp.publish(Publication::Issuance(m)).unwrap();
        }
        let mut w = World { rng, cas, registry, dp };
        w.refresh(T0);
        w
    }

    pub fn refresh(&mut self, now: u64) {
        for ca in &mut self.cas {
            let p = ca.refresh(now, &mut self.rng);
            self.dp.publish(p).unwrap();
        }
    }

    pub fn revoke(&mut self, ca: usize, serials: &[u64], now: u64) {
        let s: Vec<_> = serials.iter().map(|v| SerialNumber::from_u64(*v)).collect();
        let msg = self.cas[ca].revoke(&s, now, &mut self.rng).unwrap();
        self.dp.publish(Publication::Issuance(msg)).unwrap();
        self.refresh(now);
    }

    pub fn replicas(&mut self, now: u64) -> Arc<ReplicaSet> {
        let r = Arc::new(ReplicaSet::new(self.registry.clone()));
        r.sync_all(&mut self.dp, now);
        r
    }

    pub fn cert(&self, ca: usize, serial: u64) -> Certificate {
        let ca = &self.cas[ca];
        Certificate::issue(ca.signing_key(), ca.ca_id(), SerialNumber::from_u64(serial), "server.test", T0 + 1_000_000)
    }

    pub fn policy(&self) -> Arc<ClientPolicy> {
        Arc::new(ClientPolicy::new(self.registry.clone(), DELTA))
    }
}

pub fn key(port: u16) -> ConnKey {
    ConnKey::new(([192, 0, 2, 1], port).into(), ([198, 51, 100, 7], 443).into())
}

fn split(chunk: usize, b: &[u8]) -> Vec<&[u8]> {
    if chunk == 0 || b.is_empty() {
        vec![b]
    } else {
        b.chunks(chunk).collect()
    }
}

/// Client ↔ agents ↔ server over in-memory streams. Agents are ordered
/// from the client side.
pub struct Pipe {
    pub client: RitmClient,
    pub server: StubServer,
    pub hops: Vec<(Arc<RevocationAgent>, Connection)>,
    /// Segment size for delivery; 0 = whole buffers.
    pub chunk: usize,
    pub server_stream: Vec<u8>,
    pub client_stream: Vec<u8>,
}

impl Pipe {
    pub fn new(client: RitmClient, server: StubServer, agents: &[Arc<RevocationAgent>], port: u16) -> Self {
        Pipe {
            client,
            server,
            hops: agents.iter().map(|a| (a.clone(), Connection::new(key(port)))).collect(),
            chunk: 0,
            server_stream: Vec::new(),
            client_stream: Vec::new(),
        }
    }


    pub fn to_server(&mut self, bytes: Vec<u8>, now: u64) -> Vec<u8> {
        let mut cur = bytes;
        for (agent, conn) in self.hops.iter_mut() {
            let mut next = Vec::new();
            for seg in split(self.chunk, &cur) {
                next.extend(agent.inspect(conn, Direction::ClientToServer, seg, now));
            }
            cur = next;
        }
        cur
    }

    pub fn to_client(&mut self, bytes: Vec<u8>, now: u64) -> Vec<u8> {
        let mut cur = bytes;
        for (agent, conn) in self.hops.iter_mut().rev() {
            let mut next = Vec::new();
            for seg in split(self.chunk, &cur) {
                next.extend(agent.inspect(conn, Direction::ServerToClient, seg, now));
            }
            cur = next;
        }
        cur
    }

    /// Delivers server bytes to the client through all agents, then runs
    /// the exchange until both sides are quiet.
    pub fn server_sends(&mut self, bytes: Vec<u8>, now: u64) {
        self.server_stream.extend(&bytes);
        let mut down = self.to_client(bytes, now);
        loop {
            let up = if down.is_empty() { Vec::new() } else { self.deliver_client(down, now) };
            if up.is_empty() {
                break;
            }
            let reply = self.server.on_client_bytes(&up);
            self.server_stream.extend(&reply);
            down = self.to_client(reply, now);
        }
    }

    fn deliver_client(&mut self, bytes: Vec<u8>, now: u64) -> Vec<u8> {
        let mut out = Vec::new();
        for seg in split(self.chunk, &bytes) {
            out.extend(self.client.on_server_bytes(seg, now));
        }
        let sent = self.to_server(out, now);
        self.client_stream.extend(&sent);
        sent
    }

    pub fn handshake(&mut self, now: u64) {
        let hello = self.client.hello(now);
        let up = self.to_server(hello, now);
        self.client_stream.extend(&up);
        let reply = self.server.on_client_bytes(&up);
        self.server_sends(reply, now);
    }

    /// Agent-originated injections (silent server), nearest agent last.
    pub fn poll(&mut self, now: u64) {
        let n = self.hops.len();
        for i in (0..n).rev() {
            let (agent, conn) = &mut self.hops[i];
            if let Some(rec) = agent.poll(conn, now) {
                let mut cur = rec;
                for (a, c) in self.hops[..i].iter_mut().rev() {
                    cur = a.inspect(c, Direction::ServerToClient, &cur, now);
                }
                self.deliver_client(cur, now);
            }
        }
    }
}
