//! Per-connection state kept by a revocation agent.

use std::collections::HashMap;
use std::net::SocketAddr;

use crate::authdict::{CaId, SerialNumber};

/// Connection 4-tuple, client side first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConnKey {
    pub client: SocketAddr,
    pub server: SocketAddr,
}

impl ConnKey {
    pub fn new(client: SocketAddr, server: SocketAddr) -> Self {
        ConnKey { client, server }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    ClientHello,
    ServerHello,
    Established,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnState {
    pub key: ConnKey,
    /// Time of the last status sent toward the client; 0 = never.
    pub last_status: u64,
    pub stage: Stage,
    pub ca: Option<CaId>,
    pub sn: Option<SerialNumber>,
    pub last_activity: u64,
}

impl ConnState {
    pub fn new(key: ConnKey, now: u64) -> Self {
        ConnState {
            key,
            last_status: 0,
            stage: Stage::ClientHello,
            ca: None,
            sn: None,
            last_activity: now,
        }
    }

    /// Moves forward to `stage`; earlier stages are ignored.
    pub fn advance(&mut self, stage: Stage) -> bool {
        if stage > self.stage {
            self.stage = stage;
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Default)]
pub struct ConnTable {
    map: HashMap<ConnKey, ConnState>,
}

impl ConnTable {
    pub fn insert(&mut self, st: ConnState) -> Option<ConnState> {
        self.map.insert(st.key, st)
    }

    pub fn get(&self, key: &ConnKey) -> Option<&ConnState> {
        self.map.get(key)
    }

    pub fn get_mut(&mut self, key: &ConnKey) -> Option<&mut ConnState> {
        self.map.get_mut(key)
    }

    pub fn remove(&mut self, key: &ConnKey) -> Option<ConnState> {
        self.map.remove(key)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Drops entries idle for at least `timeout` seconds.
    pub fn evict_idle(&mut self, now: u64, timeout: u64) -> usize {
        let before = self.map.len();
        self.map.retain(|_, s| now.saturating_sub(s.last_activity) < timeout);
        before - self.map.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConnState> {
        self.map.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(p: u16) -> ConnKey {
        ConnKey::new(([10, 0, 0, 1], p).into(), ([10, 0, 0, 2], 443).into())
    }

    #[test]
    fn stage_only_moves_forward() {
        let mut s = ConnState::new(key(1), 5);
        assert!(s.advance(Stage::Established));
        assert!(!s.advance(Stage::ServerHello));
        assert_eq!(s.stage, Stage::Established);
    }

    #[test]
    fn idle_eviction() {
        let mut t = ConnTable::default();
        t.insert(ConnState::new(key(1), 0));
        t.insert(ConnState::new(key(2), 100));
        assert_eq!(t.evict_idle(299, 300), 0);
        assert_eq!(t.evict_idle(300, 300), 1);
        assert!(t.get(&key(2)).is_some());
    }
}
