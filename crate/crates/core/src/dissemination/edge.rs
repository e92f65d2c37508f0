//! Caching edge server in front of a distribution point.

use std::collections::BTreeMap;

use super::http::{Endpoint, FetchError, Response, UpdateSource};
use super::message::{decode_issuances, FreshnessMessage};
use super::point::UpdateLog;
use crate::authdict::CaId;

#[derive(Clone, Debug, Default)]
struct CachedLog {
    log: UpdateLog,
    last_pull: Option<u64>,
    stale: bool,
}

/// Mirrors the origin's per-CA logs and serves them for `ttl` seconds
/// before pulling again. `ttl = 0` passes every request through.
#[derive(Debug)]
pub struct EdgeServer<O> {
    origin: O,
    ttl: u64,
    cache: BTreeMap<CaId, CachedLog>,
    origin_pulls: u64,
}

impl<O: UpdateSource> EdgeServer<O> {
    pub fn new(origin: O, ttl: u64) -> Self {
        EdgeServer {
            origin,
            ttl,
            cache: BTreeMap::new(),
            origin_pulls: 0,
        }
    }

    pub fn origin(&self) -> &O {
        &self.origin
    }

    pub fn origin_mut(&mut self) -> &mut O {
        &mut self.origin
    }

    /// Pull rounds made against the origin so far.
    pub fn origin_pulls(&self) -> u64 {
        self.origin_pulls
    }

    pub fn is_stale(&self, ca: &CaId) -> bool {
        self.cache.get(ca).is_some_and(|c| c.stale)
    }

    /// Extends the cached log for `ca` from the origin; returns the number
    /// of new entries.
    pub fn pull(&mut self, ca: CaId, now: u64) -> Result<usize, FetchError> {
        self.origin_pulls += 1;
        let entry = self.cache.entry(ca).or_default();
        let from = entry.log.n();
        let updates = self.origin.fetch(&Endpoint::Updates { ca, from }, now)?;
        let fresh = self.origin.fetch(&Endpoint::Freshness { ca }, now)?;
        if updates.status == 404 {
            return Err(FetchError::BadResponse("unknown CA at origin".into()));
        }
        let msgs = decode_issuances(&updates.body).ok_or_else(|| FetchError::BadResponse("updates".into()))?;
        let freshness = match fresh.status {
            200 => Some(FreshnessMessage::from_bytes(&fresh.body).ok_or_else(|| FetchError::BadResponse("freshness".into()))?),
            _ => None,
        };
        let added = entry.log.mirror(msgs, freshness);
        entry.last_pull = Some(now);
        entry.stale = false;
        Ok(added)
    }

    fn cache_expired(&self, ca: &CaId, now: u64) -> bool {
        match self.cache.get(ca).and_then(|c| c.last_pull) {
            None => true,
            Some(t) => self.ttl == 0 || now.saturating_sub(t) >= self.ttl,
        }
    }
}

impl<O: UpdateSource> UpdateSource for EdgeServer<O> {
    fn fetch(&mut self, ep: &Endpoint, now: u64) -> Result<Response, FetchError> {
        let ca = ep.ca();
        if self.cache_expired(&ca, now) {
            match self.pull(ca, now) {
                Ok(_) => {}
                Err(FetchError::Unreachable) => match self.cache.get_mut(&ca) {
                    Some(c) if c.last_pull.is_some() => {
                        log::warn!("origin unreachable, serving stale cache for {ca}");
                        c.stale = true;
                    }
                    _ => return Ok(Response::unavailable()),
                },
                Err(e) => {
                    if !self.cache.get(&ca).is_some_and(|c| c.last_pull.is_some()) {
                        self.cache.remove(&ca);
                        return Ok(Response::not_found());
                    }
                    log::warn!("origin error for {ca}: {e}");
                }
            }
        }
        let c = &self.cache[&ca];
        let mut resp = c.log.handle(ep);
        resp.stale = c.stale;
        Ok(resp)
    }
}
