//! Distribution point: verifies CA publications and serves them to edges.

use std::collections::BTreeMap;

use thiserror::Error;

use super::http::{Endpoint, FetchError, Response, UpdateSource};
use super::message::{encode_issuances, FreshnessMessage, IssuanceMessage, Publication};
use crate::authdict::{chain_distance, CaId, FreshnessStatement, SignedRoot, MAX_CHAIN_WALK};
use crate::registry::CaRegistry;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PublishError {
    #[error("CA {0} is not registered")]
    UnknownCa(CaId),
    #[error("bad signature on signed root")]
    BadSignature,
    #[error("issuance does not continue the log: expected prior count {expected}, got {got}")]
    GapInSequence { expected: u64, got: u64 },
    #[error("freshness statement does not chain to the current anchor")]
    BadChainLink,
    #[error("publication is older than the current root")]
    Stale,
    #[error("re-anchor changes the dictionary content")]
    ContentChanged,
}

/// Per-CA publication log.
#[derive(Clone, Debug, Default)]
pub struct UpdateLog {
    /// Non-empty issuances, contiguous in `n`.
    issuances: Vec<IssuanceMessage>,
    /// Latest re-anchor newer than the last issuance.
    reanchor: Option<IssuanceMessage>,
    freshness: Option<FreshnessMessage>,
    /// Chain position of `freshness` relative to the current anchor.
    freshness_period: u64,
}

impl UpdateLog {
    pub fn current_root(&self) -> Option<&SignedRoot> {
        self.reanchor
            .as_ref()
            .or(self.issuances.last())
            .map(|m| &m.signed_root)
    }

    pub fn n(&self) -> u64 {
        self.current_root().map_or(0, |r| r.n)
    }

    pub fn issuances(&self) -> &[IssuanceMessage] {
        &self.issuances
    }

    pub fn freshness(&self) -> Option<&FreshnessMessage> {
        self.freshness.as_ref()
    }

    /// Issuances extending past `from`, then the pending re-anchor if any.
    pub fn updates_from(&self, from: u64) -> Vec<IssuanceMessage> {
        let start = self.issuances.partition_point(|m| m.signed_root.n <= from);
        let mut out: Vec<IssuanceMessage> = self.issuances[start..].to_vec();
        if let Some(r) = &self.reanchor {
            out.push(r.clone());
        }
        out
    }

    /// Appends without verification (used by edges mirroring an origin).
    pub fn mirror(&mut self, msgs: Vec<IssuanceMessage>, freshness: Option<FreshnessMessage>) -> usize {
        let mut added = 0;
        for m in msgs {
            if m.is_reanchor() {
                if m.signed_root.n == self.n() && self.reanchor.as_ref() != Some(&m) {
                    self.reanchor = Some(m);
                    added += 1;
                }
            } else if m.prior_count() == self.n() {
                self.reanchor = None;
                self.issuances.push(m);
                added += 1;
            }
        }
        if freshness.is_some() && freshness != self.freshness {
            self.freshness = freshness;
            added += 1;
        }
        added
    }

    pub fn handle(&self, ep: &Endpoint) -> Response {
        match ep {
            Endpoint::Updates { from, .. } => Response::ok(encode_issuances(&self.updates_from(*from))),
            Endpoint::Freshness { .. } => match &self.freshness {
                Some(f) => Response::ok(f.to_bytes().to_vec()),
                None => Response::not_found(),
            },
            Endpoint::Root { .. } => match self.current_root() {
                Some(r) => Response::ok(r.to_bytes().to_vec()),
                None => Response::not_found(),
            },
        }
    }
}

/// Origin of the dissemination network. Publishes are serialised per CA
/// by `&mut self`.
#[derive(Clone, Debug)]
pub struct DistributionPoint {
    registry: CaRegistry,
    logs: BTreeMap<CaId, UpdateLog>,
    reachable: bool,
}

impl DistributionPoint {
    pub fn new(registry: CaRegistry) -> Self {
        let logs = registry.ids().map(|id| (id, UpdateLog::default())).collect();
        DistributionPoint {
            registry,
            logs,
            reachable: true,
        }
    }

    pub fn log(&self, ca: &CaId) -> Option<&UpdateLog> {
        self.logs.get(ca)
    }

    pub fn registry(&self) -> &CaRegistry {
        &self.registry
    }

    /// Simulates an outage: fetches fail while unreachable.
    pub fn set_reachable(&mut self, up: bool) {
        self.reachable = up;
    }

    pub fn publish(&mut self, msg: Publication) -> Result<(), PublishError> {
        let ca = msg.ca_id();
        let entry = self.registry.get(&ca).ok_or(PublishError::UnknownCa(ca))?;
        let log = self.logs.entry(ca).or_default();
        match msg {
            Publication::Issuance(m) => {
                let sr = &m.signed_root;
                if sr.ca_id != ca || !sr.verify(&entry.key) {
                    return Err(PublishError::BadSignature);
                }
                let current = log.current_root();
                if let Some(cur) = current {
                    if sr.timestamp < cur.timestamp {
                        return Err(PublishError::Stale);
                    }
                }
                if m.is_reanchor() {
                    match current {
                        Some(cur) if cur.n != sr.n || cur.root != sr.root => return Err(PublishError::ContentChanged),
                        Some(cur) if cur.timestamp == sr.timestamp && cur.anchor == sr.anchor => {
                            return Err(PublishError::Stale)
                        }
                        None if sr.n != 0 => {
                            return Err(PublishError::GapInSequence { expected: 0, got: sr.n })
                        }
                        _ => {}
                    }
                    log.reanchor = Some(m);
                } else {
                    if m.prior_count() != log.n() {
                        return Err(PublishError::GapInSequence {
                            expected: log.n(),
                            got: m.prior_count(),
                        });
                    }
                    log.reanchor = None;
                    log.issuances.push(m);
                }
                // a new root starts a new chain; its anchor is the period-0 statement
                let anchor = log.current_root().map(|r| r.anchor).expect("root just stored");
                log.freshness = Some(FreshnessMessage {
                    ca_id: ca,
                    statement: FreshnessStatement { value: anchor },
                });
                log.freshness_period = 0;
                Ok(())
            }
            Publication::Freshness(f) => {
                let root = log.current_root().ok_or(PublishError::BadChainLink)?;
                let period =
                    chain_distance(&f.statement.value, &root.anchor, MAX_CHAIN_WALK).ok_or(PublishError::BadChainLink)?;
                if log.freshness.is_some() && period < log.freshness_period {
                    return Err(PublishError::Stale);
                }
                log.freshness = Some(f);
                log.freshness_period = period;
                Ok(())
            }
        }
    }
}

impl UpdateSource for DistributionPoint {
    fn fetch(&mut self, ep: &Endpoint, _now: u64) -> Result<Response, FetchError> {
        if !self.reachable {
            return Err(FetchError::Unreachable);
        }
        Ok(match self.logs.get(&ep.ca()) {
            Some(log) => log.handle(ep),
            None => Response::not_found(),
        })
    }
}
