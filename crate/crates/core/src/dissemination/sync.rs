//! RA-side sync client and replica store.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use super::http::{Endpoint, FetchError, UpdateSource};
use super::message::{decode_issuances, FreshnessMessage, IssuanceMessage};
use crate::authdict::{
    chain_distance, update, CaId, DictError, Dictionary, FreshnessStatement, RevocationStatus, SerialNumber,
    SignedRoot, UpdateError, Digest, MAX_CHAIN_WALK, MAX_CLOCK_SKEW,
};
use crate::registry::CaRegistry;

/// Number of valid consecutive revocations an RA holds for one CA.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyncCursor {
    pub ca_id: CaId,
    pub confirmed_n: u64,
    /// Anchor of the replica's signed root and how many chain steps a
    /// current statement can be from it. When the published statement
    /// still chains to this anchor the dictionary has not changed.
    pub anchor: Option<(Digest, u64)>,
}

impl SyncCursor {
    pub fn bootstrap(ca_id: CaId) -> Self {
        SyncCursor {
            ca_id,
            confirmed_n: 0,
            anchor: None,
        }
    }
}

/// Chain steps a statement for `sr` can be away from its anchor at `now`.
fn walk_bound(sr: &SignedRoot, now: u64, delta: u64) -> u64 {
    ((now + MAX_CLOCK_SKEW).saturating_sub(sr.timestamp) / delta + 1).min(MAX_CHAIN_WALK)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SyncBatch {
    pub issuances: Vec<IssuanceMessage>,
    pub freshness: Option<FreshnessMessage>,
    /// Response body bytes downloaded for this batch.
    pub bytes: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyncError {
    #[error("edge unreachable")]
    EdgeUnreachable,
    #[error("CA {0} unknown")]
    UnknownCa(CaId),
    #[error("bad response: {0}")]
    BadResponse(String),
}

impl From<FetchError> for SyncError {
    fn from(e: FetchError) -> Self {
        match e {
            FetchError::Unreachable => SyncError::EdgeUnreachable,
            FetchError::BadResponse(m) => SyncError::BadResponse(m),
        }
    }
}

/// Pulls issuances past `cursor.confirmed_n` and the current freshness
/// statement from `source`.
pub fn ra_sync<S: UpdateSource + ?Sized>(cursor: &SyncCursor, source: &mut S, now: u64) -> Result<SyncBatch, SyncError> {
    let ca = cursor.ca_id;
    let fresh = source.fetch(&Endpoint::Freshness { ca }, now)?;
    let freshness = match fresh.status {
        200 => Some(FreshnessMessage::from_bytes(&fresh.body).ok_or_else(|| SyncError::BadResponse("freshness body".into()))?),
        404 if cursor.anchor.is_none() => None,
        404 => return Err(SyncError::UnknownCa(ca)),
        503 => return Err(SyncError::EdgeUnreachable),
        s => return Err(SyncError::BadResponse(format!("status {s}"))),
    };
    if let (Some(f), Some((anchor, walk))) = (&freshness, cursor.anchor) {
        if chain_distance(&f.statement.value, &anchor, walk).is_some() {
            return Ok(SyncBatch {
                issuances: Vec::new(),
                freshness,
                bytes: fresh.body.len(),
            });
        }
    }
    let updates = source.fetch(&Endpoint::Updates { ca, from: cursor.confirmed_n }, now)?;
    match updates.status {
        200 => {}
        404 => return Err(SyncError::UnknownCa(ca)),
        503 => return Err(SyncError::EdgeUnreachable),
        s => return Err(SyncError::BadResponse(format!("status {s}"))),
    }
    let issuances = decode_issuances(&updates.body).ok_or_else(|| SyncError::BadResponse("updates body".into()))?;
    Ok(SyncBatch {
        issuances,
        freshness,
        bytes: updates.body.len() + fresh.body.len(),
    })
}

/// Immutable replica snapshot of one CA's dictionary.
#[derive(Clone, Debug)]
pub struct Replica {
    pub dict: Arc<Dictionary>,
    pub signed_root: Option<SignedRoot>,
    pub freshness: Option<FreshnessStatement>,
    /// Chain period of `freshness` under `signed_root`.
    pub freshness_period: u64,
}

impl Replica {
    fn empty(ca: CaId) -> Self {
        Replica {
            dict: Arc::new(Dictionary::new(ca)),
            signed_root: None,
            freshness: None,
            freshness_period: 0,
        }
    }

    pub fn confirmed_n(&self) -> u64 {
        self.dict.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ApplyReport {
    pub accepted: usize,
    pub skipped: usize,
    pub rejected: Vec<UpdateError>,
    /// A gap or root/count mismatch was seen; re-sync from the cursor.
    pub desync: bool,
    pub freshness_updated: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProveError {
    #[error("CA {0} unknown")]
    UnknownCa(CaId),
    #[error("no signed root for CA {0} yet")]
    NotSynced(CaId),
    #[error(transparent)]
    Dict(#[from] DictError),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SyncReport {
    pub rounds: usize,
    pub bytes: usize,
    pub apply: ApplyReport,
}

/// All dictionaries an RA replicates. Readers take `Arc` snapshots; the
/// sync path swaps in new versions atomically.
#[derive(Debug)]
pub struct ReplicaSet {
    registry: CaRegistry,
    replicas: RwLock<BTreeMap<CaId, Arc<Replica>>>,
}

impl ReplicaSet {
    pub fn new(registry: CaRegistry) -> Self {
        let replicas = registry.ids().map(|id| (id, Arc::new(Replica::empty(id)))).collect();
        ReplicaSet {
            registry,
            replicas: RwLock::new(replicas),
        }
    }

    pub fn registry(&self) -> &CaRegistry {
        &self.registry
    }

    pub fn snapshot(&self, ca: &CaId) -> Option<Arc<Replica>> {
        self.replicas.read().unwrap().get(ca).cloned()
    }

    pub fn cursor(&self, ca: &CaId, now: u64) -> Option<SyncCursor> {
        let delta = self.registry.get(ca)?.delta;
        self.snapshot(ca).map(|r| SyncCursor {
            ca_id: *ca,
            confirmed_n: r.confirmed_n(),
            anchor: r.signed_root.as_ref().map(|sr| (sr.anchor, walk_bound(sr, now, delta))),
        })
    }

    /// Total bytes of all replicas in storage format.
    pub fn storage_bytes(&self) -> usize {
        self.replicas
            .read()
            .unwrap()
            .values()
            .map(|r| r.dict.to_storage_bytes().len())
            .sum()
    }

    /// Applies a batch in order. Duplicates and stale messages are skipped;
    /// processing stops at the first gap or rejected update.
    pub fn apply(&self, ca: &CaId, batch: &SyncBatch, now: u64) -> Result<ApplyReport, SyncError> {
        let entry = self.registry.get(ca).ok_or(SyncError::UnknownCa(*ca))?;
        let mut cur: Replica = (*self.snapshot(ca).ok_or(SyncError::UnknownCa(*ca))?).clone();
        let mut report = ApplyReport::default();
        for m in &batch.issuances {
            if m.ca_id != *ca {
                report.rejected.push(UpdateError::WrongCa);
                break;
            }
            let confirmed = cur.confirmed_n();
            let end = m.signed_root.n;
            if end < confirmed
                || (end == confirmed && !m.is_reanchor())
                || cur.signed_root.as_ref() == Some(&m.signed_root)
            {
                report.skipped += 1;
                continue;
            }
            if m.prior_count() != confirmed {
                report.desync = true;
                break;
            }
            match update(&cur.dict, cur.signed_root.as_ref(), &m.serials, &m.signed_root, &entry.key, now) {
                Ok(next) => {
                    cur.dict = Arc::new(next);
                    cur.signed_root = Some(m.signed_root.clone());
                    cur.freshness = Some(FreshnessStatement { value: m.signed_root.anchor });
                    cur.freshness_period = 0;
                    report.accepted += 1;
                }
                Err(UpdateError::StaleTimestamp) if m.is_reanchor() => report.skipped += 1,
                Err(e) => {
                    report.desync |= e.is_desync();
                    report.rejected.push(e);
                    break;
                }
            }
        }
        if let (Some(f), Some(sr)) = (&batch.freshness, &cur.signed_root) {
            if f.ca_id == *ca {
                if let Some(p) = chain_distance(&f.statement.value, &sr.anchor, walk_bound(sr, now, entry.delta)) {
                    if p > cur.freshness_period || cur.freshness.is_none() {
                        cur.freshness = Some(f.statement);
                        cur.freshness_period = p;
                        report.freshness_updated = true;
                    }
                }
            }
        }
        self.replicas.write().unwrap().insert(*ca, Arc::new(cur));
        Ok(report)
    }

    /// Sync one CA, retrying from the confirmed count after a desync.
    pub fn sync_ca<S: UpdateSource + ?Sized>(&self, ca: &CaId, source: &mut S, now: u64) -> Result<SyncReport, SyncError> {
        let mut out = SyncReport::default();
        for _ in 0..3 {
            let cursor = self.cursor(ca, now).ok_or(SyncError::UnknownCa(*ca))?;
            let batch = ra_sync(&cursor, source, now)?;
            out.rounds += 1;
            out.bytes += batch.bytes;
            let rep = self.apply(ca, &batch, now)?;
            let desync = rep.desync;
            out.apply.accepted += rep.accepted;
            out.apply.skipped += rep.skipped;
            out.apply.rejected.extend(rep.rejected);
            out.apply.freshness_updated |= rep.freshness_updated;
            if !desync {
                out.apply.desync = false;
                break;
            }
            out.apply.desync = true;
        }
        Ok(out)
    }

    /// Syncs every registered CA; failures are collected per CA.
    pub fn sync_all<S: UpdateSource + ?Sized>(&self, source: &mut S, now: u64) -> BTreeMap<CaId, Result<SyncReport, SyncError>> {
        let ids: Vec<CaId> = self.registry.ids().collect();
        ids.into_iter().map(|ca| (ca, self.sync_ca(&ca, source, now))).collect()
    }

    pub fn prove(&self, ca: &CaId, serial: &SerialNumber) -> Result<RevocationStatus, ProveError> {
        let r = self.snapshot(ca).ok_or(ProveError::UnknownCa(*ca))?;
        let (Some(sr), Some(fs)) = (&r.signed_root, &r.freshness) else {
            return Err(ProveError::NotSynced(*ca));
        };
        Ok(r.dict.prove(serial, sr, fs)?)
    }
}
