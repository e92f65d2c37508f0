mod common;

use common::*;
use ritm_core::authdict::{chain_evaluate, SerialNumber};
use ritm_core::dissemination::{
    decode_issuances, encode_issuances, ra_sync, DistributionPoint, EdgeServer, Endpoint, FetchError, FreshnessMessage,
    Publication, PublishError, ReplicaSet, Response, SyncCursor, SyncError, UpdateSource,
};

#[test]
fn table_two_sequence_accepted_in_order() {
    let mut w = World::new(1, 21);
    let ca_id = w.cas[0].ca_id();
    let t0 = T0;
    let s: Vec<_> = [0x0a, 0x0b, 0x0c].map(SerialNumber::from_u64).to_vec();
    let first = w.cas[0].revoke(&s, t0, &mut w.rng).unwrap();
    let anchor = first.signed_root.anchor;
    w.dp.publish(Publication::Issuance(first)).unwrap();
    for k in 1..=2u64 {
        let p = w.cas[0].refresh(t0 + k * DELTA, &mut w.rng);
        let Publication::Freshness(f) = &p else { panic!("expected a statement") };
        // the period-k statement hashes forward k times to the anchor
        assert_eq!(chain_evaluate(&f.statement.value, k), anchor);
        w.dp.publish(p).unwrap();
    }
    let last = w.cas[0].revoke(&[SerialNumber::from_u64(0x0d)], t0 + 3 * DELTA, &mut w.rng).unwrap();
    w.dp.publish(Publication::Issuance(last)).unwrap();
    assert_eq!(w.dp.log(&ca_id).unwrap().n(), 4);
}

#[test]
fn publish_rejects_gaps_forgeries_and_bad_links() {
    let mut w = World::new(1, 22);
    let ca_id = w.cas[0].ca_id();
    let a = w.cas[0].revoke(&[SerialNumber::from_u64(1)], T0, &mut w.rng).unwrap();
    let b = w.cas[0].revoke(&[SerialNumber::from_u64(2)], T0 + 1, &mut w.rng).unwrap();
    assert!(matches!(w.dp.publish(Publication::Issuance(b.clone())), Err(PublishError::GapInSequence { .. })));
    let mut forged = a.clone();
    forged.signed_root.signature[3] ^= 1;
    assert_eq!(w.dp.publish(Publication::Issuance(forged)), Err(PublishError::BadSignature));
    w.dp.publish(Publication::Issuance(a)).unwrap();
    w.dp.publish(Publication::Issuance(b)).unwrap();
    let bogus = FreshnessMessage {
        ca_id,
        statement: ritm_core::authdict::FreshnessStatement {
            value: ritm_core::authdict::hash(b"nope"),
        },
    };
    assert_eq!(w.dp.publish(Publication::Freshness(bogus)), Err(PublishError::BadChainLink));
}

#[test]
fn ttl_zero_passes_through_and_ttl_caches() {
    let mut w = World::new(1, 23);
    let ca = w.cas[0].ca_id();
    let mut edge = EdgeServer::new(&mut w.dp, 0);
    for i in 0..3 {
        edge.fetch(&Endpoint::Root { ca }, T0 + i).unwrap();
    }
    assert_eq!(edge.origin_pulls(), 3);

    let mut edge = EdgeServer::new(&mut w.dp, 60);
    edge.fetch(&Endpoint::Root { ca }, T0).unwrap();
    edge.fetch(&Endpoint::Freshness { ca }, T0 + 59).unwrap();
    assert_eq!(edge.origin_pulls(), 1);
    edge.fetch(&Endpoint::Freshness { ca }, T0 + 60).unwrap();
    assert_eq!(edge.origin_pulls(), 2);
}

#[test]
fn unreachable_origin_serves_stale_cache() {
    let mut w = World::new(1, 24);
    let ca = w.cas[0].ca_id();
    let mut edge = EdgeServer::new(&mut w.dp, 0);
    let fresh = edge.fetch(&Endpoint::Freshness { ca }, T0).unwrap();
    assert!(!fresh.stale);
    edge.origin_mut().set_reachable(false);
    let stale = edge.fetch(&Endpoint::Freshness { ca }, T0 + 1).unwrap();
    assert!(stale.stale);
    assert_eq!(stale.body, fresh.body);
    assert!(edge.is_stale(&ca));
    // never-seen CA with the origin down: nothing to serve
    let other = ritm_core::authdict::CaId::from_u64(999);
    assert_eq!(edge.fetch(&Endpoint::Root { ca: other }, T0 + 1).unwrap().status, 503);
}

#[test]
fn bootstrap_and_steady_state() {
    let mut w = World::new(1, 25);
    w.revoke(0, &[1, 2, 3], T0);
    let ca = w.cas[0].ca_id();
    let batch = ra_sync(&SyncCursor::bootstrap(ca), &mut w.dp, T0).unwrap();
    assert!(batch.freshness.is_some());
    let replicas = ReplicaSet::new(w.registry.clone());
    replicas.apply(&ca, &batch, T0).unwrap();
    let r = replicas.snapshot(&ca).unwrap();
    assert_eq!(r.signed_root.as_ref().unwrap().root, w.cas[0].signed_root().root);
    assert_eq!(r.confirmed_n(), 3);

    // caught up: only the 28-byte statement is downloaded
    let steady = ra_sync(&replicas.cursor(&ca, T0).unwrap(), &mut w.dp, T0).unwrap();
    assert!(steady.issuances.is_empty());
    assert!(steady.freshness.is_some());
    assert_eq!(steady.bytes, FreshnessMessage::LEN);

    let unknown = ritm_core::authdict::CaId::from_u64(4242);
    assert_eq!(
        ra_sync(&SyncCursor::bootstrap(unknown), &mut w.dp, T0),
        Err(SyncError::UnknownCa(unknown))
    );
    w.dp.set_reachable(false);
    assert_eq!(
        ra_sync(&SyncCursor::bootstrap(ca), &mut w.dp, T0),
        Err(SyncError::EdgeUnreachable)
    );
}

/// Drops the first issuance of the next `drops` update responses.
struct Lossy<'a> {
    inner: &'a mut DistributionPoint,
    drops: usize,
}

impl UpdateSource for Lossy<'_> {
    fn fetch(&mut self, ep: &Endpoint, now: u64) -> Result<Response, FetchError> {
        let mut resp = self.inner.fetch(ep, now)?;
        if let (Endpoint::Updates { .. }, true) = (ep, self.drops > 0) {
            let mut msgs = decode_issuances(&resp.body).unwrap();
            if !msgs.is_empty() {
                msgs.remove(0);
                self.drops -= 1;
                resp.body = encode_issuances(&msgs);
            }
        }
        Ok(resp)
    }
}

#[test]
fn lost_message_then_sync_converges() {
    let mut w = World::new(1, 26);
    let ca = w.cas[0].ca_id();
    let replicas = ReplicaSet::new(w.registry.clone());
    replicas.sync_all(&mut w.dp, T0);
    w.revoke(0, &[10, 11], T0 + 1);
    w.revoke(0, &[12], T0 + 2);
    let report = replicas
        .sync_ca(&ca, &mut Lossy { inner: &mut w.dp, drops: 1 }, T0 + 2)
        .unwrap();
    assert!(report.rounds >= 2, "desync must trigger a retry");
    let r = replicas.snapshot(&ca).unwrap();
    assert_eq!(r.confirmed_n(), 3);
    assert_eq!(r.signed_root.as_ref().unwrap().root, w.cas[0].signed_root().root);
}

#[test]
fn duplicates_are_idempotent() {
    let mut w = World::new(1, 27);
    let ca = w.cas[0].ca_id();
    w.revoke(0, &[1, 2], T0);
    let replicas = ReplicaSet::new(w.registry.clone());
    let batch = ra_sync(&SyncCursor::bootstrap(ca), &mut w.dp, T0).unwrap();
    replicas.apply(&ca, &batch, T0).unwrap();
    let root = replicas.snapshot(&ca).unwrap().signed_root.clone();
    let again = replicas.apply(&ca, &batch, T0).unwrap();
    assert_eq!(again.accepted, 0);
    assert!(!again.desync);
    assert_eq!(replicas.snapshot(&ca).unwrap().signed_root, root);
}
