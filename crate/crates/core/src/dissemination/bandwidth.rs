//! Per-Δ download volume of one RA.

use std::collections::BTreeSet;

use super::message::{FreshnessMessage, Publication};
use crate::authdict::CaId;

/// A publication and the time it reached the distribution point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicationRecord {
    pub time: u64,
    pub message: Publication,
}

/// Bytes an RA downloads in each window `[start + kΔ, start + (k+1)Δ)`
/// up to `end`: framed issuance messages for CAs that revoked in the
/// window, one freshness message for every other CA.
pub fn bandwidth_account(records: &[PublicationRecord], cas: &[CaId], delta: u64, start: u64, end: u64) -> Vec<u64> {
    assert!(delta > 0);
    let windows = end.saturating_sub(start).div_ceil(delta) as usize;
    let mut series = Vec::with_capacity(windows);
    for k in 0..windows as u64 {
        let lo = start + k * delta;
        let hi = lo + delta;
        let mut issuing = BTreeSet::new();
        let mut bytes = 0u64;
        for r in records.iter().filter(|r| r.time >= lo && r.time < hi) {
            if let Publication::Issuance(m) = &r.message {
                bytes += 4 + m.encoded_len() as u64;
                issuing.insert(m.ca_id);
            }
        }
        let quiet = cas.iter().filter(|c| !issuing.contains(c)).count() as u64;
        bytes += quiet * FreshnessMessage::LEN as u64;
        series.push(bytes);
    }
    series
}
