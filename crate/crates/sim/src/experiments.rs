//! Desk-scale measurements shared by the CLI, the benchmark and the tests.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ritm_core::authdict::{
    make_signed_root, refresh, CaSigningKey, Dictionary, FreshnessStatement, Refresh, SerialNumber, SignedRoot,
    DEFAULT_CHAIN_LENGTH,
};

use crate::metrics::{MetricsReport, Stats};
use crate::runner::{run_scenario, START};
use crate::scenario::Scenario;
use crate::trace::{ca_id_for, generate_trace, Profile, TraceParams, DAY, SERIAL_MAX, SERIAL_MIN};

/// A signed dictionary of `n` distinct random 3-byte serials.
pub struct SignedDictionary {
    pub dict: Dictionary,
    pub signed_root: SignedRoot,
    pub freshness: FreshnessStatement,
    pub key: CaSigningKey,
    pub members: HashSet<u64>,
}

impl SignedDictionary {
    pub fn random(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut members = HashSet::with_capacity(n);
        let mut serials = Vec::with_capacity(n);
        while serials.len() < n {
            let v = rng.gen_range(SERIAL_MIN..=SERIAL_MAX);
            if members.insert(v) {
                serials.push(SerialNumber::from_u64(v));
            }
        }
        let key = CaSigningKey::generate(rng);
        let dict = Dictionary::from_serials(ca_id_for(0), &serials).expect("distinct serials");
        let (signed_root, secret) = make_signed_root(&key, &dict, START, DEFAULT_CHAIN_LENGTH, rng);
        let Refresh::Statement(freshness) = refresh(&secret, &signed_root, START, 60) else {
            unreachable!("period 0 is always covered")
        };
        SignedDictionary {
            dict,
            signed_root,
            freshness,
            key,
            members,
        }
    }

    /// A 3-byte serial that is not revoked.
    pub fn absent_serial(&self, rng: &mut ChaCha8Rng) -> SerialNumber {
        loop {
            let v = rng.gen_range(SERIAL_MIN..=SERIAL_MAX);
            if !self.members.contains(&v) {
                return SerialNumber::from_u64(v);
            }
        }
    }

    pub fn status_len(&self, serial: &SerialNumber) -> usize {
        self.dict
            .prove(serial, &self.signed_root, &self.freshness)
            .expect("root matches")
            .to_bytes()
            .len()
    }
}

/// Serialized status sizes for `queries` random absent serials.
pub fn absent_status_sizes(leaves: usize, queries: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = SignedDictionary::random(leaves, &mut rng);
    (0..queries).map(|_| sd.status_len(&sd.absent_serial(&mut rng))).collect()
}

/// Replica storage for `total` revocations spread over `cas` CAs with the
/// steady profile.
pub fn storage_bytes(total: u64, cas: usize, seed: u64) -> u64 {
    let params = TraceParams {
        cas,
        total: Some(total),
        span: 30 * DAY,
        ..Default::default()
    };
    let trace = generate_trace(Profile::Steady, &params, seed);
    trace
        .per_ca(cas)
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Dictionary::from_serials(ca_id_for(i), s)
                .expect("unique serials")
                .to_storage_bytes()
                .len() as u64
        })
        .sum()
}

/// RA download per Δ window when no CA revokes. Returns the measured
/// steady windows and the accounting from the published messages.
pub fn quiet_window(cas: usize, delta: u64, windows: u64) -> (Stats, Stats) {
    let report = quiet_run(cas, delta, windows);
    let measured = Stats::of(report.bandwidth[0].iter().skip(1).copied());
    let accounted = Stats::of(report.published_bandwidth.iter().skip(1).copied());
    (measured, accounted)
}

pub fn quiet_run(cas: usize, delta: u64, windows: u64) -> MetricsReport {
    let mut s = Scenario::minimal(delta, delta * windows);
    s.topology.cas = cas;
    s.topology.connections = 0;
    s.topology.poll_jitter = 0.0;
    s.monitor.enabled = false;
    run_scenario(&s).expect("valid scenario")
}

#[derive(Clone, Copy, Debug)]
pub struct ProveTiming {
    pub calls: usize,
    pub total: Duration,
}

impl ProveTiming {
    pub fn mean(&self) -> Duration {
        self.total / self.calls.max(1) as u32
    }
}

/// Wall-clock cost of `prove` on a dictionary of `leaves` entries, half
/// present and half absent queries.
pub fn time_prove(leaves: usize, calls: usize, seed: u64) -> ProveTiming {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = SignedDictionary::random(leaves.max(1), &mut rng);
    let present: Vec<SerialNumber> = sd.dict.serials_in_order().iter().take(calls).cloned().collect();
    let queries: Vec<SerialNumber> = (0..calls)
        .map(|i| {
            if i % 2 == 0 && !present.is_empty() {
                present[i % present.len()].clone()
            } else {
                sd.absent_serial(&mut rng)
            }
        })
        .collect();
    let t = Instant::now();
    for q in &queries {
        let st = sd.dict.prove(q, &sd.signed_root, &sd.freshness).expect("root matches");
        std::hint::black_box(st);
    }
    ProveTiming {
        calls,
        total: t.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_measurements() {
        let sizes = absent_status_sizes(1000, 20, 1);
        assert!(sizes.iter().all(|&s| s > 300 && s < 800));
        let st = storage_bytes(1000, 4, 1);
        // 16-byte header per CA, 4 bytes per 3-byte serial
        assert_eq!(st, 4 * 16 + 1000 * 4);
        let (m, a) = quiet_window(3, 10, 4);
        assert_eq!((m.min, m.max), (3 * 28, 3 * 28));
        assert_eq!((a.min, a.max), (3 * 28, 3 * 28));
    }
}
