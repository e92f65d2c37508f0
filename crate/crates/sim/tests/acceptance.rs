//! Acceptance suite. One line per criterion; exits non-zero if any gating
//! criterion fails. Run with `cargo test -p ritm-sim --test acceptance`.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ritm_core::authdict::{
    make_signed_root, refresh, verify_status, CaId, CaSigningKey, Dictionary, Refresh, RevocationStatus,
    SerialNumber, Verdict, DEFAULT_CHAIN_LENGTH,
};
use ritm_core::client::{strip_status, ClientPolicy, ConnState, InterruptReason, RitmClient};
use ritm_core::ca::CertificateAuthority;
use ritm_core::dissemination::{DistributionPoint, Publication, ReplicaSet};
use ritm_core::monitor::verify_misbehavior;
use ritm_core::ra::{ConnKey, Connection, Direction, RevocationAgent};
use ritm_core::registry::CaRegistry;
use ritm_core::tls::{Certificate, StubServer};

use ritm_sim::experiments::{absent_status_sizes, quiet_window, storage_bytes, time_prove, SignedDictionary};
use ritm_sim::scenario::{Fault, TraceSource};
use ritm_sim::trace::ca_id_for;
use ritm_sim::{run_scenario, Scenario, START};

// Pinned thresholds.
const C1_LEAVES: usize = 339_557;
const C1_QUERIES: usize = 1_000;
const C1_RANGE: (usize, usize) = (500, 900);
const C2_REVOCATIONS: u64 = 1_381_992;
const C2_CAS: usize = 254;
const C2_MAX_BYTES: u64 = 8_000_000;
const C3_CAS: usize = 254;
const C3_RANGE: (u64, u64) = (4_000, 8_000);
const C4_DICTS: usize = 1_000;
const C4_QUERIES: usize = 100;
const C4_MAX_LEAVES: usize = 256;
const C5_DELTA: u64 = 60;
const C6_MUTATIONS: usize = 10_000;
const C7_SEEDS: u64 = 50;
const C9_HONEST_SEEDS: u64 = 100;
const C10_MIN_BYTES: usize = 1_000_000;
const C11_TARGET_US: f64 = 1_000.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn c1_proof_size() -> Outcome {
    let sizes = absent_status_sizes(C1_LEAVES, C1_QUERIES, 1);
    let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
    let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
    let inside = sizes.iter().filter(|&&s| s >= C1_RANGE.0 && s <= C1_RANGE.1).count();

    // The largest absent proof brackets the two leaves on either side of
    // the root split; reported, not gated, since random queries hit it
    // with probability about 1/n.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sd = SignedDictionary::random(C1_LEAVES, &mut rng);
    let leaves = sd.dict.leaves();
    let split = 1usize << (usize::BITS - 1 - (C1_LEAVES - 1).leading_zeros());
    let (a, b) = (leaves[split - 1].serial.as_bytes(), leaves[split].serial.as_bytes());
    let between = (u64::from_be_bytes(pad8(a)) + 1..u64::from_be_bytes(pad8(b))).next();
    let worst = between.map(|v| sd.status_len(&SerialNumber::from_u64(v)));

    outcome(
        inside == sizes.len(),
        format!(
            "{} absent statuses at {} leaves: min {lo} B, mean {mean:.1} B, max {hi} B, {inside}/{} within [{}, {}]; worst-case bracket {} B",
            sizes.len(),
            C1_LEAVES,
            sizes.len(),
            C1_RANGE.0,
            C1_RANGE.1,
            worst.map_or("n/a".into(), |w| w.to_string())
        ),
    )
}

fn pad8(b: &[u8]) -> [u8; 8] {
    let mut out = [0u8; 8];
    out[8 - b.len()..].copy_from_slice(b);
    out
}

fn c2_storage() -> Outcome {
    let t = Instant::now();
    let bytes = storage_bytes(C2_REVOCATIONS, C2_CAS, 1);
    outcome(
        bytes <= C2_MAX_BYTES,
        format!(
            "{C2_REVOCATIONS} revocations over {C2_CAS} CAs stored in {bytes} B ({:.2} MB, limit {:.0} MB) in {:.1} s",
            bytes as f64 / 1e6,
            C2_MAX_BYTES as f64 / 1e6,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn c3_quiet_window() -> Outcome {
    let (measured, accounted) = quiet_window(C3_CAS, 60, 6);
    let ok = |lo: u64, hi: u64| lo >= C3_RANGE.0 && hi <= C3_RANGE.1;
    outcome(
        measured.count > 0 && ok(measured.min, measured.max) && ok(accounted.min, accounted.max),
        format!(
            "{C3_CAS} CAs, no revocations: measured {}..{} B per window over {} windows, accounted {}..{} B, allowed [{}, {}]",
            measured.min, measured.max, measured.count, accounted.min, accounted.max, C3_RANGE.0, C3_RANGE.1
        ),
    )
}

fn signed(dict: &Dictionary, key: &CaSigningKey, rng: &mut ChaCha8Rng, now: u64) -> (ritm_core::authdict::SignedRoot, ritm_core::authdict::FreshnessStatement) {
    let (sr, secret) = make_signed_root(key, dict, now, 100, rng);
    let Refresh::Statement(fs) = refresh(&secret, &sr, now, 60) else { unreachable!() };
    (sr, fs)
}

fn c4_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let key = CaSigningKey::generate(&mut rng);
    let public = key.public();
    let ca = CaId::from_u64(4);
    let mut mismatches = 0usize;
    let mut trials = 0usize;
    let mut revoked_seen = 0usize;
    for _ in 0..C4_DICTS {
        let n = rng.gen_range(0..=C4_MAX_LEAVES);
        // a narrow value space so queries often land next to members
        let space = rng.gen_range(1u64..=4 * C4_MAX_LEAVES as u64 + 2);
        let mut set = Vec::new();
        let mut seen = BTreeSet::new();
        while set.len() < n.min(space as usize) {
            let v = rng.gen_range(0..space);
            if seen.insert(v) {
                set.push(SerialNumber::from_u64(v));
            }
        }
        let dict = Dictionary::from_serials(ca, &set).unwrap();
        let (sr, fs) = signed(&dict, &key, &mut rng, START);
        for _ in 0..C4_QUERIES {
            let q = if !set.is_empty() && rng.gen_bool(0.3) {
                set[rng.gen_range(0..set.len())].clone()
            } else {
                SerialNumber::from_u64(rng.gen_range(0..space + 2))
            };
            let expected = set.iter().any(|s| s == &q);
            let st = dict.prove(&q, &sr, &fs).unwrap();
            let got = verify_status(&st, &q, &public, START + 1, 60);
            let agree = match got {
                Verdict::Revoked => expected,
                Verdict::NotRevoked => !expected,
                Verdict::Invalid(_) => false,
            };
            revoked_seen += expected as usize;
            mismatches += !agree as usize;
            trials += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!(
            "{trials} trials over {C4_DICTS} dictionaries ({revoked_seen} revoked queries): {mismatches} mismatches against linear scan in {:.1} s",
            t.elapsed().as_secs_f64()
        ),
    )
}

fn c5_freshness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let key = CaSigningKey::generate(&mut rng);
    let public = key.public();
    let m = DEFAULT_CHAIN_LENGTH;
    let dict = Dictionary::from_serials(CaId::from_u64(5), &[SerialNumber::from_u64(7)]).unwrap();
    let (sr, secret) = make_signed_root(&key, &dict, START, m, &mut rng);
    let q = SerialNumber::from_u64(8);
    let d = C5_DELTA;
    let mut ps = vec![0, 1, 2, m / 2, m - 2, m - 1];
    ps.extend((0..24).map(|_| rng.gen_range(0..m)));
    let mut checks = 0;
    let mut wrong = Vec::new();
    for &p in &ps {
        let Refresh::Statement(fs) = refresh(&secret, &sr, START + p * d, d) else {
            wrong.push(format!("no statement for p={p}"));
            continue;
        };
        let st = dict.prove(&q, &sr, &fs).unwrap();
        let mut offsets = vec![0, 1, d, 2 * d - 1, 2 * d, 2 * d + 1, 3 * d];
        offsets.extend((0..4).map(|_| rng.gen_range(0..=3 * d)));
        for off in offsets {
            let now = START + p * d + off;
            let accepted = verify_status(&st, &q, &public, now, d) == Verdict::NotRevoked;
            checks += 1;
            if accepted != (off <= 2 * d) {
                wrong.push(format!("p={p} offset={off} accepted={accepted}"));
            }
        }
    }
    outcome(
        wrong.is_empty(),
        format!(
            "{checks} (period, offset) checks with m={m}, delta={d}, boundary offsets 2d and 2d+1 included: {} wrong{}",
            wrong.len(),
            wrong.first().map_or(String::new(), |w| format!(", first {w}"))
        ),
    )
}

fn c6_tamper() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let key = CaSigningKey::generate(&mut rng);
    let public = key.public();
    let ca = CaId::from_u64(6);
    let members: Vec<SerialNumber> = (0..300u64).map(|i| SerialNumber::from_u64(1000 + 3 * i)).collect();
    let dict = Dictionary::from_serials(ca, &members).unwrap();
    let (sr, fs) = signed(&dict, &key, &mut rng, START);
    let empty = Dictionary::new(ca);
    let (esr, efs) = signed(&empty, &key, &mut rng, START);
    let cases: Vec<(&str, SerialNumber, RevocationStatus)> = vec![
        ("present", members[17].clone(), dict.prove(&members[17], &sr, &fs).unwrap()),
        ("absent-pair", SerialNumber::from_u64(1001), dict.prove(&SerialNumber::from_u64(1001), &sr, &fs).unwrap()),
        ("absent-below", SerialNumber::from_u64(5), dict.prove(&SerialNumber::from_u64(5), &sr, &fs).unwrap()),
        ("absent-above", SerialNumber::from_u64(99_999), dict.prove(&SerialNumber::from_u64(99_999), &sr, &fs).unwrap()),
        ("absent-empty", SerialNumber::from_u64(5), empty.prove(&SerialNumber::from_u64(5), &esr, &efs).unwrap()),
    ];
    for (name, q, st) in &cases {
        assert!(
            !matches!(verify_status(st, q, &public, START + 1, 60), Verdict::Invalid(_)),
            "untampered {name} status must verify"
        );
    }
    let mut invalid = 0usize;
    let mut unparsable = 0usize;
    let mut accepted = Vec::new();
    let mut regions = [0usize; 3];
    for i in 0..C6_MUTATIONS {
        let (name, q, st) = &cases[i % cases.len()];
        let mut bytes = st.to_bytes();
        let pos = rng.gen_range(0..bytes.len());
        let old = bytes[pos];
        bytes[pos] = loop {
            let v: u8 = rng.gen();
            if v != old {
                break v;
            }
        };
        // layout: proof, then signed root, then the 20-byte statement
        let tail = bytes.len() - pos;
        let region = if tail <= 20 { 2 } else if tail <= 20 + 128 { 1 } else { 0 };
        regions[region] += 1;
        match RevocationStatus::from_bytes(&bytes) {
            None => unparsable += 1,
            Some(t) => match verify_status(&t, q, &public, START + 1, 60) {
                Verdict::Invalid(_) => invalid += 1,
                v => accepted.push(format!("{name} byte {pos}: {v:?}")),
            },
        }
    }
    outcome(
        accepted.is_empty() && regions.iter().all(|&r| r > 0),
        format!(
            "{C6_MUTATIONS} mutations (proof {}, signed root {}, freshness {}): {} invalid, {} unparsable, {} accepted{}",
            regions[0],
            regions[1],
            regions[2],
            invalid,
            unparsable,
            accepted.len(),
            accepted.first().map_or(String::new(), |a| format!(", first {a}"))
        ),
    )
}

fn race_scenario(seed: u64) -> (Scenario, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delta = [10, 10, 20, 30][rng.gen_range(0..4)];
    let mut s = Scenario::minimal(delta, 20 * delta);
    s.seed = seed;
    s.topology.app_interval = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..delta) };
    s.trace.profile = TraceSource::Steady;
    s.trace.per_ca_mean = 5.0;
    let at = rng.gen_range(2 * delta..12 * delta);
    s.faults.push(Fault::RevokeServerCert { connection: 0, at });
    (s, delta)
}

fn c7_race() -> Outcome {
    let mut worst = (0u64, 0u64, 0u64);
    let mut failures = Vec::new();
    for seed in 1..=C7_SEEDS {
        let (s, delta) = race_scenario(seed);
        let jitter = (delta as f64 * s.topology.poll_jitter).ceil() as u64;
        let bound = 2 * delta + jitter + s.topology.grace;
        let r = run_scenario(&s).unwrap();
        let d = &r.detections[0];
        let ok = d.state == ConnState::Interrupted(InterruptReason::Revoked) && d.latency().is_some_and(|l| l <= bound);
        if let Some(l) = d.latency() {
            if l * worst.2.max(1) >= worst.0 * bound {
                worst = (l, delta, bound);
            }
        }
        if !ok {
            failures.push(format!("seed {seed}: {:?} latency {:?} bound {bound}", d.state, d.latency()));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{C7_SEEDS} seeds, bound 2d + ceil(0.1d) + grace: closest {} s against {} s (d={}); {} failures{}",
            worst.0,
            worst.2,
            worst.1,
            failures.len(),
            failures.first().map_or(String::new(), |f| format!(", first {f}"))
        ),
    )
}

fn c8_suppression() -> Outcome {
    let mut lines = Vec::new();
    let mut all = true;
    for (seed, delta, app) in [(1u64, 10u64, 0u64), (2, 10, 3), (3, 30, 0), (4, 60, 7)] {
        let mut s = Scenario::minimal(delta, 12 * delta);
        s.seed = seed;
        s.topology.app_interval = app;
        let from = 2 * delta + 3;
        s.faults.push(Fault::SuppressStatuses { connection: None, from });
        let r = run_scenario(&s).unwrap();
        let c = &r.connections[0];
        let expected = c.last_valid_status + 2 * delta + s.topology.grace;
        let ok = c.state == ConnState::Interrupted(InterruptReason::StaleStatus) && c.ended == Some(expected);
        all &= ok;
        lines.push(format!("d={delta}: ended {:?}, expected {expected}", c.ended));
    }
    outcome(all, format!("suppression from handshake + ~2d: {}", lines.join("; ")))
}

fn equivocation_scenario() -> Scenario {
    let mut s = Scenario::minimal(10, 400);
    s.topology.cas = 2;
    s.topology.dps = 2;
    s.topology.edges = 2;
    s.topology.ras = 2;
    s.topology.connections = 2;
    s.monitor.pairs = vec![[0, 1]];
    s.faults.push(Fault::Equivocate { ca: 0, at: 55 });
    s
}

fn honest_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let delta = [5, 10, 30, 60][rng.gen_range(0..4)];
    let mut s = Scenario::minimal(delta, 40 * delta);
    s.seed = seed;
    let t = &mut s.topology;
    t.cas = rng.gen_range(1..=4);
    t.dps = rng.gen_range(1..=2);
    t.edges = rng.gen_range(1..=3);
    t.ras = rng.gen_range(1..=3);
    t.edge_ttl = [0, delta / 2, delta][rng.gen_range(0..3)];
    t.connections = rng.gen_range(1..=3);
    t.connect_spacing = rng.gen_range(0..delta);
    t.app_interval = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=delta) };
    let ras = t.ras;
    let connections = t.connections;
    s.chain_length = [5, 100, DEFAULT_CHAIN_LENGTH][rng.gen_range(0..3)];
    s.trace.profile = TraceSource::Steady;
    s.trace.per_ca_mean = rng.gen_range(0.0..20.0);
    s.monitor.interval = 3 * delta;
    s.monitor.pairs = (0..ras).flat_map(|a| (a + 1..ras).map(move |b| [a, b])).collect();
    if rng.gen_bool(0.5) {
        s.faults.push(Fault::DropDeliveries {
            ra: rng.gen_range(0..ras),
            probability: rng.gen_range(0.0..0.5),
            from: 0,
            until: Some(30 * delta),
        });
    }
    if rng.gen_bool(0.3) {
        let from = rng.gen_range(delta..20 * delta);
        s.faults.push(Fault::DpOutage {
            dp: 0,
            from,
            until: Some(from + rng.gen_range(1..5 * delta)),
        });
    }
    if rng.gen_bool(0.5) {
        s.faults.push(Fault::RevokeServerCert {
            connection: rng.gen_range(0..connections),
            at: rng.gen_range(delta..30 * delta),
        });
    }
    s
}

fn c9_equivocation() -> Outcome {
    let s = equivocation_scenario();
    let r = run_scenario(&s).unwrap();
    let at = 55;
    let registry_key = |ca: &CaId| {
        // the runner derives keys from the seed; recover them from a replica
        // of the same scenario's registry
        ritm_sim::runner::scenario_registry(&s).get(ca).map(|e| e.key)
    };
    let verified = r
        .misbehavior
        .iter()
        .filter(|f| registry_key(&f.proof.ca_id).is_some_and(|k| verify_misbehavior(&f.proof, &k)))
        .count();
    let first = r.misbehavior.iter().map(|f| f.time).min();
    let window = s.monitor_interval() + s.delta;
    let detected_in_time = first.is_some_and(|t| t <= at + window);
    let forked_ok = r.misbehavior.iter().all(|f| f.proof.ca_id == ca_id_for(0));

    let mut false_alarms = 0usize;
    let mut comparisons = 0u64;
    for seed in 1..=C9_HONEST_SEEDS {
        let rep = run_scenario(&honest_scenario(seed)).unwrap();
        false_alarms += rep.misbehavior.len();
        comparisons += rep.comparisons;
    }
    outcome(
        verified > 0 && verified == r.misbehavior.len() && detected_in_time && forked_ok && false_alarms == 0,
        format!(
            "fork at t={at}: {} proofs, {verified} verify, first at t={} (limit {}); honest sweep: {false_alarms} misbehavior verdicts over {C9_HONEST_SEEDS} seeds and {comparisons} comparisons",
            r.misbehavior.len(),
            first.map_or("never".into(), |t| t.to_string()),
            at + window
        ),
    )
}

fn agent() -> RevocationAgent {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut registry = CaRegistry::new();
    registry.insert(CaId::from_u64(1), CaSigningKey::generate(&mut rng).public(), 10);
    RevocationAgent::new(Arc::new(ReplicaSet::new(registry)), 10)
}

fn pass_through(agent: &RevocationAgent, port: u16, c2s: &[u8], s2c: &[u8], rng: &mut ChaCha8Rng) -> bool {
    let key = ConnKey::new(([10, 1, 0, 1], port).into(), ([10, 1, 0, 2], 443).into());
    let mut conn = Connection::new(key);
    let (mut up, mut down) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < c2s.len() || j < s2c.len() {
        let a = (c2s.len() - i).min(rng.gen_range(1..4096));
        up.extend(agent.inspect(&mut conn, Direction::ClientToServer, &c2s[i..i + a], START));
        i += a;
        let b = (s2c.len() - j).min(rng.gen_range(1..4096));
        down.extend(agent.inspect(&mut conn, Direction::ServerToClient, &s2c[j..j + b], START));
        j += b;
    }
    up == c2s && down == s2c && agent.state(&key).is_none()
}

fn ritm_session_transparent(rng: &mut ChaCha8Rng, port: u16) -> bool {
    let key = CaSigningKey::generate(rng);
    let (mut ca, first) = CertificateAuthority::new(CaId::from_u64(9), key, 10, 1000, START, rng);
    let mut registry = CaRegistry::new();
    registry.insert(ca.ca_id(), ca.public_key(), 10);
    let mut dp = DistributionPoint::new(registry.clone());
    dp.publish(Publication::Issuance(first)).unwrap();
    dp.publish(ca.refresh(START, rng)).unwrap();
    let replicas = Arc::new(ReplicaSet::new(registry.clone()));
    replicas.sync_all(&mut dp, START);
    let agent = RevocationAgent::new(replicas, 10);
    let cert = Certificate::issue(ca.signing_key(), ca.ca_id(), SerialNumber::from_u64(port as u64), "ritm.test", START + 1000);

    let mut client = RitmClient::new(Arc::new(ClientPolicy::new(registry, 10)), true);
    let mut server = StubServer::new(vec![cert.to_bytes()]);
    let mut conn = Connection::new(ConnKey::new(([10, 2, 0, 1], port).into(), ([10, 2, 0, 2], 443).into()));
    let (mut c2s_in, mut c2s_out, mut s2c_in, mut s2c_out) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut to_server = client.hello(START);
    for _ in 0..4 {
        c2s_in.extend_from_slice(&to_server);
        let up = agent.inspect(&mut conn, Direction::ClientToServer, &to_server, START);
        c2s_out.extend_from_slice(&up);
        let reply = server.on_client_bytes(&up);
        if reply.is_empty() {
            break;
        }
        s2c_in.extend_from_slice(&reply);
        let mut down = agent.inspect(&mut conn, Direction::ServerToClient, &reply, START);
        down.extend(agent.poll(&mut conn, START).unwrap_or_default());
        s2c_out.extend_from_slice(&down);
        to_server = client.on_server_bytes(&down, START);
    }
    let data: Vec<u8> = (0..rng.gen_range(100..5000)).map(|_| rng.gen()).collect();
    let app = server.app_data(&data);
    s2c_in.extend_from_slice(&app);
    s2c_out.extend(agent.inspect(&mut conn, Direction::ServerToClient, &app, START));
    let Ok((clean, items)) = strip_status(&s2c_out) else { return false };
    conn.is_ritm() && !items.is_empty() && clean == s2c_in && c2s_out == c2s_in
}

fn c10_transparency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let agent = agent();
    let mut bytes = 0usize;
    let mut bad = Vec::new();
    let mut port = 1000u16;

    // random streams
    for _ in 0..8 {
        let n = rng.gen_range(20_000..120_000);
        let c2s: Vec<u8> = (0..n).map(|_| rng.gen()).collect();
        let s2c: Vec<u8> = (0..n / 2).map(|_| rng.gen()).collect();
        port += 1;
        if !pass_through(&agent, port, &c2s, &s2c, &mut rng) {
            bad.push("random");
        }
        bytes += c2s.len() + s2c.len();
    }
    // captured TLS 1.2 and 1.3 sessions
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/tls");
    for name in ["tls12", "tls13"] {
        let c2s = std::fs::read(dir.join(format!("{name}.c2s"))).unwrap();
        let s2c = std::fs::read(dir.join(format!("{name}.s2c"))).unwrap();
        for _ in 0..2 {
            port += 1;
            if !pass_through(&agent, port, &c2s, &s2c, &mut rng) {
                bad.push(name);
            }
            bytes += c2s.len() + s2c.len();
        }
    }
    // plain handshakes with the harness client and server
    let policy = Arc::new(ClientPolicy::new(CaRegistry::new(), 10));
    for k in 0..20 {
        let key = CaSigningKey::generate(&mut rng);
        let cert = Certificate::issue(&key, CaId::from_u64(1), SerialNumber::from_u64(k), "plain.test", START + 1000);
        let mut client = RitmClient::new(policy.clone(), false);
        let mut server = StubServer::new(vec![cert.to_bytes()]);
        let hello = client.hello(START);
        let first = server.on_client_bytes(&hello);
        let reply = client.on_server_bytes(&first, START);
        let fin = server.on_client_bytes(&reply);
        client.on_server_bytes(&fin, START);
        let data: Vec<u8> = (0..rng.gen_range(100..20_000)).map(|_| rng.gen()).collect();
        let app = server.app_data(&data);
        let c2s = [hello, reply].concat();
        let s2c = [first, fin, app].concat();
        port += 1;
        if !pass_through(&agent, port, &c2s, &s2c, &mut rng) {
            bad.push("plain-handshake");
        }
        bytes += c2s.len() + s2c.len();
    }
    // RITM sessions: with status records removed the client sees exactly
    // the server's bytes
    let mut ritm_sessions = 0;
    for k in 0..10 {
        ritm_sessions += ritm_session_transparent(&mut rng, 2000 + k) as usize;
    }
    let ritm_ok = ritm_sessions == 10;
    outcome(
        bad.is_empty() && bytes >= C10_MIN_BYTES && ritm_ok,
        format!(
            "{bytes} bytes of random, captured TLS 1.2/1.3 and plain handshake traffic (minimum {C10_MIN_BYTES}): {} altered streams; {ritm_sessions}/10 RITM sessions identical after removing status records",
            bad.len()
        ),
    )
}

fn c11_prove_timing() -> Outcome {
    let t = time_prove(C1_LEAVES, 10_000, 11);
    let us = t.mean().as_secs_f64() * 1e6;
    outcome(
        true,
        format!(
            "informational: prove at {C1_LEAVES} leaves averages {us:.2} us over {} calls (target < {C11_TARGET_US:.0} us: {})",
            t.calls,
            if us < C11_TARGET_US { "met" } else { "not met" }
        ),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    // cargo test passes harness flags; `--list` must print nothing runnable
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let filter: Option<u32> = args.iter().skip(1).find_map(|a| a.parse().ok());
    let criteria: [(u32, fn() -> Outcome); 11] = [
        (1, c1_proof_size),
        (2, c2_storage),
        (3, c3_quiet_window),
        (4, c4_oracle),
        (5, c5_freshness),
        (6, c6_tamper),
        (7, c7_race),
        (8, c8_suppression),
        (9, c9_equivocation),
        (10, c10_transparency),
        (11, c11_prove_timing),
    ];
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (n, f) in criteria {
        if filter.is_some_and(|x| x != n) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        failed += !o.pass as usize;
        let _ = writeln!(
            out,
            "criterion {n}: {} {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        let _ = out.flush();
    }
    if failed > 0 {
        let _ = writeln!(out, "{failed} criteria failed");
        std::process::exit(1);
    }
}
