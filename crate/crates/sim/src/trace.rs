//! Synthetic revocation traces and a CSV importer.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use ritm_core::authdict::{CaId, SerialNumber};

pub const DAY: u64 = 86_400;
/// 3-byte serials, as in the desk-scale measurements.
pub const SERIAL_MIN: u64 = 0x01_0000;
pub const SERIAL_MAX: u64 = 0xFF_FFFF;

/// Harness CA identifiers: CA `i` is `i + 1`.
pub fn ca_id_for(index: usize) -> CaId {
    CaId::from_u64(index as u64 + 1)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RevocationEvent {
    pub time: u64,
    pub ca: usize,
    pub serial: SerialNumber,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RevocationTrace {
    pub events: Vec<RevocationEvent>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("timestamps decrease at event {0}")]
    Unsorted(usize),
    #[error("serial {serial} revoked twice by CA {ca}")]
    Duplicate { ca: usize, serial: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Steady,
    Heartbleed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceParams {
    pub cas: usize,
    /// Mean revocations per CA over the whole span.
    pub per_ca_mean: f64,
    /// Exact total instead of Poisson counts.
    pub total: Option<u64>,
    pub start: u64,
    pub span: u64,
    /// Spread of the per-CA rate weights (σ of the underlying normal).
    pub ca_sigma: f64,
    /// Peak daily volume of the burst as a multiple of the baseline.
    pub peak_multiple: f64,
    /// Burst peak position as a fraction of the span.
    pub peak_at: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            cas: 1,
            per_ca_mean: 0.0,
            total: None,
            start: 0,
            span: DAY,
            ca_sigma: 1.0,
            peak_multiple: 10.0,
            peak_at: 0.5,
        }
    }
}

/// Relative burst volume `days` away from the peak: one day of ramp-up,
/// then a decay with a three-day half-life.
fn burst_shape(days: f64) -> f64 {
    if days < -1.0 {
        0.0
    } else if days < 0.0 {
        1.0 + days
    } else {
        0.5f64.powf(days / 3.0)
    }
}

fn ca_weights(cas: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dist = LogNormal::new(0.0, sigma.max(0.0)).expect("valid lognormal");
    let w: Vec<f64> = (0..cas).map(|_| if sigma > 0.0 { dist.sample(rng) } else { 1.0 }).collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|x| x * cas as f64 / sum).collect()
}

/// Splits `total` over `weights` proportionally (largest remainder).
fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let mut rest = total - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for i in order {
        if rest == 0 {
            break;
        }
        out[i] += 1;
        rest -= 1;
    }
    out
}

struct SerialPool {
    used: Vec<HashSet<u64>>,
}

impl SerialPool {
    fn draw(&mut self, ca: usize, rng: &mut ChaCha8Rng) -> SerialNumber {
        loop {
            let v = rng.gen_range(SERIAL_MIN..=SERIAL_MAX);
            if self.used[ca].insert(v) {
                return SerialNumber::from_u64(v);
            }
        }
    }
}

pub fn generate_trace(profile: Profile, p: &TraceParams, seed: u64) -> RevocationTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if p.cas == 0 || p.span == 0 || (p.per_ca_mean <= 0.0 && p.total.unwrap_or(0) == 0) {
        return RevocationTrace::default();
    }
    let weights = ca_weights(p.cas, p.ca_sigma, &mut rng);
    let days = p.span.div_ceil(DAY).max(1);
    let day_len = p.span.min(DAY);
    // relative volume of each day
    let mut day_w = vec![1.0; days as usize];
    if profile == Profile::Heartbleed {
        let peak = p.peak_at.clamp(0.0, 1.0) * (days as f64 - 1.0);
        for (d, w) in day_w.iter_mut().enumerate() {
            *w += (p.peak_multiple - 1.0).max(0.0) * burst_shape(d as f64 - peak.round());
        }
    }
    let day_sum: f64 = day_w.iter().sum();

    let per_ca: Vec<u64> = match p.total {
        Some(t) => apportion(t, &weights),
        None => weights
            .iter()
            .map(|w| {
                let lambda = p.per_ca_mean * w;
                if lambda <= 0.0 {
                    0
                } else {
                    Poisson::new(lambda).map(|d| d.sample(&mut rng) as u64).unwrap_or(0)
                }
            })
            .collect(),
    };

    let mut pool = SerialPool {
        used: vec![HashSet::new(); p.cas],
    };
    let mut events = Vec::with_capacity(per_ca.iter().sum::<u64>() as usize);
    for (ca, &count) in per_ca.iter().enumerate() {
        let split = apportion(count, &day_w.iter().map(|w| w / day_sum).collect::<Vec<_>>());
        for (d, &k) in split.iter().enumerate() {
            for _ in 0..k {
                let offset = rng.gen_range(0..day_len);
                let time = (p.start + d as u64 * DAY + offset).min(p.start + p.span - 1);
                events.push(RevocationEvent {
                    time,
                    ca,
                    serial: pool.draw(ca, &mut rng),
                });
            }
        }
    }
    events.sort_by(|a, b| a.time.cmp(&b.time).then(a.ca.cmp(&b.ca)).then(a.serial.cmp(&b.serial)));
    RevocationTrace { events }
}

impl RevocationTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let mut seen: BTreeMap<usize, HashSet<&SerialNumber>> = BTreeMap::new();
        for (i, e) in self.events.iter().enumerate() {
            if i > 0 && self.events[i - 1].time > e.time {
                return Err(TraceError::Unsorted(i));
            }
            if !seen.entry(e.ca).or_default().insert(&e.serial) {
                return Err(TraceError::Duplicate {
                    ca: e.ca,
                    serial: e.serial.to_hex(),
                });
            }
        }
        Ok(())
    }

    /// Serials per CA in trace order.
    pub fn per_ca(&self, cas: usize) -> Vec<Vec<SerialNumber>> {
        let mut out = vec![Vec::new(); cas];
        for e in &self.events {
            if e.ca < cas {
                out[e.ca].push(e.serial.clone());
            }
        }
        out
    }

    /// Events per day starting at `start`.
    pub fn daily_counts(&self, start: u64) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        for e in &self.events {
            let d = (e.time.saturating_sub(start) / DAY) as usize;
            if out.len() <= d {
                out.resize(d + 1, 0);
            }
            out[d] += 1;
        }
        out
    }

    /// `timestamp,ca_id,serial_hex` rows; CA ids are harness indexes + 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,ca_id,serial_hex\n");
        for e in &self.events {
            out.push_str(&format!("{},{},{}\n", e.time, ca_id_for(e.ca).to_hex(), e.serial.to_hex()));
        }
        out
    }

    /// Reads `timestamp,ca_id,serial_hex` rows (header optional). CA ids
    /// are mapped to harness indexes in order of first appearance unless
    /// they already are harness ids.
    pub fn from_csv_reader<R: std::io::Read>(r: R) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(r);
        let mut ids: BTreeMap<String, usize> = BTreeMap::new();
        let mut events = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 1;
            let err = |msg: &str| TraceError::Parse {
                line,
                msg: msg.to_string(),
            };
            if rec.len() != 3 {
                return Err(err("expected 3 fields"));
            }
            if i == 0 && rec[0].eq_ignore_ascii_case("timestamp") {
                continue;
            }
            let time = rec[0].parse::<u64>().map_err(|_| err("bad timestamp"))?;
            let ca_key = rec[1].to_ascii_lowercase();
            let next = ids.len();
            let ca = *ids.entry(ca_key).or_insert(next);
            let raw = hex::decode(rec[2].trim_start_matches("0x")).map_err(|_| err("bad serial hex"))?;
            let serial = SerialNumber::from_be_lenient(&raw).map_err(|e| err(&e.to_string()))?;
            events.push(RevocationEvent { time, ca, serial });
        }
        let trace = RevocationTrace { events };
        trace.validate()?;
        Ok(trace)
    }

    pub fn from_csv_file(path: &Path) -> Result<Self, TraceError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn cas_referenced(&self) -> usize {
        self.events.iter().map(|e| e.ca + 1).max().unwrap_or(0)
    }
}
