//! Scenario results and the overhead summary.

use std::fmt::Write as _;

use ritm_core::client::{ClientEvent, ConnState};
use ritm_core::monitor::MisbehaviorProof;

/// Everything a run produces. Times are seconds since scenario start.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub seed: u64,
    pub delta: u64,
    pub duration: u64,
    pub cas: usize,
    /// Per RA, bytes downloaded in each Δ window.
    pub bandwidth: Vec<Vec<u64>>,
    /// Per-Δ payload an RA needs according to the published messages.
    pub published_bandwidth: Vec<u64>,
    /// Per RA, replica bytes in storage format at the end.
    pub storage: Vec<u64>,
    /// Payload sizes of every status seen on RA → client links.
    pub status_sizes: Vec<usize>,
    pub connections: Vec<ConnectionLog>,
    pub detections: Vec<Detection>,
    pub misbehavior: Vec<Finding>,
    pub comparisons: u64,
    pub monitor_rounds: u64,
    pub sync_failures: u64,
    pub dropped_deliveries: u64,
    pub revocations_published: u64,
    pub trace_daily: Vec<u64>,
    /// Per RA: all replicas match their CA after the final sync.
    pub converged: Vec<bool>,
    /// Per RA: every trace serial is in the replica exactly once.
    pub conserved: Vec<bool>,
    pub permanent_faults: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectionLog {
    pub id: usize,
    pub ra: usize,
    pub opened: u64,
    pub state: ConnState,
    pub ended: Option<u64>,
    pub last_valid_status: u64,
    pub statuses: u64,
    pub events: Vec<ClientEvent>,
}

/// Revocation of a server certificate and the moment its client gave up.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Detection {
    pub connection: usize,
    pub published: u64,
    pub detected: Option<u64>,
    pub state: ConnState,
}

impl Detection {
    pub fn latency(&self) -> Option<u64> {
        self.detected.map(|d| d.saturating_sub(self.published))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub time: u64,
    /// `monitor`, `pair`, `agent` or `client`.
    pub source: &'static str,
    pub proof: MisbehaviorProof,
}

pub fn state_label(s: ConnState) -> String {
    match s {
        ConnState::Handshaking => "handshaking".into(),
        ConnState::Accepted { protected: true } => "accepted".into(),
        ConnState::Accepted { protected: false } => "accepted-unprotected".into(),
        ConnState::Rejected(r) => format!("rejected({r})"),
        ConnState::Interrupted(r) => format!("interrupted({r})"),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stats {
    pub count: usize,
    pub min: u64,
    pub mean: f64,
    pub max: u64,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = u64>) -> Self {
        let mut s = Stats::default();
        let mut sum = 0u128;
        for v in values {
            if s.count == 0 || v < s.min {
                s.min = v;
            }
            s.max = s.max.max(v);
            sum += v as u128;
            s.count += 1;
        }
        if s.count > 0 {
            s.mean = sum as f64 / s.count as f64;
        }
        s
    }
}

impl MetricsReport {
    pub fn status_stats(&self) -> Stats {
        Stats::of(self.status_sizes.iter().map(|&x| x as u64))
    }

    /// Windows after the bootstrap round, over all RAs.
    pub fn steady_bandwidth(&self) -> Stats {
        Stats::of(self.bandwidth.iter().flat_map(|s| s.iter().skip(1).copied()))
    }

    pub fn latency_stats(&self) -> Stats {
        Stats::of(self.detections.iter().filter_map(|d| d.latency()))
    }

    /// Long-format CSV: `metric,key,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,key,value\n");
        let mut row = |m: &str, k: &str, v: String| {
            let _ = writeln!(out, "{m},{k},{v}");
        };
        row("run", "seed", self.seed.to_string());
        row("run", "delta", self.delta.to_string());
        row("run", "duration", self.duration.to_string());
        row("run", "cas", self.cas.to_string());
        row("run", "revocations_published", self.revocations_published.to_string());
        row("run", "sync_failures", self.sync_failures.to_string());
        row("run", "dropped_deliveries", self.dropped_deliveries.to_string());
        for (r, series) in self.bandwidth.iter().enumerate() {
            for (k, b) in series.iter().enumerate() {
                row("bandwidth", &format!("ra{r}:w{k}"), b.to_string());
            }
        }
        for (k, b) in self.published_bandwidth.iter().enumerate() {
            row("published_bandwidth", &format!("w{k}"), b.to_string());
        }
        for (r, b) in self.storage.iter().enumerate() {
            row("storage", &format!("ra{r}"), b.to_string());
        }
        let st = self.status_stats();
        row("status_size", "count", st.count.to_string());
        row("status_size", "min", st.min.to_string());
        row("status_size", "mean", format!("{:.1}", st.mean));
        row("status_size", "max", st.max.to_string());
        for c in &self.connections {
            row("connection", &format!("c{}:state", c.id), state_label(c.state));
            row("connection", &format!("c{}:last_valid_status", c.id), c.last_valid_status.to_string());
            row("connection", &format!("c{}:statuses", c.id), c.statuses.to_string());
            if let Some(e) = c.ended {
                row("connection", &format!("c{}:ended", c.id), e.to_string());
            }
        }
        for d in &self.detections {
            let lat = d.latency().map_or("none".into(), |l| l.to_string());
            row("detection", &format!("c{}:published", d.connection), d.published.to_string());
            row("detection", &format!("c{}:latency", d.connection), lat);
        }
        row("monitor", "rounds", self.monitor_rounds.to_string());
        row("monitor", "comparisons", self.comparisons.to_string());
        row("monitor", "misbehavior", self.misbehavior.len().to_string());
        for (r, (c, k)) in self.converged.iter().zip(&self.conserved).enumerate() {
            row("convergence", &format!("ra{r}"), c.to_string());
            row("conservation", &format!("ra{r}"), k.to_string());
        }
        out
    }

    /// `time connection event reason`, ordered by time.
    pub fn events_log(&self) -> String {
        let mut lines: Vec<(u64, usize, usize, String)> = Vec::new();
        for c in &self.connections {
            for (i, e) in c.events.iter().enumerate() {
                lines.push((e.time, c.id, i, format!("{} c{} {} {}", e.time, c.id, e.event, e.reason)));
            }
        }
        for f in &self.misbehavior {
            lines.push((
                f.time,
                usize::MAX,
                0,
                format!("{} - misbehavior {} ca={}", f.time, f.source, f.proof.ca_id.to_hex()),
            ));
        }
        lines.sort();
        lines.into_iter().map(|l| l.3 + "\n").collect()
    }

    /// Gnuplot-ready: window start, then one column per RA.
    pub fn bandwidth_series(&self) -> String {
        let mut out = String::from("# t");
        for r in 0..self.bandwidth.len() {
            let _ = write!(out, " ra{r}");
        }
        out.push_str(" published\n");
        let windows = self.bandwidth.iter().map(Vec::len).max().unwrap_or(0);
        for k in 0..windows {
            let _ = write!(out, "{}", k as u64 * self.delta);
            for s in &self.bandwidth {
                let _ = write!(out, " {}", s.get(k).copied().unwrap_or(0));
            }
            let _ = writeln!(out, " {}", self.published_bandwidth.get(k).copied().unwrap_or(0));
        }
        out
    }

    pub fn daily_series(&self) -> String {
        let mut out = String::from("# day revocations\n");
        for (d, n) in self.trace_daily.iter().enumerate() {
            let _ = writeln!(out, "{d} {n}");
        }
        out
    }
}

/// The summary table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overheads {
    pub ras: usize,
    pub storage_max: u64,
    pub bandwidth: Stats,
    pub published_bandwidth: Stats,
    pub status: Stats,
    pub latency: Stats,
    pub misbehavior: usize,
}

pub fn measure_overheads(report: &MetricsReport) -> Overheads {
    Overheads {
        ras: report.storage.len(),
        storage_max: report.storage.iter().copied().max().unwrap_or(0),
        bandwidth: report.steady_bandwidth(),
        published_bandwidth: Stats::of(report.published_bandwidth.iter().skip(1).copied()),
        status: report.status_stats(),
        latency: report.latency_stats(),
        misbehavior: report.misbehavior.len(),
    }
}

impl Overheads {
    fn rows(&self) -> Vec<(&'static str, String, String, String, String)> {
        let f = |s: &Stats| {
            (
                s.count.to_string(),
                s.min.to_string(),
                format!("{:.1}", s.mean),
                s.max.to_string(),
            )
        };
        let mut rows = Vec::new();
        let s = self.storage_max.to_string();
        rows.push(("storage_bytes", self.ras.to_string(), s.clone(), s.clone(), s));
        for (name, st) in [
            ("bandwidth_per_delta", &self.bandwidth),
            ("published_per_delta", &self.published_bandwidth),
            ("status_bytes", &self.status),
            ("detection_latency_s", &self.latency),
        ] {
            let (n, lo, mean, hi) = f(st);
            rows.push((name, n, lo, mean, hi));
        }
        let m = self.misbehavior.to_string();
        rows.push(("misbehavior_proofs", m.clone(), m.clone(), m.clone(), m));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,count,min,mean,max\n");
        for (name, n, lo, mean, hi) in self.rows() {
            let _ = writeln!(out, "{name},{n},{lo},{mean},{hi}");
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = format!("{:<22} {:>8} {:>12} {:>12} {:>12}\n", "metric", "count", "min", "mean", "max");
        for (name, n, lo, mean, hi) in self.rows() {
            let _ = writeln!(out, "{name:<22} {n:>8} {lo:>12} {mean:>12} {hi:>12}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_gives_zero_table() {
        let o = measure_overheads(&MetricsReport::default());
        assert_eq!(o, Overheads::default());
        for line in o.to_csv().lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert!(fields[1..].iter().all(|f| f.parse::<f64>().unwrap() == 0.0), "{line}");
        }
    }

    #[test]
    fn stats() {
        let s = Stats::of([3, 1, 2]);
        assert_eq!((s.count, s.min, s.max), (3, 1, 3));
        assert!((s.mean - 2.0).abs() < 1e-12);
    }
}
