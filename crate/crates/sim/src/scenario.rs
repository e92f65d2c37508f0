//! Declarative scenario files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Profile, TraceParams};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid scenario at {location}: {msg}")]
pub struct ScenarioInvalid {
    pub location: String,
    pub msg: String,
}

fn invalid(location: impl Into<String>, msg: impl Into<String>) -> ScenarioInvalid {
    ScenarioInvalid {
        location: location.into(),
        msg: msg.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "one")]
    pub seed: u64,
    /// Simulated seconds.
    pub duration: u64,
    pub delta: u64,
    /// Hash chain length m.
    #[serde(default = "default_m")]
    pub chain_length: u64,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub trace: TraceSpec,
    #[serde(default)]
    pub monitor: MonitorSpec,
    #[serde(default, rename = "fault")]
    pub faults: Vec<Fault>,
}

fn one() -> u64 {
    1
}

fn default_m() -> u64 {
    ritm_core::authdict::DEFAULT_CHAIN_LENGTH
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Topology {
    pub cas: usize,
    pub dps: usize,
    pub edges: usize,
    /// Edge cache lifetime in seconds.
    pub edge_ttl: u64,
    pub ras: usize,
    /// Client/server pairs. Connection `i` goes through RA `i % ras` and
    /// uses a certificate from CA `i % cas`.
    pub connections: usize,
    /// Seconds after start at which the first connection opens.
    pub connect_at: u64,
    pub connect_spacing: u64,
    pub client_ritm: bool,
    pub expect_ritm: bool,
    pub grace: u64,
    /// Server application data interval; 0 = silent server.
    pub app_interval: u64,
    /// RA sync intervals are drawn from [(1 - jitter)Δ, Δ].
    pub poll_jitter: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Topology {
            cas: 1,
            dps: 1,
            edges: 1,
            edge_ttl: 0,
            ras: 1,
            connections: 1,
            connect_at: 1,
            connect_spacing: 0,
            client_ritm: true,
            expect_ritm: true,
            grace: ritm_core::client::DEFAULT_GRACE,
            app_interval: 0,
            poll_jitter: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    #[default]
    None,
    Steady,
    Heartbleed,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSpec {
    pub profile: TraceSource,
    pub per_ca_mean: f64,
    pub total: Option<u64>,
    /// Offset of the first event window from scenario start.
    pub start: u64,
    /// Length of the event window; 0 = the whole scenario.
    pub span: u64,
    pub ca_sigma: f64,
    pub peak_multiple: f64,
    pub peak_at: f64,
    /// CSV trace; timestamps are offsets from scenario start.
    pub path: Option<PathBuf>,
}

impl Default for TraceSpec {
    fn default() -> Self {
        let p = TraceParams::default();
        TraceSpec {
            profile: TraceSource::None,
            per_ca_mean: 0.0,
            total: None,
            start: 0,
            span: 0,
            ca_sigma: p.ca_sigma,
            peak_multiple: p.peak_multiple,
            peak_at: p.peak_at,
            path: None,
        }
    }
}

impl TraceSpec {
    pub fn profile(&self) -> Option<Profile> {
        match self.profile {
            TraceSource::Steady => Some(Profile::Steady),
            TraceSource::Heartbleed => Some(Profile::Heartbleed),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSpec {
    pub enabled: bool,
    /// Seconds between rounds; 0 = 10Δ.
    pub interval: u64,
    /// RA pairs that exchange signed roots each round.
    pub pairs: Vec<[usize; 2]>,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        MonitorSpec {
            enabled: true,
            interval: 0,
            pairs: Vec::new(),
        }
    }
}

/// Times are offsets from scenario start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Fault {
    /// The server certificate's CA revokes it.
    RevokeServerCert { connection: usize, at: u64 },
    /// An on-path attacker removes status records on the RA → client link.
    SuppressStatuses {
        connection: Option<usize>,
        #[serde(default)]
        from: u64,
    },
    /// The CA forks: a second branch is published through DP 1.
    Equivocate { ca: usize, at: u64 },
    /// Edge responses to an RA are lost with the given probability.
    DropDeliveries {
        ra: usize,
        probability: f64,
        #[serde(default)]
        from: u64,
        until: Option<u64>,
    },
    /// A distribution point stops answering.
    DpOutage {
        #[serde(default)]
        dp: usize,
        from: u64,
        until: Option<u64>,
    },
}

impl Fault {
    pub fn name(&self) -> &'static str {
        match self {
            Fault::RevokeServerCert { .. } => "revoke_server_cert",
            Fault::SuppressStatuses { .. } => "suppress_statuses",
            Fault::Equivocate { .. } => "equivocate",
            Fault::DropDeliveries { .. } => "drop_deliveries",
            Fault::DpOutage { .. } => "dp_outage",
        }
    }

    /// Faults that can leave replicas behind the CA at the end.
    pub fn is_permanent(&self) -> bool {
        match self {
            Fault::Equivocate { .. } => true,
            Fault::DropDeliveries { until, .. } | Fault::DpOutage { until, .. } => until.is_none(),
            _ => false,
        }
    }
}

impl Scenario {
    pub fn minimal(delta: u64, duration: u64) -> Self {
        Scenario {
            seed: 1,
            duration,
            delta,
            chain_length: default_m(),
            topology: Topology::default(),
            trace: TraceSpec::default(),
            monitor: MonitorSpec::default(),
            faults: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioInvalid> {
        let s: Scenario = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|sp| {
                    let line = text[..sp.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".into());
            invalid(location, e.message())
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioInvalid> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(path.display().to_string(), e.to_string()))?;
        let mut s = Self::parse(&text)?;
        if let Some(p) = &s.trace.path {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    s.trace.path = Some(dir.join(p));
                }
            }
        }
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn monitor_interval(&self) -> u64 {
        if self.monitor.interval == 0 {
            10 * self.delta
        } else {
            self.monitor.interval
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioInvalid> {
        let t = &self.topology;
        if self.delta == 0 {
            return Err(invalid("delta", "must be positive"));
        }
        if self.duration == 0 {
            return Err(invalid("duration", "must be positive"));
        }
        if self.chain_length == 0 {
            return Err(invalid("chain_length", "must be positive"));
        }
        for (name, v) in [("cas", t.cas), ("dps", t.dps), ("edges", t.edges), ("ras", t.ras)] {
            if v == 0 {
                return Err(invalid(format!("topology.{name}"), "must be at least 1"));
            }
        }
        if t.cas > u16::MAX as usize {
            return Err(invalid("topology.cas", "too many CAs"));
        }
        if !(0.0..1.0).contains(&t.poll_jitter) {
            return Err(invalid("topology.poll_jitter", "must lie in [0, 1)"));
        }
        if t.connect_at == 0 && t.connections > 0 {
            return Err(invalid("topology.connect_at", "connections open after the first sync"));
        }
        let tr = &self.trace;
        match tr.profile {
            TraceSource::Csv if tr.path.is_none() => return Err(invalid("trace.path", "required for csv traces")),
            TraceSource::Steady | TraceSource::Heartbleed => {
                if !(tr.per_ca_mean >= 0.0 && tr.per_ca_mean.is_finite()) {
                    return Err(invalid("trace.per_ca_mean", "must be a non-negative number"));
                }
                if tr.start + tr.span > self.duration {
                    return Err(invalid("trace.span", "event window ends after the scenario"));
                }
            }
            _ => {}
        }
        for [a, b] in &self.monitor.pairs {
            if *a >= t.ras || *b >= t.ras || a == b {
                return Err(invalid("monitor.pairs", format!("bad RA pair [{a}, {b}]")));
            }
        }
        for (i, f) in self.faults.iter().enumerate() {
            let loc = |field: &str| format!("fault[{i}].{field}");
            match f {
                Fault::RevokeServerCert { connection, at } => {
                    if *connection >= t.connections {
                        return Err(invalid(loc("connection"), "no such connection"));
                    }
                    if *at >= self.duration {
                        return Err(invalid(loc("at"), "after scenario end"));
                    }
                }
                Fault::SuppressStatuses { connection, .. } => {
                    if connection.is_some_and(|c| c >= t.connections) {
                        return Err(invalid(loc("connection"), "no such connection"));
                    }
                }
                Fault::Equivocate { ca, at } => {
                    if *ca >= t.cas {
                        return Err(invalid(loc("ca"), "no such CA"));
                    }
                    if t.dps < 2 {
                        return Err(invalid(loc("kind"), "equivocation needs two distribution points"));
                    }
                    if *at == 0 || *at >= self.duration {
                        return Err(invalid(loc("at"), "must fall inside the scenario"));
                    }
                }
                Fault::DropDeliveries {
                    ra,
                    probability,
                    from,
                    until,
                } => {
                    if *ra >= t.ras {
                        return Err(invalid(loc("ra"), "no such RA"));
                    }
                    if !(0.0..=1.0).contains(probability) {
                        return Err(invalid(loc("probability"), "must lie in [0, 1]"));
                    }
                    if until.is_some_and(|u| u <= *from) {
                        return Err(invalid(loc("until"), "must follow from"));
                    }
                }
                Fault::DpOutage { dp, from, until } => {
                    if *dp >= t.dps {
                        return Err(invalid(loc("dp"), "no such distribution point"));
                    }
                    if until.is_some_and(|u| u <= *from) {
                        return Err(invalid(loc("until"), "must follow from"));
                    }
                }
            }
        }
        Ok(())
    }
}
