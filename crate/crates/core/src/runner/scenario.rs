use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::AttackKind;
use crate::fabric::DEFAULT_TICK_BUDGET;
use crate::modes::Mode;
use crate::netcore::{IpAddr4, Ipv4Net, MacAddr, VlanTag};
use crate::secured::Rule;

pub const SCHEMA: &str = "vnetsim/scenario@1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSpec {
    pub name: String,
    pub mac: MacAddr,
    pub ip: IpAddr4,
    /// Bridged segment; segment 0 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<u32>,
    /// Access VLAN in secured mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlan: Option<VlanTag>,
    /// A host outside the virtual network, reachable through the uplink.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub external: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Forwarding table (routed, NAT) or bridge table size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cam_capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway_ip: Option<IpAddr4>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway_mac: Option<MacAddr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub public_ip: Option<IpAddr4>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_net: Option<Ipv4Net>,
    /// Declared IP → MAC truth for the secured switch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<BTreeMap<IpAddr4, MacAddr>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub firewall: Vec<Rule>,
    /// Enables the secured uplink for these tags.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uplink_tags: Option<Vec<VlanTag>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arp_timeout: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arp_cache_ttl: Option<u64>,
}

/// Plain traffic sent before any attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub from: String,
    pub to: String,
    pub payload: String,
    /// Address the frame straight to the destination's MAC instead of
    /// resolving it, as if the sender had been told out of band.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub direct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub modes: Vec<Mode>,
}

fn default_budget() -> u64 {
    DEFAULT_TICK_BUDGET
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub tick_budget: u64,
    pub endpoints: Vec<EndpointSpec>,
    #[serde(default)]
    pub device: DeviceSpec,
    /// Every endpoint sends a gratuitous ARP before traffic and attacks.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub announce: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traffic: Vec<TrafficSpec>,
    #[serde(default)]
    pub attacks: Vec<AttackKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSpec>,
}

impl Scenario {
    pub fn endpoint(&self, name: &str) -> Option<&EndpointSpec> {
        self.endpoints.iter().find(|e| e.name == name)
    }

    /// Modes this scenario runs in: the matrix columns, or the one device mode.
    pub fn modes(&self) -> Vec<Mode> {
        match (&self.matrix, self.device.mode) {
            (Some(m), _) => m.modes.clone(),
            (None, Some(mode)) => vec![mode],
            (None, None) => Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IssueKind {
    Parse,
    UnresolvedReference,
    InvalidValue,
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IssueKind::Parse => "parse-error",
            IssueKind::UnresolvedReference => "unresolved-reference",
            IssueKind::InvalidValue => "invalid-value",
        })
    }
}

/// One problem found in a scenario file, located by field path and, for
/// parse errors, by line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaIssue {
    pub kind: IssueKind,
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl SchemaIssue {
    fn new(kind: IssueKind, path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaIssue {
            kind,
            path: path.into(),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for SchemaIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "line {l} column {c}: ")?;
        }
        if !self.path.is_empty() && self.path != "." {
            write!(f, "{}: ", self.path)?;
        }
        write!(f, "{}: {}", self.kind, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("no bundled scenario named {0:?}")]
    UnknownBundled(String),
    #[error("{}", render_issues(.0))]
    Invalid(Vec<SchemaIssue>),
}

fn render_issues(issues: &[SchemaIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

impl ScenarioError {
    pub fn issues(&self) -> &[SchemaIssue] {
        match self {
            ScenarioError::Invalid(v) => v,
            _ => &[],
        }
    }
}

/// Parse and fully validate scenario text.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        ScenarioError::Invalid(vec![SchemaIssue {
            kind: IssueKind::Parse,
            path,
            line: Some(line),
            column: Some(column),
            message: strip_location(&inner.to_string()),
        }])
    })?;
    let issues = validate(&scenario);
    if issues.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(issues))
    }
}

/// serde_json appends " at line L column C"; the issue carries those already.
fn strip_location(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_scenario(&text)
}

fn attack_refs(kind: &AttackKind) -> Vec<(&'static str, String)> {
    match kind {
        AttackKind::ArpSpoof {
            attacker,
            victim_a,
            victim_b,
            ..
        } => vec![
            ("attacker", attacker.clone()),
            ("victim_a", victim_a.clone()),
            ("victim_b", victim_b.clone()),
        ],
        AttackKind::Sniff { attacker, flow } => vec![
            ("attacker", attacker.clone()),
            ("flow.src", flow.src.clone()),
            ("flow.dst", flow.dst.clone()),
        ],
        AttackKind::MacFlood {
            attacker,
            then_sniff_flow,
            ..
        } => vec![
            ("attacker", attacker.clone()),
            ("then_sniff_flow.src", then_sniff_flow.src.clone()),
            ("then_sniff_flow.dst", then_sniff_flow.dst.clone()),
        ],
    }
}

/// Semantic checks beyond the JSON shape.
pub fn validate(s: &Scenario) -> Vec<SchemaIssue> {
    use IssueKind::*;
    let mut issues = Vec::new();
    let mut bad = |kind, path: String, msg: String| issues.push(SchemaIssue::new(kind, path, msg));

    if s.schema != SCHEMA {
        bad(InvalidValue, "schema".into(), format!("expected {SCHEMA:?}, got {:?}", s.schema));
    }
    let mut names = BTreeSet::new();
    let mut macs = BTreeSet::new();
    let mut ips = BTreeSet::new();
    for (i, e) in s.endpoints.iter().enumerate() {
        if !names.insert(e.name.as_str()) {
            bad(InvalidValue, format!("endpoints[{i}].name"), format!("duplicate endpoint name {:?}", e.name));
        }
        if e.mac.is_broadcast() || e.mac.is_zero() {
            bad(InvalidValue, format!("endpoints[{i}].mac"), format!("{} cannot identify an endpoint", e.mac));
        } else if !macs.insert(e.mac) {
            bad(InvalidValue, format!("endpoints[{i}].mac"), format!("duplicate mac {}", e.mac));
        }
        if !ips.insert(e.ip) {
            bad(InvalidValue, format!("endpoints[{i}].ip"), format!("duplicate ip {}", e.ip));
        }
    }

    let modes = s.modes();
    if modes.is_empty() {
        bad(InvalidValue, "device.mode".into(), "a mode is required unless a matrix is given".into());
    }
    if let Some(m) = &s.matrix {
        let distinct: BTreeSet<_> = m.modes.iter().collect();
        if distinct.len() != m.modes.len() {
            bad(InvalidValue, "matrix.modes".into(), "modes repeat".into());
        }
    }
    for (field, v) in [("capacity", s.device.capacity), ("cam_capacity", s.device.cam_capacity)] {
        if v == Some(0) {
            bad(InvalidValue, format!("device.{field}"), "must be positive".into());
        }
    }
    if modes.contains(&Mode::Secured) {
        for (i, e) in s.endpoints.iter().enumerate() {
            if !e.external && e.vlan.is_none() {
                bad(InvalidValue, format!("endpoints[{i}].vlan"), format!("{} needs a vlan tag in secured mode", e.name));
            }
        }
    }
    if modes.contains(&Mode::Nat) && s.endpoints.iter().filter(|e| e.external).count() > 1 {
        bad(InvalidValue, "endpoints".into(), "NAT mode supports a single external host".into());
    }

    let known = |n: &str| s.endpoint(n).is_some();
    for (i, t) in s.traffic.iter().enumerate() {
        for (field, n) in [("from", &t.from), ("to", &t.to)] {
            if !known(n) {
                bad(UnresolvedReference, format!("traffic[{i}].{field}"), format!("no endpoint named {n:?}"));
            }
        }
    }
    for (i, a) in s.attacks.iter().enumerate() {
        let refs = attack_refs(a);
        for (field, n) in &refs {
            if !known(n) {
                bad(UnresolvedReference, format!("attacks[{i}].{field}"), format!("no endpoint named {n:?}"));
            }
        }
        if let AttackKind::MacFlood { prewarm: Some(list), .. } = a {
            for (j, n) in list.iter().enumerate() {
                if !known(n) {
                    bad(UnresolvedReference, format!("attacks[{i}].prewarm[{j}]"), format!("no endpoint named {n:?}"));
                }
            }
        }
        let distinct: BTreeSet<_> = refs.iter().map(|(_, n)| n).collect();
        if distinct.len() != refs.len() {
            bad(InvalidValue, format!("attacks[{i}]"), "attacker and victims must be distinct endpoints".into());
        }
        for (field, n) in &refs {
            if s.endpoint(n).is_some_and(|e| e.external) {
                bad(InvalidValue, format!("attacks[{i}].{field}"), format!("{n:?} is external"));
            }
        }
    }
    issues
}
