//! Trace events and their line-oriented JSON encoding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcore::{EthernetFrame, IpAddr4, MacAddr, VlanTag};

use super::PortId;

/// Why a frame (or one copy of it) did not reach an endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    CrossVlan,
    CamTamper,
    RegistryMismatch,
    CamFull,
    CamFullUnknownDestination,
    VlanNotAllowed,
    NatNoMapping,
    ArpUnresolved,
    NoRoute,
    NoEgress,
    DefaultDeny,
    /// Reason named by an operator-supplied firewall rule.
    Policy(String),
}

impl DropReason {
    pub fn as_str(&self) -> &str {
        match self {
            DropReason::CrossVlan => "cross-vlan",
            DropReason::CamTamper => "cam-tamper",
            DropReason::RegistryMismatch => "registry-mismatch",
            DropReason::CamFull => "cam-full",
            DropReason::CamFullUnknownDestination => "cam-full-unknown-destination",
            DropReason::VlanNotAllowed => "vlan-not-allowed",
            DropReason::NatNoMapping => "nat-no-mapping",
            DropReason::ArpUnresolved => "arp-unresolved",
            DropReason::NoRoute => "no-route",
            DropReason::NoEgress => "no-egress",
            DropReason::DefaultDeny => "default-deny",
            DropReason::Policy(s) => s,
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DropReason {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "cross-vlan" => DropReason::CrossVlan,
            "cam-tamper" => DropReason::CamTamper,
            "registry-mismatch" => DropReason::RegistryMismatch,
            "cam-full" => DropReason::CamFull,
            "cam-full-unknown-destination" => DropReason::CamFullUnknownDestination,
            "vlan-not-allowed" => DropReason::VlanNotAllowed,
            "nat-no-mapping" => DropReason::NatNoMapping,
            "arp-unresolved" => DropReason::ArpUnresolved,
            "no-route" => DropReason::NoRoute,
            "no-egress" => DropReason::NoEgress,
            "default-deny" => DropReason::DefaultDeny,
            other => DropReason::Policy(other.to_string()),
        })
    }
}

impl Serialize for DropReason {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DropReason {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().unwrap_or_else(|e| match e {}))
    }
}

/// Defensive signal raised by the secured switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlertKind {
    /// A MAC tried to move away from the port it is locked to.
    ConflictDropped,
    /// A new MAC arrived while the CAM table was full.
    CapacityDropped,
    /// ARP sender binding disagrees with the administrator's registry.
    RegistryMismatch,
}

impl AlertKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AlertKind::ConflictDropped => "conflict-dropped",
            AlertKind::CapacityDropped => "capacity-dropped",
            AlertKind::RegistryMismatch => "registry-mismatch",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [
            AlertKind::ConflictDropped,
            AlertKind::CapacityDropped,
            AlertKind::RegistryMismatch,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FloodCause {
    Broadcast,
    UnknownDestination,
    /// Table full and the destination has no entry: hub fallback.
    Saturated,
}

/// How a copy reached its egress port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Via {
    /// Forwarded to exactly the port a table entry names.
    Unicast,
    /// Placed on the destination's shared segment.
    Medium,
    Flood(FloodCause),
    /// Originated by the device for one specific port.
    Direct,
}

impl Via {
    pub fn as_str(self) -> &'static str {
        match self {
            Via::Unicast => "unicast",
            Via::Medium => "medium",
            Via::Flood(FloodCause::Broadcast) => "flood:broadcast",
            Via::Flood(FloodCause::UnknownDestination) => "flood:unknown-destination",
            Via::Flood(FloodCause::Saturated) => "flood:saturated",
            Via::Direct => "direct",
        }
    }
}

impl FromStr for Via {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "unicast" => Via::Unicast,
            "medium" => Via::Medium,
            "flood:broadcast" => Via::Flood(FloodCause::Broadcast),
            "flood:unknown-destination" => Via::Flood(FloodCause::UnknownDestination),
            "flood:saturated" => Via::Flood(FloodCause::Saturated),
            "direct" => Via::Direct,
            other => return Err(format!("unknown delivery path {other:?}")),
        })
    }
}

impl Serialize for Via {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Via {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl Via {
    pub fn is_saturation_flood(self) -> bool {
        self == Via::Flood(FloodCause::Saturated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteChange {
    Installed,
    Overwritten,
}

/// A device table mutation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "table", rename_all = "kebab-case")]
pub enum TableChange {
    Forwarding {
        ip: IpAddr4,
        mac: MacAddr,
        port: PortId,
        change: RouteChange,
    },
    Bridge {
        mac: MacAddr,
        segment: u32,
    },
    Cam {
        mac: MacAddr,
        port: PortId,
        vlan: VlanTag,
    },
    Nat {
        internal_ip: IpAddr4,
        remote_ip: IpAddr4,
        tag: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlertInfo {
    pub kind: AlertKind,
    pub port: PortId,
    pub mac: MacAddr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ip: Option<IpAddr4>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Detail {
    /// `accepted` is true when the NIC took the frame into its rx log.
    Delivery {
        via: Via,
        accepted: bool,
    },
    ArpCache {
        ip: IpAddr4,
        mac: MacAddr,
    },
    Table {
        #[serde(flatten)]
        change: TableChange,
    },
    Alert {
        #[serde(flatten)]
        info: AlertInfo,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EventKind {
    FrameSent,
    FrameDelivered,
    FrameDropped(DropReason),
    ArpCacheUpdated,
    TableUpdated,
    Alert(AlertKind),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::FrameSent => "FrameSent",
            EventKind::FrameDelivered => "FrameDelivered",
            EventKind::FrameDropped(_) => "FrameDropped",
            EventKind::ArpCacheUpdated => "ArpCacheUpdated",
            EventKind::TableUpdated => "TableUpdated",
            EventKind::Alert(_) => "Alert",
        }
    }

    fn reason(&self) -> Option<String> {
        match self {
            EventKind::FrameDropped(r) => Some(r.to_string()),
            EventKind::Alert(k) => Some(k.as_str().to_string()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subject {
    Port(PortId),
    Device,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Port(p) => write!(f, "port:{}", p.0),
            Subject::Device => f.write_str("device"),
        }
    }
}

impl FromStr for Subject {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        if s == "device" {
            return Ok(Subject::Device);
        }
        s.strip_prefix("port:")
            .and_then(|n| n.parse().ok())
            .map(|n| Subject::Port(PortId(n)))
            .ok_or(())
    }
}

/// One entry of a fabric trace. Events are totally ordered by `seq`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    pub tick: u64,
    pub seq: u64,
    pub kind: EventKind,
    pub subject: Subject,
    pub frame: Option<EthernetFrame>,
    /// `seq` of the `FrameSent` event this event accounts for.
    pub cause: Option<u64>,
    pub detail: Option<Detail>,
}

impl Event {
    pub fn port(&self) -> Option<PortId> {
        match self.subject {
            Subject::Port(p) => Some(p),
            Subject::Device => None,
        }
    }

    pub fn via(&self) -> Option<Via> {
        match self.detail {
            Some(Detail::Delivery { via, .. }) => Some(via),
            _ => None,
        }
    }

    /// True for a delivery the receiving NIC accepted into its rx log.
    pub fn is_capture(&self) -> bool {
        self.kind == EventKind::FrameDelivered
            && matches!(self.detail, Some(Detail::Delivery { accepted: true, .. }))
    }

    pub fn carries_payload(&self, marker: &[u8]) -> bool {
        self.frame
            .as_ref()
            .and_then(EthernetFrame::payload)
            .is_some_and(|p| p == marker)
    }

    pub fn to_json_line(&self) -> String {
        let rec = EventRecord {
            tick: self.tick,
            seq: self.seq,
            kind: self.kind.name().to_string(),
            subject: self.subject.to_string(),
            frame_hex: self.frame.as_ref().map(EthernetFrame::to_hex),
            reason: self.kind.reason(),
            cause: self.cause,
            detail: self.detail.clone(),
        };
        serde_json::to_string(&rec).expect("event records always serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self, TraceError> {
        let rec: EventRecord =
            serde_json::from_str(line).map_err(|e| TraceError::Json(e.to_string()))?;
        let reason = || rec.reason.clone().ok_or(TraceError::MissingReason(rec.seq));
        let kind = match rec.kind.as_str() {
            "FrameSent" => EventKind::FrameSent,
            "FrameDelivered" => EventKind::FrameDelivered,
            "FrameDropped" => EventKind::FrameDropped(reason()?.parse().unwrap_or_else(|e| match e {})),
            "ArpCacheUpdated" => EventKind::ArpCacheUpdated,
            "TableUpdated" => EventKind::TableUpdated,
            "Alert" => {
                let r = reason()?;
                EventKind::Alert(AlertKind::from_name(&r).ok_or(TraceError::UnknownAlert(r))?)
            }
            other => return Err(TraceError::UnknownKind(other.to_string())),
        };
        let subject = rec
            .subject
            .parse()
            .map_err(|_| TraceError::BadSubject(rec.subject.clone()))?;
        let frame = rec
            .frame_hex
            .as_deref()
            .map(EthernetFrame::from_hex)
            .transpose()
            .map_err(|e| TraceError::Frame(rec.seq, e.to_string()))?;
        Ok(Event {
            tick: rec.tick,
            seq: rec.seq,
            kind,
            subject,
            frame,
            cause: rec.cause,
            detail: rec.detail,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    tick: u64,
    seq: u64,
    kind: String,
    subject: String,
    frame_hex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cause: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detail: Option<Detail>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<TraceError>,
    },
    #[error("invalid json: {0}")]
    Json(String),
    #[error("unknown event kind {0:?}")]
    UnknownKind(String),
    #[error("unknown alert kind {0:?}")]
    UnknownAlert(String),
    #[error("event {0} is missing its reason")]
    MissingReason(u64),
    #[error("invalid subject {0:?}")]
    BadSubject(String),
    #[error("event {0}: bad frame: {1}")]
    Frame(u64, String),
}

/// Render a trace as one JSON object per line.
pub fn trace_to_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json_line());
        out.push('\n');
    }
    out
}

pub fn trace_from_jsonl(text: &str) -> Result<Vec<Event>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            Event::from_json_line(l).map_err(|e| TraceError::Line {
                line: i + 1,
                source: Box::new(e),
            })
        })
        .collect()
}
