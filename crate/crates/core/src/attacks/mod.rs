//! Attack procedures, their trace oracles and the CIA impact of each attack.
//!
//! Every procedure drives a [`Fabric`](crate::fabric::Fabric) through a fixed
//! script, plants a marker payload and then hands the trace to
//! [`attack_oracle`], which decides success from the recorded events alone.

mod oracle;
mod procedures;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fabric::FabricError;
use crate::modes::Mode;

pub use oracle::{attack_oracle, AttackRun, OracleError, OracleOutcome};
pub use procedures::{run_arp_spoof, run_attack, run_mac_flood, run_sniff, forged_identity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Goal {
    /// Man in the middle: read the victims' traffic, then pass it on.
    Intercept,
    /// Swallow the victims' traffic.
    Dos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Forgery {
    /// Claim each victim's IP with the attacker's MAC.
    #[default]
    Victims,
    /// Announce the attacker's own true binding (a null attack).
    Own,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flow {
    pub src: String,
    pub dst: String,
    /// Defaults to a marker derived from the attack's position in the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<String>,
}

impl Flow {
    pub fn new(src: impl Into<String>, dst: impl Into<String>) -> Self {
        Flow {
            src: src.into(),
            dst: dst.into(),
            marker: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackKind {
    ArpSpoof {
        attacker: String,
        victim_a: String,
        victim_b: String,
        goal: Goal,
        #[serde(default)]
        forgery: Forgery,
    },
    Sniff {
        attacker: String,
        flow: Flow,
    },
    MacFlood {
        attacker: String,
        forged_count: usize,
        then_sniff_flow: Flow,
        /// Endpoints that announce themselves before the flood. Defaults to
        /// every endpoint except the flow's destination.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prewarm: Option<Vec<String>>,
    },
}

impl AttackKind {
    pub fn class(&self) -> AttackClass {
        match self {
            AttackKind::ArpSpoof { .. } => AttackClass::Spoofing,
            AttackKind::Sniff { .. } => AttackClass::Sniffing,
            AttackKind::MacFlood { .. } => AttackClass::MacFlooding,
        }
    }

    pub fn attacker(&self) -> &str {
        match self {
            AttackKind::ArpSpoof { attacker, .. }
            | AttackKind::Sniff { attacker, .. }
            | AttackKind::MacFlood { attacker, .. } => attacker,
        }
    }

    /// Every endpoint name the attack refers to, attacker first.
    pub fn participants(&self) -> Vec<&str> {
        match self {
            AttackKind::ArpSpoof {
                attacker,
                victim_a,
                victim_b,
                ..
            } => vec![attacker, victim_a, victim_b],
            AttackKind::Sniff { attacker, flow } => vec![attacker, &flow.src, &flow.dst],
            AttackKind::MacFlood {
                attacker,
                then_sniff_flow,
                prewarm,
                ..
            } => {
                let mut v: Vec<&str> =
                    vec![attacker, &then_sniff_flow.src, &then_sniff_flow.dst];
                v.extend(prewarm.iter().flatten().map(String::as_str));
                v
            }
        }
    }

    /// The distinct-role endpoints: attacker and the two victims.
    pub fn roles(&self) -> [&str; 3] {
        let p = self.participants();
        [p[0], p[1], p[2]]
    }

    pub fn marker_override(&self) -> Option<&str> {
        match self {
            AttackKind::ArpSpoof { .. } => None,
            AttackKind::Sniff { flow, .. }
            | AttackKind::MacFlood {
                then_sniff_flow: flow,
                ..
            } => flow.marker.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub mode_under_test: Mode,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, mode_under_test: Mode) -> Self {
        AttackSpec {
            kind,
            mode_under_test,
        }
    }
}

/// The three attack families, in matrix row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackClass {
    Spoofing,
    Sniffing,
    MacFlooding,
}

impl AttackClass {
    pub const ALL: [AttackClass; 3] = [
        AttackClass::Spoofing,
        AttackClass::Sniffing,
        AttackClass::MacFlooding,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AttackClass::Spoofing => "Spoofing",
            AttackClass::Sniffing => "Sniffing",
            AttackClass::MacFlooding => "Mac Flooding",
        }
    }
}

impl fmt::Display for AttackClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CiaImpact {
    pub availability: bool,
    pub integrity: bool,
    pub confidentiality: bool,
}

/// Security attributes each attack family compromises.
pub fn cia_impact(class: AttackClass) -> CiaImpact {
    let (availability, integrity, confidentiality) = match class {
        AttackClass::Spoofing => (true, true, true),
        AttackClass::Sniffing => (false, false, true),
        AttackClass::MacFlooding => (true, false, true),
    };
    CiaImpact {
        availability,
        integrity,
        confidentiality,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackReport {
    pub spec: AttackSpec,
    pub verdict: Verdict,
    /// `seq` numbers of the events that justify a success.
    pub evidence: Vec<u64>,
    /// Alert events raised while the attack ran.
    pub defense_alerts: usize,
    /// Drop events while the attack ran, keyed by reason.
    pub drops: std::collections::BTreeMap<String, usize>,
    pub cia: CiaImpact,
    /// For an intercepting spoof: whether the attacker's re-emission reached
    /// the intended victim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relayed: Option<bool>,
    /// Trace range `[start, end)` covered by the attack.
    pub trace_range: (u64, u64),
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl AttackReport {
    pub fn succeeded(&self) -> bool {
        self.verdict == Verdict::Success
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("invalid attack spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}
