use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::fabric::{Event, EventKind, PortId, Subject};

use super::{AttackKind, AttackSpec, Goal, Verdict};

/// Everything the oracle needs besides the trace: who is on which port, the
/// planted marker and where in the trace the attack began.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackRun {
    pub spec: AttackSpec,
    pub ports: BTreeMap<String, PortId>,
    pub marker: Vec<u8>,
    /// First `seq` belonging to the attack.
    pub trace_start: u64,
    /// First `seq` of the measurement window (the marker send).
    pub window_start: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub verdict: Verdict,
    pub evidence: Vec<u64>,
    pub relayed: Option<bool>,
    pub defense_alerts: usize,
    pub drops: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("attack run does not name a port for {0:?}")]
    UnknownEndpoint(String),
}

fn check_trace(trace: &[Event]) -> Result<(), OracleError> {
    let mut sent = BTreeSet::new();
    for pair in trace.windows(2) {
        if pair[1].seq <= pair[0].seq {
            return Err(OracleError::MalformedTrace(format!(
                "seq {} follows {}",
                pair[1].seq, pair[0].seq
            )));
        }
        if pair[1].tick < pair[0].tick {
            return Err(OracleError::MalformedTrace(format!(
                "tick goes backwards at seq {}",
                pair[1].seq
            )));
        }
    }
    for e in trace {
        if let Some(c) = e.cause {
            if !sent.contains(&c) {
                return Err(OracleError::MalformedTrace(format!(
                    "event {} refers to unknown frame {c}",
                    e.seq
                )));
            }
        }
        if e.kind == EventKind::FrameSent {
            sent.insert(e.seq);
        }
    }
    Ok(())
}

/// Judge an attack from its trace. Pure: the same inputs always give the
/// same outcome.
pub fn attack_oracle(trace: &[Event], run: &AttackRun) -> Result<OracleOutcome, OracleError> {
    check_trace(trace)?;
    let port = |name: &str| {
        run.ports
            .get(name)
            .copied()
            .ok_or_else(|| OracleError::UnknownEndpoint(name.to_string()))
    };
    let attack: Vec<&Event> = trace.iter().filter(|e| e.seq >= run.trace_start).collect();
    let window: Vec<&Event> = attack
        .iter()
        .copied()
        .filter(|e| e.seq >= run.window_start)
        .collect();
    let marker = run.marker.as_slice();
    let captured_at = |p: PortId| {
        window
            .iter()
            .copied()
            .filter(move |e| e.is_capture() && e.port() == Some(p) && e.carries_payload(marker))
    };

    let mut relayed = None;
    let evidence: Vec<u64> = match &run.spec.kind {
        AttackKind::ArpSpoof {
            attacker,
            victim_a,
            victim_b,
            goal,
            ..
        } => {
            let (c, a, b) = (port(attacker)?, port(victim_a)?, port(victim_b)?);
            match goal {
                Goal::Intercept => {
                    let by_seq: HashMap<u64, &Event> = window.iter().map(|e| (e.seq, *e)).collect();
                    let from_attacker = |e: &&Event| {
                        e.cause
                            .and_then(|s| by_seq.get(&s))
                            .is_some_and(|s| s.subject == Subject::Port(c))
                    };
                    let hit: Vec<u64> = captured_at(c).take(1).map(|e| e.seq).collect();
                    if !hit.is_empty() {
                        relayed = Some(captured_at(b).any(|e| from_attacker(&e)));
                    }
                    hit
                }
                Goal::Dos => {
                    let sent: Vec<&Event> = window
                        .iter()
                        .copied()
                        .filter(|e| {
                            e.kind == EventKind::FrameSent
                                && e.subject == Subject::Port(a)
                                && e.carries_payload(marker)
                        })
                        .take(1)
                        .collect();
                    if sent.is_empty() || captured_at(b).next().is_some() {
                        Vec::new()
                    } else {
                        let mut ev: Vec<u64> = sent.iter().map(|e| e.seq).collect();
                        // Where the marker went instead, if anywhere.
                        ev.extend(
                            window
                                .iter()
                                .filter(|e| {
                                    e.kind != EventKind::FrameSent
                                        && e.carries_payload(marker)
                                        && e.port() != Some(b)
                                })
                                .take(1)
                                .map(|e| e.seq),
                        );
                        ev
                    }
                }
            }
        }
        AttackKind::Sniff { attacker, .. } => {
            let c = port(attacker)?;
            let active = window
                .iter()
                .any(|e| e.kind == EventKind::FrameSent && e.subject == Subject::Port(c));
            if active {
                Vec::new()
            } else {
                captured_at(c).take(1).map(|e| e.seq).collect()
            }
        }
        AttackKind::MacFlood { attacker, .. } => {
            let c = port(attacker)?;
            captured_at(c)
                .filter(|e| e.via().is_some_and(|v| v.is_saturation_flood()))
                .take(1)
                .map(|e| e.seq)
                .collect()
        }
    };

    let defense_alerts = attack
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Alert(_)))
        .count();
    let mut drops = BTreeMap::new();
    for e in &attack {
        if let EventKind::FrameDropped(r) = &e.kind {
            *drops.entry(r.to_string()).or_insert(0) += 1;
        }
    }
    Ok(OracleOutcome {
        verdict: if evidence.is_empty() {
            Verdict::Failure
        } else {
            Verdict::Success
        },
        evidence,
        relayed,
        defense_alerts,
        drops,
    })
}
