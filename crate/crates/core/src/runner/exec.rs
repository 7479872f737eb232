use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::attacks::{run_attack, AttackError, AttackKind, AttackReport, AttackSpec};
use crate::fabric::{Attachment, Event, EventKind, Fabric, FabricConfig, FabricError};
use crate::modes::{
    BridgeDevice, Device, Mode, NatConfig, NatDevice, RouterConfig, RouterDevice,
    DEFAULT_BRIDGE_CAPACITY, DEFAULT_TABLE_CAPACITY,
};
use crate::netcore::{ArpPacket, EthernetFrame, MacAddr};
use crate::secured::{SecuredConfig, SecuredSwitch, DEFAULT_CAM_CAPACITY};

use super::matrix::VulnerabilityMatrix;
use super::scenario::{Scenario, ScenarioError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("scenario names no mode to run")]
    NoMode,
}

impl RunError {
    pub fn is_budget_exhausted(&self) -> bool {
        matches!(
            self,
            RunError::Fabric(FabricError::TickBudgetExhausted { .. })
                | RunError::Attack(AttackError::Fabric(FabricError::TickBudgetExhausted { .. }))
        )
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        if self.is_budget_exhausted() {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Replaces the scenario's own seed.
    pub seed: Option<u64>,
}

/// What happened to one scripted traffic send.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrafficOutcome {
    pub from: String,
    pub to: String,
    pub delivered: bool,
    /// Drop reasons hit by the payload, in trace order.
    pub drops: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// One fabric's worth of execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellRun {
    pub mode: Mode,
    /// Index into the scenario's attacks for a matrix cell.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<usize>,
    #[serde(skip)]
    pub trace: Vec<Event>,
    pub traffic: Vec<TrafficOutcome>,
    pub reports: Vec<AttackReport>,
}

impl CellRun {
    pub fn trace_jsonl(&self) -> String {
        crate::fabric::trace_to_jsonl(&self.trace)
    }

    /// Short name used for per-cell artifact files.
    pub fn label(&self) -> String {
        match self.attack {
            Some(i) => format!("{}-attack{i}", self.mode),
            None => self.mode.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioRun {
    pub name: String,
    pub seed: u64,
    pub cells: Vec<CellRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<VulnerabilityMatrix>,
}

impl ScenarioRun {
    pub fn reports(&self) -> impl Iterator<Item = &AttackReport> {
        self.cells.iter().flat_map(|c| c.reports.iter())
    }
}

fn device_for(s: &Scenario, mode: Mode) -> Device {
    let d = &s.device;
    let router = || {
        let base = RouterConfig::default();
        RouterConfig {
            gateway_ip: d.gateway_ip.unwrap_or(base.gateway_ip),
            gateway_mac: d.gateway_mac.unwrap_or(base.gateway_mac),
            capacity: d.capacity.unwrap_or(DEFAULT_TABLE_CAPACITY),
            arp_timeout: d.arp_timeout.unwrap_or(base.arp_timeout),
        }
    };
    match mode {
        Mode::Bridged => Device::Bridge(BridgeDevice::new(
            d.capacity.unwrap_or(DEFAULT_BRIDGE_CAPACITY),
        )),
        Mode::Routed => Device::Router(RouterDevice::new(router())),
        Mode::Nat => {
            let base = NatConfig::default();
            Device::Nat(NatDevice::new(NatConfig {
                router: router(),
                public_ip: d.public_ip.unwrap_or(base.public_ip),
                internal_net: d.internal_net.unwrap_or(base.internal_net),
            }))
        }
        Mode::Secured => Device::Secured(SecuredSwitch::new(SecuredConfig {
            cam_capacity: d.cam_capacity.unwrap_or(DEFAULT_CAM_CAPACITY),
            registry: d.registry.clone(),
            extra_rules: d.firewall.clone(),
            uplink_tags: d.uplink_tags.as_ref().map(|t| t.iter().copied().collect()),
        })),
    }
}

/// Build a fabric for `mode` with the scenario's endpoints attached in
/// declaration order. External hosts join through the uplink where the mode
/// has one and are left out where it does not.
pub fn build_fabric(s: &Scenario, mode: Mode, seed: u64) -> Result<Fabric, RunError> {
    let base = FabricConfig::default();
    let config = FabricConfig {
        arp_timeout: s.device.arp_timeout.unwrap_or(base.arp_timeout),
        arp_cache_ttl: s.device.arp_cache_ttl,
        tick_budget: s.tick_budget,
        rng_seed: seed,
    };
    let mut fabric = Fabric::with_config(device_for(s, mode), config);
    for e in &s.endpoints {
        let attachment = match (mode, e.external) {
            (Mode::Bridged, false) => Attachment::segment(e.segment.unwrap_or(0)),
            (Mode::Secured, false) => match e.vlan {
                Some(tag) => Attachment::vlan(tag),
                None => Attachment::plain(),
            },
            (Mode::Routed, _) => Attachment::plain(),
            (Mode::Nat, false) => Attachment::plain(),
            (Mode::Nat, true) => Attachment::uplink(),
            (Mode::Secured, true) if s.device.uplink_tags.is_some() => Attachment::uplink(),
            (Mode::Bridged | Mode::Secured, true) => continue,
        };
        fabric.attach_vm(&e.name, e.mac, e.ip, attachment)?;
    }
    Ok(fabric)
}

fn announce_all(fabric: &mut Fabric) -> Result<(), FabricError> {
    let ids: Vec<_> = fabric
        .endpoints()
        .iter()
        .map(|e| (e.name().to_string(), e.mac(), e.ip()))
        .collect();
    for (name, mac, ip) in ids {
        let arp = ArpPacket::gratuitous(ip, mac);
        fabric.send(&name, EthernetFrame::arp(mac, MacAddr::BROADCAST, arp))?;
    }
    fabric.run_until_idle()?;
    Ok(())
}

fn run_traffic(s: &Scenario, fabric: &mut Fabric) -> Result<Vec<TrafficOutcome>, FabricError> {
    let mut out = Vec::new();
    for t in &s.traffic {
        let (Some(src), Some(dst)) = (fabric.endpoint(&t.from), fabric.endpoint(&t.to)) else {
            out.push(TrafficOutcome {
                from: t.from.clone(),
                to: t.to.clone(),
                delivered: false,
                drops: Vec::new(),
                note: Some("endpoint not attached in this mode".into()),
            });
            continue;
        };
        let (src_mac, src_ip, dst_mac, dst_ip, dst_port) =
            (src.mac(), src.ip(), dst.mac(), dst.ip(), dst.port());
        let start = fabric.next_seq();
        let payload = t.payload.as_bytes().to_vec();
        let sent = if t.direct {
            fabric.send(&t.from, EthernetFrame::ip(src_mac, dst_mac, src_ip, dst_ip, payload.clone()))
        } else {
            fabric.send_ip(&t.from, dst_ip, payload.clone())
        };
        let note = match sent {
            Ok(()) => None,
            Err(e @ FabricError::ArpTimeout { .. }) => Some(e.to_string()),
            Err(e) => return Err(e),
        };
        fabric.run_until_idle()?;
        let window = fabric.trace().iter().filter(|e| e.seq >= start);
        let mut delivered = false;
        let mut drops = Vec::new();
        for e in window {
            if e.is_capture() && e.port() == Some(dst_port) && e.carries_payload(&payload) {
                delivered = true;
            }
            if let EventKind::FrameDropped(r) = &e.kind {
                if e.carries_payload(&payload) {
                    drops.push(r.to_string());
                }
            }
        }
        out.push(TrafficOutcome {
            from: t.from.clone(),
            to: t.to.clone(),
            delivered,
            drops,
            note,
        });
    }
    Ok(out)
}

fn run_cell(
    s: &Scenario,
    mode: Mode,
    seed: u64,
    attacks: &[AttackKind],
    attack_index: Option<usize>,
) -> Result<CellRun, RunError> {
    let mut fabric = build_fabric(s, mode, seed)?;
    if s.announce {
        announce_all(&mut fabric)?;
    }
    let traffic = run_traffic(s, &mut fabric)?;
    let reports = attacks
        .iter()
        .map(|k| run_attack(&mut fabric, &AttackSpec::new(k.clone(), mode)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CellRun {
        mode,
        attack: attack_index,
        trace: fabric.trace().to_vec(),
        traffic,
        reports,
    })
}

/// Result of [`build_matrix`]: the matrix plus every cell it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixRun {
    pub matrix: VulnerabilityMatrix,
    pub cells: Vec<CellRun>,
}

impl MatrixRun {
    pub fn reports(&self) -> Vec<AttackReport> {
        self.cells.iter().flat_map(|c| c.reports.iter().cloned()).collect()
    }
}

/// Run every (mode, attack) pair on its own fresh fabric. Cells run in
/// parallel; results are merged in (mode, attack) order.
pub fn build_matrix(
    base: &Scenario,
    modes: &[Mode],
    attacks: &[AttackKind],
    seed: u64,
) -> Result<MatrixRun, RunError> {
    let jobs: Vec<(Mode, usize)> = modes
        .iter()
        .flat_map(|&m| (0..attacks.len()).map(move |i| (m, i)))
        .collect();
    let results: Vec<Result<CellRun, RunError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(mode, i)| {
                scope.spawn(move || {
                    run_cell(base, mode, seed, std::slice::from_ref(&attacks[i]), Some(i))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("matrix cell panicked"))
            .collect()
    });
    let cells = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let reports: Vec<AttackReport> = cells.iter().flat_map(|c| c.reports.iter().cloned()).collect();
    Ok(MatrixRun {
        matrix: VulnerabilityMatrix::from_reports(modes, &reports),
        cells,
    })
}

/// Execute a validated scenario. A scenario with a matrix section runs every
/// cell; otherwise traffic and attacks run in order on a single fabric.
pub fn run_scenario(s: &Scenario, opts: RunOptions) -> Result<ScenarioRun, RunError> {
    let seed = opts.seed.unwrap_or(s.seed);
    let (cells, matrix) = match &s.matrix {
        Some(m) => {
            let run = build_matrix(s, &m.modes, &s.attacks, seed)?;
            (run.cells, Some(run.matrix))
        }
        None => {
            let mode = s.device.mode.ok_or(RunError::NoMode)?;
            (vec![run_cell(s, mode, seed, &s.attacks, None)?], None)
        }
    };
    Ok(ScenarioRun {
        name: s.name.clone(),
        seed,
        cells,
        matrix,
    })
}

/// Drop counts summed over every report of a run, by reason.
pub fn drop_totals<'a>(reports: impl IntoIterator<Item = &'a AttackReport>) -> BTreeMap<String, usize> {
    let mut totals = BTreeMap::new();
    for r in reports {
        for (k, v) in &r.drops {
            *totals.entry(k.clone()).or_insert(0) += v;
        }
    }
    totals
}
