//! Invariant checks over randomized workloads. Each returns `Err` with a
//! description of the first violation found.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use vnetsim::attacks::{attack_oracle, AttackKind, AttackRun, AttackSpec, Flow, Verdict};
use vnetsim::fabric::{
    trace_from_jsonl, trace_to_jsonl, Detail, Event, EventKind, Fabric, FabricError, PortId,
    Subject, TableChange,
};
use vnetsim::fabric::workload::{Op, Workload};
use vnetsim::modes::{Device, Mode};
use vnetsim::netcore::{EthernetFrame, MacAddr};

pub type Check = Result<(), String>;

fn run(mode: Mode, seed: u64) -> Result<(Workload, Fabric), String> {
    let w = Workload::generate(mode, seed);
    let f = w.run().map_err(|e| format!("{mode} seed {seed}: {e}"))?;
    Ok((w, f))
}

pub fn determinism(mode: Mode, seed: u64) -> Check {
    let (_, a) = run(mode, seed)?;
    let (_, b) = run(mode, seed)?;
    if a.trace_jsonl() != b.trace_jsonl() {
        return Err(format!("{mode} seed {seed}: traces differ"));
    }
    Ok(())
}

/// Every sent frame is accounted for by a delivery or a drop, and every
/// delivery or drop names a sent frame as its cause.
pub fn conservation(mode: Mode, seed: u64) -> Check {
    let (_, f) = run(mode, seed)?;
    let trace = f.trace();
    let sent: BTreeSet<u64> = trace.iter().filter(|e| e.kind == EventKind::FrameSent).map(|e| e.seq).collect();
    let mut outcomes: BTreeMap<u64, usize> = BTreeMap::new();
    for e in trace {
        if matches!(e.kind, EventKind::FrameDelivered | EventKind::FrameDropped(_)) {
            let cause = e.cause.ok_or_else(|| format!("{mode} seed {seed}: event {} has no cause", e.seq))?;
            if !sent.contains(&cause) {
                return Err(format!("{mode} seed {seed}: event {} cites {cause}, not a sent frame", e.seq));
            }
            *outcomes.entry(cause).or_default() += 1;
        }
    }
    if let Some(s) = sent.iter().find(|s| !outcomes.contains_key(s)) {
        return Err(format!("{mode} seed {seed}: frame {s} has no outcome"));
    }
    let mut last = 0;
    for e in trace {
        if e.tick < last {
            return Err(format!("{mode} seed {seed}: tick went backwards at {}", e.seq));
        }
        last = e.tick;
    }
    Ok(())
}

/// Endpoints that never went promiscuous only log frames addressed to them.
pub fn non_promiscuous_filtering(mode: Mode, seed: u64) -> Check {
    let (w, f) = run(mode, seed)?;
    let ever: BTreeSet<usize> = w
        .ops
        .iter()
        .filter_map(|op| match op {
            Op::Promiscuous { vm, on: true } => Some(*vm),
            _ => None,
        })
        .collect();
    for (i, vm) in w.vms.iter().enumerate().filter(|(i, _)| !ever.contains(i)) {
        let ep = f.endpoint(&vm.name).expect("attached");
        let addressed = |fr: &EthernetFrame| fr.dst == vm.mac || fr.dst.is_broadcast();
        if let Some((t, fr)) = ep.rx_log().iter().find(|(_, fr)| !addressed(fr)) {
            return Err(format!("{mode} seed {seed}: vm{i} logged {} at tick {t}", fr.dst));
        }
        let port = ep.port();
        if let Some(e) = f
            .trace()
            .iter()
            .filter(|e| e.is_capture() && e.port() == Some(port))
            .find(|e| !e.frame.as_ref().is_some_and(addressed))
        {
            return Err(format!("{mode} seed {seed}: vm{i} accepted event {}", e.seq));
        }
    }
    Ok(())
}

fn sender_port(trace: &[Event], cause: Option<u64>) -> Option<PortId> {
    let c = cause?;
    trace.iter().find(|e| e.seq == c).and_then(Event::port)
}

/// No delivery in secured mode crosses from one VLAN to another.
pub fn secured_vlan_isolation(seed: u64) -> Check {
    let (_, f) = run(Mode::Secured, seed)?;
    let sw = f.device().as_secured().expect("secured device");
    for e in f.trace().iter().filter(|e| e.kind == EventKind::FrameDelivered) {
        let egress = e.port().ok_or("delivery without a port")?;
        let Some(ingress) = sender_port(f.trace(), e.cause) else {
            continue;
        };
        if sw.port_tag(egress) != sw.port_tag(ingress) {
            return Err(format!(
                "seed {seed}: event {} carried {ingress} ({:?}) to {egress} ({:?})",
                e.seq,
                sw.port_tag(ingress),
                sw.port_tag(egress)
            ));
        }
    }
    Ok(())
}

/// Secured mode never floods because its table is full, even when the
/// workload tries.
pub fn secured_no_hub_fallback(seed: u64) -> Check {
    let w = Workload::generate(Mode::Secured, seed);
    let mut f = w.run().map_err(|e| e.to_string())?;
    // Overfill the CAM from the first VM, then send to an unknown MAC.
    let src = &w.vms[0];
    for i in 0..(w.capacity as u8 * 2 + 2) {
        let forged = MacAddr::new(0x02, 0xcc, 0, 0, 0, i);
        f.send(&src.name, EthernetFrame::ip(forged, MacAddr::BROADCAST, src.ip, src.ip, vec![i]))
            .map_err(|e| e.to_string())?;
    }
    let unknown = MacAddr::new(0x02, 0xdd, 0, 0, 0, 1);
    f.send(&src.name, EthernetFrame::ip(src.mac, unknown, src.ip, src.ip, b"probe".to_vec()))
        .map_err(|e| e.to_string())?;
    f.run_until_idle().map_err(|e| e.to_string())?;
    let sw = f.device().as_secured().expect("secured device");
    if sw.cam().len() > sw.cam().capacity() {
        return Err(format!("seed {seed}: CAM grew past capacity"));
    }
    if let Some(e) = f.trace().iter().find(|e| e.via().is_some_and(|v| v.is_saturation_flood())) {
        return Err(format!("seed {seed}: saturation flood at event {}", e.seq));
    }
    Ok(())
}

/// Locked CAM bindings never move.
pub fn cam_monotone_lock(seed: u64) -> Check {
    let (_, f) = run(Mode::Secured, seed)?;
    let mut first: BTreeMap<MacAddr, PortId> = BTreeMap::new();
    for e in f.trace() {
        if let Some(Detail::Table { change: TableChange::Cam { mac, port, .. } }) = &e.detail {
            let locked = *first.entry(*mac).or_insert(*port);
            if locked != *port {
                return Err(format!("seed {seed}: {mac} moved from {locked} to {port}"));
            }
        }
    }
    let sw = f.device().as_secured().expect("secured device");
    for (mac, port) in sw.cam().locks() {
        if first.get(&mac) != Some(&port) {
            return Err(format!("seed {seed}: lock {mac}@{port} has no matching learn"));
        }
    }
    Ok(())
}

/// A sniff is only credited to an attacker that stayed silent while the
/// marker was in flight.
pub fn passive_sniff_soundness(mode: Mode, seed: u64) -> Check {
    let w = Workload::generate(mode, seed);
    if w.vms.len() < 3 || w.vms.iter().any(|v| v.uplink) {
        return Ok(());
    }
    let mut f = w.run().map_err(|e| e.to_string())?;
    let (src, dst, attacker) = (&w.vms[0], &w.vms[1], &w.vms[2]);
    f.set_promiscuous(&attacker.name, true).map_err(|e| e.to_string())?;
    let start = f.next_seq();
    let marker = format!("MARK/prop/{seed}").into_bytes();
    if seed.is_multiple_of(2) {
        f.send(&attacker.name, EthernetFrame::ip(attacker.mac, dst.mac, attacker.ip, dst.ip, b"noise".to_vec()))
            .map_err(|e| e.to_string())?;
    }
    match f.send_ip(&src.name, dst.ip, marker.clone()) {
        Ok(()) | Err(FabricError::ArpTimeout { .. }) => {}
        Err(e) => return Err(e.to_string()),
    }
    f.run_until_idle().map_err(|e| e.to_string())?;
    let run = AttackRun {
        spec: AttackSpec::new(
            AttackKind::Sniff { attacker: attacker.name.clone(), flow: Flow::new(&src.name, &dst.name) },
            mode,
        ),
        ports: f.endpoints().iter().map(|e| (e.name().to_string(), e.port())).collect(),
        marker,
        trace_start: start,
        window_start: start,
    };
    let out = attack_oracle(f.trace(), &run).map_err(|e| e.to_string())?;
    let attacker_port = f.port_of(&attacker.name).map_err(|e| e.to_string())?;
    let spoke = f
        .trace()
        .iter()
        .any(|e| e.seq >= start && e.kind == EventKind::FrameSent && e.subject == Subject::Port(attacker_port));
    if out.verdict == Verdict::Success && spoke {
        return Err(format!("{mode} seed {seed}: sniff credited to an active attacker"));
    }
    Ok(())
}

/// No frame leaves through the uplink with an internal source address.
pub fn nat_address_hiding(seed: u64) -> Check {
    let (_, f) = run(Mode::Nat, seed)?;
    let Device::Nat(nat) = f.device() else {
        return Err("not a NAT device".into());
    };
    let Some(uplink) = nat.uplink() else {
        return Ok(());
    };
    for e in f.trace().iter().filter(|e| e.kind == EventKind::FrameDelivered && e.port() == Some(uplink)) {
        if let Some(ip) = e.frame.as_ref().and_then(|fr| fr.as_ip()) {
            if nat.internal_net().contains(ip.src_ip) {
                return Err(format!("seed {seed}: {} left on the uplink at event {}", ip.src_ip, e.seq));
            }
        }
    }
    Ok(())
}

pub fn jsonl_round_trip(mode: Mode, seed: u64) -> Check {
    let (_, f) = run(mode, seed)?;
    let text = trace_to_jsonl(f.trace());
    let back = trace_from_jsonl(&text).map_err(|e| e.to_string())?;
    if back != f.trace() {
        return Err(format!("{mode} seed {seed}: trace changed through JSON lines"));
    }
    Ok(())
}
