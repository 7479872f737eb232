use std::collections::{BTreeMap, BTreeSet};

use crate::fabric::{Fabric, FabricError, ForwardingDevice};
use crate::netcore::{ArpPacket, EthernetFrame, IpAddr4, MacAddr};

use super::{
    attack_oracle, cia_impact, AttackError, AttackKind, AttackReport, AttackRun, AttackSpec,
    Forgery, Goal,
};

/// The `i`-th fabricated identity used by MAC flooding: a locally
/// administered MAC and an address in 172.31.0.0/16.
pub fn forged_identity(i: usize) -> (MacAddr, IpAddr4) {
    let n = (i + 1) as u16;
    let [hi, lo] = n.to_be_bytes();
    (
        MacAddr::new(0x02, 0xfe, 0, 0, hi, lo),
        IpAddr4::new(172, 31, hi, lo),
    )
}

struct Script<'a, D> {
    fabric: &'a mut Fabric<D>,
    notes: Vec<String>,
}

impl<'a, D: ForwardingDevice> Script<'a, D> {
    fn ip(&self, vm: &str) -> IpAddr4 {
        self.fabric.endpoint(vm).expect("validated endpoint").ip()
    }

    fn mac(&self, vm: &str) -> MacAddr {
        self.fabric.endpoint(vm).expect("validated endpoint").mac()
    }

    /// Absorb resolution failures into notes; anything else aborts.
    fn soft(&mut self, what: &str, r: Result<(), FabricError>) -> Result<bool, AttackError> {
        match r {
            Ok(()) => Ok(true),
            Err(e @ FabricError::ArpTimeout { .. }) => {
                self.notes.push(format!("{what}: {e}"));
                Ok(false)
            }
            Err(e) => Err(e.into()),
        }
    }

    fn announce<'n>(&mut self, names: impl IntoIterator<Item = &'n str>) -> Result<(), AttackError> {
        for vm in names {
            let (ip, mac) = (self.ip(vm), self.mac(vm));
            let frame = EthernetFrame::arp(mac, MacAddr::BROADCAST, ArpPacket::gratuitous(ip, mac));
            self.fabric.send(vm, frame)?;
        }
        self.fabric.run_until_idle()?;
        Ok(())
    }

    fn send_ip(&mut self, from: &str, to: &str, payload: &[u8]) -> Result<bool, AttackError> {
        let dst = self.ip(to);
        let r = self.fabric.send_ip(from, dst, payload.to_vec());
        let ok = self.soft(&format!("{from} -> {to}"), r)?;
        self.fabric.run_until_idle()?;
        Ok(ok)
    }

    fn hello(&mut self, a: &str, b: &str) -> Result<(), AttackError> {
        self.send_ip(a, b, format!("hello {a}->{b}").as_bytes())?;
        self.send_ip(b, a, format!("hello {b}->{a}").as_bytes())?;
        Ok(())
    }

    fn all_names(&self) -> Vec<String> {
        self.fabric
            .endpoints()
            .iter()
            .map(|e| e.name().to_string())
            .collect()
    }
}

fn validate<D: ForwardingDevice>(fabric: &Fabric<D>, spec: &AttackSpec) -> Result<(), AttackError> {
    if fabric.device().mode() != spec.mode_under_test {
        return Err(AttackError::InvalidSpec(format!(
            "spec targets {} but the fabric runs {}",
            spec.mode_under_test,
            fabric.device().mode()
        )));
    }
    for name in spec.kind.participants() {
        if fabric.endpoint(name).is_none() {
            return Err(AttackError::InvalidSpec(format!("{name:?} is not attached")));
        }
    }
    let roles = spec.kind.roles();
    let distinct: BTreeSet<_> = roles.iter().collect();
    if distinct.len() != roles.len() {
        return Err(AttackError::InvalidSpec(format!(
            "attacker and victims must be distinct, got {roles:?}"
        )));
    }
    Ok(())
}

fn default_marker(spec: &AttackSpec, trace_start: u64) -> Vec<u8> {
    let tag = match spec.kind.class() {
        super::AttackClass::Spoofing => "spoof",
        super::AttackClass::Sniffing => "sniff",
        super::AttackClass::MacFlooding => "flood",
    };
    format!("MARK/{tag}/{}/{trace_start}", spec.mode_under_test).into_bytes()
}

/// Run any attack spec against `fabric`.
pub fn run_attack<D: ForwardingDevice>(
    fabric: &mut Fabric<D>,
    spec: &AttackSpec,
) -> Result<AttackReport, AttackError> {
    validate(fabric, spec)?;
    let trace_start = fabric.next_seq();
    let marker = spec
        .kind
        .marker_override()
        .map(|m| m.as_bytes().to_vec())
        .unwrap_or_else(|| default_marker(spec, trace_start));
    let ports: BTreeMap<String, _> = fabric
        .endpoints()
        .iter()
        .map(|e| (e.name().to_string(), e.port()))
        .collect();
    let mut script = Script {
        fabric,
        notes: Vec::new(),
    };
    let window_start = match &spec.kind {
        AttackKind::ArpSpoof {
            attacker,
            victim_a,
            victim_b,
            goal,
            forgery,
        } => spoof(&mut script, attacker, victim_a, victim_b, *goal, *forgery, &marker)?,
        AttackKind::Sniff { attacker, flow } => {
            let names = script.all_names();
            script.announce(names.iter().map(String::as_str))?;
            script.hello(&flow.src, &flow.dst)?;
            script.fabric.set_promiscuous(attacker, true)?;
            let start = script.fabric.next_seq();
            script.send_ip(&flow.src, &flow.dst, &marker)?;
            start
        }
        AttackKind::MacFlood {
            attacker,
            forged_count,
            then_sniff_flow: flow,
            prewarm,
        } => {
            let warm: Vec<String> = match prewarm {
                Some(list) => list.clone(),
                None => script
                    .all_names()
                    .into_iter()
                    .filter(|n| *n != flow.dst)
                    .collect(),
            };
            script.announce(warm.iter().map(String::as_str))?;
            script.fabric.set_promiscuous(attacker, true)?;
            for i in 0..*forged_count {
                let (mac, ip) = forged_identity(i);
                let frame =
                    EthernetFrame::arp(mac, MacAddr::BROADCAST, ArpPacket::gratuitous(ip, mac));
                script.fabric.send(attacker, frame)?;
            }
            script.fabric.run_until_idle()?;
            let start = script.fabric.next_seq();
            script.send_ip(&flow.src, &flow.dst, &marker)?;
            start
        }
    };
    let notes = script.notes;

    let run = AttackRun {
        spec: spec.clone(),
        ports,
        marker,
        trace_start,
        window_start,
    };
    let outcome = attack_oracle(fabric.trace(), &run)?;
    let mut notes = notes;
    if outcome.relayed == Some(false) {
        notes.push("relay did not reach the intended victim".to_string());
    }
    Ok(AttackReport {
        spec: spec.clone(),
        verdict: outcome.verdict,
        evidence: outcome.evidence,
        defense_alerts: outcome.defense_alerts,
        drops: outcome.drops,
        cia: cia_impact(spec.kind.class()),
        relayed: outcome.relayed,
        trace_range: (trace_start, fabric.next_seq()),
        notes,
    })
}

#[allow(clippy::too_many_arguments)]
fn spoof<D: ForwardingDevice>(
    s: &mut Script<'_, D>,
    attacker: &str,
    victim_a: &str,
    victim_b: &str,
    goal: Goal,
    forgery: Forgery,
    marker: &[u8],
) -> Result<u64, AttackError> {
    let names = s.all_names();
    s.announce(names.iter().map(String::as_str))?;
    s.hello(victim_a, victim_b)?;

    let (ip_a, ip_b, ip_c, mac_c) = (s.ip(victim_a), s.ip(victim_b), s.ip(attacker), s.mac(attacker));
    let claims = match forgery {
        Forgery::Victims => [(ip_a, ip_b), (ip_b, ip_a)],
        Forgery::Own => [(ip_c, ip_b), (ip_c, ip_a)],
    };
    for (claimed, target) in claims {
        let arp = ArpPacket::request(claimed, mac_c, target);
        s.fabric
            .send(attacker, EthernetFrame::arp(mac_c, MacAddr::BROADCAST, arp))?;
        s.fabric.run_until_idle()?;
    }

    let start = s.fabric.next_seq();
    s.send_ip(victim_a, victim_b, marker)?;
    let intercepted = s
        .fabric
        .endpoint(attacker)
        .is_some_and(|e| e.has_received_payload(marker));
    if goal == Goal::Intercept && intercepted {
        let r = s.fabric.send_ip_as(attacker, ip_a, ip_b, marker.to_vec());
        s.soft("relay", r)?;
        s.fabric.run_until_idle()?;
    }
    Ok(start)
}

/// Poison the victims' paths through the attacker.
pub fn run_arp_spoof<D: ForwardingDevice>(
    fabric: &mut Fabric<D>,
    spec: &AttackSpec,
) -> Result<AttackReport, AttackError> {
    expect(spec, super::AttackClass::Spoofing)?;
    run_attack(fabric, spec)
}

/// Passive capture with a promiscuous NIC.
pub fn run_sniff<D: ForwardingDevice>(
    fabric: &mut Fabric<D>,
    spec: &AttackSpec,
) -> Result<AttackReport, AttackError> {
    expect(spec, super::AttackClass::Sniffing)?;
    run_attack(fabric, spec)
}

/// Exhaust the forwarding table with fabricated identities, then sniff.
pub fn run_mac_flood<D: ForwardingDevice>(
    fabric: &mut Fabric<D>,
    spec: &AttackSpec,
) -> Result<AttackReport, AttackError> {
    expect(spec, super::AttackClass::MacFlooding)?;
    run_attack(fabric, spec)
}

fn expect(spec: &AttackSpec, class: super::AttackClass) -> Result<(), AttackError> {
    if spec.kind.class() == class {
        Ok(())
    } else {
        Err(AttackError::InvalidSpec(format!(
            "expected a {class} spec, got {}",
            spec.kind.class()
        )))
    }
}
