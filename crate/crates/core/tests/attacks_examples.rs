mod common;

use std::collections::BTreeMap;

use common::*;
use vnetsim::attacks::{
    attack_oracle, cia_impact, run_arp_spoof, run_attack, run_mac_flood, run_sniff, AttackClass,
    AttackError, AttackKind, AttackRun, AttackSpec, Flow, Forgery, Goal, OracleError, Verdict,
};
use vnetsim::fabric::{EventKind, Fabric};
use vnetsim::modes::{Mode, RouteEntry};
use vnetsim::secured::SecuredConfig;

fn spoof(goal: Goal, forgery: Forgery) -> AttackKind {
    AttackKind::ArpSpoof {
        attacker: "C".into(),
        victim_a: "A".into(),
        victim_b: "B".into(),
        goal,
        forgery,
    }
}

fn sniff() -> AttackKind {
    AttackKind::Sniff { attacker: "C".into(), flow: Flow::new("A", "B") }
}

fn flood(count: usize) -> AttackKind {
    AttackKind::MacFlood {
        attacker: "C".into(),
        forged_count: count,
        then_sniff_flow: Flow::new("A", "B"),
        prewarm: None,
    }
}

fn ports_of(f: &Fabric) -> BTreeMap<String, vnetsim::fabric::PortId> {
    f.endpoints().iter().map(|e| (e.name().to_string(), e.port())).collect()
}

#[test]
fn routed_intercept_succeeds_and_poisons_both_entries() {
    let mut f = routed();
    let r = run_arp_spoof(&mut f, &AttackSpec::new(spoof(Goal::Intercept, Forgery::Victims), Mode::Routed)).unwrap();
    assert_eq!(r.verdict, Verdict::Success);
    let t = f.device().as_router().unwrap().table();
    assert_eq!(t.get(IP_A).unwrap().mac, MAC_C);
    assert_eq!(t.get(IP_B).unwrap().mac, MAC_C);
    for seq in &r.evidence {
        assert!(f.trace().iter().any(|e| e.seq == *seq));
    }
}

#[test]
fn intercept_evidence_is_the_marker_delivery_at_the_attacker() {
    let mut f = routed();
    let r = run_attack(&mut f, &AttackSpec::new(spoof(Goal::Intercept, Forgery::Victims), Mode::Routed)).unwrap();
    assert_eq!(r.evidence.len(), 1);
    let ev = f.trace().iter().find(|e| e.seq == r.evidence[0]).unwrap();
    assert_eq!(ev.kind, EventKind::FrameDelivered);
    assert_eq!(ev.port(), Some(P2));
}

#[test]
fn secured_spoof_fails_with_drops_and_unchanged_tables() {
    let mut f = secured([2, 2, 2]);
    let r = run_arp_spoof(&mut f, &AttackSpec::new(spoof(Goal::Intercept, Forgery::Victims), Mode::Secured)).unwrap();
    assert_eq!(r.verdict, Verdict::Failure);
    let blocked = r.drops.get("registry-mismatch").copied().unwrap_or(0) + r.drops.get("cam-tamper").copied().unwrap_or(0);
    assert!(blocked >= 2, "{:?}", r.drops);
    assert!(r.defense_alerts >= 2);
    let sw = f.device().as_secured().unwrap();
    assert_eq!(sw.cam().locked_port(&MAC_A), Some(P0));
    assert_eq!(sw.cam().locked_port(&MAC_B), Some(P1));
    assert_eq!(sw.registry()[&IP_A], MAC_A);
    assert_eq!(sw.registry()[&IP_B], MAC_B);
}

#[test]
fn vacuous_forgery_fails_without_table_change() {
    let mut f = routed();
    announce(&mut f);
    let before = f.device().as_router().unwrap().table().clone();
    let start = f.next_seq();
    let r = run_attack(&mut f, &AttackSpec::new(spoof(Goal::Intercept, Forgery::Own), Mode::Routed)).unwrap();
    assert_eq!(r.verdict, Verdict::Failure);
    assert_eq!(f.device().as_router().unwrap().table(), &before);
    assert_eq!(count_kind(&events_since(&f, start), "TableUpdated"), 0);
}

#[test]
fn routed_dos_keeps_marker_from_victim_b() {
    let mut f = routed();
    let r = run_attack(&mut f, &AttackSpec::new(spoof(Goal::Dos, Forgery::Victims), Mode::Routed)).unwrap();
    assert_eq!(r.verdict, Verdict::Success);
    assert!(!r.evidence.is_empty());
    let window = f.trace().iter().filter(|e| e.seq >= r.trace_range.0);
    let b_got_marker = window
        .filter(|e| e.is_capture() && e.port() == Some(P1))
        .any(|e| e.frame.as_ref().and_then(|fr| fr.payload()).is_some_and(|p| p.starts_with(b"MARK/")));
    assert!(!b_got_marker);
}

#[test]
fn overlapping_roles_are_invalid() {
    let mut f = routed();
    let kind = AttackKind::ArpSpoof {
        attacker: "A".into(),
        victim_a: "A".into(),
        victim_b: "B".into(),
        goal: Goal::Intercept,
        forgery: Forgery::Victims,
    };
    let err = run_attack(&mut f, &AttackSpec::new(kind, Mode::Routed)).unwrap_err();
    assert!(matches!(err, AttackError::InvalidSpec(_)));
}

#[test]
fn wrong_procedure_for_kind_is_invalid() {
    let mut f = routed();
    let err = run_sniff(&mut f, &AttackSpec::new(flood(1), Mode::Routed)).unwrap_err();
    assert!(matches!(err, AttackError::InvalidSpec(_)));
}

#[test]
fn bridged_sniff_on_destination_segment_succeeds() {
    let mut f = bridged_split();
    let r = run_sniff(&mut f, &AttackSpec::new(sniff(), Mode::Bridged)).unwrap();
    assert_eq!(r.verdict, Verdict::Success);
}

#[test]
fn routed_sniff_fails() {
    let mut f = routed();
    let r = run_sniff(&mut f, &AttackSpec::new(sniff(), Mode::Routed)).unwrap();
    assert_eq!(r.verdict, Verdict::Failure);
    assert!(r.evidence.is_empty());
}

#[test]
fn secured_sniff_delivers_only_to_destination() {
    let mut f = secured([2, 2, 2]);
    let r = run_sniff(&mut f, &AttackSpec::new(sniff(), Mode::Secured)).unwrap();
    assert_eq!(r.verdict, Verdict::Failure);
    let marker = format!("MARK/sniff/secured/{}", r.trace_range.0);
    let ev = events_since(&f, r.trace_range.0);
    assert_eq!(delivery_ports(&ev, marker.as_bytes()), [P1].into());
}

#[test]
fn routed_flood_at_capacity_succeeds() {
    let mut f = routed_with(64);
    let r = run_mac_flood(&mut f, &AttackSpec::new(flood(64), Mode::Routed)).unwrap();
    assert_eq!(r.verdict, Verdict::Success);
    assert!(f.device().as_router().unwrap().saturated_hub_mode());
}

#[test]
fn secured_flood_far_past_capacity_fails() {
    let cap = 8;
    let mut f = secured_with(SecuredConfig { cam_capacity: cap, ..Default::default() }, [2, 2, 2]);
    // Warm the CAM for both flow endpoints so the marker is a known unicast.
    announce(&mut f);
    let kind = AttackKind::MacFlood {
        attacker: "C".into(),
        forged_count: 10 * cap,
        then_sniff_flow: Flow::new("A", "B"),
        prewarm: Some(vec!["A".into(), "B".into(), "C".into()]),
    };
    let r = run_mac_flood(&mut f, &AttackSpec::new(kind, Mode::Secured)).unwrap();
    assert_eq!(r.verdict, Verdict::Failure);
    assert!(r.defense_alerts >= 1);
    let marker = format!("MARK/flood/secured/{}", r.trace_range.0);
    let ev = events_since(&f, r.trace_range.0);
    assert_eq!(delivery_ports(&ev, marker.as_bytes()), [P1].into());
    assert!(!ev.iter().any(|e| e.via().is_some_and(|v| v.is_saturation_flood())));
}

#[test]
fn null_flood_fails_and_leaves_table_alone() {
    let mut f = routed();
    let r = run_mac_flood(&mut f, &AttackSpec::new(flood(0), Mode::Routed)).unwrap();
    assert_eq!(r.verdict, Verdict::Failure);
    let t = f.device().as_router().unwrap().table();
    assert_eq!(t.get(IP_A), Some(RouteEntry { mac: MAC_A, port: P0 }));
    assert!(t.len() <= 3);
    for (ip, mac) in [(IP_A, MAC_A), (IP_B, MAC_B), (IP_C, MAC_C)] {
        if let Some(e) = t.get(ip) {
            assert_eq!(e.mac, mac);
        }
    }
}

#[test]
fn cia_matches_the_attribute_table() {
    let spoof = cia_impact(AttackClass::Spoofing);
    assert!(spoof.availability && spoof.integrity && spoof.confidentiality);
    let sniff = cia_impact(AttackClass::Sniffing);
    assert!(!sniff.availability && !sniff.integrity && sniff.confidentiality);
    let flood = cia_impact(AttackClass::MacFlooding);
    assert!(flood.availability && !flood.integrity && flood.confidentiality);
}

#[test]
fn oracle_is_pure() {
    let mut f = routed();
    let spec = AttackSpec::new(spoof(Goal::Intercept, Forgery::Victims), Mode::Routed);
    let r = run_attack(&mut f, &spec).unwrap();
    let run = AttackRun {
        spec,
        ports: ports_of(&f),
        marker: format!("MARK/spoof/routed/{}", r.trace_range.0).into_bytes(),
        trace_start: r.trace_range.0,
        window_start: r.trace_range.0,
    };
    let a = attack_oracle(f.trace(), &run).unwrap();
    let b = attack_oracle(f.trace(), &run).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.verdict, Verdict::Success);
}

#[test]
fn marker_reaching_only_destination_is_failure() {
    let mut f = routed();
    announce(&mut f);
    let start = f.next_seq();
    f.send_ip("A", IP_B, b"only-b".to_vec()).unwrap();
    f.run_until_idle().unwrap();
    let run = AttackRun {
        spec: AttackSpec::new(spoof(Goal::Intercept, Forgery::Victims), Mode::Routed),
        ports: ports_of(&f),
        marker: b"only-b".to_vec(),
        trace_start: start,
        window_start: start,
    };
    let out = attack_oracle(f.trace(), &run).unwrap();
    assert_eq!(out.verdict, Verdict::Failure);
    assert!(out.evidence.is_empty());
}

#[test]
fn active_attacker_cannot_claim_a_sniff() {
    let mut f = bridged_split();
    announce(&mut f);
    f.set_promiscuous("C", true).unwrap();
    let start = f.next_seq();
    f.send_ip("A", IP_B, b"seen".to_vec()).unwrap();
    f.send_ip("C", IP_A, b"noise".to_vec()).unwrap();
    f.run_until_idle().unwrap();
    let run = AttackRun {
        spec: AttackSpec::new(sniff(), Mode::Bridged),
        ports: ports_of(&f),
        marker: b"seen".to_vec(),
        trace_start: start,
        window_start: start,
    };
    assert!(f.endpoint("C").unwrap().has_received_payload(b"seen"));
    assert_eq!(attack_oracle(f.trace(), &run).unwrap().verdict, Verdict::Failure);
}

#[test]
fn oracle_rejects_malformed_trace() {
    let mut f = bridged_split();
    announce(&mut f);
    let mut trace = f.trace().to_vec();
    trace.swap(0, 1);
    let run = AttackRun {
        spec: AttackSpec::new(sniff(), Mode::Bridged),
        ports: ports_of(&f),
        marker: b"m".to_vec(),
        trace_start: 0,
        window_start: 0,
    };
    assert!(matches!(attack_oracle(&trace, &run), Err(OracleError::MalformedTrace(_))));
}

#[test]
fn secured_failures_are_observable() {
    for kind in [spoof(Goal::Intercept, Forgery::Victims), flood(80)] {
        let mut f = secured_with(SecuredConfig { cam_capacity: 8, ..Default::default() }, [2, 2, 2]);
        let r = run_attack(&mut f, &AttackSpec::new(kind, Mode::Secured)).unwrap();
        assert_eq!(r.verdict, Verdict::Failure);
        assert!(r.defense_alerts + r.drops.values().sum::<usize>() >= 1);
    }
}
