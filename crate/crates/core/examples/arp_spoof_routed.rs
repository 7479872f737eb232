//! ARP poisoning in routed mode. C forges two requests, one claiming A's IP
//! and one claiming B's, and the router's table ends up pointing both
//! victims at C. A's next message to B lands on C's port.

use vnetsim::attacks::run_attack;
use vnetsim::fabric::{Detail, EventKind, TableChange};
use vnetsim::runner::{build_fabric, bundled};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = bundled("fig5_spoof_routed")?;
    let mode = scenario.device.mode.expect("single-mode scenario");
    let mut fabric = build_fabric(&scenario, mode, scenario.seed)?;
    let spec = vnetsim::attacks::AttackSpec::new(scenario.attacks[0].clone(), mode);
    let report = run_attack(&mut fabric, &spec)?;

    println!("forwarding table updates:");
    for e in fabric.trace() {
        if let (EventKind::TableUpdated, Some(Detail::Table { change: TableChange::Forwarding { ip, mac, port, change } })) =
            (&e.kind, &e.detail)
        {
            println!("  tick {:>3} seq {:>3}  {ip} -> {mac} on {port} ({change:?})", e.tick, e.seq);
        }
    }

    let router = fabric.device().as_router().expect("routed mode");
    println!("\nfinal table:");
    for (ip, entry) in router.table().iter() {
        let owner = fabric.endpoint_at(entry.port).map(|e| e.name()).unwrap_or("?");
        println!("  {ip:<12} {}  port {} ({owner})", entry.mac, entry.port);
    }

    println!("\nverdict: {:?}, evidence {:?}", report.verdict, report.evidence);
    for note in &report.notes {
        println!("note: {note}");
    }
    Ok(())
}
