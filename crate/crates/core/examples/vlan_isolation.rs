//! The secured switch with the two-VLAN configuration: A and C share tag 2,
//! B sits alone on tag 1. A and C talk normally; a frame from A addressed
//! straight to B's MAC is dropped by the firewall's cross-VLAN rule.

use vnetsim::runner::{bundled, render_run, run_scenario, ReportFormat, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = bundled("vlan_example_sec4")?;
    for e in &scenario.endpoints {
        println!("{} {} {} vlan {}", e.name, e.mac, e.ip, e.vlan.map(|t| t.id()).unwrap_or(0));
    }
    let run = run_scenario(&scenario, RunOptions::default())?;
    print!("{}", String::from_utf8(render_run(&run, ReportFormat::Text))?);

    let cell = &run.cells[0];
    let alerts = cell.trace.iter().filter(|e| e.kind.name() == "Alert").count();
    println!("\n{} events, {alerts} alerts", cell.trace.len());
    Ok(())
}
