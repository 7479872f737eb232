//! Scenarios are plain JSON. This one adds a firewall rule that drops all IP
//! traffic entering port 0, then runs a sniff against the secured switch.
//! A malformed copy shows how schema problems are reported.

use vnetsim::runner::{load_scenario, render_run, run_scenario, ReportFormat, RunOptions};

const SCENARIO: &str = r#"{
  "schema": "vnetsim/scenario@1",
  "name": "custom_rule",
  "endpoints": [
    {"name": "A", "mac": "02:00:00:00:00:0a", "ip": "10.0.0.1", "vlan": 7},
    {"name": "B", "mac": "02:00:00:00:00:0b", "ip": "10.0.0.2", "vlan": 7},
    {"name": "C", "mac": "02:00:00:00:00:0c", "ip": "10.0.0.3", "vlan": 7}
  ],
  "device": {
    "mode": "secured",
    "firewall": [
      {"name": "quarantine-port-0", "when": {"ingress_port": 0, "kind": "ip"}, "action": {"drop": "quarantined"}}
    ]
  },
  "announce": true,
  "traffic": [{"from": "A", "to": "B", "payload": "blocked"}, {"from": "B", "to": "C", "payload": "fine"}],
  "attacks": [{"kind": "sniff", "attacker": "C", "flow": {"src": "B", "dst": "A"}}]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = load_scenario(SCENARIO)?;
    let run = run_scenario(&scenario, RunOptions::default())?;
    print!("{}", String::from_utf8(render_run(&run, ReportFormat::Text))?);

    let broken = SCENARIO.replace(r#""flow": {"src": "B""#, r#""flow": {"src": "Z""#);
    if let Err(e) = load_scenario(&broken) {
        println!("\nrejected:\n{e}");
    }
    Ok(())
}
