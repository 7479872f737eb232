//! All three attacks against the secured switch, with the defense each one
//! trips: registry mismatch for the spoof, VLAN-scoped unicast for the sniff
//! and dropped learns for the flood.

use vnetsim::attacks::{run_attack, AttackSpec};
use vnetsim::modes::Mode;
use vnetsim::runner::{build_fabric, bundled};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = bundled("table3_matrix")?;
    for kind in &scenario.attacks {
        let mut fabric = build_fabric(&scenario, Mode::Secured, scenario.seed)?;
        let report = run_attack(&mut fabric, &AttackSpec::new(kind.clone(), Mode::Secured))?;
        println!("{:<13} {:?}, {} alerts", kind.class().label(), report.verdict, report.defense_alerts);
        for (reason, n) in &report.drops {
            println!("    dropped {n:>3} x {reason}");
        }
        let cam = fabric.device().as_secured().expect("secured").cam();
        println!("    cam {}/{} entries", cam.len(), cam.capacity());
    }
    Ok(())
}
