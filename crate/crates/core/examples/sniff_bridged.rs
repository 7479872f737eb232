//! Passive sniffing. On a bridged segment the medium is shared, so a
//! promiscuous NIC next to B sees A's unicast to B. The same attack against
//! the routed device sees nothing.

use vnetsim::attacks::{run_attack, AttackSpec};
use vnetsim::modes::Mode;
use vnetsim::runner::{build_fabric, bundled};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = bundled("fig6_sniff_bridged")?;
    for mode in [Mode::Bridged, Mode::Routed] {
        let mut fabric = build_fabric(&scenario, mode, scenario.seed)?;
        let report = run_attack(&mut fabric, &AttackSpec::new(scenario.attacks[0].clone(), mode))?;
        let c = fabric.endpoint("C").expect("attacker attached");
        let foreign = c.rx_log().iter().filter(|(_, f)| !c.is_addressed(f)).count();
        println!(
            "{:<14} verdict {:?}  frames C captured that were not addressed to it: {foreign}",
            mode.label(),
            report.verdict
        );
    }
    Ok(())
}
