//! MAC flooding against a small routed table. With capacity N and K entries
//! already learned, N - K forged identities fill the table and the next
//! lookup miss is flooded to every port. One identity fewer and the router
//! still resolves the destination properly.

use vnetsim::attacks::{run_attack, AttackKind, AttackSpec, Flow};
use vnetsim::fabric::{Attachment, Fabric, Via};
use vnetsim::modes::{Device, Mode, RouterDevice};
use vnetsim::netcore::{IpAddr4, MacAddr};

fn flood(capacity: usize, forged: usize) -> Result<bool, Box<dyn std::error::Error>> {
    let mut fabric = Fabric::new(Device::Router(RouterDevice::with_capacity(capacity)));
    for (i, name) in ["A", "B", "C"].into_iter().enumerate() {
        let n = i as u8 + 1;
        fabric.attach_vm(name, MacAddr::new(2, 0, 0, 0, 0, n), IpAddr4::new(10, 0, 0, n), Attachment::plain())?;
    }
    let kind = AttackKind::MacFlood {
        attacker: "C".into(),
        forged_count: forged,
        then_sniff_flow: Flow::new("A", "B"),
        prewarm: Some(vec!["A".into()]),
    };
    let report = run_attack(&mut fabric, &AttackSpec::new(kind, Mode::Routed))?;
    let hub = fabric.trace().iter().any(|e| e.via() == Some(Via::Flood(vnetsim::fabric::FloodCause::Saturated)));
    println!(
        "capacity {capacity}, prewarmed 1, forged {forged:>2}: verdict {:?}, saturated flood seen: {hub}",
        report.verdict
    );
    Ok(report.succeeded())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let capacity = 8;
    let below = flood(capacity, capacity - 2)?;
    let at = flood(capacity, capacity - 1)?;
    assert!(!below && at);
    Ok(())
}
