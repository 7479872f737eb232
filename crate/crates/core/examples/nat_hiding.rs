//! NAT mode hides internal addresses. A and B sit behind the gateway; X is
//! outside on the uplink. Everything X sees carries the public address, and
//! X's reply is translated back to the right internal host. Flows are told
//! apart by the first eight payload bytes, so the reply reuses that prefix.

use vnetsim::fabric::{Attachment, EventKind, Fabric};
use vnetsim::modes::{Device, NatDevice};
use vnetsim::netcore::{IpAddr4, MacAddr};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut fabric = Fabric::new(Device::Nat(NatDevice::default()));
    let x_ip = IpAddr4::new(198, 51, 100, 7);
    fabric.attach_vm("A", MacAddr::new(2, 0, 0, 0, 0, 0x0a), IpAddr4::new(10, 0, 0, 1), Attachment::plain())?;
    fabric.attach_vm("B", MacAddr::new(2, 0, 0, 0, 0, 0x0b), IpAddr4::new(10, 0, 0, 2), Attachment::plain())?;
    let uplink = fabric.attach_vm("X", MacAddr::new(2, 0, 0, 0, 0, 0x58), x_ip, Attachment::uplink())?;

    fabric.send_ip("A", x_ip, b"session1 ping".to_vec())?;
    fabric.run_until_idle()?;
    let public = fabric.device().as_nat().expect("nat").public_ip();
    fabric.send_ip("X", public, b"session1 pong".to_vec())?;
    fabric.run_until_idle()?;

    for e in fabric.trace() {
        let Some(ip) = e.frame.as_ref().and_then(|f| f.as_ip()) else { continue };
        if e.kind == EventKind::FrameDelivered && e.port() == Some(uplink) {
            println!("uplink saw   {} -> {}", ip.src_ip, ip.dst_ip);
        } else if e.kind == EventKind::FrameDelivered {
            println!("inside saw   {} -> {} on {}", ip.src_ip, ip.dst_ip, e.port().expect("port subject"));
        }
    }
    for ((_, flow), state) in fabric.device().as_nat().expect("nat").flows() {
        println!("flow {} -> {} tag {:?} held for {}", flow.src_ip, flow.dst_ip, String::from_utf8_lossy(&flow.tag.0), state.internal_mac);
    }
    Ok(())
}
