#![allow(dead_code)]

use std::collections::BTreeSet;

use vnetsim::fabric::{Attachment, Event, EventKind, Fabric, PortId};
use vnetsim::modes::{BridgeDevice, Device, RouterDevice};
use vnetsim::netcore::{ArpPacket, EthernetFrame, IpAddr4, MacAddr, VlanTag};
use vnetsim::secured::{SecuredConfig, SecuredSwitch};

pub const MAC_A: MacAddr = MacAddr::new(0x02, 0, 0, 0, 0, 0x0a);
pub const MAC_B: MacAddr = MacAddr::new(0x02, 0, 0, 0, 0, 0x0b);
pub const MAC_C: MacAddr = MacAddr::new(0x02, 0, 0, 0, 0, 0x0c);
pub const IP_A: IpAddr4 = IpAddr4::new(10, 0, 0, 1);
pub const IP_B: IpAddr4 = IpAddr4::new(10, 0, 0, 2);
pub const IP_C: IpAddr4 = IpAddr4::new(10, 0, 0, 3);

pub const P0: PortId = PortId(0);
pub const P1: PortId = PortId(1);
pub const P2: PortId = PortId(2);

pub fn tag(id: u16) -> VlanTag {
    VlanTag::new(id).unwrap()
}

/// A, B and C attached in that order with the given attachments.
pub fn abc(device: Device, attach: [Attachment; 3]) -> Fabric {
    let mut f = Fabric::new(device);
    let [a, b, c] = attach;
    f.attach_vm("A", MAC_A, IP_A, a).unwrap();
    f.attach_vm("B", MAC_B, IP_B, b).unwrap();
    f.attach_vm("C", MAC_C, IP_C, c).unwrap();
    f.run_until_idle().unwrap();
    f
}

pub fn routed() -> Fabric {
    routed_with(64)
}

pub fn routed_with(capacity: usize) -> Fabric {
    abc(
        Device::Router(RouterDevice::with_capacity(capacity)),
        [Attachment::plain(), Attachment::plain(), Attachment::plain()],
    )
}

/// A alone on segment 0, B and C sharing segment 1.
pub fn bridged_split() -> Fabric {
    abc(
        Device::Bridge(BridgeDevice::default()),
        [Attachment::segment(0), Attachment::segment(1), Attachment::segment(1)],
    )
}

pub fn secured(tags: [u16; 3]) -> Fabric {
    secured_with(SecuredConfig::default(), tags)
}

pub fn secured_with(config: SecuredConfig, tags: [u16; 3]) -> Fabric {
    abc(
        Device::Secured(SecuredSwitch::new(config)),
        tags.map(|t| Attachment::vlan(tag(t))),
    )
}

/// Every endpoint sends a gratuitous ARP, then the fabric drains.
pub fn announce(f: &mut Fabric) {
    let ids: Vec<_> = f.endpoints().iter().map(|e| (e.name().to_string(), e.mac(), e.ip())).collect();
    for (name, mac, ip) in ids {
        f.send(&name, EthernetFrame::arp(mac, MacAddr::BROADCAST, ArpPacket::gratuitous(ip, mac)))
            .unwrap();
    }
    f.run_until_idle().unwrap();
}

pub fn events_since(f: &Fabric, seq: u64) -> Vec<Event> {
    f.trace().iter().filter(|e| e.seq >= seq).cloned().collect()
}

/// Ports that got a delivery of a frame carrying `payload`, accepted or not.
pub fn delivery_ports(events: &[Event], payload: &[u8]) -> BTreeSet<PortId> {
    events
        .iter()
        .filter(|e| e.kind == EventKind::FrameDelivered && e.carries_payload(payload))
        .filter_map(Event::port)
        .collect()
}

/// Ports whose NIC took a frame carrying `payload` into its rx log.
pub fn capture_ports(events: &[Event], payload: &[u8]) -> BTreeSet<PortId> {
    events
        .iter()
        .filter(|e| e.is_capture() && e.carries_payload(payload))
        .filter_map(Event::port)
        .collect()
}

pub fn drop_reasons(events: &[Event]) -> Vec<String> {
    events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::FrameDropped(r) => Some(r.to_string()),
            _ => None,
        })
        .collect()
}

pub fn count_kind(events: &[Event], name: &str) -> usize {
    events.iter().filter(|e| e.kind.name() == name).count()
}

/// Send a raw IP frame with explicit addresses.
pub fn raw_ip(f: &mut Fabric, vm: &str, dst_mac: MacAddr, dst_ip: IpAddr4, payload: &[u8]) {
    let e = f.endpoint(vm).unwrap();
    let frame = EthernetFrame::ip(e.mac(), dst_mac, e.ip(), dst_ip, payload.to_vec());
    f.send(vm, frame).unwrap();
    f.run_until_idle().unwrap();
}
