//! Bridged mode: a learning bridge whose segments are shared media.

use std::collections::{BTreeMap, BTreeSet};

use crate::fabric::{
    DeviceError, FloodCause, ForwardingDevice, FrameCtx, Output, PortId, PortInfo, TableChange,
    Via,
};
use crate::netcore::{EthernetFrame, MacAddr};

use super::Mode;

pub type SegmentId = u32;

pub const DEFAULT_BRIDGE_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BridgeLearn {
    Installed,
    Moved { from: SegmentId },
    Unchanged,
    RejectedFull,
}

/// Fixed-capacity MAC → segment table. New addresses are refused once full.
#[derive(Debug, Clone)]
pub struct BridgeTable {
    entries: BTreeMap<MacAddr, SegmentId>,
    capacity: usize,
}

impl BridgeTable {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "bridge table capacity must be positive");
        BridgeTable {
            entries: BTreeMap::new(),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn get(&self, mac: &MacAddr) -> Option<SegmentId> {
        self.entries.get(mac).copied()
    }

    pub fn learn(&mut self, mac: MacAddr, segment: SegmentId) -> BridgeLearn {
        let full = self.is_full();
        match self.entries.get_mut(&mac) {
            Some(s) if *s == segment => BridgeLearn::Unchanged,
            Some(s) => {
                let from = *s;
                *s = segment;
                BridgeLearn::Moved { from }
            }
            None if full => BridgeLearn::RejectedFull,
            None => {
                self.entries.insert(mac, segment);
                BridgeLearn::Installed
            }
        }
    }
}

/// Xen's default bridge. Every port sits on one segment; a segment is a hub,
/// so a frame placed on it reaches every NIC there.
#[derive(Debug, Clone)]
pub struct BridgeDevice {
    segments: BTreeMap<SegmentId, BTreeSet<PortId>>,
    port_segment: BTreeMap<PortId, SegmentId>,
    table: BridgeTable,
}

impl Default for BridgeDevice {
    fn default() -> Self {
        Self::new(DEFAULT_BRIDGE_CAPACITY)
    }
}

impl BridgeDevice {
    pub fn new(capacity: usize) -> Self {
        BridgeDevice {
            segments: BTreeMap::new(),
            port_segment: BTreeMap::new(),
            table: BridgeTable::new(capacity),
        }
    }

    pub fn table(&self) -> &BridgeTable {
        &self.table
    }

    pub fn segment_of(&self, port: PortId) -> Option<SegmentId> {
        self.port_segment.get(&port).copied()
    }

    pub fn segment_ports(&self, segment: SegmentId) -> impl Iterator<Item = PortId> + '_ {
        self.segments.get(&segment).into_iter().flatten().copied()
    }

    fn all_ports_except(&self, ingress: PortId) -> Vec<PortId> {
        self.port_segment
            .keys()
            .copied()
            .filter(|p| *p != ingress)
            .collect()
    }

    /// Learn the source, then deliver onto the destination segment, or flood
    /// if the destination is broadcast or unknown.
    pub fn bridge_forward(&mut self, ingress: PortId, frame: &EthernetFrame) -> Vec<Output> {
        let mut out = Vec::new();
        let Some(segment) = self.segment_of(ingress) else {
            return out;
        };
        match self.table.learn(frame.src, segment) {
            BridgeLearn::Installed | BridgeLearn::Moved { .. } => {
                out.push(Output::Table(TableChange::Bridge {
                    mac: frame.src,
                    segment,
                }))
            }
            BridgeLearn::Unchanged | BridgeLearn::RejectedFull => {}
        }

        let (ports, via) = if frame.dst.is_broadcast() {
            (
                self.all_ports_except(ingress),
                Via::Flood(FloodCause::Broadcast),
            )
        } else if let Some(dst_segment) = self.table.get(&frame.dst) {
            let ports = self
                .segment_ports(dst_segment)
                .filter(|p| *p != ingress)
                .collect();
            (ports, Via::Medium)
        } else {
            let cause = if self.table.is_full() {
                FloodCause::Saturated
            } else {
                FloodCause::UnknownDestination
            };
            (self.all_ports_except(ingress), Via::Flood(cause))
        };
        out.extend(Output::fan_out(ports, frame, via));
        out
    }
}

impl ForwardingDevice for BridgeDevice {
    fn mode(&self) -> Mode {
        Mode::Bridged
    }

    /// Ports without a segment land on segment 0.
    fn attach(&mut self, info: PortInfo) -> Result<Vec<Output>, DeviceError> {
        let segment = info.attachment.segment.unwrap_or(0);
        self.segments.entry(segment).or_default().insert(info.port);
        self.port_segment.insert(info.port, segment);
        Ok(Vec::new())
    }

    fn process(&mut self, ctx: FrameCtx, frame: &EthernetFrame) -> Vec<Output> {
        self.bridge_forward(ctx.ingress, frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::{Attachment, Fabric};
    use crate::netcore::{ArpPacket, IpAddr4};

    fn mac(n: u8) -> MacAddr {
        MacAddr::new(2, 0, 0, 0, 0, n)
    }

    fn ip(n: u8) -> IpAddr4 {
        IpAddr4::new(10, 0, 0, n)
    }

    /// A on segment 0; B and C share segment 1.
    fn two_segments() -> Fabric<BridgeDevice> {
        let mut f = Fabric::new(BridgeDevice::default());
        f.attach_vm("A", mac(0xa), ip(1), Attachment::segment(0)).unwrap();
        f.attach_vm("B", mac(0xb), ip(2), Attachment::segment(1)).unwrap();
        f.attach_vm("C", mac(0xc), ip(3), Attachment::segment(1)).unwrap();
        f
    }

    #[test]
    fn table_learn_outcomes() {
        let mut t = BridgeTable::new(2);
        assert_eq!(t.learn(mac(1), 0), BridgeLearn::Installed);
        assert_eq!(t.learn(mac(1), 0), BridgeLearn::Unchanged);
        assert_eq!(t.learn(mac(1), 1), BridgeLearn::Moved { from: 0 });
        assert_eq!(t.learn(mac(2), 0), BridgeLearn::Installed);
        assert_eq!(t.learn(mac(3), 0), BridgeLearn::RejectedFull);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn known_destination_reaches_whole_segment() {
        let mut f = two_segments();
        f.arp_resolve("A", ip(2)).unwrap();
        f.set_promiscuous("C", true).unwrap();
        f.send_ip("A", ip(2), b"secret".to_vec()).unwrap();
        f.run_until_idle().unwrap();
        assert!(f.endpoint("B").unwrap().has_received_payload(b"secret"));
        assert!(f.endpoint("C").unwrap().has_received_payload(b"secret"));
    }

    #[test]
    fn non_promiscuous_neighbour_filters() {
        let mut f = two_segments();
        f.arp_resolve("A", ip(2)).unwrap();
        f.send_ip("A", ip(2), b"secret".to_vec()).unwrap();
        f.run_until_idle().unwrap();
        assert!(!f.endpoint("C").unwrap().has_received_payload(b"secret"));
    }

    #[test]
    fn unknown_destination_floods_every_segment() {
        let mut b = BridgeDevice::new(8);
        for (p, s) in [(0, 0), (1, 1), (2, 1), (3, 2)] {
            b.attach(PortInfo {
                port: PortId(p),
                mac: mac(p as u8 + 1),
                ip: ip(p as u8 + 1),
                attachment: Attachment::segment(s),
            })
            .unwrap();
        }
        let frame = EthernetFrame::ip(mac(1), mac(0x99), ip(1), ip(99), b"?".to_vec());
        let out = b.bridge_forward(PortId(0), &frame);
        let ports: Vec<_> = out
            .iter()
            .filter_map(|o| match o {
                Output::Deliver { port, via, .. } => {
                    assert_eq!(*via, Via::Flood(FloodCause::UnknownDestination));
                    Some(port.0)
                }
                _ => None,
            })
            .collect();
        assert_eq!(ports, vec![1, 2, 3]);
    }

    #[test]
    fn broadcast_request_reaches_everyone_but_sender() {
        let mut f = two_segments();
        let req = EthernetFrame::arp(mac(0xa), MacAddr::BROADCAST, ArpPacket::request(ip(1), mac(0xa), ip(9)));
        f.send("A", req).unwrap();
        f.run_until_idle().unwrap();
        assert!(f.endpoint("A").unwrap().rx_log().is_empty());
        assert_eq!(f.endpoint("B").unwrap().rx_log().len(), 1);
        assert_eq!(f.endpoint("C").unwrap().rx_log().len(), 1);
    }

    #[test]
    fn full_table_unknown_destination_is_saturation_flood() {
        let mut b = BridgeDevice::new(1);
        for p in 0..2 {
            b.attach(PortInfo {
                port: PortId(p),
                mac: mac(p as u8 + 1),
                ip: ip(p as u8 + 1),
                attachment: Attachment::segment(p),
            })
            .unwrap();
        }
        let f1 = EthernetFrame::ip(mac(1), mac(2), ip(1), ip(2), Vec::new());
        b.bridge_forward(PortId(0), &f1);
        let out = b.bridge_forward(PortId(0), &f1);
        assert!(out.iter().any(|o| matches!(
            o,
            Output::Deliver { via: Via::Flood(FloodCause::Saturated), .. }
        )));
    }
}
