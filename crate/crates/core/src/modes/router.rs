//! Routed mode: dom0 as default gateway, forwarding on a fixed-size
//! IP → (MAC, port) table that ARP traffic fills without any verification.

use std::collections::{BTreeMap, BTreeSet};

use crate::fabric::{
    DeviceError, DropReason, FloodCause, ForwardingDevice, FrameCtx, Output, PortId, PortInfo,
    RouteChange, TableChange, Via, DEFAULT_ARP_TIMEOUT,
};
use crate::netcore::{ArpOp, ArpPacket, EthernetFrame, FrameBody, IpAddr4, MacAddr};

use super::Mode;

pub const DEFAULT_TABLE_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RouteEntry {
    pub mac: MacAddr,
    pub port: PortId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableUpdate {
    Installed,
    Overwritten { previous: RouteEntry },
    /// The entry already said exactly this.
    Unchanged,
    RejectedFull,
}

impl TableUpdate {
    pub fn changed(self) -> bool {
        matches!(self, TableUpdate::Installed | TableUpdate::Overwritten { .. })
    }
}

/// One entry per IP, at most `capacity` entries, no eviction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardingTable {
    entries: BTreeMap<IpAddr4, RouteEntry>,
    capacity: usize,
}

impl ForwardingTable {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "forwarding table capacity must be positive");
        ForwardingTable {
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

    pub fn get(&self, ip: IpAddr4) -> Option<RouteEntry> {
        self.entries.get(&ip).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (IpAddr4, RouteEntry)> + '_ {
        self.entries.iter().map(|(ip, e)| (*ip, *e))
    }

    pub fn insert(&mut self, ip: IpAddr4, entry: RouteEntry) -> TableUpdate {
        let full = self.is_full();
        match self.entries.get_mut(&ip) {
            Some(e) if *e == entry => TableUpdate::Unchanged,
            Some(e) => {
                let previous = std::mem::replace(e, entry);
                TableUpdate::Overwritten { previous }
            }
            None if full => TableUpdate::RejectedFull,
            None => {
                self.entries.insert(ip, entry);
                TableUpdate::Installed
            }
        }
    }
}

/// Install or overwrite `sender_ip → (sender_mac, ingress)` unconditionally.
/// This is the unprotected behaviour ARP poisoning relies on.
pub fn table_update(table: &mut ForwardingTable, arp: &ArpPacket, ingress: PortId) -> TableUpdate {
    table.insert(
        arp.sender_ip,
        RouteEntry {
            mac: arp.sender_mac,
            port: ingress,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouterConfig {
    pub gateway_ip: IpAddr4,
    pub gateway_mac: MacAddr,
    pub capacity: usize,
    /// Ticks a frame waits for an on-behalf ARP answer.
    pub arp_timeout: u64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            gateway_ip: IpAddr4::new(10, 0, 0, 254),
            gateway_mac: MacAddr::new(0x02, 0, 0, 0, 0, 0xfe),
            capacity: DEFAULT_TABLE_CAPACITY,
            arp_timeout: DEFAULT_ARP_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone)]
struct Held {
    next_hop: IpAddr4,
    frame: EthernetFrame,
    cause: u64,
    deadline: u64,
}

#[derive(Debug, Clone)]
pub struct RouterDevice {
    config: RouterConfig,
    table: ForwardingTable,
    ports: BTreeSet<PortId>,
    /// Port excluded from floods and relays (the NAT uplink).
    isolated: Option<PortId>,
    /// Addresses never learned from ARP besides the gateway's own.
    reserved: BTreeSet<IpAddr4>,
    held: Vec<Held>,
    saturated_hub_mode: bool,
}

impl Default for RouterDevice {
    fn default() -> Self {
        Self::new(RouterConfig::default())
    }
}

impl RouterDevice {
    pub fn new(config: RouterConfig) -> Self {
        RouterDevice {
            table: ForwardingTable::new(config.capacity),
            config,
            ports: BTreeSet::new(),
            isolated: None,
            reserved: BTreeSet::new(),
            held: Vec::new(),
            saturated_hub_mode: false,
        }
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self::new(RouterConfig {
            capacity,
            ..Default::default()
        })
    }

    pub fn config(&self) -> &RouterConfig {
        &self.config
    }

    pub fn table(&self) -> &ForwardingTable {
        &self.table
    }

    pub fn gateway_ip(&self) -> IpAddr4 {
        self.config.gateway_ip
    }

    pub fn gateway_mac(&self) -> MacAddr {
        self.config.gateway_mac
    }

    /// True when the most recent unicast lookup missed on a full table.
    pub fn saturated_hub_mode(&self) -> bool {
        self.saturated_hub_mode
    }

    pub fn held_frames(&self) -> usize {
        self.held.len()
    }

    pub(super) fn set_isolated(&mut self, port: PortId) {
        self.ports.insert(port);
        self.isolated = Some(port);
    }

    pub(super) fn isolated(&self) -> Option<PortId> {
        self.isolated
    }

    pub(super) fn reserve(&mut self, ip: IpAddr4) {
        self.reserved.insert(ip);
    }

    fn add_port(&mut self, port: PortId) -> Vec<Output> {
        self.ports.insert(port);
        let announce = ArpPacket::gratuitous(self.config.gateway_ip, self.config.gateway_mac);
        vec![Output::Emit {
            frame: EthernetFrame::arp(self.config.gateway_mac, MacAddr::BROADCAST, announce),
            ports: vec![port],
        }]
    }

    fn flood_ports(&self, ingress: PortId) -> Vec<PortId> {
        self.ports
            .iter()
            .copied()
            .filter(|p| *p != ingress && Some(*p) != self.isolated)
            .collect()
    }

    fn owns(&self, ip: IpAddr4) -> bool {
        ip == self.config.gateway_ip || self.reserved.contains(&ip)
    }

    fn learnable(&self, arp: &ArpPacket) -> bool {
        !self.owns(arp.sender_ip)
            && arp.sender_ip != IpAddr4::UNSPECIFIED
            && !arp.sender_mac.is_broadcast()
            && !arp.sender_mac.is_zero()
    }

    /// Run `table_update` for an observed ARP packet, reporting the change and
    /// releasing frames that were waiting on the sender.
    pub(super) fn learn(&mut self, arp: &ArpPacket, ingress: PortId) -> Vec<Output> {
        if !self.learnable(arp) {
            return Vec::new();
        }
        let update = table_update(&mut self.table, arp, ingress);
        let change = match update {
            TableUpdate::Installed => RouteChange::Installed,
            TableUpdate::Overwritten { .. } => RouteChange::Overwritten,
            TableUpdate::Unchanged | TableUpdate::RejectedFull => return Vec::new(),
        };
        let mut out = vec![Output::Table(TableChange::Forwarding {
            ip: arp.sender_ip,
            mac: arp.sender_mac,
            port: ingress,
            change,
        })];
        out.extend(self.release(arp.sender_ip));
        out
    }

    fn release(&mut self, ip: IpAddr4) -> Vec<Output> {
        let Some(entry) = self.table.get(ip) else {
            return Vec::new();
        };
        let (ready, waiting): (Vec<_>, Vec<_>) =
            self.held.drain(..).partition(|h| h.next_hop == ip);
        self.held = waiting;
        ready
            .into_iter()
            .map(|h| Output::Deliver {
                port: entry.port,
                frame: self.rewrite(h.frame, entry.mac),
                via: Via::Unicast,
                cause: Some(h.cause),
            })
            .collect()
    }

    fn rewrite(&self, mut frame: EthernetFrame, dst: MacAddr) -> EthernetFrame {
        frame.src = self.config.gateway_mac;
        frame.dst = dst;
        frame
    }

    /// Park `frame` until `next_hop` resolves, asking for it on `ports` with
    /// `sender_ip` as the requester. One outstanding request per address.
    pub(super) fn hold(
        &mut self,
        ctx: FrameCtx,
        frame: EthernetFrame,
        next_hop: IpAddr4,
        sender_ip: IpAddr4,
        ports: Vec<PortId>,
    ) -> Vec<Output> {
        let asked = self.held.iter().any(|h| h.next_hop == next_hop);
        self.held.push(Held {
            next_hop,
            frame,
            cause: ctx.seq,
            deadline: ctx.tick + self.config.arp_timeout,
        });
        if asked {
            return Vec::new();
        }
        let req = ArpPacket::request(sender_ip, self.config.gateway_mac, next_hop);
        vec![Output::Emit {
            frame: EthernetFrame::arp(self.config.gateway_mac, MacAddr::BROADCAST, req),
            ports,
        }]
    }

    fn reply_from(&self, sender_ip: IpAddr4, sender_mac: MacAddr, to: &ArpPacket) -> EthernetFrame {
        EthernetFrame::arp(
            self.config.gateway_mac,
            to.sender_mac,
            ArpPacket::reply(sender_ip, sender_mac, to.sender_ip, to.sender_mac),
        )
    }

    /// Answer a request for `ip` (owned by the device) back on `ingress`.
    pub(super) fn answer(&self, ip: IpAddr4, arp: &ArpPacket, ingress: PortId) -> Output {
        Output::Emit {
            frame: self.reply_from(ip, self.config.gateway_mac, arp),
            ports: vec![ingress],
        }
    }

    fn route_arp(&mut self, ctx: FrameCtx, frame: &EthernetFrame, arp: &ArpPacket) -> Vec<Output> {
        let mut out = self.learn(arp, ctx.ingress);
        let consume = Output::Consume {
            frame: frame.clone(),
            cause: None,
        };
        match arp.op {
            ArpOp::Request if self.owns(arp.target_ip) => {
                out.push(self.answer(arp.target_ip, arp, ctx.ingress));
                out.push(consume);
            }
            ArpOp::Request if arp.is_gratuitous() => out.push(consume),
            ArpOp::Request => match self.table.get(arp.target_ip) {
                // Proxy answer straight from the table.
                Some(entry) => {
                    out.push(Output::Emit {
                        frame: self.reply_from(arp.target_ip, entry.mac, arp),
                        ports: vec![ctx.ingress],
                    });
                    out.push(consume);
                }
                None => out.extend(Output::fan_out(
                    self.flood_ports(ctx.ingress),
                    frame,
                    Via::Flood(FloodCause::Broadcast),
                )),
            },
            ArpOp::Reply if self.owns(arp.target_ip) => out.push(consume),
            ArpOp::Reply => match self.table.get(arp.target_ip) {
                Some(entry) => out.push(Output::Deliver {
                    port: entry.port,
                    frame: frame.clone(),
                    via: Via::Unicast,
                    cause: None,
                }),
                None => out.push(Output::Drop {
                    frame: frame.clone(),
                    reason: DropReason::NoRoute,
                    cause: None,
                }),
            },
        }
        out
    }

    /// Forward an IP frame towards `dst_ip`: unicast on a hit, hub flood on a
    /// miss against a full table, otherwise hold and resolve on the sender's
    /// behalf.
    pub(super) fn route_ip(&mut self, ctx: FrameCtx, frame: &EthernetFrame, dst_ip: IpAddr4) -> Vec<Output> {
        if let Some(entry) = self.table.get(dst_ip) {
            self.saturated_hub_mode = false;
            return vec![Output::Deliver {
                port: entry.port,
                frame: self.rewrite(frame.clone(), entry.mac),
                via: Via::Unicast,
                cause: None,
            }];
        }
        let ports = self.flood_ports(ctx.ingress);
        if self.table.is_full() {
            self.saturated_hub_mode = true;
            return Output::fan_out(ports, frame, Via::Flood(FloodCause::Saturated));
        }
        self.saturated_hub_mode = false;
        let gw = self.config.gateway_ip;
        self.hold(ctx, frame.clone(), dst_ip, gw, ports)
    }

    /// Full routed-mode handling of one frame.
    pub fn router_forward(&mut self, ctx: FrameCtx, frame: &EthernetFrame) -> Vec<Output> {
        match &frame.body {
            FrameBody::Arp(arp) => self.route_arp(ctx, frame, arp),
            FrameBody::Ip(ip) if self.owns(ip.dst_ip) => vec![Output::Consume {
                frame: frame.clone(),
                cause: None,
            }],
            FrameBody::Ip(ip) => self.route_ip(ctx, frame, ip.dst_ip),
        }
    }

    pub(super) fn expire(&mut self, tick: u64) -> Vec<Output> {
        let (expired, live): (Vec<_>, Vec<_>) =
            self.held.drain(..).partition(|h| h.deadline <= tick);
        self.held = live;
        expired
            .into_iter()
            .map(|h| Output::Drop {
                frame: h.frame,
                reason: DropReason::ArpUnresolved,
                cause: Some(h.cause),
            })
            .collect()
    }
}

impl ForwardingDevice for RouterDevice {
    fn mode(&self) -> Mode {
        Mode::Routed
    }

    fn attach(&mut self, info: PortInfo) -> Result<Vec<Output>, DeviceError> {
        if info.attachment.uplink {
            return Err(DeviceError::UplinkUnsupported(Mode::Routed));
        }
        Ok(self.add_port(info.port))
    }

    fn process(&mut self, ctx: FrameCtx, frame: &EthernetFrame) -> Vec<Output> {
        self.router_forward(ctx, frame)
    }

    fn on_tick(&mut self, tick: u64) -> Vec<Output> {
        self.expire(tick)
    }

    fn has_pending(&self) -> bool {
        !self.held.is_empty()
    }

    fn default_gateway(&self, port: PortId) -> Option<IpAddr4> {
        (Some(port) != self.isolated).then_some(self.config.gateway_ip)
    }
}

// NAT needs the plain port registration without the uplink check.
impl RouterDevice {
    pub(super) fn attach_internal(&mut self, port: PortId) -> Vec<Output> {
        self.add_port(port)
    }
}
