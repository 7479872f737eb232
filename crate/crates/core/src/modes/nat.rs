//! NAT mode: guests sit on a private LAN behind dom0, which rewrites their
//! outbound traffic to a single public address and only lets replies back in.

use std::collections::BTreeMap;
use std::fmt;

use crate::fabric::{
    DeviceError, DropReason, ForwardingDevice, FrameCtx, Output, PortId, PortInfo, TableChange,
    Via,
};
use crate::netcore::{ArpOp, EthernetFrame, FrameBody, IpAddr4, Ipv4Net, MacAddr};

use super::router::{RouterConfig, RouterDevice};
use super::Mode;

/// First eight payload bytes, zero padded. Stands in for transport ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowTag(pub [u8; 8]);

impl FlowTag {
    pub fn of(payload: &[u8]) -> Self {
        let mut tag = [0u8; 8];
        let n = payload.len().min(8);
        tag[..n].copy_from_slice(&payload[..n]);
        FlowTag(tag)
    }
}

impl fmt::Display for FlowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowId {
    pub src_ip: IpAddr4,
    pub dst_ip: IpAddr4,
    pub tag: FlowTag,
}

/// State kept for one translated outbound flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NatFlow {
    pub internal_mac: MacAddr,
    pub internal_port: PortId,
    pub remote_ip: IpAddr4,
    pub opened_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Outbound,
    Inbound,
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NatConfig {
    pub router: RouterConfig,
    pub public_ip: IpAddr4,
    pub internal_net: Ipv4Net,
}

impl Default for NatConfig {
    fn default() -> Self {
        NatConfig {
            router: RouterConfig::default(),
            public_ip: IpAddr4::new(203, 0, 113, 1),
            internal_net: Ipv4Net::new(IpAddr4::new(10, 0, 0, 0), 24).expect("valid prefix"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NatDevice {
    inner: RouterDevice,
    public_ip: IpAddr4,
    internal_net: Ipv4Net,
    nat_map: BTreeMap<(IpAddr4, FlowId), NatFlow>,
    reverse: BTreeMap<(IpAddr4, FlowTag), (IpAddr4, FlowId)>,
}

impl Default for NatDevice {
    fn default() -> Self {
        Self::new(NatConfig::default())
    }
}

impl NatDevice {
    pub fn new(config: NatConfig) -> Self {
        let mut inner = RouterDevice::new(config.router);
        inner.reserve(config.public_ip);
        NatDevice {
            inner,
            public_ip: config.public_ip,
            internal_net: config.internal_net,
            nat_map: BTreeMap::new(),
            reverse: BTreeMap::new(),
        }
    }

    pub fn inner(&self) -> &RouterDevice {
        &self.inner
    }

    pub fn public_ip(&self) -> IpAddr4 {
        self.public_ip
    }

    pub fn internal_net(&self) -> Ipv4Net {
        self.internal_net
    }

    pub fn uplink(&self) -> Option<PortId> {
        self.inner.isolated()
    }

    pub fn flows(&self) -> impl Iterator<Item = (&(IpAddr4, FlowId), &NatFlow)> {
        self.nat_map.iter()
    }

    pub fn classify(&self, ingress: PortId, frame: &EthernetFrame) -> Direction {
        if Some(ingress) == self.uplink() {
            return Direction::Inbound;
        }
        match &frame.body {
            FrameBody::Ip(ip)
                if !self.internal_net.contains(ip.dst_ip)
                    && ip.dst_ip != self.inner.gateway_ip()
                    && ip.dst_ip != self.public_ip =>
            {
                Direction::Outbound
            }
            _ => Direction::Internal,
        }
    }

    pub fn nat_forward(&mut self, ctx: FrameCtx, frame: &EthernetFrame, direction: Direction) -> Vec<Output> {
        match direction {
            Direction::Internal => {
                let out = self.inner.router_forward(ctx, frame);
                self.keep_private(out)
            }
            Direction::Outbound => self.outbound(ctx, frame),
            Direction::Inbound => self.inbound(ctx, frame),
        }
    }

    fn drop(frame: &EthernetFrame, reason: DropReason) -> Vec<Output> {
        vec![Output::Drop {
            frame: frame.clone(),
            reason,
            cause: None,
        }]
    }

    /// Internal traffic never leaves untranslated. Flood copies toward the
    /// uplink are removed; a unicast aimed there is dropped.
    fn keep_private(&self, out: Vec<Output>) -> Vec<Output> {
        let Some(uplink) = self.uplink() else {
            return out;
        };
        let leaks = |f: &EthernetFrame| matches!(&f.body, FrameBody::Ip(ip) if self.internal_net.contains(ip.src_ip));
        out.into_iter()
            .filter_map(|o| match o {
                Output::Deliver { port, frame, via, cause } if port == uplink && leaks(&frame) => match via {
                    Via::Flood(_) => None,
                    _ => Some(Output::Drop {
                        frame,
                        reason: DropReason::NoRoute,
                        cause,
                    }),
                },
                other => Some(other),
            })
            .collect()
    }

    fn outbound(&mut self, ctx: FrameCtx, frame: &EthernetFrame) -> Vec<Output> {
        let (Some(uplink), FrameBody::Ip(ip)) = (self.uplink(), &frame.body) else {
            return Self::drop(frame, DropReason::NoEgress);
        };
        let mut out = Vec::new();
        let flow = FlowId {
            src_ip: ip.src_ip,
            dst_ip: ip.dst_ip,
            tag: FlowTag::of(&ip.payload),
        };
        let key = (ip.src_ip, flow);
        if let std::collections::btree_map::Entry::Vacant(slot) = self.nat_map.entry(key) {
            slot.insert(NatFlow {
                internal_mac: frame.src,
                internal_port: ctx.ingress,
                remote_ip: ip.dst_ip,
                opened_at: ctx.tick,
            });
            self.reverse.insert((ip.dst_ip, flow.tag), key);
            out.push(Output::Table(TableChange::Nat {
                internal_ip: ip.src_ip,
                remote_ip: ip.dst_ip,
                tag: flow.tag.to_string(),
            }));
        }

        let mut translated = frame.clone();
        translated.src = self.inner.gateway_mac();
        if let FrameBody::Ip(p) = &mut translated.body {
            p.src_ip = self.public_ip;
        }
        match self.inner.table().get(ip.dst_ip) {
            Some(entry) if entry.port == uplink => {
                translated.dst = entry.mac;
                out.push(Output::Deliver {
                    port: uplink,
                    frame: translated,
                    via: Via::Unicast,
                    cause: None,
                });
            }
            _ => {
                let public = self.public_ip;
                out.extend(self.inner.hold(ctx, translated, ip.dst_ip, public, vec![uplink]));
            }
        }
        out
    }

    fn inbound(&mut self, ctx: FrameCtx, frame: &EthernetFrame) -> Vec<Output> {
        match &frame.body {
            FrameBody::Arp(arp) => {
                // Internal addresses never live behind the uplink.
                let mut out = if self.internal_net.contains(arp.sender_ip) {
                    Vec::new()
                } else {
                    self.inner.learn(arp, ctx.ingress)
                };
                let for_us = arp.target_ip == self.public_ip;
                match arp.op {
                    ArpOp::Request if for_us && !arp.is_gratuitous() => {
                        out.push(self.inner.answer(self.public_ip, arp, ctx.ingress));
                        out.push(Output::Consume {
                            frame: frame.clone(),
                            cause: None,
                        });
                    }
                    ArpOp::Request if arp.is_gratuitous() => out.push(Output::Consume {
                        frame: frame.clone(),
                        cause: None,
                    }),
                    ArpOp::Reply if for_us => out.push(Output::Consume {
                        frame: frame.clone(),
                        cause: None,
                    }),
                    _ => out.extend(Self::drop(frame, DropReason::NoRoute)),
                }
                out
            }
            FrameBody::Ip(ip) => {
                let tag = FlowTag::of(&ip.payload);
                let hit = (ip.dst_ip == self.public_ip)
                    .then(|| self.reverse.get(&(ip.src_ip, tag)))
                    .flatten()
                    .and_then(|key| self.nat_map.get(key).map(|f| (key.0, *f)));
                let Some((internal_ip, flow)) = hit else {
                    return Self::drop(frame, DropReason::NatNoMapping);
                };
                let mut back = frame.clone();
                back.src = self.inner.gateway_mac();
                back.dst = flow.internal_mac;
                if let FrameBody::Ip(p) = &mut back.body {
                    p.dst_ip = internal_ip;
                }
                vec![Output::Deliver {
                    port: flow.internal_port,
                    frame: back,
                    via: Via::Unicast,
                    cause: None,
                }]
            }
        }
    }
}

impl ForwardingDevice for NatDevice {
    fn mode(&self) -> Mode {
        Mode::Nat
    }

    fn attach(&mut self, info: PortInfo) -> Result<Vec<Output>, DeviceError> {
        if !info.attachment.uplink {
            return Ok(self.inner.attach_internal(info.port));
        }
        if let Some(existing) = self.uplink() {
            return Err(DeviceError::DuplicateUplink(existing));
        }
        self.inner.set_isolated(info.port);
        let mac = self.inner.gateway_mac();
        let announce = crate::netcore::ArpPacket::gratuitous(self.public_ip, mac);
        Ok(vec![Output::Emit {
            frame: EthernetFrame::arp(mac, MacAddr::BROADCAST, announce),
            ports: vec![info.port],
        }])
    }

    fn process(&mut self, ctx: FrameCtx, frame: &EthernetFrame) -> Vec<Output> {
        let direction = self.classify(ctx.ingress, frame);
        self.nat_forward(ctx, frame, direction)
    }

    fn on_tick(&mut self, tick: u64) -> Vec<Output> {
        self.inner.expire(tick)
    }

    fn has_pending(&self) -> bool {
        self.inner.has_pending()
    }

    fn default_gateway(&self, port: PortId) -> Option<IpAddr4> {
        self.inner.default_gateway(port)
    }
}
