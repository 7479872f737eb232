//! Tick-driven discrete-event core.
//!
//! A [`Fabric`] owns the VM endpoints, one forwarding device and the event
//! trace. Frames sent during tick `t` traverse the device during tick `t + 1`;
//! every traversal, delivery and table change is recorded as an [`Event`].
//! Fan-out copies are delivered in ascending [`PortId`] order, so a scenario
//! always replays to the same trace.

mod device;
mod endpoint;
pub mod event;
pub mod workload;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcore::{ArpOp, ArpPacket, EthernetFrame, FrameBody, FrameError, IpAddr4, MacAddr};

pub use device::{Attachment, DeviceError, ForwardingDevice, FrameCtx, Output, PortInfo};
pub use endpoint::{ArpEntry, VmEndpoint};
pub use event::{
    trace_from_jsonl, trace_to_jsonl, AlertInfo, AlertKind, Detail, DropReason, Event, EventKind,
    FloodCause, RouteChange, Subject, TableChange, TraceError, Via,
};

/// Port index, assigned in attachment order starting at 0.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct PortId(pub u32);

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

pub const DEFAULT_ARP_TIMEOUT: u64 = 8;
pub const DEFAULT_TICK_BUDGET: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FabricConfig {
    /// Ticks `arp_resolve` waits for an answer.
    pub arp_timeout: u64,
    /// Lifetime of endpoint ARP cache entries; `None` keeps them forever.
    pub arp_cache_ttl: Option<u64>,
    /// Upper bound on the clock for `run_until_idle` and `arp_resolve`.
    pub tick_budget: u64,
    pub rng_seed: u64,
}

impl Default for FabricConfig {
    fn default() -> Self {
        FabricConfig {
            arp_timeout: DEFAULT_ARP_TIMEOUT,
            arp_cache_ttl: None,
            tick_budget: DEFAULT_TICK_BUDGET,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FabricError {
    #[error("unknown vm {0:?}")]
    UnknownVm(String),
    #[error("vm name {0:?} already attached")]
    DuplicateName(String),
    #[error("mac {0} already attached")]
    DuplicateMac(MacAddr),
    #[error("ip {0} already attached")]
    DuplicateIp(IpAddr4),
    #[error("mac {0} cannot identify an endpoint")]
    InvalidMac(MacAddr),
    #[error("invalid frame: {0}")]
    InvalidFrame(#[from] FrameError),
    #[error("{vm} got no arp reply for {ip}")]
    ArpTimeout { vm: String, ip: IpAddr4 },
    #[error("tick budget of {budget} exhausted with frames still pending")]
    TickBudgetExhausted { budget: u64 },
    #[error(transparent)]
    Device(#[from] DeviceError),
}

pub type Result<T, E = FabricError> = std::result::Result<T, E>;

#[derive(Debug, Clone)]
struct Queued {
    due: u64,
    ingress: PortId,
    seq: u64,
    frame: EthernetFrame,
}

/// A simulated virtual network: endpoints, one device, a clock and a trace.
///
/// Single-threaded; distinct fabrics share nothing and may run on separate
/// threads.
#[derive(Debug, Clone)]
pub struct Fabric<D = crate::modes::Device> {
    endpoints: Vec<VmEndpoint>,
    device: D,
    clock: u64,
    config: FabricConfig,
    trace: Vec<Event>,
    next_seq: u64,
    queue: VecDeque<Queued>,
}

impl<D: ForwardingDevice> Fabric<D> {
    pub fn new(device: D) -> Self {
        Self::with_config(device, FabricConfig::default())
    }

    pub fn with_config(device: D, config: FabricConfig) -> Self {
        Fabric {
            endpoints: Vec::new(),
            device,
            clock: 0,
            config,
            trace: Vec::new(),
            next_seq: 0,
            queue: VecDeque::new(),
        }
    }

    pub fn device(&self) -> &D {
        &self.device
    }

    pub fn device_mut(&mut self) -> &mut D {
        &mut self.device
    }

    pub fn config(&self) -> &FabricConfig {
        &self.config
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn rng_seed(&self) -> u64 {
        self.config.rng_seed
    }

    pub fn trace(&self) -> &[Event] {
        &self.trace
    }

    /// `seq` the next recorded event will get.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn trace_jsonl(&self) -> String {
        trace_to_jsonl(&self.trace)
    }

    pub fn endpoints(&self) -> &[VmEndpoint] {
        &self.endpoints
    }

    pub fn endpoint(&self, name: &str) -> Option<&VmEndpoint> {
        self.endpoints.iter().find(|e| e.name == name)
    }

    pub fn endpoint_at(&self, port: PortId) -> Option<&VmEndpoint> {
        self.endpoints.get(port.0 as usize)
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.endpoints
            .iter()
            .position(|e| e.name == name)
            .ok_or_else(|| FabricError::UnknownVm(name.to_string()))
    }

    pub fn port_of(&self, name: &str) -> Result<PortId> {
        self.index_of(name).map(|i| self.endpoints[i].port)
    }

    pub fn attach_vm(
        &mut self,
        name: &str,
        mac: MacAddr,
        ip: IpAddr4,
        attachment: Attachment,
    ) -> Result<PortId> {
        if mac.is_broadcast() || mac.is_zero() {
            return Err(FabricError::InvalidMac(mac));
        }
        if self.endpoints.iter().any(|e| e.name == name) {
            return Err(FabricError::DuplicateName(name.to_string()));
        }
        if self.endpoints.iter().any(|e| e.mac == mac) {
            return Err(FabricError::DuplicateMac(mac));
        }
        if self.endpoints.iter().any(|e| e.ip == ip) {
            return Err(FabricError::DuplicateIp(ip));
        }
        let port = PortId(self.endpoints.len() as u32);
        let outputs = self.device.attach(PortInfo {
            port,
            mac,
            ip,
            attachment,
        })?;
        self.endpoints.push(VmEndpoint {
            name: name.to_string(),
            mac,
            ip,
            port,
            promiscuous: false,
            gateway: self.device.default_gateway(port),
            arp_cache: Default::default(),
            rx_log: Vec::new(),
        });
        self.apply(None, outputs);
        Ok(port)
    }

    pub fn set_promiscuous(&mut self, vm: &str, flag: bool) -> Result<()> {
        let i = self.index_of(vm)?;
        self.endpoints[i].promiscuous = flag;
        Ok(())
    }

    /// Queue `frame` from `vm`'s port. The frame's addresses are not checked
    /// against the endpoint; the event records the real emitting port.
    pub fn send(&mut self, vm: &str, frame: EthernetFrame) -> Result<()> {
        let i = self.index_of(vm)?;
        frame.validate()?;
        let port = self.endpoints[i].port;
        self.enqueue(port, frame);
        Ok(())
    }

    /// Send an IP payload from `vm`, resolving the next hop (its gateway if
    /// the device provides one, otherwise the destination) first.
    pub fn send_ip(&mut self, vm: &str, dst_ip: IpAddr4, payload: impl Into<Vec<u8>>) -> Result<()> {
        let src_ip = self.endpoints[self.index_of(vm)?].ip;
        self.send_ip_as(vm, src_ip, dst_ip, payload)
    }

    /// Like [`send_ip`](Self::send_ip) with a caller-chosen source IP.
    pub fn send_ip_as(
        &mut self,
        vm: &str,
        src_ip: IpAddr4,
        dst_ip: IpAddr4,
        payload: impl Into<Vec<u8>>,
    ) -> Result<()> {
        let i = self.index_of(vm)?;
        let next_hop = match self.endpoints[i].gateway {
            Some(gw) => gw,
            None => dst_ip,
        };
        let dst_mac = self.arp_resolve(vm, next_hop)?;
        let src_mac = self.endpoints[i].mac;
        self.send(vm, EthernetFrame::ip(src_mac, dst_mac, src_ip, dst_ip, payload))
    }

    /// Resolve `target_ip` from `vm`'s cache, or by broadcasting a request and
    /// stepping until an answer lands in the cache.
    pub fn arp_resolve(&mut self, vm: &str, target_ip: IpAddr4) -> Result<MacAddr> {
        let i = self.index_of(vm)?;
        let ttl = self.config.arp_cache_ttl;
        if let Some(mac) = self.endpoints[i].cached(target_ip, self.clock, ttl) {
            return Ok(mac);
        }
        let ep = &self.endpoints[i];
        let req = EthernetFrame::arp(
            ep.mac,
            MacAddr::BROADCAST,
            ArpPacket::request(ep.ip, ep.mac, target_ip),
        );
        let port = ep.port;
        self.enqueue(port, req);
        for _ in 0..self.config.arp_timeout {
            self.checked_step()?;
            if let Some(mac) = self.endpoints[i].cached(target_ip, self.clock, ttl) {
                return Ok(mac);
            }
        }
        Err(FabricError::ArpTimeout {
            vm: vm.to_string(),
            ip: target_ip,
        })
    }

    pub fn has_pending(&self) -> bool {
        !self.queue.is_empty() || self.device.has_pending()
    }

    fn checked_step(&mut self) -> Result<Vec<Event>> {
        if self.clock >= self.config.tick_budget {
            return Err(FabricError::TickBudgetExhausted {
                budget: self.config.tick_budget,
            });
        }
        Ok(self.step())
    }

    /// Step until nothing is queued or held. Returns the ticks taken.
    pub fn run_until_idle(&mut self) -> Result<u64> {
        let start = self.clock;
        while self.has_pending() {
            self.checked_step()?;
        }
        Ok(self.clock - start)
    }

    /// Advance one tick: let the device expire held frames, then push every
    /// due frame through it in FIFO order. Returns this tick's events.
    pub fn step(&mut self) -> Vec<Event> {
        self.clock += 1;
        let first = self.trace.len();
        let outputs = self.device.on_tick(self.clock);
        self.apply(None, outputs);
        while self.queue.front().is_some_and(|q| q.due <= self.clock) {
            let q = self.queue.pop_front().expect("front checked");
            let ctx = FrameCtx {
                ingress: q.ingress,
                seq: q.seq,
                tick: self.clock,
            };
            let outputs = self.device.process(ctx, &q.frame);
            self.apply(Some((q.seq, &q.frame)), outputs);
        }
        self.trace[first..].to_vec()
    }

    fn record(
        &mut self,
        kind: EventKind,
        subject: Subject,
        frame: Option<EthernetFrame>,
        cause: Option<u64>,
        detail: Option<Detail>,
    ) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.trace.push(Event {
            tick: self.clock,
            seq,
            kind,
            subject,
            frame,
            cause,
            detail,
        });
        seq
    }

    fn enqueue(&mut self, port: PortId, frame: EthernetFrame) {
        let seq = self.record(
            EventKind::FrameSent,
            Subject::Port(port),
            Some(frame.clone()),
            None,
            None,
        );
        self.queue.push_back(Queued {
            due: self.clock + 1,
            ingress: port,
            seq,
            frame,
        });
    }

    fn apply(&mut self, current: Option<(u64, &EthernetFrame)>, outputs: Vec<Output>) {
        let cur_seq = current.map(|(s, _)| s);
        for out in outputs {
            match out {
                Output::Deliver {
                    port,
                    frame,
                    via,
                    cause,
                } => self.deliver(port, frame, via, cause.or(cur_seq)),
                Output::Drop {
                    frame,
                    reason,
                    cause,
                } => {
                    self.record(
                        EventKind::FrameDropped(reason),
                        Subject::Device,
                        Some(frame),
                        cause.or(cur_seq),
                        None,
                    );
                }
                Output::Consume { frame, cause } => {
                    self.record(
                        EventKind::FrameDelivered,
                        Subject::Device,
                        Some(frame),
                        cause.or(cur_seq),
                        Some(Detail::Delivery {
                            via: Via::Direct,
                            accepted: true,
                        }),
                    );
                }
                Output::Emit { frame, ports } => {
                    let seq = self.record(
                        EventKind::FrameSent,
                        Subject::Device,
                        Some(frame.clone()),
                        None,
                        None,
                    );
                    if ports.is_empty() {
                        self.record(
                            EventKind::FrameDropped(DropReason::NoEgress),
                            Subject::Device,
                            Some(frame.clone()),
                            Some(seq),
                            None,
                        );
                    }
                    for port in ports {
                        self.deliver(port, frame.clone(), Via::Direct, Some(seq));
                    }
                }
                Output::Table(change) => {
                    self.record(
                        EventKind::TableUpdated,
                        Subject::Device,
                        current.map(|(_, f)| f.clone()),
                        cur_seq,
                        Some(Detail::Table { change }),
                    );
                }
                Output::Alert(info) => {
                    self.record(
                        EventKind::Alert(info.kind),
                        Subject::Device,
                        current.map(|(_, f)| f.clone()),
                        cur_seq,
                        Some(Detail::Alert { info }),
                    );
                }
            }
        }
    }

    fn deliver(&mut self, port: PortId, frame: EthernetFrame, via: Via, cause: Option<u64>) {
        let Some(ep) = self.endpoints.get(port.0 as usize) else {
            self.record(
                EventKind::FrameDropped(DropReason::NoEgress),
                Subject::Device,
                Some(frame),
                cause,
                None,
            );
            return;
        };
        let addressed = ep.is_addressed(&frame);
        let accepted = addressed || ep.promiscuous;
        self.record(
            EventKind::FrameDelivered,
            Subject::Port(port),
            Some(frame.clone()),
            cause,
            Some(Detail::Delivery { via, accepted }),
        );
        let i = port.0 as usize;
        if accepted {
            self.endpoints[i].rx_log.push((self.clock, frame.clone()));
        }
        if addressed {
            self.host_receive(i, &frame);
        }
    }

    /// Guest network stack: opportunistic ARP caching and answering requests
    /// for the guest's own IP.
    fn host_receive(&mut self, i: usize, frame: &EthernetFrame) {
        let FrameBody::Arp(arp) = &frame.body else {
            return;
        };
        let (own_ip, own_mac, port) = {
            let ep = &self.endpoints[i];
            (ep.ip, ep.mac, ep.port)
        };
        let learn = match arp.op {
            ArpOp::Request => true,
            ArpOp::Reply => frame.dst == own_mac,
        };
        if learn && arp.sender_ip != own_ip && arp.sender_ip != IpAddr4::UNSPECIFIED {
            let ttl = self.config.arp_cache_ttl;
            let now = self.clock;
            let ep = &mut self.endpoints[i];
            if ep.cached(arp.sender_ip, now, ttl) != Some(arp.sender_mac) {
                ep.arp_cache.insert(
                    arp.sender_ip,
                    ArpEntry {
                        mac: arp.sender_mac,
                        learned_at: now,
                    },
                );
                self.record(
                    EventKind::ArpCacheUpdated,
                    Subject::Port(port),
                    Some(frame.clone()),
                    None,
                    Some(Detail::ArpCache {
                        ip: arp.sender_ip,
                        mac: arp.sender_mac,
                    }),
                );
            }
        }
        if arp.op == ArpOp::Request && arp.target_ip == own_ip && !arp.is_gratuitous() {
            let reply = EthernetFrame::arp(
                own_mac,
                arp.sender_mac,
                ArpPacket::reply(own_ip, own_mac, arp.sender_ip, arp.sender_mac),
            );
            self.enqueue(port, reply);
        }
    }
}
