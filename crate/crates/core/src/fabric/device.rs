use thiserror::Error;

use crate::modes::Mode;
use crate::netcore::{EthernetFrame, IpAddr4, MacAddr, VlanTag};

use super::event::{AlertInfo, DropReason, TableChange, Via};
use super::PortId;

/// How an endpoint is wired into the device: which bridged segment, which
/// VLAN, and whether the port is the external uplink. Each device reads only
/// the parts it understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Attachment {
    pub segment: Option<u32>,
    pub vlan: Option<VlanTag>,
    pub uplink: bool,
}

impl Attachment {
    pub fn segment(id: u32) -> Self {
        Attachment {
            segment: Some(id),
            ..Default::default()
        }
    }

    pub fn vlan(tag: VlanTag) -> Self {
        Attachment {
            vlan: Some(tag),
            ..Default::default()
        }
    }

    pub fn uplink() -> Self {
        Attachment {
            uplink: true,
            ..Default::default()
        }
    }

    pub fn plain() -> Self {
        Attachment::default()
    }
}

/// Identity of the endpoint behind a newly attached port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortInfo {
    pub port: PortId,
    pub mac: MacAddr,
    pub ip: IpAddr4,
    pub attachment: Attachment,
}

/// The frame a device is currently handling.
#[derive(Debug, Clone, Copy)]
pub struct FrameCtx {
    pub ingress: PortId,
    /// `seq` of the frame's `FrameSent` event.
    pub seq: u64,
    pub tick: u64,
}

/// What a device decided. `cause: None` refers to the frame being processed;
/// `Some(seq)` refers to an earlier frame the device held back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Output {
    Deliver {
        port: PortId,
        frame: EthernetFrame,
        via: Via,
        cause: Option<u64>,
    },
    Drop {
        frame: EthernetFrame,
        reason: DropReason,
        cause: Option<u64>,
    },
    /// The device itself was the destination.
    Consume {
        frame: EthernetFrame,
        cause: Option<u64>,
    },
    /// A frame the device originates (ARP on behalf of hosts, proxy replies,
    /// announcements). Gets its own `FrameSent` event.
    Emit {
        frame: EthernetFrame,
        ports: Vec<PortId>,
    },
    Table(TableChange),
    Alert(AlertInfo),
}

impl Output {
    /// One delivery per port, or a `NoEgress` drop when there is nowhere to
    /// send the frame, so every traversal leaves a trace.
    pub fn fan_out(ports: Vec<PortId>, frame: &EthernetFrame, via: Via) -> Vec<Output> {
        if ports.is_empty() {
            return vec![Output::Drop {
                frame: frame.clone(),
                reason: DropReason::NoEgress,
                cause: None,
            }];
        }
        ports
            .into_iter()
            .map(|port| Output::Deliver {
                port,
                frame: frame.clone(),
                via,
                cause: None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("port {0} needs a vlan tag")]
    MissingVlan(PortId),
    #[error("device already has an uplink on port {0}")]
    DuplicateUplink(PortId),
    #[error("{0} does not support an uplink port")]
    UplinkUnsupported(Mode),
}

/// A forwarding element the fabric pushes frames through.
pub trait ForwardingDevice {
    fn mode(&self) -> Mode;

    /// Register a port. Returned outputs are applied immediately.
    fn attach(&mut self, info: PortInfo) -> Result<Vec<Output>, DeviceError>;

    fn process(&mut self, ctx: FrameCtx, frame: &EthernetFrame) -> Vec<Output>;

    /// Called at the start of every tick, before queued frames.
    fn on_tick(&mut self, _tick: u64) -> Vec<Output> {
        Vec::new()
    }

    /// Frames held inside the device (e.g. awaiting ARP on a host's behalf).
    fn has_pending(&self) -> bool {
        false
    }

    /// Next hop endpoints on `port` should use for every destination.
    fn default_gateway(&self, _port: PortId) -> Option<IpAddr4> {
        None
    }
}
