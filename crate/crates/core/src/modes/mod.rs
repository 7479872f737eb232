//! The three stock Xen networking modes as forwarding devices, plus the
//! [`Device`] enum the fabric uses to host any of them (or the secured
//! switch).

mod bridge;
mod nat;
mod router;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fabric::{DeviceError, ForwardingDevice, FrameCtx, Output, PortId, PortInfo};
use crate::netcore::{EthernetFrame, IpAddr4};
use crate::secured::SecuredSwitch;

pub use bridge::{BridgeDevice, BridgeLearn, BridgeTable, SegmentId, DEFAULT_BRIDGE_CAPACITY};
pub use nat::{Direction, FlowId, FlowTag, NatConfig, NatDevice, NatFlow};
pub use router::{
    table_update, ForwardingTable, RouteEntry, RouterConfig, RouterDevice, TableUpdate,
    DEFAULT_TABLE_CAPACITY,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bridged,
    Routed,
    Nat,
    /// The VLAN + virtual switch + firewall architecture.
    Secured,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Routed, Mode::Nat, Mode::Bridged, Mode::Secured];

    /// Column heading used in rendered matrices.
    pub fn label(self) -> &'static str {
        match self {
            Mode::Routed => "Routed Mode",
            Mode::Nat => "NAT Mode",
            Mode::Bridged => "Bridged Mode",
            Mode::Secured => "Proposed Mode",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Bridged => "bridged",
            Mode::Routed => "routed",
            Mode::Nat => "nat",
            Mode::Secured => "secured",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Any of the four forwarding devices.
#[derive(Debug, Clone)]
pub enum Device {
    Bridge(BridgeDevice),
    Router(RouterDevice),
    Nat(NatDevice),
    Secured(SecuredSwitch),
}

macro_rules! each_device {
    ($self:expr, $d:ident => $e:expr) => {
        match $self {
            Device::Bridge($d) => $e,
            Device::Router($d) => $e,
            Device::Nat($d) => $e,
            Device::Secured($d) => $e,
        }
    };
}

impl Device {
    pub fn as_bridge(&self) -> Option<&BridgeDevice> {
        match self {
            Device::Bridge(d) => Some(d),
            _ => None,
        }
    }

    /// The routing table owner: the router itself, or the router inside NAT.
    pub fn as_router(&self) -> Option<&RouterDevice> {
        match self {
            Device::Router(d) => Some(d),
            Device::Nat(d) => Some(d.inner()),
            _ => None,
        }
    }

    pub fn as_nat(&self) -> Option<&NatDevice> {
        match self {
            Device::Nat(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_secured(&self) -> Option<&SecuredSwitch> {
        match self {
            Device::Secured(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_secured_mut(&mut self) -> Option<&mut SecuredSwitch> {
        match self {
            Device::Secured(d) => Some(d),
            _ => None,
        }
    }
}

impl ForwardingDevice for Device {
    fn mode(&self) -> Mode {
        each_device!(self, d => d.mode())
    }

    fn attach(&mut self, info: PortInfo) -> Result<Vec<Output>, DeviceError> {
        each_device!(self, d => d.attach(info))
    }

    fn process(&mut self, ctx: FrameCtx, frame: &EthernetFrame) -> Vec<Output> {
        each_device!(self, d => d.process(ctx, frame))
    }

    fn on_tick(&mut self, tick: u64) -> Vec<Output> {
        each_device!(self, d => d.on_tick(tick))
    }

    fn has_pending(&self) -> bool {
        each_device!(self, d => d.has_pending())
    }

    fn default_gateway(&self, port: PortId) -> Option<IpAddr4> {
        each_device!(self, d => d.default_gateway(port))
    }
}

impl From<BridgeDevice> for Device {
    fn from(d: BridgeDevice) -> Self {
        Device::Bridge(d)
    }
}

impl From<RouterDevice> for Device {
    fn from(d: RouterDevice) -> Self {
        Device::Router(d)
    }
}

impl From<NatDevice> for Device {
    fn from(d: NatDevice) -> Self {
        Device::Nat(d)
    }
}

impl From<SecuredSwitch> for Device {
    fn from(d: SecuredSwitch) -> Self {
        Device::Secured(d)
    }
}
