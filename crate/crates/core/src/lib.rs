//! Deterministic simulation of Xen-style virtual networks and the layer-2
//! attacks against them.
//!
//! A [`fabric::Fabric`] hosts guest endpoints behind one forwarding device:
//! the bridged, routed and NAT modes in [`modes`], or the VLAN + firewall
//! switch in [`secured`]. [`attacks`] drives ARP spoofing, sniffing and MAC
//! flooding against a fabric and judges the outcome from the trace alone;
//! [`runner`] loads scenario files and builds the mode × attack matrices.

pub mod attacks;
pub mod fabric;
pub mod modes;
pub mod netcore;
pub mod runner;
pub mod secured;

pub use fabric::{Attachment, Event, EventKind, Fabric, FabricConfig, FabricError, PortId};
pub use modes::{Device, Mode};
pub use netcore::{ArpOp, ArpPacket, EthernetFrame, IpAddr4, MacAddr, VlanTag};
