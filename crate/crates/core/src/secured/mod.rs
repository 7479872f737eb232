//! The hardened architecture: a VLAN-aware, port-locking virtual switch with
//! a firewall in front of its CAM table.
//!
//! Every ingress frame goes through the same pipeline: retag to the port's
//! VLAN, check the ARP sender against the registry and the CAM locks, run the
//! firewall, learn the source, then forward. Forwarding never leaves the
//! frame's VLAN and a full CAM table never turns the switch into a hub.

mod cam;
pub mod firewall;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::fabric::{
    AlertInfo, AlertKind, DeviceError, DropReason, FloodCause, ForwardingDevice, FrameCtx, Output,
    PortId, PortInfo, TableChange, Via,
};
use crate::modes::Mode;
use crate::netcore::{EthernetFrame, FrameBody, IpAddr4, MacAddr, VlanTag};

pub use cam::{CamLearn, CamTable, DEFAULT_CAM_CAPACITY};
pub use firewall::{
    firewall_eval, Action, Decision, DstVlan, FirewallContext, FirewallRuleSet, Rule, RuleMatch,
    Verdict,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PortMode {
    Access(VlanTag),
    /// Carries any of the allowed tags unchanged.
    Uplink(BTreeSet<VlanTag>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VlanBinding {
    pub port: PortId,
    pub mode: PortMode,
}

impl VlanBinding {
    pub fn access_tag(&self) -> Option<VlanTag> {
        match self.mode {
            PortMode::Access(t) => Some(t),
            PortMode::Uplink(_) => None,
        }
    }

    pub fn carries(&self, tag: VlanTag) -> bool {
        match &self.mode {
            PortMode::Access(t) => *t == tag,
            PortMode::Uplink(allowed) => allowed.contains(&tag),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SecuredError {
    #[error("no such port {0}")]
    UnknownPort(PortId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecuredConfig {
    pub cam_capacity: usize,
    /// Declared IP → MAC truth. `None` registers every access-port endpoint
    /// as it attaches.
    pub registry: Option<BTreeMap<IpAddr4, MacAddr>>,
    pub extra_rules: Vec<Rule>,
    /// Tags an uplink port may carry. `None` disables the uplink.
    pub uplink_tags: Option<BTreeSet<VlanTag>>,
}

impl Default for SecuredConfig {
    fn default() -> Self {
        SecuredConfig {
            cam_capacity: DEFAULT_CAM_CAPACITY,
            registry: None,
            extra_rules: Vec::new(),
            uplink_tags: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SecuredSwitch {
    bindings: BTreeMap<PortId, VlanBinding>,
    cam: CamTable,
    firewall: FirewallRuleSet,
    registry: BTreeMap<IpAddr4, MacAddr>,
    auto_register: bool,
    uplink_tags: Option<BTreeSet<VlanTag>>,
}

impl Default for SecuredSwitch {
    fn default() -> Self {
        Self::new(SecuredConfig::default())
    }
}

impl SecuredSwitch {
    pub fn new(config: SecuredConfig) -> Self {
        SecuredSwitch {
            bindings: BTreeMap::new(),
            cam: CamTable::new(config.cam_capacity),
            firewall: FirewallRuleSet::new(config.extra_rules),
            auto_register: config.registry.is_none(),
            registry: config.registry.unwrap_or_default(),
            uplink_tags: config.uplink_tags,
        }
    }

    pub fn cam(&self) -> &CamTable {
        &self.cam
    }

    pub fn cam_mut(&mut self) -> &mut CamTable {
        &mut self.cam
    }

    pub fn firewall(&self) -> &FirewallRuleSet {
        &self.firewall
    }

    pub fn registry(&self) -> &BTreeMap<IpAddr4, MacAddr> {
        &self.registry
    }

    pub fn bindings(&self) -> impl Iterator<Item = &VlanBinding> {
        self.bindings.values()
    }

    pub fn binding(&self, port: PortId) -> Option<&VlanBinding> {
        self.bindings.get(&port)
    }

    pub fn port_tag(&self, port: PortId) -> Option<VlanTag> {
        self.bindings.get(&port).and_then(VlanBinding::access_tag)
    }

    /// Put `port` on access VLAN `tag`, replacing whatever it had.
    pub fn assign_vlan(&mut self, port: PortId, tag: VlanTag) -> Result<(), SecuredError> {
        let binding = self
            .bindings
            .get_mut(&port)
            .ok_or(SecuredError::UnknownPort(port))?;
        binding.mode = PortMode::Access(tag);
        self.cam.retag_port(port, tag);
        Ok(())
    }

    pub fn cam_learn_protected(&mut self, mac: MacAddr, port: PortId, tag: VlanTag) -> CamLearn {
        self.cam.learn_protected(mac, port, tag)
    }

    fn registry_violation(&self, frame: &EthernetFrame) -> bool {
        let FrameBody::Arp(arp) = &frame.body else {
            return false;
        };
        let ip_claim = self
            .registry
            .get(&arp.sender_ip)
            .is_some_and(|m| *m != arp.sender_mac);
        let mac_claim = self
            .registry
            .iter()
            .any(|(ip, m)| *m == arp.sender_mac && *ip != arp.sender_ip);
        ip_claim || mac_claim
    }

    fn lock_violation(&self, port: PortId, frame: &EthernetFrame) -> bool {
        self.cam.lock_conflict(&frame.src, port)
            || frame
                .as_arp()
                .is_some_and(|a| self.cam.lock_conflict(&a.sender_mac, port))
    }

    fn dst_vlan(&self, frame: &EthernetFrame, tag: VlanTag) -> DstVlan {
        if frame.dst.is_broadcast() {
            return DstVlan::Unresolved;
        }
        match self.cam.lookup(&frame.dst) {
            Some((_, t)) if t == tag => DstVlan::Same,
            Some(_) => DstVlan::Different,
            None => DstVlan::Unresolved,
        }
    }

    fn alert(kind: AlertKind, port: PortId, frame: &EthernetFrame) -> Output {
        let (mac, ip) = match frame.as_arp() {
            Some(a) => (a.sender_mac, Some(a.sender_ip)),
            None => (frame.src, None),
        };
        Output::Alert(AlertInfo { kind, port, mac, ip })
    }

    fn drop(frame: EthernetFrame, reason: DropReason) -> Output {
        Output::Drop {
            frame,
            reason,
            cause: None,
        }
    }

    fn vlan_ports(&self, tag: VlanTag, except: PortId) -> Vec<PortId> {
        self.bindings
            .values()
            .filter(|b| b.port != except && b.carries(tag))
            .map(|b| b.port)
            .collect()
    }

    /// The full ingress pipeline for one frame.
    pub fn secured_ingress(&mut self, ingress: PortId, frame: &EthernetFrame) -> Vec<Output> {
        let Some(binding) = self.bindings.get(&ingress) else {
            return vec![Self::drop(frame.clone(), DropReason::NoEgress)];
        };
        let tag = match (&binding.mode, frame.vlan) {
            (PortMode::Access(t), _) => *t,
            (PortMode::Uplink(allowed), Some(t)) if allowed.contains(&t) => t,
            (PortMode::Uplink(_), _) => {
                return vec![Self::drop(frame.clone(), DropReason::VlanNotAllowed)]
            }
        };
        let frame = frame.clone().with_vlan(Some(tag));

        let ctx = FirewallContext {
            ingress_port: ingress,
            vlan: tag,
            kind: frame.kind(),
            registry: Verdict::from_violation(self.registry_violation(&frame)),
            lock: Verdict::from_violation(self.lock_violation(ingress, &frame)),
            dst_vlan: self.dst_vlan(&frame, tag),
        };
        if let Action::Drop(reason) = self.firewall.evaluate(&ctx).action {
            let alert = match reason {
                DropReason::CamTamper => Some(AlertKind::ConflictDropped),
                DropReason::RegistryMismatch => Some(AlertKind::RegistryMismatch),
                _ => None,
            };
            let mut out: Vec<Output> = alert
                .map(|k| Self::alert(k, ingress, &frame))
                .into_iter()
                .collect();
            out.push(Self::drop(frame, reason));
            return out;
        }

        let mut out = Vec::new();
        match self.cam.learn_protected(frame.src, ingress, tag) {
            CamLearn::Learned => out.push(Output::Table(TableChange::Cam {
                mac: frame.src,
                port: ingress,
                vlan: tag,
            })),
            CamLearn::Refreshed => {}
            CamLearn::ConflictDropped => {
                out.push(Self::alert(AlertKind::ConflictDropped, ingress, &frame));
                out.push(Self::drop(frame, DropReason::CamTamper));
                return out;
            }
            CamLearn::CapacityDropped => {
                out.push(Self::alert(AlertKind::CapacityDropped, ingress, &frame));
                out.push(Self::drop(frame, DropReason::CamFull));
                return out;
            }
        }

        let (ports, via) = if frame.dst.is_broadcast() {
            (self.vlan_ports(tag, ingress), Via::Flood(FloodCause::Broadcast))
        } else if let Some((port, _)) = self.cam.lookup(&frame.dst) {
            (vec![port], Via::Unicast)
        } else if self.cam.is_full() {
            out.push(Self::drop(frame, DropReason::CamFullUnknownDestination));
            return out;
        } else {
            (
                self.vlan_ports(tag, ingress),
                Via::Flood(FloodCause::UnknownDestination),
            )
        };
        out.extend(Output::fan_out(ports, &frame, via));
        out
    }
}

impl ForwardingDevice for SecuredSwitch {
    fn mode(&self) -> Mode {
        Mode::Secured
    }

    fn attach(&mut self, info: PortInfo) -> Result<Vec<Output>, DeviceError> {
        let mode = if info.attachment.uplink {
            let allowed = self
                .uplink_tags
                .clone()
                .ok_or(DeviceError::UplinkUnsupported(Mode::Secured))?;
            if let Some(b) = self
                .bindings
                .values()
                .find(|b| matches!(b.mode, PortMode::Uplink(_)))
            {
                return Err(DeviceError::DuplicateUplink(b.port));
            }
            PortMode::Uplink(allowed)
        } else {
            let tag = info
                .attachment
                .vlan
                .ok_or(DeviceError::MissingVlan(info.port))?;
            if self.auto_register {
                self.registry.insert(info.ip, info.mac);
            }
            PortMode::Access(tag)
        };
        self.bindings.insert(
            info.port,
            VlanBinding {
                port: info.port,
                mode,
            },
        );
        Ok(Vec::new())
    }

    fn process(&mut self, ctx: FrameCtx, frame: &EthernetFrame) -> Vec<Output> {
        self.secured_ingress(ctx.ingress, frame)
    }
}
