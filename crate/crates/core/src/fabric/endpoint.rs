use std::collections::BTreeMap;

use crate::netcore::{EthernetFrame, IpAddr4, MacAddr};

use super::PortId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArpEntry {
    pub mac: MacAddr,
    pub learned_at: u64,
}

/// A guest VM's network identity and NIC state.
#[derive(Debug, Clone)]
pub struct VmEndpoint {
    pub(crate) name: String,
    pub(crate) mac: MacAddr,
    pub(crate) ip: IpAddr4,
    pub(crate) port: PortId,
    pub(crate) promiscuous: bool,
    pub(crate) gateway: Option<IpAddr4>,
    pub(crate) arp_cache: BTreeMap<IpAddr4, ArpEntry>,
    pub(crate) rx_log: Vec<(u64, EthernetFrame)>,
}

impl VmEndpoint {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mac(&self) -> MacAddr {
        self.mac
    }

    pub fn ip(&self) -> IpAddr4 {
        self.ip
    }

    pub fn port(&self) -> PortId {
        self.port
    }

    pub fn is_promiscuous(&self) -> bool {
        self.promiscuous
    }

    pub fn gateway(&self) -> Option<IpAddr4> {
        self.gateway
    }

    pub fn arp_cache(&self) -> &BTreeMap<IpAddr4, ArpEntry> {
        &self.arp_cache
    }

    pub fn rx_log(&self) -> &[(u64, EthernetFrame)] {
        &self.rx_log
    }

    /// Cached MAC for `ip`, ignoring entries older than `ttl` ticks.
    pub fn cached(&self, ip: IpAddr4, now: u64, ttl: Option<u64>) -> Option<MacAddr> {
        let e = self.arp_cache.get(&ip)?;
        match ttl {
            Some(ttl) if now.saturating_sub(e.learned_at) >= ttl => None,
            _ => Some(e.mac),
        }
    }

    /// NIC address filter: own MAC or broadcast.
    pub fn is_addressed(&self, frame: &EthernetFrame) -> bool {
        frame.dst == self.mac || frame.dst.is_broadcast()
    }

    pub fn has_received_payload(&self, payload: &[u8]) -> bool {
        self.rx_log
            .iter()
            .any(|(_, f)| f.payload().is_some_and(|p| p == payload))
    }
}
