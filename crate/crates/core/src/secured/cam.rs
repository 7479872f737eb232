use std::collections::BTreeMap;

use crate::fabric::PortId;
use crate::netcore::{MacAddr, VlanTag};

pub const DEFAULT_CAM_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CamLearn {
    Learned,
    Refreshed,
    /// The MAC is locked to a different port.
    ConflictDropped,
    /// New MAC, no room. The table is left as it was.
    CapacityDropped,
}

/// Port-security CAM: MAC → (port, tag), with the first port a MAC is seen on
/// locked until an administrator unbinds it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CamTable {
    entries: BTreeMap<MacAddr, (PortId, VlanTag)>,
    capacity: usize,
    locked: BTreeMap<MacAddr, PortId>,
}

impl Default for CamTable {
    fn default() -> Self {
        Self::new(DEFAULT_CAM_CAPACITY)
    }
}

impl CamTable {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "cam capacity must be positive");
        CamTable {
            entries: BTreeMap::new(),
            capacity,
            locked: BTreeMap::new(),
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

    pub fn lookup(&self, mac: &MacAddr) -> Option<(PortId, VlanTag)> {
        self.entries.get(mac).copied()
    }

    pub fn locked_port(&self, mac: &MacAddr) -> Option<PortId> {
        self.locked.get(mac).copied()
    }

    pub fn locks(&self) -> impl Iterator<Item = (MacAddr, PortId)> + '_ {
        self.locked.iter().map(|(m, p)| (*m, *p))
    }

    /// True when `mac` is locked somewhere other than `port`.
    pub fn lock_conflict(&self, mac: &MacAddr, port: PortId) -> bool {
        self.locked.get(mac).is_some_and(|p| *p != port)
    }

    pub fn learn_protected(&mut self, mac: MacAddr, port: PortId, tag: VlanTag) -> CamLearn {
        if self.lock_conflict(&mac, port) {
            return CamLearn::ConflictDropped;
        }
        if let Some(entry) = self.entries.get_mut(&mac) {
            *entry = (port, tag);
            return CamLearn::Refreshed;
        }
        if self.is_full() {
            return CamLearn::CapacityDropped;
        }
        self.entries.insert(mac, (port, tag));
        self.locked.insert(mac, port);
        CamLearn::Learned
    }

    /// Administrative removal of an entry and its lock.
    pub fn unbind(&mut self, mac: &MacAddr) -> bool {
        self.locked.remove(mac);
        self.entries.remove(mac).is_some()
    }

    pub(crate) fn retag_port(&mut self, port: PortId, tag: VlanTag) {
        self.entries
            .values_mut()
            .filter(|(p, _)| *p == port)
            .for_each(|e| e.1 = tag);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mac(n: u8) -> MacAddr {
        MacAddr::new(2, 0, 0, 0, 0, n)
    }

    fn tag(n: u16) -> VlanTag {
        VlanTag::new(n).unwrap()
    }

    #[test]
    fn first_learn_locks() {
        let mut cam = CamTable::new(4);
        assert_eq!(cam.learn_protected(mac(1), PortId(0), tag(2)), CamLearn::Learned);
        assert_eq!(cam.locked_port(&mac(1)), Some(PortId(0)));
        assert_eq!(cam.learn_protected(mac(1), PortId(0), tag(2)), CamLearn::Refreshed);
    }

    #[test]
    fn move_is_conflict() {
        let mut cam = CamTable::new(4);
        cam.learn_protected(mac(1), PortId(0), tag(2));
        assert_eq!(cam.learn_protected(mac(1), PortId(2), tag(2)), CamLearn::ConflictDropped);
        assert_eq!(cam.lookup(&mac(1)), Some((PortId(0), tag(2))));
    }

    #[test]
    fn overflow_drops_new_macs() {
        let mut cam = CamTable::new(4);
        for n in 1..=4 {
            assert_eq!(cam.learn_protected(mac(n), PortId(0), tag(2)), CamLearn::Learned);
        }
        assert_eq!(cam.learn_protected(mac(5), PortId(0), tag(2)), CamLearn::CapacityDropped);
        assert_eq!(cam.len(), 4);
        assert!(cam.lookup(&mac(5)).is_none());
    }

    #[test]
    fn unbind_releases_lock() {
        let mut cam = CamTable::new(4);
        cam.learn_protected(mac(1), PortId(0), tag(2));
        assert!(cam.unbind(&mac(1)));
        assert_eq!(cam.learn_protected(mac(1), PortId(2), tag(2)), CamLearn::Learned);
    }
}
