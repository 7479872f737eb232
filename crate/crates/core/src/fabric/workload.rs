//! Seeded random topologies and traffic, for property tests and fuzzing.
//!
//! Everything is drawn from a ChaCha stream keyed by the seed, so a
//! `(mode, seed)` pair always yields the same workload and, since forwarding
//! itself is deterministic, the same trace.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::modes::{BridgeDevice, Device, Mode, NatDevice, RouterDevice};
use crate::netcore::{ArpPacket, EthernetFrame, IpAddr4, MacAddr, VlanTag};
use crate::secured::{SecuredConfig, SecuredSwitch};

use super::{Attachment, Fabric, FabricConfig, FabricError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VmSpec {
    pub name: String,
    pub mac: MacAddr,
    pub ip: IpAddr4,
    pub segment: u32,
    pub vlan: VlanTag,
    /// Attached through the NAT uplink.
    pub uplink: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    /// Inject a raw, possibly forged, frame.
    Send { from: usize, frame: EthernetFrame },
    /// Resolve and send through the host stack.
    SendIp { from: usize, to: usize, payload: Vec<u8> },
    Promiscuous { vm: usize, on: bool },
    RunUntilIdle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub mode: Mode,
    pub seed: u64,
    /// Forwarding, bridge or CAM table size.
    pub capacity: usize,
    pub vms: Vec<VmSpec>,
    pub ops: Vec<Op>,
}

const VLANS: [u16; 3] = [1, 2, 3];

fn tag(id: u16) -> VlanTag {
    VlanTag::new(id).expect("constant tags are in range")
}

impl Workload {
    /// Draw a workload with 2 to 6 endpoints, a table of 2 to 8 entries and
    /// up to 24 operations.
    pub fn generate(mode: Mode, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=6);
        let capacity = rng.gen_range(2..=8);
        let vms: Vec<VmSpec> = (0..n)
            .map(|i| {
                let uplink = mode == Mode::Nat && n >= 3 && i == n - 1;
                let ip = if uplink {
                    IpAddr4::new(198, 51, 100, 7)
                } else {
                    IpAddr4::new(10, 0, 0, i as u8 + 1)
                };
                VmSpec {
                    name: format!("vm{i}"),
                    mac: MacAddr::new(0x02, 0, 0, 0, 0, 0x10 + i as u8),
                    ip,
                    segment: rng.gen_range(0..2),
                    vlan: tag(*VLANS.choose(&mut rng).expect("non-empty")),
                    uplink,
                }
            })
            .collect();
        let count = rng.gen_range(1..=24);
        let ops = (0..count).map(|_| random_op(&mut rng, &vms)).collect();
        Workload {
            mode,
            seed,
            capacity,
            vms,
            ops,
        }
    }

    pub fn device(&self) -> Device {
        match self.mode {
            Mode::Bridged => Device::Bridge(BridgeDevice::new(self.capacity)),
            Mode::Routed => Device::Router(RouterDevice::with_capacity(self.capacity)),
            Mode::Nat => {
                let mut config = crate::modes::NatConfig::default();
                config.router.capacity = self.capacity;
                Device::Nat(NatDevice::new(config))
            }
            Mode::Secured => Device::Secured(SecuredSwitch::new(SecuredConfig {
                cam_capacity: self.capacity,
                ..Default::default()
            })),
        }
    }

    pub fn build_fabric(&self) -> Result<Fabric, FabricError> {
        let config = FabricConfig {
            rng_seed: self.seed,
            ..Default::default()
        };
        let mut fabric = Fabric::with_config(self.device(), config);
        for vm in &self.vms {
            let attachment = match self.mode {
                Mode::Bridged => Attachment::segment(vm.segment),
                Mode::Secured => Attachment::vlan(vm.vlan),
                Mode::Nat if vm.uplink => Attachment::uplink(),
                Mode::Routed | Mode::Nat => Attachment::plain(),
            };
            fabric.attach_vm(&vm.name, vm.mac, vm.ip, attachment)?;
        }
        Ok(fabric)
    }

    /// Run every op, then drain the fabric. Failed resolutions are part of
    /// normal traffic and are ignored.
    pub fn apply(&self, fabric: &mut Fabric) -> Result<(), FabricError> {
        for op in &self.ops {
            match op {
                Op::Send { from, frame } => fabric.send(&self.vms[*from].name, frame.clone())?,
                Op::SendIp { from, to, payload } => {
                    let r = fabric.send_ip(&self.vms[*from].name, self.vms[*to].ip, payload.clone());
                    match r {
                        Ok(()) | Err(FabricError::ArpTimeout { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
                Op::Promiscuous { vm, on } => fabric.set_promiscuous(&self.vms[*vm].name, *on)?,
                Op::RunUntilIdle => {
                    fabric.run_until_idle()?;
                }
            }
        }
        fabric.run_until_idle()?;
        Ok(())
    }

    /// Build, apply and return the finished fabric.
    pub fn run(&self) -> Result<Fabric, FabricError> {
        let mut fabric = self.build_fabric()?;
        self.apply(&mut fabric)?;
        Ok(fabric)
    }
}

fn random_mac(rng: &mut ChaCha8Rng, vms: &[VmSpec]) -> MacAddr {
    match rng.gen_range(0..10) {
        0..=5 => vms.choose(rng).expect("non-empty").mac,
        6 | 7 => MacAddr::new(0x02, 0xfe, 0, 0, 0, rng.gen_range(1..=6)),
        8 => MacAddr::new(0x02, 0, 0, 0, 0, 0xfe),
        _ => MacAddr::new(0x02, 0xaa, rng.gen(), rng.gen(), rng.gen(), rng.gen()),
    }
}

fn random_ip(rng: &mut ChaCha8Rng, vms: &[VmSpec]) -> IpAddr4 {
    match rng.gen_range(0..10) {
        0..=6 => vms.choose(rng).expect("non-empty").ip,
        7 => IpAddr4::new(10, 0, 0, 254),
        8 => IpAddr4::new(203, 0, 113, 1),
        _ => IpAddr4::new(172, 31, 0, rng.gen_range(1..=6)),
    }
}

fn random_frame(rng: &mut ChaCha8Rng, vms: &[VmSpec], from: usize) -> EthernetFrame {
    let src = if rng.gen_bool(0.7) {
        vms[from].mac
    } else {
        random_mac(rng, vms)
    };
    let dst = match rng.gen_range(0..4) {
        0 => MacAddr::BROADCAST,
        _ => random_mac(rng, vms),
    };
    let frame = match rng.gen_range(0..4) {
        0 => EthernetFrame::arp(
            src,
            MacAddr::BROADCAST,
            ArpPacket::request(random_ip(rng, vms), random_mac(rng, vms), random_ip(rng, vms)),
        ),
        1 => EthernetFrame::arp(
            src,
            dst,
            ArpPacket::reply(
                random_ip(rng, vms),
                random_mac(rng, vms),
                random_ip(rng, vms),
                random_mac(rng, vms),
            ),
        ),
        _ => {
            let len = rng.gen_range(0..16);
            let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            EthernetFrame::ip(src, dst, random_ip(rng, vms), random_ip(rng, vms), payload)
        }
    };
    if rng.gen_bool(0.1) {
        frame.with_vlan(Some(tag(*VLANS.choose(rng).expect("non-empty"))))
    } else {
        frame
    }
}

fn random_op(rng: &mut ChaCha8Rng, vms: &[VmSpec]) -> Op {
    let from = rng.gen_range(0..vms.len());
    match rng.gen_range(0..10) {
        0..=5 => Op::Send {
            from,
            frame: random_frame(rng, vms, from),
        },
        6 | 7 => {
            let to = rng.gen_range(0..vms.len());
            let payload = format!("w{}-{}", rng.gen::<u16>(), to).into_bytes();
            Op::SendIp { from, to, payload }
        }
        8 => Op::Promiscuous {
            vm: from,
            on: rng.gen_bool(0.5),
        },
        _ => Op::RunUntilIdle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_workload_and_trace() {
        for mode in Mode::ALL {
            let a = Workload::generate(mode, 42);
            let b = Workload::generate(mode, 42);
            assert_eq!(a, b);
            let ta = a.run().unwrap().trace_jsonl();
            let tb = b.run().unwrap().trace_jsonl();
            assert_eq!(ta, tb);
        }
    }

    #[test]
    fn many_seeds_run_clean() {
        for mode in Mode::ALL {
            for seed in 0..50 {
                Workload::generate(mode, seed).run().unwrap();
            }
        }
    }
}
