//! Addresses, ARP packets and Ethernet frames.
//!
//! Frames use a simulator-internal byte layout (all integers big-endian):
//!
//! ```text
//! dst(6) | src(6) | [0x8100 | vlan(2)] | type(2) | body
//!
//! type 0x0806 (ARP): op(2) | sender_mac(6) | sender_ip(4) | target_mac(6) | target_ip(4)
//! type 0x0800 (IP):  src_ip(4) | dst_ip(4) | len(2) | payload(len)
//! ```
//!
//! The optional tag block is four bytes. A parsed buffer must be consumed
//! exactly; trailing bytes are an error.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const ETHERTYPE_VLAN: u16 = 0x8100;
pub const ETHERTYPE_ARP: u16 = 0x0806;
pub const ETHERTYPE_IP: u16 = 0x0800;

/// Size of the optional 802.1Q-style tag block.
pub const TAG_BLOCK_LEN: usize = 4;
const HEADER_LEN: usize = 14;
const ARP_BODY_LEN: usize = 22;
const IP_HEADER_LEN: usize = 10;

/// Largest payload an IP body can carry (length field is 16 bits).
pub const MAX_PAYLOAD: usize = u16::MAX as usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("truncated frame at offset {offset}: need {needed} more byte(s)")]
    Truncated { offset: usize, needed: usize },
    #[error("unknown body type {ethertype:#06x} at offset {offset}")]
    UnknownBodyType { offset: usize, ethertype: u16 },
    #[error("invalid vlan id {id} at offset {offset}")]
    InvalidVlan { offset: usize, id: u16 },
    #[error("invalid arp op {op} at offset {offset}")]
    InvalidArpOp { offset: usize, op: u16 },
    #[error("malformed arp request: target mac must be all-zeros")]
    MalformedRequest,
    #[error("broadcast address used as frame source")]
    BroadcastSource,
    #[error("{count} trailing byte(s) at offset {offset}")]
    TrailingBytes { offset: usize, count: usize },
    #[error("payload of {len} bytes exceeds {MAX_PAYLOAD}")]
    PayloadTooLarge { len: usize },
    #[error("invalid hex encoding")]
    InvalidHex,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {what} address: {input:?}")]
pub struct AddrParseError {
    what: &'static str,
    input: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("vlan id {0} outside 1..=4094")]
pub struct InvalidVlanId(pub u16);

/// 48-bit hardware address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const BROADCAST: MacAddr = MacAddr([0xff; 6]);
    pub const ZERO: MacAddr = MacAddr([0; 6]);

    pub const fn new(a: u8, b: u8, c: u8, d: u8, e: u8, f: u8) -> Self {
        MacAddr([a, b, c, d, e, f])
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }

    pub fn is_broadcast(&self) -> bool {
        *self == Self::BROADCAST
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = &self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl fmt::Debug for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for MacAddr {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AddrParseError {
            what: "mac",
            input: s.to_string(),
        };
        let mut octets = [0u8; 6];
        let mut parts = s.split(':');
        for slot in octets.iter_mut() {
            let part = parts.next().ok_or_else(err)?;
            if part.len() != 2 {
                return Err(err());
            }
            *slot = u8::from_str_radix(part, 16).map_err(|_| err())?;
        }
        if parts.next().is_some() {
            return Err(err());
        }
        Ok(MacAddr(octets))
    }
}

/// IPv4 address. Parsing and formatting go through [`std::net::Ipv4Addr`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct IpAddr4(pub [u8; 4]);

impl IpAddr4 {
    pub const UNSPECIFIED: IpAddr4 = IpAddr4([0; 4]);

    pub const fn new(a: u8, b: u8, c: u8, d: u8) -> Self {
        IpAddr4([a, b, c, d])
    }

    pub fn octets(&self) -> [u8; 4] {
        self.0
    }

    pub fn to_u32(self) -> u32 {
        u32::from_be_bytes(self.0)
    }

    pub fn from_u32(v: u32) -> Self {
        IpAddr4(v.to_be_bytes())
    }
}

impl From<Ipv4Addr> for IpAddr4 {
    fn from(a: Ipv4Addr) -> Self {
        IpAddr4(a.octets())
    }
}

impl From<IpAddr4> for Ipv4Addr {
    fn from(a: IpAddr4) -> Self {
        Ipv4Addr::from(a.0)
    }
}

impl fmt::Display for IpAddr4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&Ipv4Addr::from(self.0), f)
    }
}

impl fmt::Debug for IpAddr4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for IpAddr4 {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ipv4Addr::from_str(s).map(Into::into).map_err(|_| AddrParseError {
            what: "ipv4",
            input: s.to_string(),
        })
    }
}

macro_rules! serde_via_str {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_str!(MacAddr);
serde_via_str!(IpAddr4);

/// IPv4 prefix, e.g. `10.0.0.0/24`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Ipv4Net {
    pub addr: IpAddr4,
    pub prefix_len: u8,
}

impl Ipv4Net {
    pub fn new(addr: IpAddr4, prefix_len: u8) -> Option<Self> {
        (prefix_len <= 32).then_some(Ipv4Net { addr, prefix_len })
    }

    fn mask(&self) -> u32 {
        if self.prefix_len == 0 {
            0
        } else {
            u32::MAX << (32 - u32::from(self.prefix_len))
        }
    }

    pub fn contains(&self, ip: IpAddr4) -> bool {
        ip.to_u32() & self.mask() == self.addr.to_u32() & self.mask()
    }
}

impl fmt::Display for Ipv4Net {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.prefix_len)
    }
}

impl FromStr for Ipv4Net {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AddrParseError {
            what: "ipv4 prefix",
            input: s.to_string(),
        };
        let (addr, len) = s.split_once('/').ok_or_else(err)?;
        let addr: IpAddr4 = addr.parse().map_err(|_| err())?;
        let len: u8 = len.parse().map_err(|_| err())?;
        Ipv4Net::new(addr, len).ok_or_else(err)
    }
}

serde_via_str!(Ipv4Net);

/// 802.1Q VLAN identifier in `1..=4094`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct VlanTag(u16);

impl VlanTag {
    pub const MIN: u16 = 1;
    pub const MAX: u16 = 4094;

    pub fn new(id: u16) -> Result<Self, InvalidVlanId> {
        if (Self::MIN..=Self::MAX).contains(&id) {
            Ok(VlanTag(id))
        } else {
            Err(InvalidVlanId(id))
        }
    }

    pub fn id(self) -> u16 {
        self.0
    }
}

impl TryFrom<u16> for VlanTag {
    type Error = InvalidVlanId;

    fn try_from(id: u16) -> Result<Self, Self::Error> {
        VlanTag::new(id)
    }
}

impl From<VlanTag> for u16 {
    fn from(t: VlanTag) -> u16 {
        t.0
    }
}

impl fmt::Display for VlanTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for VlanTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vlan{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArpOp {
    Request,
    Reply,
}

impl ArpOp {
    fn code(self) -> u16 {
        match self {
            ArpOp::Request => 1,
            ArpOp::Reply => 2,
        }
    }
}

/// An ARP packet. Sender fields are whatever the emitter chose to put there;
/// nothing ties them to the emitting endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArpPacket {
    pub op: ArpOp,
    pub sender_ip: IpAddr4,
    pub sender_mac: MacAddr,
    pub target_ip: IpAddr4,
    /// All-zeros in a request.
    pub target_mac: MacAddr,
}

/// Build an ARP packet verbatim. The only check is that a request leaves the
/// target MAC unset.
pub fn make_arp(
    op: ArpOp,
    sender_ip: IpAddr4,
    sender_mac: MacAddr,
    target_ip: IpAddr4,
    target_mac: MacAddr,
) -> Result<ArpPacket, FrameError> {
    if op == ArpOp::Request && !target_mac.is_zero() {
        return Err(FrameError::MalformedRequest);
    }
    Ok(ArpPacket {
        op,
        sender_ip,
        sender_mac,
        target_ip,
        target_mac,
    })
}

impl ArpPacket {
    pub fn request(sender_ip: IpAddr4, sender_mac: MacAddr, target_ip: IpAddr4) -> Self {
        ArpPacket {
            op: ArpOp::Request,
            sender_ip,
            sender_mac,
            target_ip,
            target_mac: MacAddr::ZERO,
        }
    }

    pub fn reply(
        sender_ip: IpAddr4,
        sender_mac: MacAddr,
        target_ip: IpAddr4,
        target_mac: MacAddr,
    ) -> Self {
        ArpPacket {
            op: ArpOp::Reply,
            sender_ip,
            sender_mac,
            target_ip,
            target_mac,
        }
    }

    /// A self-announcement: a request whose target is the sender's own IP.
    pub fn gratuitous(ip: IpAddr4, mac: MacAddr) -> Self {
        Self::request(ip, mac, ip)
    }

    pub fn is_gratuitous(&self) -> bool {
        self.sender_ip == self.target_ip
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IpPacket {
    pub src_ip: IpAddr4,
    pub dst_ip: IpAddr4,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FrameBody {
    Arp(ArpPacket),
    Ip(IpPacket),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Arp,
    Ip,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EthernetFrame {
    pub dst: MacAddr,
    pub src: MacAddr,
    pub vlan: Option<VlanTag>,
    pub body: FrameBody,
}

impl EthernetFrame {
    pub fn arp(src: MacAddr, dst: MacAddr, arp: ArpPacket) -> Self {
        EthernetFrame {
            dst,
            src,
            vlan: None,
            body: FrameBody::Arp(arp),
        }
    }

    pub fn ip(
        src: MacAddr,
        dst: MacAddr,
        src_ip: IpAddr4,
        dst_ip: IpAddr4,
        payload: impl Into<Vec<u8>>,
    ) -> Self {
        EthernetFrame {
            dst,
            src,
            vlan: None,
            body: FrameBody::Ip(IpPacket {
                src_ip,
                dst_ip,
                payload: payload.into(),
            }),
        }
    }

    pub fn with_vlan(mut self, tag: Option<VlanTag>) -> Self {
        self.vlan = tag;
        self
    }

    pub fn kind(&self) -> FrameKind {
        match self.body {
            FrameBody::Arp(_) => FrameKind::Arp,
            FrameBody::Ip(_) => FrameKind::Ip,
        }
    }

    pub fn as_arp(&self) -> Option<&ArpPacket> {
        match &self.body {
            FrameBody::Arp(a) => Some(a),
            FrameBody::Ip(_) => None,
        }
    }

    pub fn as_ip(&self) -> Option<&IpPacket> {
        match &self.body {
            FrameBody::Ip(p) => Some(p),
            FrameBody::Arp(_) => None,
        }
    }

    pub fn payload(&self) -> Option<&[u8]> {
        self.as_ip().map(|p| p.payload.as_slice())
    }

    /// Checks the type invariants that serialization relies on.
    pub fn validate(&self) -> Result<(), FrameError> {
        if self.src.is_broadcast() {
            return Err(FrameError::BroadcastSource);
        }
        match &self.body {
            FrameBody::Arp(a) if a.op == ArpOp::Request && !a.target_mac.is_zero() => {
                Err(FrameError::MalformedRequest)
            }
            FrameBody::Ip(p) if p.payload.len() > MAX_PAYLOAD => {
                Err(FrameError::PayloadTooLarge {
                    len: p.payload.len(),
                })
            }
            _ => Ok(()),
        }
    }

    pub fn encoded_len(&self) -> usize {
        let tag = if self.vlan.is_some() { TAG_BLOCK_LEN } else { 0 };
        let body = match &self.body {
            FrameBody::Arp(_) => ARP_BODY_LEN,
            FrameBody::Ip(p) => IP_HEADER_LEN + p.payload.len(),
        };
        HEADER_LEN + tag + body
    }

    /// Encode the frame. Panics if `validate` would reject it.
    pub fn serialize(&self) -> Vec<u8> {
        if let Err(e) = self.validate() {
            panic!("serializing invalid frame: {e}");
        }
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.dst.0);
        out.extend_from_slice(&self.src.0);
        if let Some(tag) = self.vlan {
            out.extend_from_slice(&ETHERTYPE_VLAN.to_be_bytes());
            out.extend_from_slice(&tag.id().to_be_bytes());
        }
        match &self.body {
            FrameBody::Arp(a) => {
                out.extend_from_slice(&ETHERTYPE_ARP.to_be_bytes());
                out.extend_from_slice(&a.op.code().to_be_bytes());
                out.extend_from_slice(&a.sender_mac.0);
                out.extend_from_slice(&a.sender_ip.0);
                out.extend_from_slice(&a.target_mac.0);
                out.extend_from_slice(&a.target_ip.0);
            }
            FrameBody::Ip(p) => {
                out.extend_from_slice(&ETHERTYPE_IP.to_be_bytes());
                out.extend_from_slice(&p.src_ip.0);
                out.extend_from_slice(&p.dst_ip.0);
                out.extend_from_slice(&(p.payload.len() as u16).to_be_bytes());
                out.extend_from_slice(&p.payload);
            }
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, FrameError> {
        let mut r = Reader { bytes, pos: 0 };
        let dst = MacAddr(r.array()?);
        let src = MacAddr(r.array()?);
        if src.is_broadcast() {
            return Err(FrameError::BroadcastSource);
        }
        let mut ethertype = r.u16()?;
        let mut vlan = None;
        if ethertype == ETHERTYPE_VLAN {
            let offset = r.pos;
            let id = r.u16()?;
            vlan = Some(VlanTag::new(id).map_err(|_| FrameError::InvalidVlan { offset, id })?);
            ethertype = r.u16()?;
        }
        let body = match ethertype {
            ETHERTYPE_ARP => {
                let offset = r.pos;
                let op = match r.u16()? {
                    1 => ArpOp::Request,
                    2 => ArpOp::Reply,
                    op => return Err(FrameError::InvalidArpOp { offset, op }),
                };
                let sender_mac = MacAddr(r.array()?);
                let sender_ip = IpAddr4(r.array()?);
                let target_mac = MacAddr(r.array()?);
                let target_ip = IpAddr4(r.array()?);
                FrameBody::Arp(make_arp(op, sender_ip, sender_mac, target_ip, target_mac)?)
            }
            ETHERTYPE_IP => {
                let src_ip = IpAddr4(r.array()?);
                let dst_ip = IpAddr4(r.array()?);
                let len = r.u16()? as usize;
                let payload = r.take(len)?.to_vec();
                FrameBody::Ip(IpPacket {
                    src_ip,
                    dst_ip,
                    payload,
                })
            }
            other => {
                return Err(FrameError::UnknownBodyType {
                    offset: r.pos - 2,
                    ethertype: other,
                })
            }
        };
        if r.pos != bytes.len() {
            return Err(FrameError::TrailingBytes {
                offset: r.pos,
                count: bytes.len() - r.pos,
            });
        }
        Ok(EthernetFrame {
            dst,
            src,
            vlan,
            body,
        })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.serialize())
    }

    pub fn from_hex(s: &str) -> Result<Self, FrameError> {
        let bytes = hex::decode(s).map_err(|_| FrameError::InvalidHex)?;
        Self::parse(&bytes)
    }
}

pub fn serialize_frame(frame: &EthernetFrame) -> Vec<u8> {
    frame.serialize()
}

pub fn parse_frame(bytes: &[u8]) -> Result<EthernetFrame, FrameError> {
    EthernetFrame::parse(bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FrameError> {
        let rest = self.bytes.len() - self.pos;
        if rest < n {
            return Err(FrameError::Truncated {
                offset: self.pos,
                needed: n - rest,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FrameError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, FrameError> {
        Ok(u16::from_be_bytes(self.array()?))
    }
}
