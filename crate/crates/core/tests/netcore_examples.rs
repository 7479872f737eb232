mod common;

use common::*;
use vnetsim::netcore::{
    make_arp, parse_frame, serialize_frame, ArpOp, ArpPacket, EthernetFrame, FrameError, MacAddr,
    VlanTag, TAG_BLOCK_LEN,
};

#[test]
fn canonical_request_is_valid() {
    let arp = make_arp(ArpOp::Request, IP_A, MAC_A, IP_B, MacAddr::ZERO).unwrap();
    assert_eq!(arp, ArpPacket::request(IP_A, MAC_A, IP_B));
}

#[test]
fn forged_reply_is_expressible() {
    let arp = make_arp(ArpOp::Reply, IP_A, MAC_C, IP_B, MAC_B).unwrap();
    assert_eq!(arp.sender_ip, IP_A);
    assert_eq!(arp.sender_mac, MAC_C);
}

#[test]
fn request_with_target_mac_is_malformed() {
    assert_eq!(
        make_arp(ArpOp::Request, IP_A, MAC_A, IP_B, MAC_B),
        Err(FrameError::MalformedRequest)
    );
}

#[test]
fn frame_src_may_differ_from_arp_sender() {
    let f = EthernetFrame::arp(MAC_C, MacAddr::BROADCAST, ArpPacket::request(IP_A, MAC_A, IP_B));
    assert!(f.validate().is_ok());
    assert_ne!(f.src, f.as_arp().unwrap().sender_mac);
}

#[test]
fn equal_frames_serialize_identically() {
    let f = || EthernetFrame::ip(MAC_A, MAC_B, IP_A, IP_B, b"payload".to_vec());
    assert_eq!(serialize_frame(&f()), serialize_frame(&f()));
}

#[test]
fn vlan_tag_adds_exactly_one_tag_block() {
    let plain = EthernetFrame::ip(MAC_A, MAC_B, IP_A, IP_B, b"x".to_vec());
    let tagged = plain.clone().with_vlan(Some(VlanTag::new(2).unwrap()));
    assert_eq!(
        serialize_frame(&tagged).len() - serialize_frame(&plain).len(),
        TAG_BLOCK_LEN
    );
}

#[test]
fn minimal_arp_request_round_trips() {
    let f = EthernetFrame::arp(MAC_A, MacAddr::BROADCAST, ArpPacket::request(IP_A, MAC_A, IP_B));
    assert_eq!(parse_frame(&serialize_frame(&f)).unwrap(), f);
}

#[test]
fn empty_input_is_truncated() {
    assert!(matches!(parse_frame(&[]), Err(FrameError::Truncated { offset: 0, .. })));
}

#[test]
fn dropping_last_byte_is_truncated() {
    let frames = [
        EthernetFrame::arp(MAC_A, MacAddr::BROADCAST, ArpPacket::request(IP_A, MAC_A, IP_B)),
        EthernetFrame::ip(MAC_A, MAC_B, IP_A, IP_B, b"abc".to_vec()),
        EthernetFrame::ip(MAC_A, MAC_B, IP_A, IP_B, Vec::new()).with_vlan(Some(tag(9))),
    ];
    for f in frames {
        let mut bytes = serialize_frame(&f);
        bytes.pop();
        assert!(matches!(parse_frame(&bytes), Err(FrameError::Truncated { .. })), "{f:?}");
    }
}

#[test]
fn unknown_body_type_reports_offset() {
    let mut bytes = serialize_frame(&EthernetFrame::ip(MAC_A, MAC_B, IP_A, IP_B, Vec::new()));
    bytes[12] = 0x12;
    bytes[13] = 0x34;
    assert_eq!(
        parse_frame(&bytes),
        Err(FrameError::UnknownBodyType { offset: 12, ethertype: 0x1234 })
    );
}

#[test]
fn broadcast_is_never_a_source() {
    let f = EthernetFrame::ip(MacAddr::BROADCAST, MAC_B, IP_A, IP_B, Vec::new());
    assert_eq!(f.validate(), Err(FrameError::BroadcastSource));
}

#[test]
fn text_forms_round_trip() {
    assert_eq!(MAC_A.to_string(), "02:00:00:00:00:0a");
    assert_eq!("02:00:00:00:00:0A".parse::<MacAddr>().unwrap(), MAC_A);
    assert_eq!(IP_A.to_string().parse::<vnetsim::netcore::IpAddr4>().unwrap(), IP_A);
    assert!(VlanTag::new(0).is_err());
    assert!(VlanTag::new(4095).is_err());
    assert_eq!(VlanTag::new(4094).unwrap().id(), 4094);
}
