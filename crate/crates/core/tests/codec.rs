use std::collections::BTreeSet;
use std::fs;
use std::net::Ipv4Addr;
use std::path::PathBuf;

use proptest::prelude::*;
use smoc_core::wire::{
    classify, decode_packet, encode_packet, parse_hex, EndpointPair, MptcpOption, Packet,
    PacketClass, TcpFlags,
};

fn frames_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/frames")
}

fn frame(name: &str) -> Vec<u8> {
    parse_hex(&fs::read_to_string(frames_dir().join(name)).unwrap()).unwrap()
}

pub fn valid_packet() -> impl Strategy<Value = Packet> {
    let endpoints = (any::<u32>(), any::<u16>(), any::<u32>(), any::<u16>())
        .prop_map(|(a, pa, b, pb)| EndpointPair::new(Ipv4Addr::from(a), pa, Ipv4Addr::from(b), pb))
        .prop_filter("distinct sockets", |e| e.is_valid());
    let option = prop_oneof![
        Just(None),
        any::<u64>().prop_map(|key| Some(MptcpOption::MpCapable { key })),
        any::<u64>().prop_map(|peer_key| Some(MptcpOption::MpJoin { peer_key })),
    ];
    (endpoints, 0u8..16, option, any::<u16>()).prop_map(|(endpoints, bits, mptcp, len)| {
        let tcp_flags = TcpFlags::from_bits(bits).unwrap();
        let payload_len = if tcp_flags.contains(TcpFlags::SYN) && mptcp.is_some() {
            0
        } else {
            len
        };
        Packet {
            endpoints,
            tcp_flags,
            mptcp,
            payload_len,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn round_trip(p in valid_packet()) {
        let bytes = encode_packet(&p);
        prop_assert_eq!(bytes.len(), if p.mptcp.is_some() { 26 } else { 16 });
        prop_assert_eq!(decode_packet(&bytes), Ok(p));
    }
}

proptest! {
    // Any accepted byte string re-encodes to itself, so encoding is canonical.
    #[test]
    fn accepted_frames_are_canonical(bytes in proptest::collection::vec(any::<u8>(), 0..30)) {
        if let Ok(p) = decode_packet(&bytes) {
            prop_assert_eq!(encode_packet(&p), bytes);
        }
    }

    #[test]
    fn classify_is_deterministic(p in valid_packet()) {
        prop_assert_eq!(classify(&p), classify(&p.clone()));
    }
}

#[test]
fn golden_frames_decode() {
    let cases = [
        (
            "mp_capable_syn.hex",
            PacketClass::MpCapableSyn,
            Some(0x0102030405060708),
        ),
        (
            "mp_capable_synack.hex",
            PacketClass::MpCapableSynAck,
            Some(0xa1a2a3a4a5a6a7a8),
        ),
        (
            "mp_join_syn.hex",
            PacketClass::MpJoinSyn,
            Some(0xa1a2a3a4a5a6a7a8),
        ),
        (
            "mp_join_synack.hex",
            PacketClass::MpJoinSynAck,
            Some(0x0102030405060708),
        ),
        ("plain_syn.hex", PacketClass::PlainTcp, None),
        ("data_ack.hex", PacketClass::NonHandshake, None),
    ];
    for (name, class, key) in cases {
        let bytes = frame(name);
        let p = decode_packet(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(classify(&p), class, "{name}");
        assert_eq!(p.mptcp.map(|o| o.key()), key, "{name}");
        assert_eq!(encode_packet(&p), bytes, "{name}");
    }
    let join = decode_packet(&frame("mp_join_syn.hex")).unwrap();
    assert_eq!(join.endpoints.src_port, 40001);
    assert_eq!(
        join.mptcp,
        Some(MptcpOption::MpJoin {
            peer_key: 0xa1a2a3a4a5a6a7a8
        })
    );
    assert_eq!(
        decode_packet(&frame("data_ack.hex")).unwrap().payload_len,
        1460
    );
}

#[test]
fn golden_frame_matches_encoder() {
    let p = Packet {
        endpoints: EndpointPair::new([10, 0, 0, 1].into(), 40000, [10, 0, 0, 2].into(), 5001),
        tcp_flags: TcpFlags::SYN,
        mptcp: Some(MptcpOption::MpCapable {
            key: 0x0102030405060708,
        }),
        payload_len: 0,
    };
    assert_eq!(encode_packet(&p), frame("mp_capable_syn.hex"));
}

#[test]
fn malformed_corpus_reaches_every_error() {
    let mut reached = BTreeSet::new();
    for entry in fs::read_dir(frames_dir().join("malformed")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let expected = name.split('.').next().unwrap();
        let bytes = parse_hex(&fs::read_to_string(&path).unwrap()).unwrap();
        let err = decode_packet(&bytes).expect_err(&name);
        assert_eq!(err.name(), expected, "{name}: {err}");
        reached.insert(err.name());
    }
    let all: BTreeSet<&str> = [
        "TruncatedFrame",
        "UnknownSubtype",
        "BadLength",
        "ReservedBits",
        "InvalidPacket",
    ]
    .into();
    assert_eq!(reached, all);
}
