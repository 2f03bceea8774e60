//! Packet model and binary frame codec for the TCP/MPTCP handshake messages
//! consumed by the controller.
//!
//! Frame layout, all multi-byte fields in network byte order:
//!
//! | offset    | field                                              |
//! |-----------|----------------------------------------------------|
//! | `[0..4)`  | source IPv4 address                                |
//! | `[4..8)`  | destination IPv4 address                           |
//! | `[8..10)` | source port                                        |
//! | `[10..12)`| destination port                                   |
//! | `[12]`    | flags (bit0 SYN, bit1 ACK, bit2 FIN, bit3 RST)     |
//! | `[13..15)`| payload length                                     |
//! | `[15]`    | option length `L`, either 0 or 10                  |
//! | `[16]`    | subtype (`0x00` MP_CAPABLE, `0x01` MP_JOIN), if `L = 10` |
//! | `[17]`    | reserved, always `0x00`                            |
//! | `[18..26)`| 64-bit key                                         |
//!
//! A frame is therefore 16 bytes without an option and 26 bytes with one.
//! Decoding is strict: any byte sequence that is not the canonical encoding
//! of some valid [`Packet`] is rejected.

use std::fmt;
use std::net::Ipv4Addr;

use bitflags::bitflags;
use thiserror::Error;

/// Length of the fixed header preceding the option.
pub const HEADER_LEN: usize = 16;
/// Length of the MPTCP option block when present.
pub const OPTION_LEN: usize = 10;
/// Length of a frame carrying an MPTCP option.
pub const MAX_FRAME_LEN: usize = HEADER_LEN + OPTION_LEN;

const SUBTYPE_MP_CAPABLE: u8 = 0x00;
const SUBTYPE_MP_JOIN: u8 = 0x01;

bitflags! {
    /// The subset of TCP flags the controller looks at.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
    pub struct TcpFlags: u8 {
        const SYN = 0b0001;
        const ACK = 0b0010;
        const FIN = 0b0100;
        const RST = 0b1000;
    }
}

impl fmt::Display for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        let names: Vec<&str> = self.iter_names().map(|(name, _)| name).collect();
        f.write_str(&names.join("|"))
    }
}

/// Directed (source, destination) address/port pair of one TCP flow.
///
/// Used both as the key of the controller's session tables and as the exact
/// match of installed flow rules (protocol TCP is implied).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EndpointPair {
    pub src_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
}

impl EndpointPair {
    pub fn new(src_ip: Ipv4Addr, src_port: u16, dst_ip: Ipv4Addr, dst_port: u16) -> Self {
        Self {
            src_ip,
            src_port,
            dst_ip,
            dst_port,
        }
    }

    /// The same flow seen from the other end.
    pub fn reversed(&self) -> Self {
        Self {
            src_ip: self.dst_ip,
            src_port: self.dst_port,
            dst_ip: self.src_ip,
            dst_port: self.src_port,
        }
    }

    /// Source and destination sockets must differ.
    pub fn is_valid(&self) -> bool {
        (self.src_ip, self.src_port) != (self.dst_ip, self.dst_port)
    }
}

impl fmt::Display for EndpointPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}->{}:{}",
            self.src_ip, self.src_port, self.dst_ip, self.dst_port
        )
    }
}

/// MPTCP handshake option. Keys stand in for tokens throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MptcpOption {
    /// Carries the sender's own key.
    MpCapable { key: u64 },
    /// Carries the key of the peer whose session the sender wants to join.
    MpJoin { peer_key: u64 },
}

impl MptcpOption {
    pub fn key(&self) -> u64 {
        match *self {
            MptcpOption::MpCapable { key } => key,
            MptcpOption::MpJoin { peer_key } => peer_key,
        }
    }

    /// A zero key is legal on the wire but almost certainly a bug upstream.
    pub fn is_suspicious(&self) -> bool {
        self.key() == 0
    }

    fn subtype(&self) -> u8 {
        match self {
            MptcpOption::MpCapable { .. } => SUBTYPE_MP_CAPABLE,
            MptcpOption::MpJoin { .. } => SUBTYPE_MP_JOIN,
        }
    }
}

/// TCP segment metadata plus an optional MPTCP handshake option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Packet {
    pub endpoints: EndpointPair,
    pub tcp_flags: TcpFlags,
    pub mptcp: Option<MptcpOption>,
    pub payload_len: u16,
}

/// Why a [`Packet`] value is outside the valid domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum InvalidPacket {
    #[error("source and destination sockets are identical")]
    IdenticalEndpoints,
    #[error("MPTCP handshake segment carries {0} payload bytes")]
    HandshakePayload(u16),
}

impl Packet {
    pub fn validate(&self) -> Result<(), InvalidPacket> {
        if !self.endpoints.is_valid() {
            return Err(InvalidPacket::IdenticalEndpoints);
        }
        if self.tcp_flags.contains(TcpFlags::SYN) && self.mptcp.is_some() && self.payload_len != 0 {
            return Err(InvalidPacket::HandshakePayload(self.payload_len));
        }
        Ok(())
    }

    pub fn class(&self) -> PacketClass {
        classify(self)
    }
}

/// Handshake role of a packet as seen by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PacketClass {
    MpCapableSyn,
    MpCapableSynAck,
    MpJoinSyn,
    MpJoinSynAck,
    PlainTcp,
    NonHandshake,
}

impl PacketClass {
    pub const ALL: [PacketClass; 6] = [
        PacketClass::MpCapableSyn,
        PacketClass::MpCapableSynAck,
        PacketClass::MpJoinSyn,
        PacketClass::MpJoinSynAck,
        PacketClass::PlainTcp,
        PacketClass::NonHandshake,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PacketClass::MpCapableSyn => "MpCapableSyn",
            PacketClass::MpCapableSynAck => "MpCapableSynAck",
            PacketClass::MpJoinSyn => "MpJoinSyn",
            PacketClass::MpJoinSynAck => "MpJoinSynAck",
            PacketClass::PlainTcp => "PlainTcp",
            PacketClass::NonHandshake => "NonHandshake",
        }
    }
}

impl fmt::Display for PacketClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classify a packet by its SYN/ACK flags and MPTCP option.
///
/// FIN and RST never change the outcome; only the presence of SYN decides
/// whether a packet is part of a handshake.
pub fn classify(p: &Packet) -> PacketClass {
    let syn = p.tcp_flags.contains(TcpFlags::SYN);
    let ack = p.tcp_flags.contains(TcpFlags::ACK);
    match (syn, ack, p.mptcp) {
        (false, _, _) => PacketClass::NonHandshake,
        (true, _, None) => PacketClass::PlainTcp,
        (true, false, Some(MptcpOption::MpCapable { .. })) => PacketClass::MpCapableSyn,
        (true, true, Some(MptcpOption::MpCapable { .. })) => PacketClass::MpCapableSynAck,
        (true, false, Some(MptcpOption::MpJoin { .. })) => PacketClass::MpJoinSyn,
        (true, true, Some(MptcpOption::MpJoin { .. })) => PacketClass::MpJoinSynAck,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("TruncatedFrame: need {needed} bytes, got {got}")]
    TruncatedFrame { needed: usize, got: usize },
    #[error("UnknownSubtype: 0x{0:02x}")]
    UnknownSubtype(u8),
    #[error("BadLength: {0}")]
    BadLength(&'static str),
    #[error("ReservedBits: {0}")]
    ReservedBits(&'static str),
    #[error("InvalidPacket: {0}")]
    InvalidPacket(#[from] InvalidPacket),
}

impl DecodeError {
    /// Stable variant name, used in CLI reports.
    pub fn name(&self) -> &'static str {
        match self {
            DecodeError::TruncatedFrame { .. } => "TruncatedFrame",
            DecodeError::UnknownSubtype(_) => "UnknownSubtype",
            DecodeError::BadLength(_) => "BadLength",
            DecodeError::ReservedBits(_) => "ReservedBits",
            DecodeError::InvalidPacket(_) => "InvalidPacket",
        }
    }
}

/// Encode a packet into its canonical frame.
///
/// Total on packets satisfying [`Packet::validate`]; invalid packets are
/// still encoded but will not decode back.
pub fn encode_packet(p: &Packet) -> Vec<u8> {
    let mut buf = Vec::with_capacity(MAX_FRAME_LEN);
    let e = &p.endpoints;
    buf.extend_from_slice(&e.src_ip.octets());
    buf.extend_from_slice(&e.dst_ip.octets());
    buf.extend_from_slice(&e.src_port.to_be_bytes());
    buf.extend_from_slice(&e.dst_port.to_be_bytes());
    buf.push(p.tcp_flags.bits());
    buf.extend_from_slice(&p.payload_len.to_be_bytes());
    match p.mptcp {
        None => buf.push(0),
        Some(opt) => {
            buf.push(OPTION_LEN as u8);
            buf.push(opt.subtype());
            buf.push(0);
            buf.extend_from_slice(&opt.key().to_be_bytes());
        }
    }
    buf
}

/// Decode a frame produced by [`encode_packet`].
pub fn decode_packet(b: &[u8]) -> Result<Packet, DecodeError> {
    if b.len() < HEADER_LEN {
        return Err(DecodeError::TruncatedFrame {
            needed: HEADER_LEN,
            got: b.len(),
        });
    }
    let ip = |at: usize| Ipv4Addr::new(b[at], b[at + 1], b[at + 2], b[at + 3]);
    let be16 = |at: usize| u16::from_be_bytes([b[at], b[at + 1]]);

    let endpoints = EndpointPair::new(ip(0), be16(8), ip(4), be16(10));
    let tcp_flags =
        TcpFlags::from_bits(b[12]).ok_or(DecodeError::ReservedBits("unknown flag bits set"))?;
    let payload_len = be16(13);
    let option_len = b[15] as usize;

    let mptcp = match option_len {
        0 => {
            if b.len() != HEADER_LEN {
                return Err(DecodeError::BadLength(
                    "trailing bytes after option-less frame",
                ));
            }
            None
        }
        OPTION_LEN => {
            if b.len() < MAX_FRAME_LEN {
                return Err(DecodeError::TruncatedFrame {
                    needed: MAX_FRAME_LEN,
                    got: b.len(),
                });
            }
            let subtype = b[16];
            if subtype != SUBTYPE_MP_CAPABLE && subtype != SUBTYPE_MP_JOIN {
                return Err(DecodeError::UnknownSubtype(subtype));
            }
            if b.len() != MAX_FRAME_LEN {
                return Err(DecodeError::BadLength("trailing bytes after option"));
            }
            if b[17] != 0 {
                return Err(DecodeError::ReservedBits(
                    "option reserved byte is non-zero",
                ));
            }
            let mut key = [0u8; 8];
            key.copy_from_slice(&b[18..26]);
            let key = u64::from_be_bytes(key);
            Some(if subtype == SUBTYPE_MP_CAPABLE {
                MptcpOption::MpCapable { key }
            } else {
                MptcpOption::MpJoin { peer_key: key }
            })
        }
        _ => return Err(DecodeError::BadLength("option length must be 0 or 10")),
    };

    let packet = Packet {
        endpoints,
        tcp_flags,
        mptcp,
        payload_len,
    };
    packet.validate()?;
    Ok(packet)
}

/// One-line human description: class and option key first, then the
/// remaining header fields.
pub fn describe(p: &Packet) -> String {
    let mut s = classify(p).to_string();
    match p.mptcp {
        Some(MptcpOption::MpCapable { key }) => s.push_str(&format!(" key=0x{key:016x}")),
        Some(MptcpOption::MpJoin { peer_key }) => {
            s.push_str(&format!(" peer_key=0x{peer_key:016x}"))
        }
        None => {}
    }
    s.push_str(&format!(
        " endpoints={} flags={} payload_len={}",
        p.endpoints, p.tcp_flags, p.payload_len
    ));
    if p.mptcp.is_some_and(|o| o.is_suspicious()) {
        s.push_str(" warning=zero-key");
    }
    s
}

/// Bytes from a hex dump. Whitespace is ignored and `#` starts a comment
/// running to the end of the line.
pub fn parse_hex(text: &str) -> Result<Vec<u8>, hex::FromHexError> {
    let digits: String = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.chars().filter(|c| !c.is_whitespace()))
        .collect();
    hex::decode(digits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_capable() -> Packet {
        Packet {
            endpoints: EndpointPair::new(
                Ipv4Addr::new(10, 0, 0, 1),
                40000,
                Ipv4Addr::new(10, 0, 0, 2),
                5001,
            ),
            tcp_flags: TcpFlags::SYN,
            mptcp: Some(MptcpOption::MpCapable {
                key: 0x0102030405060708,
            }),
            payload_len: 0,
        }
    }

    // Hand-assembled from the layout table in the module docs.
    const GOLDEN_CAPABLE: [u8; 26] = [
        10, 0, 0, 1, // src ip
        10, 0, 0, 2, // dst ip
        0x9c, 0x40, // 40000
        0x13, 0x89, // 5001
        0x01, // SYN
        0x00, 0x00, // payload_len
        0x0a, // option length
        0x00, 0x00, // MP_CAPABLE, reserved
        0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08,
    ];

    #[test]
    fn golden_mp_capable_bytes() {
        let bytes = encode_packet(&golden_capable());
        assert_eq!(bytes, GOLDEN_CAPABLE);
        assert_eq!(&bytes[bytes.len() - 8..], &[1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(decode_packet(&bytes).unwrap(), golden_capable());
    }

    #[test]
    fn absent_option_has_zero_option_length() {
        let mut p = golden_capable();
        p.mptcp = None;
        let bytes = encode_packet(&p);
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(bytes[15], 0);
    }

    #[test]
    fn mp_join_decodes_peer_key() {
        let mut bytes = GOLDEN_CAPABLE.to_vec();
        bytes[16] = 0x01;
        let p = decode_packet(&bytes).unwrap();
        assert_eq!(
            p.mptcp,
            Some(MptcpOption::MpJoin {
                peer_key: 0x0102030405060708
            })
        );
        assert_eq!(classify(&p), PacketClass::MpJoinSyn);
    }

    #[test]
    fn empty_input_is_truncated() {
        assert!(matches!(
            decode_packet(&[]),
            Err(DecodeError::TruncatedFrame { needed: 16, got: 0 })
        ));
    }

    #[test]
    fn subtype_seven_is_unknown() {
        let mut bytes = GOLDEN_CAPABLE.to_vec();
        bytes[16] = 0x07;
        assert_eq!(
            decode_packet(&bytes),
            Err(DecodeError::UnknownSubtype(0x07))
        );
    }

    #[test]
    fn inconsistent_option_length() {
        let mut bytes = GOLDEN_CAPABLE.to_vec();
        bytes[15] = 4;
        assert_eq!(decode_packet(&bytes).unwrap_err().name(), "BadLength");

        let mut bytes = GOLDEN_CAPABLE.to_vec();
        bytes.push(0);
        assert_eq!(decode_packet(&bytes).unwrap_err().name(), "BadLength");

        let mut bytes = GOLDEN_CAPABLE[..HEADER_LEN].to_vec();
        bytes[15] = 0;
        bytes.push(0xff);
        assert_eq!(decode_packet(&bytes).unwrap_err().name(), "BadLength");
    }

    #[test]
    fn declared_option_missing_is_truncated() {
        let bytes = &GOLDEN_CAPABLE[..20];
        assert_eq!(
            decode_packet(bytes),
            Err(DecodeError::TruncatedFrame {
                needed: 26,
                got: 20
            })
        );
    }

    #[test]
    fn reserved_bits_rejected() {
        let mut bytes = GOLDEN_CAPABLE.to_vec();
        bytes[12] |= 0x80;
        assert_eq!(decode_packet(&bytes).unwrap_err().name(), "ReservedBits");
        let mut bytes = GOLDEN_CAPABLE.to_vec();
        bytes[17] = 1;
        assert_eq!(decode_packet(&bytes).unwrap_err().name(), "ReservedBits");
    }

    #[test]
    fn handshake_with_payload_rejected() {
        let mut bytes = GOLDEN_CAPABLE.to_vec();
        bytes[14] = 1;
        assert_eq!(
            decode_packet(&bytes),
            Err(DecodeError::InvalidPacket(InvalidPacket::HandshakePayload(
                1
            )))
        );
    }

    #[test]
    fn classify_truth_table() {
        let options = [
            None,
            Some(MptcpOption::MpCapable { key: 7 }),
            Some(MptcpOption::MpJoin { peer_key: 7 }),
        ];
        for bits in 0u8..16 {
            let flags = TcpFlags::from_bits(bits).unwrap();
            for opt in options {
                let p = Packet {
                    endpoints: golden_capable().endpoints,
                    tcp_flags: flags,
                    mptcp: opt,
                    payload_len: 0,
                };
                let syn = bits & 1 != 0;
                let ack = bits & 2 != 0;
                let expected = match (syn, ack, opt) {
                    (false, _, _) => PacketClass::NonHandshake,
                    (true, _, None) => PacketClass::PlainTcp,
                    (true, false, Some(MptcpOption::MpCapable { .. })) => PacketClass::MpCapableSyn,
                    (true, true, Some(MptcpOption::MpCapable { .. })) => {
                        PacketClass::MpCapableSynAck
                    }
                    (true, false, Some(MptcpOption::MpJoin { .. })) => PacketClass::MpJoinSyn,
                    (true, true, Some(MptcpOption::MpJoin { .. })) => PacketClass::MpJoinSynAck,
                };
                assert_eq!(classify(&p), expected, "flags={flags:?} opt={opt:?}");
            }
        }
    }

    #[test]
    fn classify_examples() {
        let mut p = golden_capable();
        assert_eq!(classify(&p), PacketClass::MpCapableSyn);
        p.tcp_flags = TcpFlags::SYN | TcpFlags::ACK;
        p.mptcp = Some(MptcpOption::MpJoin { peer_key: 1 });
        assert_eq!(classify(&p), PacketClass::MpJoinSynAck);
        p.tcp_flags = TcpFlags::FIN;
        p.mptcp = None;
        assert_eq!(classify(&p), PacketClass::NonHandshake);
    }

    #[test]
    fn hex_dump_parsing() {
        assert_eq!(
            parse_hex("# c\n0a 0B\n ff # tail").unwrap(),
            [0x0a, 0x0b, 0xff]
        );
        assert_eq!(parse_hex("").unwrap(), Vec::<u8>::new());
        assert!(parse_hex("abc").is_err());
        assert!(parse_hex("zz").is_err());
    }

    #[test]
    fn reversal_is_an_involution() {
        let e = golden_capable().endpoints;
        assert_ne!(e.reversed(), e);
        assert_eq!(e.reversed().reversed(), e);
    }

    #[test]
    fn zero_key_is_flagged() {
        let mut p = golden_capable();
        p.mptcp = Some(MptcpOption::MpCapable { key: 0 });
        assert!(p.validate().is_ok());
        assert!(describe(&p).ends_with("warning=zero-key"));
    }
}
