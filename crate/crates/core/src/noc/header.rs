// SPDX-License-Identifier: Apache-2.0

//! Header flit codec.
//!
//! Bit layout, LSB first:
//!
//! | bits            | field                         |
//! |-----------------|-------------------------------|
//! | `[1:0]`         | preamble `0b10`               |
//! | `[8:2]`         | source (y in `[8:6]`, x in `[5:2]`) |
//! | `[13:9]`        | message type                  |
//! | `[17:14]`       | destination count minus one   |
//! | `[23:18]`       | reserved, zero                |
//! | `[24+7i+6 : 24+7i]` | destination `i` (y high 3, x low 4) |

use serde::{Deserialize, Serialize};

use super::{Coord, NocConfig, NocError, Plane, MAX_MCAST};

/// Fixed header bits preceding the destination list.
pub const HEADER_OVERHEAD_BITS: u32 = 24;
/// Bits per encoded coordinate.
pub const DEST_BITS: u32 = 7;
pub const PREAMBLE: u64 = 0b10;

const SOURCE_SHIFT: u32 = 2;
const MSG_SHIFT: u32 = 9;
const COUNT_SHIFT: u32 = 14;
const RESERVED_SHIFT: u32 = 18;

/// Flit payload of up to 256 bits, stored little-endian in 64-bit limbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Payload(pub [u64; 4]);

impl Payload {
    pub const ZERO: Payload = Payload([0; 4]);

    pub fn get(&self, lo: u32, width: u32) -> u64 {
        debug_assert!(width <= 64 && lo + width <= 256);
        let mut out = 0u64;
        for i in 0..width {
            let bit = lo + i;
            if self.0[(bit / 64) as usize] >> (bit % 64) & 1 == 1 {
                out |= 1 << i;
            }
        }
        out
    }

    pub fn set(&mut self, lo: u32, width: u32, value: u64) {
        debug_assert!(width <= 64 && lo + width <= 256);
        for i in 0..width {
            let bit = lo + i;
            let limb = &mut self.0[(bit / 64) as usize];
            let mask = 1u64 << (bit % 64);
            if value >> i & 1 == 1 {
                *limb |= mask;
            } else {
                *limb &= !mask;
            }
        }
    }

    /// Packs up to 32 bytes, little-endian.
    pub fn from_bytes(bytes: &[u8]) -> Payload {
        debug_assert!(bytes.len() <= 32);
        let mut p = Payload::ZERO;
        for (i, b) in bytes.iter().enumerate() {
            p.0[i / 8] |= (*b as u64) << (8 * (i % 8));
        }
        p
    }

    pub fn to_bytes(&self, n: usize) -> Vec<u8> {
        (0..n).map(|i| (self.0[i / 8] >> (8 * (i % 8))) as u8).collect()
    }

    pub fn append_bytes_to(&self, n: usize, out: &mut Vec<u8>) {
        out.extend((0..n).map(|i| (self.0[i / 8] >> (8 * (i % 8))) as u8));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlitKind {
    Header,
    Body,
    Tail,
    /// A packet consisting of its header only.
    Single,
}

impl FlitKind {
    pub fn is_head(self) -> bool {
        matches!(self, FlitKind::Header | FlitKind::Single)
    }

    pub fn is_last(self) -> bool {
        matches!(self, FlitKind::Tail | FlitKind::Single)
    }
}

/// One flow-control unit. `packet` is simulator bookkeeping (used by traces
/// and tests) and is not part of the wire payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Flit {
    pub kind: FlitKind,
    pub payload: Payload,
    pub plane: Plane,
    pub packet: u64,
}

impl Flit {
    pub fn body(kind: FlitKind, payload: Payload, plane: Plane) -> Flit {
        Flit { kind, payload, plane, packet: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MsgType {
    DmaReadRequest,
    DmaWriteRequest,
    DmaResponse,
    P2pRequest,
    P2pData,
    Irq,
    Config,
}

impl MsgType {
    pub const ALL: [MsgType; 7] = [
        MsgType::DmaReadRequest,
        MsgType::DmaWriteRequest,
        MsgType::DmaResponse,
        MsgType::P2pRequest,
        MsgType::P2pData,
        MsgType::Irq,
        MsgType::Config,
    ];

    pub fn code(self) -> u64 {
        // code 0 is left unused so an all-zero field is never a valid type
        self as u64 + 1
    }

    pub fn from_code(code: u64) -> Option<MsgType> {
        (1..=Self::ALL.len() as u64).contains(&code).then(|| Self::ALL[code as usize - 1])
    }

    /// Plane a message of this type travels on.
    pub fn plane(self) -> Plane {
        match self {
            MsgType::DmaReadRequest | MsgType::DmaWriteRequest | MsgType::P2pRequest => Plane::DmaRequest,
            MsgType::DmaResponse | MsgType::P2pData => Plane::DmaResponse,
            MsgType::Irq | MsgType::Config => Plane::Misc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HeaderFields {
    pub source: Coord,
    pub destinations: Vec<Coord>,
    pub msg_type: MsgType,
}

impl HeaderFields {
    pub fn new(source: Coord, destinations: Vec<Coord>, msg_type: MsgType) -> Self {
        Self { source, destinations, msg_type }
    }

    pub fn unicast(source: Coord, dest: Coord, msg_type: MsgType) -> Self {
        Self::new(source, vec![dest], msg_type)
    }

    pub fn dest_count(&self) -> usize {
        self.destinations.len()
    }

    fn validate(&self, cfg: &NocConfig) -> Result<(), NocError> {
        let cap = cfg.capacity()?;
        if self.destinations.is_empty() {
            return Err(NocError::NoDestinations);
        }
        if self.destinations.len() > cap {
            return Err(NocError::TooManyDestinations { count: self.destinations.len(), capacity: cap });
        }
        cfg.check_coord(self.source)?;
        for (i, d) in self.destinations.iter().enumerate() {
            cfg.check_coord(*d)?;
            if self.destinations[..i].contains(d) {
                return Err(NocError::DuplicateDestination(*d));
            }
        }
        Ok(())
    }
}

/// Destinations that fit in the header before the implementation cap.
pub fn raw_capacity(bitwidth: u32) -> Result<usize, NocError> {
    match bitwidth {
        64 | 128 | 256 => Ok(((bitwidth - HEADER_OVERHEAD_BITS) / DEST_BITS) as usize),
        other => Err(NocError::UnsupportedBitwidth(other)),
    }
}

/// Number of destinations a header flit of `bitwidth` bits can carry, capped
/// at the implementation limit of 16.
pub fn capacity(bitwidth: u32) -> Result<usize, NocError> {
    Ok(raw_capacity(bitwidth)?.min(MAX_MCAST))
}

fn coord_bits(c: Coord) -> u64 {
    (c.y as u64) << 4 | c.x as u64
}

fn bits_coord(bits: u64) -> Coord {
    Coord::new((bits & 0xf) as u8, (bits >> 4 & 0x7) as u8)
}

pub fn encode_header(fields: &HeaderFields, cfg: &NocConfig) -> Result<Flit, NocError> {
    fields.validate(cfg)?;
    let mut p = Payload::ZERO;
    p.set(0, 2, PREAMBLE);
    p.set(SOURCE_SHIFT, DEST_BITS, coord_bits(fields.source));
    p.set(MSG_SHIFT, 5, fields.msg_type.code());
    p.set(COUNT_SHIFT, 4, fields.destinations.len() as u64 - 1);
    for (i, d) in fields.destinations.iter().enumerate() {
        p.set(HEADER_OVERHEAD_BITS + DEST_BITS * i as u32, DEST_BITS, coord_bits(*d));
    }
    Ok(Flit { kind: FlitKind::Header, payload: p, plane: fields.msg_type.plane(), packet: 0 })
}

pub fn decode_header(flit: &Flit, cfg: &NocConfig) -> Result<HeaderFields, NocError> {
    if !flit.kind.is_head() {
        return Err(NocError::CorruptHeader("not a header flit"));
    }
    let p = &flit.payload;
    if p.get(0, 2) != PREAMBLE {
        return Err(NocError::CorruptHeader("bad preamble"));
    }
    if p.get(RESERVED_SHIFT, 6) != 0 {
        return Err(NocError::CorruptHeader("reserved bits set"));
    }
    let msg_type = MsgType::from_code(p.get(MSG_SHIFT, 5)).ok_or(NocError::CorruptHeader("bad msg_type"))?;
    let count = p.get(COUNT_SHIFT, 4) as usize + 1;
    if count > cfg.capacity()? {
        return Err(NocError::CorruptHeader("destination count exceeds capacity"));
    }
    let source = bits_coord(p.get(SOURCE_SHIFT, DEST_BITS));
    let destinations =
        (0..count).map(|i| bits_coord(p.get(HEADER_OVERHEAD_BITS + DEST_BITS * i as u32, DEST_BITS))).collect();
    let fields = HeaderFields { source, destinations, msg_type };
    fields.validate(cfg).map_err(|_| NocError::CorruptHeader("invalid coordinates"))?;
    Ok(fields)
}

/// Header flit followed by one flit per body payload; the last flit is the
/// tail. With no body the header is a single-flit packet.
pub fn build_packet(fields: &HeaderFields, body: &[Payload], cfg: &NocConfig) -> Result<Vec<Flit>, NocError> {
    let mut head = encode_header(fields, cfg)?;
    let plane = head.plane;
    if body.is_empty() {
        head.kind = FlitKind::Single;
        return Ok(vec![head]);
    }
    let mut flits = Vec::with_capacity(body.len() + 1);
    flits.push(head);
    for (i, p) in body.iter().enumerate() {
        let kind = if i + 1 == body.len() { FlitKind::Tail } else { FlitKind::Body };
        flits.push(Flit::body(kind, *p, plane));
    }
    Ok(flits)
}
