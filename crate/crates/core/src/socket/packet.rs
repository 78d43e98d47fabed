// SPDX-License-Identifier: Apache-2.0

//! Packet formats used by sockets and the memory tile.
//!
//! | message        | plane        | body                                   |
//! |----------------|--------------|----------------------------------------|
//! | dma-read-request  | dma-request  | meta: addr u64, len u32              |
//! | dma-write-request | dma-request  | meta: addr u64, len u32, then data   |
//! | dma-response   | dma-response | read data, or nothing for a write ack  |
//! | p2p-request    | dma-request  | meta: len u64, consumer slot, producer slot |
//! | p2p-data       | dma-response | meta: len u32, producer slot, then data |
//!
//! Meta and data are byte streams packed little-endian into consecutive
//! body flits, `bitwidth / 8` bytes per flit. Meta and data never share a
//! flit.

use crate::noc::{encode_header, Flit, FlitKind, HeaderFields, MsgType, NocConfig, NocError, Payload};

pub const MEM_META_BYTES: usize = 12;
pub const P2P_META_BYTES: usize = 10;
pub const DATA_META_BYTES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemMeta {
    pub addr: u64,
    pub len: u32,
}

impl MemMeta {
    pub fn to_bytes(self) -> [u8; MEM_META_BYTES] {
        let mut b = [0; MEM_META_BYTES];
        b[..8].copy_from_slice(&self.addr.to_le_bytes());
        b[8..].copy_from_slice(&self.len.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> MemMeta {
        MemMeta {
            addr: u64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
            len: u32::from_le_bytes(b[8..12].try_into().expect("4 bytes")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct P2pMeta {
    pub len: u64,
    pub consumer_slot: u8,
    pub producer_slot: u8,
}

impl P2pMeta {
    pub fn to_bytes(self) -> [u8; P2P_META_BYTES] {
        let mut b = [0; P2P_META_BYTES];
        b[..8].copy_from_slice(&self.len.to_le_bytes());
        b[8] = self.consumer_slot;
        b[9] = self.producer_slot;
        b
    }

    pub fn from_bytes(b: &[u8]) -> P2pMeta {
        P2pMeta {
            len: u64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
            consumer_slot: b[8],
            producer_slot: b[9],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataMeta {
    pub len: u32,
    pub producer_slot: u8,
}

impl DataMeta {
    pub fn to_bytes(self) -> [u8; DATA_META_BYTES] {
        let mut b = [0; DATA_META_BYTES];
        b[..4].copy_from_slice(&self.len.to_le_bytes());
        b[4] = self.producer_slot;
        b
    }

    pub fn from_bytes(b: &[u8]) -> DataMeta {
        DataMeta { len: u32::from_le_bytes(b[..4].try_into().expect("4 bytes")), producer_slot: b[4] }
    }
}

pub fn flits_for(bytes: u64, flit_bytes: usize) -> u64 {
    bytes.div_ceil(flit_bytes as u64)
}

/// Builds one packet incrementally: the header first, then body bytes as
/// they become available.
#[derive(Debug, Clone)]
pub struct PacketWriter {
    flit_bytes: usize,
    /// Body flits still to emit.
    left: u64,
    /// Bytes of the current section (meta or data) still expected.
    section_left: Vec<u64>,
    buf: Vec<u8>,
    plane: crate::noc::Plane,
}

impl PacketWriter {
    /// `sections` lists the byte length of each body section. Returns the
    /// writer and the header flit.
    pub fn start(fields: &HeaderFields, sections: &[u64], cfg: &NocConfig) -> Result<(PacketWriter, Flit), NocError> {
        let mut head = encode_header(fields, cfg)?;
        let fb = cfg.flit_bytes();
        let left: u64 = sections.iter().map(|s| flits_for(*s, fb)).sum();
        if left == 0 {
            head.kind = FlitKind::Single;
        }
        let w = PacketWriter {
            flit_bytes: fb,
            left,
            section_left: sections.iter().rev().copied().filter(|s| *s > 0).collect(),
            buf: Vec::with_capacity(fb),
            plane: head.plane,
        };
        Ok((w, head))
    }

    pub fn is_done(&self) -> bool {
        self.left == 0
    }

    /// Bytes the current section still expects.
    pub fn section_remaining(&self) -> u64 {
        self.section_left.last().copied().unwrap_or(0)
    }

    /// Appends bytes to the current section; returns a completed flit if one
    /// filled up. At most one flit's worth of bytes may be pushed at a time.
    pub fn push(&mut self, bytes: &[u8]) -> Option<Flit> {
        let sec = self.section_left.last_mut().expect("push past the end of the packet");
        debug_assert!(bytes.len() as u64 <= *sec);
        *sec -= bytes.len() as u64;
        self.buf.extend_from_slice(bytes);
        debug_assert!(self.buf.len() <= self.flit_bytes);
        let section_done = *sec == 0;
        if section_done {
            self.section_left.pop();
        }
        if self.buf.len() < self.flit_bytes && !section_done {
            return None;
        }
        self.left -= 1;
        let kind = if self.left == 0 { FlitKind::Tail } else { FlitKind::Body };
        let flit = Flit::body(kind, Payload::from_bytes(&self.buf), self.plane);
        self.buf.clear();
        Some(flit)
    }

    /// Room left in the flit under construction.
    pub fn room(&self) -> usize {
        (self.flit_bytes - self.buf.len()).min(self.section_remaining() as usize)
    }
}

/// Builds a complete packet.
pub fn packet(fields: &HeaderFields, sections: &[&[u8]], cfg: &NocConfig) -> Result<Vec<Flit>, NocError> {
    let lens: Vec<u64> = sections.iter().map(|s| s.len() as u64).collect();
    let (mut w, head) = PacketWriter::start(fields, &lens, cfg)?;
    let mut out = vec![head];
    for s in sections {
        let mut rest = *s;
        while !rest.is_empty() {
            let n = w.room();
            let (a, b) = rest.split_at(n.min(rest.len()));
            out.extend(w.push(a));
            rest = b;
        }
    }
    debug_assert!(w.is_done());
    Ok(out)
}

pub fn mem_request(
    src: crate::noc::Coord,
    mem: crate::noc::Coord,
    msg: MsgType,
    meta: MemMeta,
    cfg: &NocConfig,
) -> Result<Vec<Flit>, NocError> {
    packet(&HeaderFields::unicast(src, mem, msg), &[&meta.to_bytes()], cfg)
}
