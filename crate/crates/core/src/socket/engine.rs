// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::channel::{LiChannel, TransferDescriptor};
use super::lut::{DestLut, Peer};
use super::p2p::P2pProducer;
use super::packet::{self, DataMeta, MemMeta, P2pMeta};
use super::tlb::TlbConfig;
use super::SocketError;
use crate::noc::{Coord, Flit, HeaderFields, MsgType, NocConfig, NocError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocketParams {
    /// Host configuration cost before an accelerator starts.
    #[serde(default = "default_cfg")]
    pub c_cfg: u64,
    /// Interrupt handling cost after the last write drains.
    #[serde(default = "default_irq")]
    pub c_irq: u64,
    /// Assembled outgoing data packets the socket can hold.
    #[serde(default = "default_out_packets")]
    pub out_packets: usize,
}

fn default_cfg() -> u64 {
    2000
}
fn default_irq() -> u64 {
    3000
}
fn default_out_packets() -> usize {
    2
}

impl Default for SocketParams {
    fn default() -> Self {
        Self { c_cfg: default_cfg(), c_irq: default_irq(), out_packets: default_out_packets() }
    }
}

/// What the tile must route back to this socket once a request it sent is
/// answered. The tile records it when the request header enters the NoC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectKind {
    Read { bytes: u64 },
    WriteAck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expect {
    pub from: Coord,
    pub kind: ExpectKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutFlit {
    pub flit: Flit,
    pub expect: Option<Expect>,
}

#[derive(Debug, Clone)]
struct OutPacket {
    flits: VecDeque<OutFlit>,
    data: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Configuring { until: u64 },
    Running,
    Draining,
    Interrupting { until: u64 },
    Done { at: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SocketEvent {
    Start,
    BurstStart { write: bool, user: u8, bytes: u64 },
    BurstEnd { write: bool },
    P2pRequest { to: Peer, bytes: u64 },
    CreditUpdate { from: Peer, bytes: u64 },
    Interrupt,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SocketStats {
    pub read_bursts: u64,
    pub write_bursts: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub packets_out: u64,
    pub p2p_requests: u64,
}

#[derive(Debug, Clone)]
enum ReadSource {
    Memory,
    Peer(Peer),
}

#[derive(Debug, Clone)]
struct ReadTxn {
    source: ReadSource,
    word: usize,
    expected: u64,
    received: u64,
    words_left: u32,
    rx: VecDeque<u8>,
}

#[derive(Debug, Clone)]
enum WriteMode {
    Dma { segments: VecDeque<(u64, u64)> },
    P2p { d: usize },
}

#[derive(Debug, Clone)]
struct WriteTxn {
    mode: WriteMode,
    word: usize,
    words_left: u32,
    /// Bytes not yet assigned to a packet.
    unassigned: u64,
    /// Bytes of received words not yet placed in a packet.
    carry: VecDeque<u8>,
    /// Data packet being filled: destination header, target length, bytes.
    open: Option<(HeaderFields, Option<MemMeta>, u64, Vec<u8>)>,
}

#[derive(Debug, Clone)]
pub struct Socket {
    pub me: Peer,
    noc: NocConfig,
    memory: Coord,
    params: SocketParams,
    pub tlb: TlbConfig,
    pub lut: DestLut,
    pub read_ctrl: LiChannel<TransferDescriptor>,
    pub read_data: LiChannel<u64>,
    pub write_ctrl: LiChannel<TransferDescriptor>,
    pub write_data: LiChannel<u64>,
    /// Reads in order; only the last can still be receiving.
    reads: VecDeque<ReadTxn>,
    write: Option<WriteTxn>,
    producer: Option<P2pProducer>,
    early: Vec<(Peer, u64)>,
    /// Outgoing packets for the dma-request and dma-response planes.
    out: [VecDeque<OutPacket>; 2],
    data_queued: usize,
    acks_pending: u64,
    phase: Phase,
    now: u64,
    pub events: Vec<(u64, SocketEvent)>,
    trace: bool,
    pub stats: SocketStats,
}

const REQ: usize = 0;
const RSP: usize = 1;
const READ_QUEUE: usize = 2;

impl Socket {
    pub fn new(me: Peer, noc: NocConfig, memory: Coord, tlb: TlbConfig, lut: DestLut, params: SocketParams) -> Self {
        Socket {
            me,
            noc,
            memory,
            params,
            tlb,
            lut,
            read_ctrl: LiChannel::new(),
            read_data: LiChannel::new(),
            write_ctrl: LiChannel::new(),
            write_data: LiChannel::new(),
            reads: VecDeque::new(),
            write: None,
            producer: None,
            early: Vec::new(),
            out: Default::default(),
            data_queued: 0,
            acks_pending: 0,
            phase: Phase::Idle,
            now: 0,
            events: Vec::new(),
            trace: false,
            stats: SocketStats::default(),
        }
    }

    pub fn set_trace(&mut self, on: bool) {
        self.trace = on;
    }

    fn event(&mut self, e: SocketEvent) {
        if self.trace {
            self.events.push((self.now, e));
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn params(&self) -> &SocketParams {
        &self.params
    }

    pub fn is_running(&self) -> bool {
        matches!(self.phase, Phase::Running)
    }

    pub fn completed_at(&self) -> Option<u64> {
        match self.phase {
            Phase::Done { at } => Some(at),
            _ => None,
        }
    }

    pub fn acks_pending(&self) -> u64 {
        self.acks_pending
    }

    pub fn producer(&self) -> Option<&P2pProducer> {
        self.producer.as_ref()
    }

    /// Starts an invocation: `p2p_total` sets the byte total of the P2P
    /// transaction this accelerator serves as producer, if any.
    pub fn invoke(&mut self, now: u64, p2p_total: Option<u64>) -> Result<(), SocketError> {
        if !matches!(self.phase, Phase::Idle | Phase::Done { .. }) {
            return Err(SocketError::Busy);
        }
        self.now = now;
        self.producer = p2p_total.map(P2pProducer::new);
        if let Some(p) = self.producer.as_mut() {
            for (peer, len) in self.early.drain(..) {
                p.request(peer, len)?;
            }
        }
        self.phase = Phase::Configuring { until: now + self.params.c_cfg };
        self.advance();
        Ok(())
    }

    /// The accelerator has retired its last transfer.
    pub fn finish(&mut self) {
        if self.phase == Phase::Running {
            self.phase = Phase::Draining;
            self.advance();
        }
    }

    pub fn is_quiet(&self) -> bool {
        self.reads.is_empty()
            && self.write.is_none()
            && self.acks_pending == 0
            && self.out.iter().all(VecDeque::is_empty)
    }

    fn advance(&mut self) {
        loop {
            let next = match self.phase {
                Phase::Configuring { until } if self.now >= until => Phase::Running,
                Phase::Draining if self.is_quiet() => Phase::Interrupting { until: self.now + self.params.c_irq },
                Phase::Interrupting { until } if self.now >= until => Phase::Done { at: self.now },
                _ => return,
            };
            self.phase = next;
            match next {
                Phase::Running => self.event(SocketEvent::Start),
                Phase::Done { .. } => self.event(SocketEvent::Interrupt),
                _ => {}
            }
        }
    }

    /// Moves channel items and builds packets for one cycle. Channels must
    /// have been latched with `begin_cycle`.
    pub fn step(&mut self, now: u64) -> Result<(), SocketError> {
        self.now = now;
        self.advance();
        self.step_read()?;
        self.step_write()?;
        self.advance();
        Ok(())
    }

    pub fn begin_cycle(&mut self, now: u64) {
        self.read_ctrl.begin_cycle(now);
        self.read_data.begin_cycle(now);
        self.write_ctrl.begin_cycle(now);
        self.write_data.begin_cycle(now);
    }

    fn check_desc(&self, d: &TransferDescriptor) -> Result<(), SocketError> {
        if d.length == 0 {
            return Err(SocketError::Descriptor("zero-length burst".into()));
        }
        if d.user == 0 && d.byte_offset() + d.bytes() > self.tlb.buffer_size {
            return Err(SocketError::BufferOverrun {
                offset: d.byte_offset() + d.bytes() - 1,
                size: self.tlb.buffer_size,
            });
        }
        Ok(())
    }

    fn step_read(&mut self) -> Result<(), SocketError> {
        let receiving = self.reads.back().is_some_and(|r| r.received < r.expected);
        if self.reads.len() < READ_QUEUE && !receiving {
            if let Some(d) = self.read_ctrl.recv() {
                self.start_read(d)?;
            }
        }
        let Some(r) = self.reads.front_mut() else { return Ok(()) };
        if r.words_left > 0 && r.rx.len() >= r.word && self.read_data.can_send() {
            let mut w = 0u64;
            for i in 0..r.word {
                w |= (r.rx.pop_front().expect("checked length") as u64) << (8 * i);
            }
            self.read_data.send(w).expect("checked can_send");
            r.words_left -= 1;
        }
        if r.words_left == 0 {
            self.reads.pop_front();
            self.event(SocketEvent::BurstEnd { write: false });
        }
        Ok(())
    }

    fn start_read(&mut self, d: TransferDescriptor) -> Result<(), SocketError> {
        self.check_desc(&d)?;
        self.stats.read_bursts += 1;
        let bytes = d.bytes();
        self.event(SocketEvent::BurstStart { write: false, user: d.user, bytes });
        let source = if d.user == 0 {
            for (addr, len) in self.tlb.segments(d.byte_offset(), bytes)? {
                let meta = MemMeta { addr, len: len as u32 };
                let flits = packet::mem_request(self.me.tile, self.memory, MsgType::DmaReadRequest, meta, &self.noc)?;
                let expect = Expect { from: self.memory, kind: ExpectKind::Read { bytes: len } };
                self.push_out(REQ, flits, Some(expect), false);
            }
            ReadSource::Memory
        } else {
            let peer = self.lut.lookup(d.user as usize)?;
            let meta = P2pMeta { len: bytes, consumer_slot: self.me.slot, producer_slot: peer.slot };
            let fields = HeaderFields::unicast(self.me.tile, peer.tile, MsgType::P2pRequest);
            let flits = packet::packet(&fields, &[&meta.to_bytes()], &self.noc)?;
            self.push_out(REQ, flits, None, false);
            self.stats.p2p_requests += 1;
            self.event(SocketEvent::P2pRequest { to: peer, bytes });
            ReadSource::Peer(peer)
        };
        self.reads.push_back(ReadTxn {
            source,
            word: d.word_size.bytes(),
            expected: bytes,
            received: 0,
            words_left: d.length,
            rx: VecDeque::new(),
        });
        Ok(())
    }

    fn push_out(&mut self, plane: usize, flits: Vec<Flit>, expect: Option<Expect>, data: bool) {
        debug_assert!(!flits.is_empty());
        let flits = flits
            .into_iter()
            .enumerate()
            .map(|(i, flit)| OutFlit { flit, expect: if i == 0 { expect } else { None } })
            .collect();
        self.stats.packets_out += 1;
        if data {
            self.data_queued += 1;
        }
        self.out[plane].push_back(OutPacket { flits, data });
    }

    fn step_write(&mut self) -> Result<(), SocketError> {
        if self.write.is_none() {
            if let Some(d) = self.write_ctrl.recv() {
                self.start_write(d)?;
            }
        }
        let Some(mut w) = self.write.take() else { return Ok(()) };
        if w.open.is_none() && w.unassigned > 0 {
            w.open = self.open_packet(&mut w)?;
        }
        let room = self.data_queued < self.params.out_packets;
        if room && w.words_left > 0 && w.carry.len() < w.word {
            if let Some(word) = self.write_data.recv() {
                w.carry.extend(&word.to_le_bytes()[..w.word]);
                w.words_left -= 1;
            }
        }
        if let Some((_, _, target, buf)) = w.open.as_mut() {
            let n = (*target as usize - buf.len()).min(w.carry.len());
            buf.extend(w.carry.drain(..n));
        }
        if matches!(&w.open, Some((_, _, target, buf)) if buf.len() as u64 == *target) {
            let (fields, meta, _, buf) = w.open.take().expect("checked");
            self.emit_data(fields, meta, &buf)?;
        }
        if w.words_left == 0 && w.open.is_none() && w.unassigned == 0 {
            debug_assert!(w.carry.is_empty());
            self.event(SocketEvent::BurstEnd { write: true });
        } else {
            self.write = Some(w);
        }
        Ok(())
    }

    fn start_write(&mut self, d: TransferDescriptor) -> Result<(), SocketError> {
        self.check_desc(&d)?;
        let bytes = d.bytes();
        let mode = if d.user == 0 {
            WriteMode::Dma { segments: self.tlb.segments(d.byte_offset(), bytes)?.into() }
        } else {
            let dests = d.user as usize;
            let cap = self.noc.capacity()?;
            if dests > cap {
                return Err(NocError::TooManyDestinations { count: dests, capacity: cap }.into());
            }
            if dests >= self.lut.size() {
                return Err(SocketError::Config(format!(
                    "write to {dests} consumers with a {} entry destination table",
                    self.lut.size()
                )));
            }
            if self.producer.is_none() {
                return Err(SocketError::Config("P2P write without a P2P transaction".into()));
            }
            WriteMode::P2p { d: dests }
        };
        self.stats.write_bursts += 1;
        self.event(SocketEvent::BurstStart { write: true, user: d.user, bytes });
        self.write = Some(WriteTxn {
            mode,
            word: d.word_size.bytes(),
            words_left: d.length,
            unassigned: bytes,
            carry: VecDeque::new(),
            open: None,
        });
        Ok(())
    }

    #[allow(clippy::type_complexity)]
    fn open_packet(
        &mut self,
        w: &mut WriteTxn,
    ) -> Result<Option<(HeaderFields, Option<MemMeta>, u64, Vec<u8>)>, SocketError> {
        match &mut w.mode {
            WriteMode::Dma { segments } => {
                let Some((addr, len)) = segments.pop_front() else { return Ok(None) };
                w.unassigned -= len;
                let fields = HeaderFields::unicast(self.me.tile, self.memory, MsgType::DmaWriteRequest);
                Ok(Some((fields, Some(MemMeta { addr, len: len as u32 }), len, Vec::with_capacity(len as usize))))
            }
            WriteMode::P2p { d } => {
                let p = self.producer.as_mut().expect("checked at start");
                let Some(credit) = p.sendable(*d)? else { return Ok(None) };
                if credit == 0 {
                    return Ok(None);
                }
                let n = credit.min(w.unassigned);
                p.consume(n)?;
                w.unassigned -= n;
                let tiles: BTreeSet<Coord> = p.consumers().map(|c| c.tile).collect();
                let fields = HeaderFields::new(self.me.tile, tiles.into_iter().collect(), MsgType::P2pData);
                Ok(Some((fields, None, n, Vec::with_capacity(n as usize))))
            }
        }
    }

    fn emit_data(&mut self, fields: HeaderFields, meta: Option<MemMeta>, data: &[u8]) -> Result<(), SocketError> {
        self.stats.bytes_out += data.len() as u64;
        match meta {
            Some(m) => {
                let flits = packet::packet(&fields, &[&m.to_bytes(), data], &self.noc)?;
                self.acks_pending += 1;
                let expect = Expect { from: self.memory, kind: ExpectKind::WriteAck };
                self.push_out(REQ, flits, Some(expect), true);
            }
            None => {
                let m = DataMeta { len: data.len() as u32, producer_slot: self.me.slot };
                let flits = packet::packet(&fields, &[&m.to_bytes(), data], &self.noc)?;
                self.push_out(RSP, flits, None, true);
            }
        }
        Ok(())
    }

    // tile-facing side

    /// Next outgoing flit on plane 0 (dma-request) or 1 (dma-response).
    pub fn peek_out(&self, plane: usize) -> Option<&OutFlit> {
        self.out[plane].front().and_then(|p| p.flits.front())
    }

    pub fn has_out(&self, plane: usize) -> bool {
        !self.out[plane].is_empty()
    }

    /// Takes the next flit of the packet at the head of `plane`. Packets are
    /// handed out whole and in order.
    pub fn pop_out(&mut self, plane: usize) -> Option<OutFlit> {
        let pkt = self.out[plane].front_mut()?;
        let f = pkt.flits.pop_front().expect("queued packets are nonempty");
        if pkt.flits.is_empty() {
            if pkt.data {
                self.data_queued -= 1;
            }
            self.out[plane].pop_front();
        }
        Some(f)
    }

    /// The peer this socket is currently pulling P2P data from, with the
    /// bytes it still expects.
    pub fn pulling(&self) -> Option<(Peer, u64)> {
        match self.reads.back() {
            Some(ReadTxn { source: ReadSource::Peer(p), expected, received, .. }) if received < expected => {
                Some((*p, expected - received))
            }
            _ => None,
        }
    }

    pub fn deliver_read_bytes(&mut self, bytes: &[u8]) -> Result<(), SocketError> {
        let Some(r) = self.reads.back_mut().filter(|r| r.received < r.expected) else {
            return Err(SocketError::Protocol(format!("{}: data with no read outstanding", self.me.tile)));
        };
        r.received += bytes.len() as u64;
        if r.received > r.expected {
            return Err(SocketError::Protocol(format!(
                "{}: received {} bytes for a {} byte read",
                self.me.tile, r.received, r.expected
            )));
        }
        r.rx.extend(bytes);
        self.stats.bytes_in += bytes.len() as u64;
        Ok(())
    }

    pub fn deliver_ack(&mut self) -> Result<(), SocketError> {
        if self.acks_pending == 0 {
            return Err(SocketError::Protocol(format!("{}: unexpected write ack", self.me.tile)));
        }
        self.acks_pending -= 1;
        if self.phase == Phase::Draining {
            self.advance();
        }
        Ok(())
    }

    pub fn deliver_p2p_request(&mut self, from: Peer, len: u64) -> Result<(), SocketError> {
        self.event(SocketEvent::CreditUpdate { from, bytes: len });
        match self.producer.as_mut() {
            Some(p) if !matches!(self.phase, Phase::Done { .. }) => p.request(from, len),
            _ => {
                self.early.push((from, len));
                Ok(())
            }
        }
    }

    /// One-line state summary for deadlock reports.
    pub fn describe(&self) -> String {
        let mut s = format!("socket {}/{} {:?}", self.me.tile, self.me.slot, self.phase);
        for r in &self.reads {
            let src = match r.source {
                ReadSource::Memory => "memory".to_string(),
                ReadSource::Peer(p) => format!("peer {}/{}", p.tile, p.slot),
            };
            s += &format!(" read from {src} {}/{} bytes", r.received, r.expected);
        }
        if let Some(w) = &self.write {
            s += &format!(" write {} words left, {} bytes unassigned", w.words_left, w.unassigned);
        }
        if let Some(p) = &self.producer {
            s += &format!(" producer sent {}/{}", p.sent(), p.total());
            for c in p.consumers() {
                let cr = p.credit(c).expect("listed");
                s += &format!(" [{}/{} credit {}]", c.tile, c.slot, cr.outstanding);
            }
        }
        if self.acks_pending > 0 {
            s += &format!(" acks pending {}", self.acks_pending);
        }
        s
    }
}
