// SPDX-License-Identifier: Apache-2.0

//! Asynchronous DMA issue (`idma`) and status polling (`cdma`).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::AccelError;
use crate::socket::{Socket, TransferDescriptor, WordSize, USER_BITS};

pub const DEFAULT_WINDOW: usize = 8;

/// Accelerator scratchpad.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plm {
    bytes: Vec<u8>,
}

impl Plm {
    pub fn new(capacity: usize) -> Self {
        Plm { bytes: vec![0; capacity] }
    }

    pub fn capacity(&self) -> usize {
        self.bytes.len()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bytes_mut(&mut self) -> &mut [u8] {
        &mut self.bytes
    }

    /// Word `addr` in units of `ws`.
    pub fn read_word(&self, addr: usize, ws: WordSize) -> u64 {
        let n = ws.bytes();
        let mut b = [0u8; 8];
        b[..n].copy_from_slice(&self.bytes[addr * n..addr * n + n]);
        u64::from_le_bytes(b)
    }

    pub fn write_word(&mut self, addr: usize, ws: WordSize, w: u64) {
        let n = ws.bytes();
        self.bytes[addr * n..addr * n + n].copy_from_slice(&w.to_le_bytes()[..n]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdmaDescriptor {
    pub direction: Direction,
    /// Words.
    pub length: u32,
    pub word_size: WordSize,
    /// Bytes into the virtual buffer; a multiple of the word size.
    pub virtual_offset: u64,
    /// PLM word address, in units of `word_size`.
    pub plm_addr: u32,
    /// Source index for reads, destination count for writes; 0 is memory.
    pub user: u8,
}

impl IdmaDescriptor {
    pub fn read(length: u32, word_size: WordSize, virtual_offset: u64, plm_addr: u32, user: u8) -> Self {
        Self { direction: Direction::Read, length, word_size, virtual_offset, plm_addr, user }
    }

    pub fn write(length: u32, word_size: WordSize, virtual_offset: u64, plm_addr: u32, user: u8) -> Self {
        Self { direction: Direction::Write, length, word_size, virtual_offset, plm_addr, user }
    }

    pub fn transfer(&self) -> TransferDescriptor {
        TransferDescriptor {
            length: self.length,
            word_size: self.word_size,
            offset: (self.virtual_offset / self.word_size.bytes() as u64) as u32,
            user: self.user,
        }
    }
}

/// Identifies one DMA transaction. `generation` tells a stale handle from a
/// reused tag value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DmaTag {
    pub value: u8,
    pub generation: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmaStatus {
    InFlight,
    Complete,
    UnknownTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Unused,
    InFlight(u32),
    Complete(u32),
}

#[derive(Debug, Clone)]
struct Xfer {
    tag: DmaTag,
    desc: IdmaDescriptor,
    ctrl_sent: bool,
    words_done: u32,
}

#[derive(Debug, Clone)]
pub struct DmaEngine {
    slots: Vec<Slot>,
    generation: u32,
    next: usize,
    reads: VecDeque<Xfer>,
    writes: VecDeque<Xfer>,
}

impl Default for DmaEngine {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW)
    }
}

impl DmaEngine {
    pub fn new(window: usize) -> Self {
        assert!((1..=256).contains(&window), "tag window must be 1..=256");
        DmaEngine {
            slots: vec![Slot::Unused; window],
            generation: 0,
            next: 0,
            reads: VecDeque::new(),
            writes: VecDeque::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.slots.len()
    }

    pub fn in_flight(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s, Slot::InFlight(_))).count()
    }

    pub fn in_flight_tags(&self) -> Vec<DmaTag> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                Slot::InFlight(g) => Some(DmaTag { value: i as u8, generation: *g }),
                _ => None,
            })
            .collect()
    }

    pub fn is_idle(&self) -> bool {
        self.reads.is_empty() && self.writes.is_empty()
    }

    /// Queues a transfer and returns its tag. Tags are handed out round
    /// robin from those not in flight.
    pub fn idma(&mut self, desc: IdmaDescriptor, plm: &Plm) -> Result<DmaTag, AccelError> {
        if desc.length == 0 {
            return Err(AccelError::Argument("zero-length transfer".into()));
        }
        if desc.user >= 1 << USER_BITS {
            return Err(AccelError::Argument(format!("user field {} does not fit", desc.user)));
        }
        let ws = desc.word_size.bytes() as u64;
        if !desc.virtual_offset.is_multiple_of(ws) {
            return Err(AccelError::Argument(format!("offset {} is not word aligned", desc.virtual_offset)));
        }
        if desc.virtual_offset / ws > u32::MAX as u64 {
            return Err(AccelError::Argument(format!("offset {} is out of range", desc.virtual_offset)));
        }
        let end = (desc.plm_addr as u64 + desc.length as u64) * ws;
        if end > plm.capacity() as u64 {
            return Err(AccelError::Argument(format!(
                "transfer ends at PLM byte {end}, capacity is {}",
                plm.capacity()
            )));
        }
        let n = self.slots.len();
        let Some(i) = (0..n).map(|k| (self.next + k) % n).find(|i| !matches!(self.slots[*i], Slot::InFlight(_))) else {
            return Err(AccelError::ResourceExhausted);
        };
        self.generation += 1;
        self.slots[i] = Slot::InFlight(self.generation);
        self.next = (i + 1) % n;
        let tag = DmaTag { value: i as u8, generation: self.generation };
        let x = Xfer { tag, desc, ctrl_sent: false, words_done: 0 };
        match desc.direction {
            Direction::Read => self.reads.push_back(x),
            Direction::Write => self.writes.push_back(x),
        }
        Ok(tag)
    }

    pub fn cdma(&self, tag: DmaTag) -> DmaStatus {
        match self.slots.get(tag.value as usize) {
            Some(Slot::InFlight(g)) if *g == tag.generation => DmaStatus::InFlight,
            Some(Slot::Complete(g)) if *g == tag.generation => DmaStatus::Complete,
            _ => DmaStatus::UnknownTag,
        }
    }

    fn retire(&mut self, tag: DmaTag) {
        self.slots[tag.value as usize] = Slot::Complete(tag.generation);
    }

    /// Moves at most one item per channel between the socket and the PLM.
    pub fn step(&mut self, sock: &mut Socket, plm: &mut Plm) {
        if let Some(x) = self.reads.iter_mut().find(|x| !x.ctrl_sent) {
            if sock.read_ctrl.send(x.desc.transfer()).is_ok() {
                x.ctrl_sent = true;
            }
        }
        if let Some(x) = self.reads.front_mut().filter(|x| x.ctrl_sent) {
            if let Some(w) = sock.read_data.recv() {
                plm.write_word(x.desc.plm_addr as usize + x.words_done as usize, x.desc.word_size, w);
                x.words_done += 1;
                if x.words_done == x.desc.length {
                    let tag = x.tag;
                    self.reads.pop_front();
                    self.retire(tag);
                }
            }
        }
        if let Some(x) = self.writes.iter_mut().find(|x| !x.ctrl_sent) {
            if sock.write_ctrl.send(x.desc.transfer()).is_ok() {
                x.ctrl_sent = true;
            }
        }
        if let Some(x) = self.writes.front_mut().filter(|x| x.ctrl_sent) {
            let w = plm.read_word(x.desc.plm_addr as usize + x.words_done as usize, x.desc.word_size);
            if sock.write_data.send(w).is_ok() {
                x.words_done += 1;
                if x.words_done == x.desc.length {
                    let tag = x.tag;
                    self.writes.pop_front();
                    self.retire(tag);
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        let mut s = format!("dma: {} tags in flight", self.in_flight());
        if let Some(x) = self.reads.front() {
            s += &format!(", read {}/{} words", x.words_done, x.desc.length);
        }
        if let Some(x) = self.writes.front() {
            s += &format!(", write {}/{} words", x.words_done, x.desc.length);
        }
        s
    }
}
