// SPDX-License-Identifier: Apache-2.0

//! Valid/ready channels between a socket and its accelerator.
//!
//! A channel is a two-entry registered buffer. Whether the sender may push
//! and what the receiver may pop are both decided from the state at the
//! start of the cycle, so the two ends can be stepped in any order. With
//! no stalls the channel sustains one item per cycle.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SocketError;

/// Random valid/ready deassertion applied to one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StallPattern {
    /// Probability that the sender's valid is held low in a cycle.
    pub valid: f64,
    /// Probability that the receiver's ready is held low in a cycle.
    pub ready: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
struct Stalls {
    pattern: StallPattern,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct LiChannel<T> {
    queue: VecDeque<(T, u64)>,
    capacity: usize,
    now: u64,
    start_len: usize,
    sent: bool,
    received: bool,
    valid_ok: bool,
    ready_ok: bool,
    stalls: Option<Stalls>,
    log: Option<Vec<T>>,
    transfers: u64,
}

impl<T: Clone> Default for LiChannel<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Clone> LiChannel<T> {
    pub fn new() -> Self {
        LiChannel {
            queue: VecDeque::with_capacity(2),
            capacity: 2,
            now: 0,
            start_len: 0,
            sent: false,
            received: false,
            valid_ok: true,
            ready_ok: true,
            stalls: None,
            log: None,
            transfers: 0,
        }
    }

    pub fn with_stalls(mut self, pattern: StallPattern) -> Self {
        self.stalls = Some(Stalls { pattern, rng: ChaCha8Rng::seed_from_u64(pattern.seed) });
        self
    }

    /// Keep a copy of every item handed to the receiver.
    pub fn record(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn log(&self) -> Option<&[T]> {
        self.log.as_deref()
    }

    pub fn transfers(&self) -> u64 {
        self.transfers
    }

    /// Latch the start-of-cycle state. Call once per cycle before either end
    /// acts.
    pub fn begin_cycle(&mut self, now: u64) {
        self.now = now;
        self.start_len = self.queue.len();
        self.sent = false;
        self.received = false;
        if let Some(s) = self.stalls.as_mut() {
            self.valid_ok = !s.rng.gen_bool(s.pattern.valid.clamp(0.0, 1.0));
            self.ready_ok = !s.rng.gen_bool(s.pattern.ready.clamp(0.0, 1.0));
        }
    }

    pub fn can_send(&self) -> bool {
        self.valid_ok && !self.sent && self.start_len < self.capacity
    }

    /// Offer an item. It is handed back when the channel does not take it
    /// this cycle; the sender keeps it and offers it again.
    pub fn send(&mut self, item: T) -> Result<(), T> {
        if !self.can_send() {
            return Err(item);
        }
        self.sent = true;
        self.queue.push_back((item, self.now + 1));
        Ok(())
    }

    /// The item the receiver would get this cycle.
    pub fn peek(&self) -> Option<&T> {
        if !self.ready_ok || self.received {
            return None;
        }
        match self.queue.front() {
            Some((item, at)) if *at <= self.now => Some(item),
            _ => None,
        }
    }

    pub fn recv(&mut self) -> Option<T> {
        self.peek()?;
        let (item, _) = self.queue.pop_front()?;
        self.received = true;
        self.transfers += 1;
        if let Some(log) = self.log.as_mut() {
            log.push(item.clone());
        }
        Some(item)
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }
}

/// Bytes per data word on the accelerator channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum WordSize {
    B1,
    B2,
    B4,
    B8,
}

impl WordSize {
    pub const fn bytes(self) -> usize {
        1 << self.code()
    }

    pub const fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<WordSize> {
        [WordSize::B1, WordSize::B2, WordSize::B4, WordSize::B8].get(code as usize).copied()
    }

    pub fn from_bytes(bytes: usize) -> Option<WordSize> {
        match bytes {
            1 => Some(WordSize::B1),
            2 => Some(WordSize::B2),
            4 => Some(WordSize::B4),
            8 => Some(WordSize::B8),
            _ => None,
        }
    }
}

impl TryFrom<u32> for WordSize {
    type Error = String;
    fn try_from(b: u32) -> Result<Self, String> {
        WordSize::from_bytes(b as usize).ok_or_else(|| format!("word size must be 1, 2, 4 or 8 bytes, got {b}"))
    }
}

impl From<WordSize> for u32 {
    fn from(w: WordSize) -> u32 {
        w.bytes() as u32
    }
}

/// A burst on the read or write control channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransferDescriptor {
    /// Number of words.
    pub length: u32,
    pub word_size: WordSize,
    /// Word offset into the accelerator's virtual buffer.
    pub offset: u32,
    /// Read: 0 is memory, k > 0 pulls from LUT entry k. Write: 0 is memory,
    /// d > 0 sends to d consumers.
    pub user: u8,
}

pub const USER_BITS: u32 = 5;

impl TransferDescriptor {
    pub fn dma(length: u32, word_size: WordSize, offset: u32) -> Self {
        Self { length, word_size, offset, user: 0 }
    }

    pub fn bytes(&self) -> u64 {
        self.length as u64 * self.word_size.bytes() as u64
    }

    pub fn byte_offset(&self) -> u64 {
        self.offset as u64 * self.word_size.bytes() as u64
    }

    /// `[31:0]` length, `[33:32]` word size code, `[65:34]` offset,
    /// `[70:66]` user.
    pub fn pack(&self) -> Result<u128, SocketError> {
        if self.user as u32 >= 1 << USER_BITS {
            return Err(SocketError::Descriptor(format!("user field {} does not fit in 5 bits", self.user)));
        }
        Ok(self.length as u128
            | (self.word_size.code() as u128) << 32
            | (self.offset as u128) << 34
            | (self.user as u128) << 66)
    }

    pub fn unpack(word: u128) -> Result<Self, SocketError> {
        if word >> 71 != 0 {
            return Err(SocketError::Descriptor("control word wider than 71 bits".into()));
        }
        Ok(TransferDescriptor {
            length: word as u32,
            word_size: WordSize::from_code((word >> 32) as u32 & 3).expect("2-bit code"),
            offset: (word >> 34) as u32,
            user: (word >> 66) as u8 & 0x1f,
        })
    }
}
