// SPDX-License-Identifier: Apache-2.0

//! Identity traffic generator: reads its dataset a chunk at a time and
//! writes every chunk back out unchanged.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::dma::{DmaEngine, DmaStatus, DmaTag, IdmaDescriptor, Plm, DEFAULT_WINDOW};
use super::AccelError;
use crate::socket::{Phase, Socket, WordSize};

pub const DEFAULT_CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenJob {
    pub total_bytes: u64,
    #[serde(default = "default_ws")]
    pub word_size: WordSize,
    #[serde(default)]
    pub input_user: u8,
    #[serde(default)]
    pub input_offset: u64,
    /// Chunk `i < 64` reads from memory when bit `i` is set, whatever
    /// `input_user` says.
    #[serde(default)]
    pub memory_mask: u64,
    #[serde(default)]
    pub output_user: u8,
    #[serde(default)]
    pub output_offset: u64,
    #[serde(default = "default_chunk")]
    pub chunk_bytes: u64,
    /// Cycles spent on each chunk between its read and its write.
    #[serde(default)]
    pub compute_cycles: u64,
    #[serde(default = "yes")]
    pub double_buffer: bool,
}

fn default_ws() -> WordSize {
    WordSize::B8
}
fn default_chunk() -> u64 {
    DEFAULT_CHUNK
}
fn yes() -> bool {
    true
}

impl GenJob {
    pub fn new(total_bytes: u64) -> Self {
        GenJob {
            total_bytes,
            word_size: WordSize::B8,
            input_user: 0,
            input_offset: 0,
            memory_mask: 0,
            output_user: 0,
            output_offset: 0,
            chunk_bytes: DEFAULT_CHUNK,
            compute_cycles: 0,
            double_buffer: true,
        }
    }

    pub fn chunks(&self) -> u64 {
        self.total_bytes.div_ceil(self.chunk_bytes)
    }

    pub fn banks(&self) -> usize {
        if self.double_buffer {
            2
        } else {
            1
        }
    }

    pub fn plm_bytes(&self) -> usize {
        self.banks() * self.chunk_bytes as usize
    }

    pub fn validate(&self) -> Result<(), AccelError> {
        let ws = self.word_size.bytes() as u64;
        if self.total_bytes == 0 {
            return Err(AccelError::Argument("empty dataset".into()));
        }
        if !self.total_bytes.is_multiple_of(ws) {
            return Err(AccelError::Argument(format!(
                "dataset of {} bytes is not a multiple of the {ws} byte word",
                self.total_bytes
            )));
        }
        if self.chunk_bytes == 0 || !self.chunk_bytes.is_multiple_of(ws) {
            return Err(AccelError::Argument(format!(
                "chunk of {} bytes is not a whole number of words",
                self.chunk_bytes
            )));
        }
        if !self.input_offset.is_multiple_of(ws) || !self.output_offset.is_multiple_of(ws) {
            return Err(AccelError::Argument("buffer offsets must be word aligned".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Reading(DmaTag),
    Loaded,
    Computing { until: u64 },
    Computed,
    Writing(DmaTag),
}

#[derive(Debug, Clone, Copy)]
struct Chunk {
    index: u64,
    bank: usize,
    stage: Stage,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenStats {
    pub read_bursts: u64,
    pub write_bursts: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct TrafficGen {
    pub dma: DmaEngine,
    pub plm: Plm,
    job: Option<GenJob>,
    next_read: u64,
    live: VecDeque<Chunk>,
    free_banks: Vec<usize>,
    computing: bool,
    done: bool,
    pub stats: GenStats,
}

impl Default for TrafficGen {
    fn default() -> Self {
        Self::new()
    }
}

impl TrafficGen {
    pub fn new() -> Self {
        TrafficGen {
            dma: DmaEngine::new(DEFAULT_WINDOW),
            plm: Plm::new(2 * DEFAULT_CHUNK as usize),
            job: None,
            next_read: 0,
            live: VecDeque::new(),
            free_banks: Vec::new(),
            computing: false,
            done: false,
            stats: GenStats::default(),
        }
    }

    /// Loads a job. It starts once the socket finishes configuration.
    pub fn start(&mut self, job: GenJob) -> Result<(), AccelError> {
        job.validate()?;
        if self.job.is_some() && !self.done {
            return Err(AccelError::Busy);
        }
        if self.plm.capacity() < job.plm_bytes() {
            self.plm = Plm::new(job.plm_bytes());
        }
        self.free_banks = (0..job.banks()).rev().collect();
        self.job = Some(job);
        self.next_read = 0;
        self.live.clear();
        self.computing = false;
        self.done = false;
        self.stats = GenStats::default();
        Ok(())
    }

    pub fn job(&self) -> Option<&GenJob> {
        self.job.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_computing(&self) -> bool {
        self.computing
    }

    pub fn is_active(&self) -> bool {
        self.job.is_some() && !self.done
    }

    fn desc(job: &GenJob, index: u64, bank: usize, write: bool) -> IdmaDescriptor {
        let ws = job.word_size;
        let off = index * job.chunk_bytes;
        let bytes = job.chunk_bytes.min(job.total_bytes - off);
        let words = (bytes / ws.bytes() as u64) as u32;
        let plm = (bank as u64 * job.chunk_bytes / ws.bytes() as u64) as u32;
        if write {
            IdmaDescriptor::write(words, ws, job.output_offset + off, plm, job.output_user)
        } else {
            let user = if index < 64 && job.memory_mask >> index & 1 == 1 { 0 } else { job.input_user };
            IdmaDescriptor::read(words, ws, job.input_offset + off, plm, user)
        }
    }

    pub fn step(&mut self, now: u64, sock: &mut Socket) -> Result<(), AccelError> {
        let Some(job) = self.job else { return Ok(()) };
        if self.done || sock.phase() != Phase::Running {
            return Ok(());
        }
        self.stats.started_at.get_or_insert(now);
        self.dma.step(sock, &mut self.plm);

        for c in self.live.iter_mut() {
            match c.stage {
                Stage::Reading(t) if self.dma.cdma(t) == DmaStatus::Complete => c.stage = Stage::Loaded,
                Stage::Computing { until } if now >= until => {
                    c.stage = Stage::Computed;
                    self.computing = false;
                }
                _ => {}
            }
        }
        // chunks go through compute one at a time, in order
        if !self.computing {
            if let Some(c) = self.live.iter_mut().find(|c| !matches!(c.stage, Stage::Writing(_) | Stage::Computed)) {
                if c.stage == Stage::Loaded {
                    if job.compute_cycles == 0 {
                        c.stage = Stage::Computed;
                    } else {
                        c.stage = Stage::Computing { until: now + job.compute_cycles };
                        self.computing = true;
                    }
                }
            }
        }
        for c in self.live.iter_mut() {
            if c.stage == Stage::Computed {
                match self.dma.idma(Self::desc(&job, c.index, c.bank, true), &self.plm) {
                    Ok(tag) => {
                        c.stage = Stage::Writing(tag);
                        self.stats.write_bursts += 1;
                    }
                    Err(AccelError::ResourceExhausted) => break,
                    Err(e) => return Err(e),
                }
            }
        }
        while let Some(pos) = self
            .live
            .iter()
            .position(|c| matches!(c.stage, Stage::Writing(t) if self.dma.cdma(t) == DmaStatus::Complete))
        {
            let c = self.live.remove(pos).expect("found");
            self.free_banks.push(c.bank);
        }
        if self.next_read < job.chunks() {
            if let Some(&bank) = self.free_banks.last() {
                match self.dma.idma(Self::desc(&job, self.next_read, bank, false), &self.plm) {
                    Ok(tag) => {
                        self.free_banks.pop();
                        self.live.push_back(Chunk { index: self.next_read, bank, stage: Stage::Reading(tag) });
                        self.next_read += 1;
                        self.stats.read_bursts += 1;
                    }
                    Err(AccelError::ResourceExhausted) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        if self.next_read == job.chunks() && self.live.is_empty() {
            self.done = true;
            self.stats.finished_at = Some(now);
            sock.finish();
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match &self.job {
            None => "generator idle".into(),
            Some(job) => format!(
                "generator chunk {}/{} issued, {} live, {}",
                self.next_read,
                job.chunks(),
                self.live.len(),
                self.dma.describe()
            ),
        }
    }
}
