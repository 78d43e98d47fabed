// SPDX-License-Identifier: Apache-2.0

//! One producer/consumer dataflow on a SoC: memory layout, invocations and
//! the end-to-end data check.

use std::collections::BTreeSet;
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::accel::{GenJob, DEFAULT_CHUNK};
use crate::sim::{Invocation, RunStats, Soc, SocConfig};
use crate::socket::{Peer, TlbConfig, WordSize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SharedMemory,
    P2p,
    Multicast,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::SharedMemory => "shared-memory",
            Mode::P2p => "p2p",
            Mode::Multicast => "multicast",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "shared-memory" => Ok(Mode::SharedMemory),
            "p2p" => Ok(Mode::P2p),
            "multicast" => Ok(Mode::Multicast),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProducerSpec {
    pub acc: Peer,
    pub dataset_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerSpec {
    pub acc: Peer,
    /// Index into the producer list.
    #[serde(default)]
    pub pulls_from: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub producers: Vec<ProducerSpec>,
    pub consumers: Vec<ConsumerSpec>,
    pub mode: Mode,
    #[serde(default = "one")]
    pub repetitions: u32,
    #[serde(default = "default_chunk")]
    pub chunk_bytes: u64,
    #[serde(default)]
    pub compute_cycles: u64,
    #[serde(default = "yes")]
    pub double_buffer: bool,
    /// Bytes the generators move per socket beat.
    #[serde(default = "default_ws")]
    pub word_size: WordSize,
}

fn one() -> u32 {
    1
}
fn default_chunk() -> u64 {
    DEFAULT_CHUNK
}
fn yes() -> bool {
    true
}
fn default_ws() -> WordSize {
    WordSize::B8
}

impl WorkloadSpec {
    /// One producer feeding `consumers` in the given mode.
    pub fn fan_out(producer: Peer, consumers: &[Peer], bytes: u64, mode: Mode) -> Self {
        WorkloadSpec {
            producers: vec![ProducerSpec { acc: producer, dataset_bytes: bytes }],
            consumers: consumers.iter().map(|c| ConsumerSpec { acc: *c, pulls_from: 0 }).collect(),
            mode,
            repetitions: 1,
            chunk_bytes: DEFAULT_CHUNK,
            compute_cycles: 0,
            double_buffer: true,
            word_size: WordSize::B8,
        }
    }

    fn consumers_of(&self, p: usize) -> Vec<ConsumerSpec> {
        self.consumers.iter().filter(|c| c.pulls_from == p).copied().collect()
    }

    pub fn validate(&self, cfg: &SocConfig) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Workload(m));
        if self.producers.is_empty() {
            return bad("no producers".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        let accs: BTreeSet<Peer> = cfg.accelerators().into_iter().map(|(c, s)| Peer::new(c, s)).collect();
        let mut used = BTreeSet::new();
        let all = self.producers.iter().map(|p| p.acc).chain(self.consumers.iter().map(|c| c.acc));
        for a in all {
            if !accs.contains(&a) {
                return bad(format!("no accelerator at {}/{}", a.tile, a.slot));
            }
            if !used.insert(a) {
                return bad(format!("accelerator {}/{} is used twice", a.tile, a.slot));
            }
        }
        let cap = cfg.noc.capacity()?;
        for (i, p) in self.producers.iter().enumerate() {
            if p.dataset_bytes == 0 || p.dataset_bytes % self.word_size.bytes() as u64 != 0 {
                return bad(format!(
                    "producer {i}: dataset of {} bytes is not a whole number of words",
                    p.dataset_bytes
                ));
            }
            let n = self.consumers_of(i).len();
            match self.mode {
                Mode::Multicast if n < 2 || n > cap => {
                    return bad(format!(
                        "producer {i}: multicast needs 2 to {cap} consumers on a {}-bit NoC, got {n}",
                        cfg.noc.bitwidth
                    ))
                }
                Mode::P2p if n != 1 => {
                    return bad(format!("producer {i}: p2p mode needs exactly one consumer, got {n}"))
                }
                _ => {}
            }
        }
        if let Some(c) = self.consumers.iter().find(|c| c.pulls_from >= self.producers.len()) {
            return bad(format!("consumer {}/{} pulls from missing producer {}", c.acc.tile, c.acc.slot, c.pulls_from));
        }
        if self.chunk_bytes == 0 || !self.chunk_bytes.is_multiple_of(self.word_size.bytes() as u64) {
            return bad(format!("chunk of {} bytes is not a whole number of words", self.chunk_bytes));
        }
        Ok(())
    }
}

/// Physical pages backing one buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub pages: Vec<u64>,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub invocations: Vec<Invocation>,
    /// Producer inputs: region and contents.
    pub inputs: Vec<(Region, Vec<u8>)>,
    /// Consumer output regions with the index of the producer input they
    /// must equal.
    pub outputs: Vec<(Peer, Region, usize)>,
}

fn pages_for(bytes: u64, page: u64) -> u64 {
    bytes.div_ceil(page)
}

/// Lays out buffers and builds the invocations. Pages of different buffers
/// are interleaved so no buffer is physically contiguous.
pub fn plan(cfg: &SocConfig, w: &WorkloadSpec, seed: u64) -> Result<Plan, ExperimentError> {
    w.validate(cfg)?;
    let ps = cfg.page_size;
    // buffers: producer inputs, producer outputs, consumer outputs
    let mut sizes = Vec::new();
    for p in &w.producers {
        sizes.push(p.dataset_bytes);
        sizes.push(p.dataset_bytes);
    }
    for c in &w.consumers {
        sizes.push(w.producers[c.pulls_from].dataset_bytes);
    }
    let mut regions: Vec<Region> = sizes.iter().map(|b| Region { pages: Vec::new(), bytes: *b }).collect();
    let mut next = 0u64;
    loop {
        let mut any = false;
        for r in regions.iter_mut() {
            if (r.pages.len() as u64) < pages_for(r.bytes, ps) {
                r.pages.push(next * ps);
                next += 1;
                any = true;
            }
        }
        if !any {
            break;
        }
    }
    let tlb = |input: &Region, output: &Region| {
        let mut table = input.pages.clone();
        table.extend(&output.pages);
        let out_off = input.pages.len() as u64 * ps;
        (TlbConfig { page_size: ps, page_table: table, buffer_size: out_off + output.bytes }, out_off)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut invocations = Vec::new();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let job = |bytes: u64| GenJob {
        chunk_bytes: w.chunk_bytes,
        compute_cycles: w.compute_cycles,
        double_buffer: w.double_buffer,
        word_size: w.word_size,
        ..GenJob::new(bytes)
    };
    let mut producer_inv = Vec::new();
    for (i, p) in w.producers.iter().enumerate() {
        let (input, output) = (&regions[2 * i], &regions[2 * i + 1]);
        let mut data = vec![0u8; p.dataset_bytes as usize];
        rng.fill_bytes(&mut data);
        inputs.push((input.clone(), data));
        let (t, out_off) = tlb(input, output);
        let d = w.consumers_of(i).len();
        let mut j = job(p.dataset_bytes);
        j.output_offset = out_off;
        let p2p = w.mode != Mode::SharedMemory;
        if p2p {
            j.output_user = d as u8;
        }
        producer_inv.push(invocations.len());
        invocations.push(Invocation {
            acc: p.acc,
            job: j,
            tlb: t,
            lut: Vec::new(),
            p2p_total: p2p.then_some(p.dataset_bytes),
            after: Vec::new(),
        });
    }
    for (k, c) in w.consumers.iter().enumerate() {
        let p = &w.producers[c.pulls_from];
        let input = &regions[2 * c.pulls_from + 1];
        let output = &regions[2 * w.producers.len() + k];
        let (t, out_off) = tlb(input, output);
        let mut j = job(p.dataset_bytes);
        j.output_offset = out_off;
        let (lut, after) = match w.mode {
            Mode::SharedMemory => (Vec::new(), vec![producer_inv[c.pulls_from]]),
            _ => {
                j.input_user = 1;
                (vec![(1, p.acc)], Vec::new())
            }
        };
        outputs.push((c.acc, output.clone(), c.pulls_from));
        invocations.push(Invocation { acc: c.acc, job: j, tlb: t, lut, p2p_total: None, after });
    }
    Ok(Plan { invocations, inputs, outputs })
}

pub fn write_region(soc: &mut Soc, r: &Region, data: &[u8], ps: u64) {
    for (i, chunk) in data.chunks(ps as usize).enumerate() {
        soc.memory.store.write(r.pages[i], chunk);
    }
}

pub fn read_region(soc: &Soc, r: &Region, ps: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(r.bytes as usize);
    for (i, page) in r.pages.iter().enumerate() {
        let n = ps.min(r.bytes - i as u64 * ps);
        out.extend(soc.memory.store.read(*page, n as usize));
    }
    out
}

/// Outcome of one simulated run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub cycles: u64,
    pub stats: RunStats,
    pub soc: Soc,
}

/// Builds a SoC, runs the workload once and checks every consumer output.
pub fn run_once(cfg: &SocConfig, w: &WorkloadSpec, seed: u64, trace: bool) -> Result<RunOutcome, ExperimentError> {
    let plan = plan(cfg, w, seed)?;
    execute(cfg, plan, |soc| {
        if trace {
            soc.enable_trace();
        }
    })
}

/// Loads a plan's inputs, runs its invocations to completion and checks
/// every output. `setup` sees the SoC before the first cycle.
pub fn execute(cfg: &SocConfig, plan: Plan, setup: impl FnOnce(&mut Soc)) -> Result<RunOutcome, ExperimentError> {
    let mut soc = Soc::new(cfg.clone())?;
    setup(&mut soc);
    for (r, data) in &plan.inputs {
        write_region(&mut soc, r, data, cfg.page_size);
    }
    for inv in plan.invocations {
        soc.schedule(inv)?;
    }
    let stats = soc.run(u64::MAX / 2)?;
    for (acc, r, src) in &plan.outputs {
        let got = read_region(&soc, r, cfg.page_size);
        if got != plan.inputs[*src].1 {
            let at = got.iter().zip(&plan.inputs[*src].1).position(|(a, b)| a != b).unwrap_or(got.len());
            return Err(ExperimentError::DataMismatch { acc: format!("{}/{}", acc.tile, acc.slot), offset: at as u64 });
        }
    }
    let cycles = stats.makespan().expect("run completed");
    Ok(RunOutcome { cycles, stats, soc })
}
