// SPDX-License-Identifier: Apache-2.0

//! Producer/N-consumer sweeps against the shared-memory baseline.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_once, ExperimentError, Mode, WorkloadSpec};
use crate::accel::DEFAULT_CHUNK;
use crate::sim::{write_ndjson, SocConfig};
use crate::socket::Peer;

pub const DEFAULT_COUNTS: [usize; 5] = [1, 2, 4, 8, 16];
pub const DEFAULT_SIZES: [u64; 6] = [4 << 10, 16 << 10, 64 << 10, 256 << 10, 1 << 20, 4 << 20];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_counts")]
    pub consumer_counts: Vec<usize>,
    #[serde(default = "default_sizes")]
    pub data_sizes: Vec<u64>,
    /// Modes to run. `shared-memory` is the baseline every speedup is
    /// measured against; `multicast` runs as `p2p` for a single consumer.
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    /// Producer slot; the first accelerator if unset. Consumers are the
    /// following accelerators in row-major order.
    #[serde(default)]
    pub producer: Option<Peer>,
    #[serde(default = "one")]
    pub repetitions: u32,
    #[serde(default = "default_chunk")]
    pub chunk_bytes: u64,
    #[serde(default)]
    pub compute_cycles: u64,
    #[serde(default = "yes")]
    pub double_buffer: bool,
}

fn default_counts() -> Vec<usize> {
    DEFAULT_COUNTS.to_vec()
}
fn default_sizes() -> Vec<u64> {
    DEFAULT_SIZES.to_vec()
}
fn default_modes() -> Vec<Mode> {
    vec![Mode::SharedMemory, Mode::Multicast]
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

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            consumer_counts: default_counts(),
            data_sizes: default_sizes(),
            modes: default_modes(),
            producer: None,
            repetitions: 1,
            chunk_bytes: DEFAULT_CHUNK,
            compute_cycles: 0,
            double_buffer: true,
        }
    }
}

/// A sweep constraint violation, with the sweep key it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invalid {
    pub key: &'static str,
    pub message: String,
}

fn invalid<T>(key: &'static str, message: String) -> Result<T, Invalid> {
    Err(Invalid { key, message })
}

/// One simulated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub bytes: u64,
    pub consumers: usize,
    pub mode: Mode,
}

impl SweepSpec {
    pub fn producer(&self, cfg: &SocConfig) -> Option<Peer> {
        self.producer.or_else(|| cfg.accelerators().first().map(|(c, s)| Peer::new(*c, *s)))
    }

    /// The first `n` accelerators other than the producer.
    pub fn consumers(&self, cfg: &SocConfig, n: usize) -> Vec<Peer> {
        let p = self.producer(cfg);
        cfg.accelerators().into_iter().map(|(c, s)| Peer::new(c, s)).filter(|a| Some(*a) != p).take(n).collect()
    }

    pub fn mode_for(mode: Mode, consumers: usize) -> Mode {
        match mode {
            Mode::Multicast if consumers == 1 => Mode::P2p,
            m => m,
        }
    }

    pub fn points(&self) -> Vec<Point> {
        let mut v = Vec::new();
        for &bytes in &self.data_sizes {
            for &n in &self.consumer_counts {
                for &m in &self.modes {
                    v.push(Point { bytes, consumers: n, mode: Self::mode_for(m, n) });
                }
            }
        }
        v.sort();
        v.dedup();
        v
    }

    pub fn workload(&self, cfg: &SocConfig, p: Point) -> WorkloadSpec {
        let producer = self.producer(cfg).expect("validated");
        let mut w = WorkloadSpec::fan_out(producer, &self.consumers(cfg, p.consumers), p.bytes, p.mode);
        w.repetitions = self.repetitions;
        w.chunk_bytes = self.chunk_bytes;
        w.compute_cycles = self.compute_cycles;
        w.double_buffer = self.double_buffer;
        w
    }

    pub fn validate(&self, cfg: &SocConfig) -> Result<(), Invalid> {
        if self.consumer_counts.is_empty() {
            return invalid("consumer_counts", "empty sweep: give at least one consumer count".into());
        }
        if self.data_sizes.is_empty() {
            return invalid("data_sizes", "empty sweep: give at least one data size".into());
        }
        if !self.modes.contains(&Mode::SharedMemory) {
            return invalid("modes", "modes must include shared-memory, the speedup baseline".into());
        }
        if self.repetitions == 0 {
            return invalid("repetitions", "repetitions must be at least 1".into());
        }
        let Some(producer) = self.producer(cfg) else {
            return invalid("producer", "the SoC has no accelerators".into());
        };
        if !cfg.accelerators().contains(&(producer.tile, producer.slot)) {
            return invalid("producer", format!("no accelerator at {}/{}", producer.tile, producer.slot));
        }
        let available = cfg.accelerators().len() - 1;
        let cap = cfg.noc.capacity().map_err(|e| Invalid { key: "bitwidth", message: e.to_string() })?;
        for &n in &self.consumer_counts {
            if n == 0 {
                return invalid("consumer_counts", "consumer count 0".into());
            }
            if n > available {
                return invalid(
                    "consumer_counts",
                    format!("{n} consumers but the SoC has only {available} accelerators besides the producer"),
                );
            }
            for m in &self.modes {
                match Self::mode_for(*m, n) {
                    Mode::Multicast if n > cap => {
                        return invalid(
                            "consumer_counts",
                            format!(
                                "{n} consumers exceed the multicast capacity of {cap} on a {}-bit NoC",
                                cfg.noc.bitwidth
                            ),
                        )
                    }
                    Mode::P2p if n != 1 => {
                        return invalid("modes", format!("p2p mode needs exactly one consumer, got {n}"))
                    }
                    _ => {}
                }
            }
        }
        for &b in &self.data_sizes {
            if b == 0 || b % 8 != 0 {
                return invalid("data_sizes", format!("data size {b} is not a whole number of 8-byte words"));
            }
        }
        if self.chunk_bytes == 0 || !self.chunk_bytes.is_multiple_of(8) {
            return invalid(
                "chunk_bytes",
                format!("chunk of {} bytes is not a whole number of words", self.chunk_bytes),
            );
        }
        Ok(())
    }
}

/// `t_base / t_mode - 1`, in percent.
pub fn speedup_pct(t_base: u64, t_mode: u64) -> f64 {
    (t_base as f64 / t_mode as f64 - 1.0) * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mode: Mode,
    pub consumers: usize,
    pub bytes: u64,
    /// Mean over repetitions, rounded down.
    pub cycles: u64,
    pub speedup_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Sorted by size, consumer count, mode.
    pub rows: Vec<ResultRow>,
    pub traces: Vec<PathBuf>,
}

impl ResultTable {
    pub fn get(&self, mode: Mode, consumers: usize, bytes: u64) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.mode == mode && r.consumers == consumers && r.bytes == bytes)
    }

    /// Speedup of the non-baseline run at a point.
    pub fn speedup(&self, consumers: usize, bytes: u64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.mode != Mode::SharedMemory && r.consumers == consumers && r.bytes == bytes)
            .map(|r| r.speedup_pct)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub seed: u64,
    /// Directory for one trace file per run.
    pub trace_dir: Option<PathBuf>,
}

fn trace_name(p: Point, rep: u32) -> String {
    format!("{}-n{}-{}b-r{rep}.ndjson", p.mode, p.consumers, p.bytes)
}

fn run_point(
    cfg: &SocConfig,
    sweep: &SweepSpec,
    p: Point,
    opts: &RunOptions,
) -> Result<(u64, Vec<PathBuf>), ExperimentError> {
    let w = sweep.workload(cfg, p);
    let mut total = 0;
    let mut traces = Vec::new();
    for rep in 0..sweep.repetitions {
        let out = run_once(cfg, &w, opts.seed.wrapping_add(rep as u64), opts.trace_dir.is_some())?;
        total += out.cycles;
        if let Some(dir) = &opts.trace_dir {
            let path = dir.join(trace_name(p, rep));
            let f = File::create(&path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
            write_ndjson(BufWriter::new(f), out.soc.trace().unwrap_or_default())
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
            traces.push(path);
        }
    }
    Ok((total / sweep.repetitions as u64, traces))
}

type PointResult = Result<(Point, u64, Vec<PathBuf>), ExperimentError>;

/// Runs every sweep point, in parallel across `opts.workers` threads.
pub fn run_experiment(cfg: &SocConfig, sweep: &SweepSpec, opts: &RunOptions) -> Result<ResultTable, ExperimentError> {
    cfg.validate()?;
    sweep.validate(cfg).map_err(|e| ExperimentError::Workload(format!("{}: {}", e.key, e.message)))?;
    if let Some(dir) = &opts.trace_dir {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", dir.display())))?;
    }
    let points = sweep.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| ExperimentError::Io(e.to_string()))?;
    let results: Vec<PointResult> = pool.install(|| {
        points
            .par_iter()
            .map(|&p| {
                run_point(cfg, sweep, p, opts).map(|(c, t)| (p, c, t)).map_err(|e| ExperimentError::Point {
                    mode: p.mode,
                    consumers: p.consumers,
                    bytes: p.bytes,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let mut cycles = BTreeMap::new();
    let mut traces = Vec::new();
    for r in results {
        let (p, c, t) = r?;
        cycles.insert(p, c);
        traces.extend(t);
    }
    traces.sort();
    let rows = cycles
        .iter()
        .map(|(p, &c)| {
            let base = cycles[&Point { mode: Mode::SharedMemory, ..*p }];
            ResultRow {
                mode: p.mode,
                consumers: p.consumers,
                bytes: p.bytes,
                cycles: c,
                speedup_pct: speedup_pct(base, c),
            }
        })
        .collect();
    Ok(ResultTable { rows, traces })
}

fn human(bytes: u64) -> String {
    match bytes {
        b if b >= 1 << 20 && b % (1 << 20) == 0 => format!("{}MiB", b >> 20),
        b if b >= 1 << 10 && b % (1 << 10) == 0 => format!("{}KiB", b >> 10),
        b => format!("{b}B"),
    }
}

/// Speedup matrices, one per non-baseline mode: rows are consumer counts,
/// columns data sizes.
pub fn summary(table: &ResultTable, sweep: &SweepSpec) -> String {
    let mut out = String::new();
    let mut sizes = sweep.data_sizes.clone();
    sizes.sort();
    sizes.dedup();
    let mut counts = sweep.consumer_counts.clone();
    counts.sort();
    counts.dedup();
    for m in sweep.modes.iter().filter(|m| **m != Mode::SharedMemory) {
        out += &format!("speedup over shared memory, {m} (%)\n");
        out += &format!("{:>10}", "consumers");
        for s in &sizes {
            out += &format!("{:>10}", human(*s));
        }
        out += "\n";
        for &n in &counts {
            out += &format!("{n:>10}");
            for &s in &sizes {
                match table.get(SweepSpec::mode_for(*m, n), n, s) {
                    Some(r) => out += &format!("{:>10.1}", r.speedup_pct),
                    None => out += &format!("{:>10}", "-"),
                }
            }
            out += "\n";
        }
        out += "\n";
    }
    out
}

/// Writes `results.csv`, `summary.txt` and, with tracing, `traces.txt`.
pub fn emit_report(table: &ResultTable, sweep: &SweepSpec, dir: &Path) -> Result<(), ExperimentError> {
    if table.rows.is_empty() {
        return Err(ExperimentError::Workload("empty result table: nothing to report".into()));
    }
    let io = |p: &Path, e: &dyn std::fmt::Display| ExperimentError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, &e))?;
    let csv_path = dir.join("results.csv");
    write_csv(&csv_path, &table.rows)?;
    let sum = dir.join("summary.txt");
    std::fs::write(&sum, summary(table, sweep)).map_err(|e| io(&sum, &e))?;
    if !table.traces.is_empty() {
        let list = dir.join("traces.txt");
        let text: String = table.traces.iter().map(|p| format!("{}\n", p.display())).collect();
        std::fs::write(&list, text).map_err(|e| io(&list, &e))?;
    }
    Ok(())
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<(), ExperimentError> {
    let err = |e: csv::Error| ExperimentError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let err = |e: csv::Error| ExperimentError::Io(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    r.deserialize().map(|row| row.map_err(err)).collect()
}
