// SPDX-License-Identifier: Apache-2.0

//! Memory tile: a single-port FIFO memory with fixed access latency.
//!
//! Requests are admitted in arrival order while fewer than `max_in_service`
//! are being served. An admitted request waits `access_latency` cycles
//! (`write_latency` for writes), then
//! streams `bandwidth` words per cycle. Read responses and write acks leave
//! in admission order.

use std::collections::{HashMap, VecDeque};
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noc::{decode_header, Coord, Delivered, Flit, FlitKind, HeaderFields, MsgType, NocConfig, NocError};
use crate::socket::packet::{self, flits_for, MemMeta, PacketWriter, MEM_META_BYTES};

pub const WORD_BYTES: u64 = 8;
const PAGE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryParams {
    #[serde(default = "default_latency")]
    pub access_latency: u64,
    /// Latency before a write starts committing; `access_latency` if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_latency: Option<u64>,
    /// 8-byte words per cycle per request in service.
    #[serde(default = "one")]
    pub bandwidth: u64,
    #[serde(default = "one")]
    pub max_in_service: usize,
}

fn default_latency() -> u64 {
    60
}
fn one<T: From<u8>>() -> T {
    T::from(1)
}

impl Default for MemoryParams {
    fn default() -> Self {
        Self { access_latency: 60, write_latency: None, bandwidth: 1, max_in_service: 1 }
    }
}

impl MemoryParams {
    pub fn write_latency(&self) -> u64 {
        self.write_latency.unwrap_or(self.access_latency)
    }

    pub fn validate(&self) -> Result<(), MemError> {
        if self.bandwidth == 0 {
            return Err(MemError::Config("bandwidth must be at least one word per cycle".into()));
        }
        if self.max_in_service == 0 {
            return Err(MemError::Config("max_in_service must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemError {
    #[error("malformed memory request: {0}")]
    Malformed(String),
    #[error("invalid memory configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Noc(#[from] NocError),
}

/// Byte-addressed backing store; untouched bytes read as zero.
#[derive(Debug, Clone, Default)]
pub struct SparseStore {
    pages: HashMap<u64, Box<[u8]>>,
}

impl SparseStore {
    pub fn write(&mut self, addr: u64, data: &[u8]) {
        let mut at = addr;
        let mut rest = data;
        while !rest.is_empty() {
            let off = (at % PAGE) as usize;
            let n = rest.len().min(PAGE as usize - off);
            let page = self.pages.entry(at / PAGE).or_insert_with(|| vec![0; PAGE as usize].into_boxed_slice());
            page[off..off + n].copy_from_slice(&rest[..n]);
            at += n as u64;
            rest = &rest[n..];
        }
    }

    pub fn read_into(&self, addr: u64, out: &mut [u8]) {
        let mut at = addr;
        let mut i = 0;
        while i < out.len() {
            let off = (at % PAGE) as usize;
            let n = (out.len() - i).min(PAGE as usize - off);
            match self.pages.get(&(at / PAGE)) {
                Some(p) => out[i..i + n].copy_from_slice(&p[off..off + n]),
                None => out[i..i + n].fill(0),
            }
            at += n as u64;
            i += n;
        }
    }

    pub fn read(&self, addr: u64, len: usize) -> Vec<u8> {
        let mut v = vec![0; len];
        self.read_into(addr, &mut v);
        v
    }

    pub fn touched_pages(&self) -> usize {
        self.pages.len()
    }

    /// Order-independent hash of the contents.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{DefaultHasher, Hash, Hasher};
        let mut keys: Vec<_> = self.pages.keys().copied().collect();
        keys.sort_unstable();
        let mut h = DefaultHasher::new();
        for k in keys {
            (k, &self.pages[&k]).hash(&mut h);
        }
        h.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    Read,
    Write { data: Vec<u8> },
}

#[derive(Debug, Clone)]
struct Request {
    src: Coord,
    arrived: u64,
    addr: u64,
    len: u64,
    kind: Kind,
}

#[derive(Debug, Clone)]
struct Entry {
    req: Request,
    ready_at: u64,
    /// Bytes read out or committed.
    done: u64,
    writer: Option<PacketWriter>,
    head: Option<Flit>,
    flits: VecDeque<Flit>,
    first: Option<u64>,
    last: Option<u64>,
}

impl Entry {
    fn produced(&self) -> bool {
        self.done == self.req.len
    }
}

#[derive(Debug, Clone)]
struct Incoming {
    src: Coord,
    msg: MsgType,
    meta: Vec<u8>,
    meta_flits: u64,
    data_left: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemStats {
    pub reads: u64,
    pub writes: u64,
    pub bytes_read: u64,
    pub bytes_written: u64,
    /// Cycles in which at least one request was waiting or in service.
    pub busy_cycles: u64,
    /// `queue_hist[n]` counts cycles with `n` requests waiting (last bucket
    /// collects the rest).
    pub queue_hist: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct MemoryModel {
    pub coord: Coord,
    noc: NocConfig,
    params: MemoryParams,
    pub store: SparseStore,
    incoming: Option<Incoming>,
    /// Writes whose data is still arriving, by id.
    queue: VecDeque<Request>,
    order: VecDeque<Entry>,
    tx: VecDeque<Flit>,
    pub stats: MemStats,
    /// Completed requests in completion order.
    pub log: Vec<Service>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Service {
    pub src: Coord,
    pub addr: u64,
    pub len: u64,
    pub write: bool,
    pub arrived: u64,
    pub first_word: u64,
    pub last_word: u64,
}

const HIST_BUCKETS: usize = 33;

impl MemoryModel {
    pub fn new(coord: Coord, noc: NocConfig, params: MemoryParams) -> Self {
        MemoryModel {
            coord,
            noc,
            params,
            store: SparseStore::default(),
            incoming: None,
            queue: VecDeque::new(),
            order: VecDeque::new(),
            tx: VecDeque::new(),
            stats: MemStats { queue_hist: vec![0; HIST_BUCKETS], ..Default::default() },
            log: Vec::new(),
        }
    }

    pub fn params(&self) -> &MemoryParams {
        &self.params
    }

    pub fn waiting(&self) -> usize {
        self.queue.len()
    }

    pub fn in_service(&self) -> usize {
        self.order.iter().filter(|e| !e.produced()).count()
    }

    /// Whether some admitted request is still inside its access latency.
    pub fn in_latency(&self, now: u64) -> bool {
        self.order.iter().any(|e| now < e.ready_at)
    }

    pub fn is_idle(&self) -> bool {
        self.incoming.is_none() && self.queue.is_empty() && self.order.is_empty() && self.tx.is_empty()
    }

    /// Accepts one flit ejected on the dma-request plane.
    pub fn accept(&mut self, now: u64, d: &Delivered) -> Result<(), MemError> {
        let f = &d.flit;
        let fb = self.noc.flit_bytes();
        if f.kind.is_head() {
            if self.incoming.is_some() {
                return Err(MemError::Malformed("header inside a packet".into()));
            }
            let h = decode_header(f, &self.noc)?;
            if !matches!(h.msg_type, MsgType::DmaReadRequest | MsgType::DmaWriteRequest) {
                return Err(MemError::Malformed(format!("{:?} sent to memory", h.msg_type)));
            }
            if f.kind == FlitKind::Single {
                return Err(MemError::Malformed("request without meta".into()));
            }
            self.incoming = Some(Incoming {
                src: h.source,
                msg: h.msg_type,
                meta: Vec::with_capacity(MEM_META_BYTES),
                meta_flits: flits_for(MEM_META_BYTES as u64, fb),
                data_left: 0,
            });
            return Ok(());
        }
        let Some(inc) = self.incoming.as_mut() else {
            return Err(MemError::Malformed("body flit without header".into()));
        };
        if inc.meta_flits > 0 {
            let n = (MEM_META_BYTES - inc.meta.len()).min(fb);
            f.payload.append_bytes_to(n, &mut inc.meta);
            inc.meta_flits -= 1;
            if inc.meta_flits == 0 {
                let m = MemMeta::from_bytes(&inc.meta);
                if m.len == 0 {
                    return Err(MemError::Malformed("zero-length request".into()));
                }
                let kind = match inc.msg {
                    MsgType::DmaReadRequest => Kind::Read,
                    _ => Kind::Write { data: Vec::with_capacity(m.len as usize) },
                };
                let is_read = kind == Kind::Read;
                self.queue.push_back(Request { src: inc.src, arrived: now, addr: m.addr, len: m.len as u64, kind });
                inc.data_left = if is_read { 0 } else { m.len as u64 };
                if is_read {
                    self.stats.reads += 1;
                } else {
                    self.stats.writes += 1;
                }
                let last = f.kind == FlitKind::Tail;
                if is_read != last {
                    return Err(MemError::Malformed("request length disagrees with its flits".into()));
                }
                if last {
                    self.incoming = None;
                }
            }
            return Ok(());
        }
        let n = inc.data_left.min(fb as u64) as usize;
        if n == 0 {
            return Err(MemError::Malformed("data past the request length".into()));
        }
        inc.data_left -= n as u64;
        let last = inc.data_left == 0;
        if last != (f.kind == FlitKind::Tail) {
            return Err(MemError::Malformed("write length disagrees with its flits".into()));
        }
        // the write being received is the newest request, queued or admitted
        let req = match self.queue.back_mut() {
            Some(r) => r,
            None => &mut self.order.back_mut().expect("write was queued").req,
        };
        let Kind::Write { data } = &mut req.kind else { unreachable!("write data for a read") };
        f.payload.append_bytes_to(n, data);
        if last {
            self.incoming = None;
        }
        Ok(())
    }

    /// Whether `r` conflicts with a request still in service. Two reads
    /// never conflict.
    fn conflicts(&self, r: &Request) -> bool {
        let write = matches!(r.kind, Kind::Write { .. });
        self.order.iter().any(|e| {
            (write || matches!(e.req.kind, Kind::Write { .. }))
                && !e.produced()
                && e.req.addr < r.addr + r.len
                && r.addr < e.req.addr + e.req.len
        })
    }

    pub fn step(&mut self, now: u64) -> Result<(), MemError> {
        let waiting = self.queue.len().min(HIST_BUCKETS - 1);
        self.stats.queue_hist[waiting] += 1;
        if !self.queue.is_empty() || !self.order.is_empty() {
            self.stats.busy_cycles += 1;
        }
        while self.in_service() < self.params.max_in_service {
            let Some(r) = self.queue.front() else { break };
            if self.conflicts(r) {
                break;
            }
            let req = self.queue.pop_front().expect("checked");
            let latency = match req.kind {
                Kind::Read => self.params.access_latency,
                Kind::Write { .. } => self.params.write_latency(),
            };
            let (writer, head) = match req.kind {
                Kind::Read => {
                    let fields = HeaderFields::unicast(self.coord, req.src, MsgType::DmaResponse);
                    let (w, head) = PacketWriter::start(&fields, &[req.len], &self.noc)?;
                    (Some(w), Some(head))
                }
                Kind::Write { .. } => (None, None),
            };
            self.order.push_back(Entry {
                req,
                ready_at: now + latency,
                done: 0,
                writer,
                head,
                flits: VecDeque::new(),
                first: None,
                last: None,
            });
        }
        let budget = self.params.bandwidth * WORD_BYTES;
        for e in self.order.iter_mut() {
            if e.produced() || now < e.ready_at {
                continue;
            }
            match &e.req.kind {
                Kind::Read => {
                    let n = budget.min(e.req.len - e.done);
                    let w = e.writer.as_mut().expect("reads have a writer");
                    let mut buf = vec![0; n as usize];
                    self.store.read_into(e.req.addr + e.done, &mut buf);
                    let mut rest = &buf[..];
                    while !rest.is_empty() {
                        let k = w.room().min(rest.len());
                        if let Some(f) = w.push(&rest[..k]) {
                            // the header leaves with the first data flit
                            e.flits.extend(e.head.take());
                            e.flits.push_back(f);
                        }
                        rest = &rest[k..];
                    }
                    e.first.get_or_insert(now);
                    e.done += n;
                    self.stats.bytes_read += n;
                    if e.produced() {
                        e.last = Some(now);
                    }
                }
                Kind::Write { data } => {
                    let avail = data.len() as u64 - e.done;
                    let n = budget.min(avail);
                    if n == 0 {
                        continue;
                    }
                    e.first.get_or_insert(now);
                    let lo = e.done as usize;
                    self.store.write(e.req.addr + e.done, &data[lo..lo + n as usize]);
                    e.done += n;
                    self.stats.bytes_written += n;
                    if e.produced() {
                        e.last = Some(now);
                        let fields = HeaderFields::unicast(self.coord, e.req.src, MsgType::DmaResponse);
                        e.flits.extend(packet::packet(&fields, &[], &self.noc)?);
                    }
                }
            }
        }
        while let Some(front) = self.order.front_mut() {
            self.tx.extend(front.flits.drain(..));
            if !front.produced() {
                break;
            }
            let e = self.order.pop_front().expect("front exists");
            self.log.push(Service {
                src: e.req.src,
                addr: e.req.addr,
                len: e.req.len,
                write: matches!(e.req.kind, Kind::Write { .. }),
                arrived: e.req.arrived,
                first_word: e.first.expect("served"),
                last_word: e.last.expect("served"),
            });
        }
        Ok(())
    }

    pub fn peek_tx(&self) -> Option<&Flit> {
        self.tx.front()
    }

    pub fn pop_tx(&mut self) -> Option<Flit> {
        self.tx.pop_front()
    }

    /// Writes the given regions of the backing store to `path`, back to back.
    pub fn dump(&self, path: &Path, regions: &[(u64, u64)]) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (addr, len) in regions {
            f.write_all(&self.store.read(*addr, *len as usize))?;
        }
        f.flush()
    }

    pub fn describe(&self) -> String {
        format!(
            "memory {}: {} waiting, {} in service, {} responses queued",
            self.coord,
            self.queue.len(),
            self.in_service(),
            self.tx.len()
        )
    }
}
