// SPDX-License-Identifier: Apache-2.0

//! Cycle-stepped SoC: mesh, memory tile, accelerator tiles and a host that
//! invokes accelerators and takes their interrupts.
//!
//! Each cycle runs in fixed phases: latch channels, hand ejected flits to
//! tiles, step every accelerator and the memory, let the host act, inject,
//! then step the mesh. Within a phase tiles only touch their own state, so
//! the order in which tiles are visited does not matter.

mod config;
mod hub;
mod stats;
mod trace;

use std::collections::{BTreeMap, VecDeque};
use std::hash::{DefaultHasher, Hash, Hasher};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use config::{HostParams, SocConfig, TileKind, DEFAULT_WATCHDOG};
pub use hub::{Accel, Hub};
pub use stats::{InvocationStats, LinkUse, PlaneCount, RunStats};
pub use trace::{read_ndjson, write_ndjson, EventKind, TraceEvent};

use crate::accel::{AccelError, GenJob, TrafficGen};
use crate::memsys::{MemError, MemoryModel};
use crate::noc::{decode_header, Coord, Mesh, NocError, Plane};
use crate::socket::{DestLut, Peer, Phase, Socket, SocketError, SocketEvent, TlbConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Noc(#[from] NocError),
    #[error(transparent)]
    Socket(#[from] SocketError),
    #[error(transparent)]
    Accel(#[from] AccelError),
    #[error(transparent)]
    Memory(#[from] MemError),
    #[error("deadlock: no progress since cycle {since}\n{report}")]
    Deadlock { since: u64, report: String },
    #[error("run exceeded {cycles} cycles")]
    MaxCycles { cycles: u64 },
}

/// One accelerator task for the host to launch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub acc: Peer,
    pub job: GenJob,
    pub tlb: TlbConfig,
    /// Destination table entries, index from 1.
    pub lut: Vec<(usize, Peer)>,
    /// Byte total when this accelerator produces for P2P consumers.
    pub p2p_total: Option<u64>,
    /// Invocations whose completion interrupt must arrive first.
    pub after: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum InvState {
    Waiting,
    Ready,
    Invoked { at: u64 },
    Done { invoked: u64, at: u64 },
}

#[derive(Debug, Clone)]
pub struct Tile {
    pub coord: Coord,
    pub hub: Hub,
    pub accs: Vec<Accel>,
}

#[derive(Debug, Clone)]
pub struct Soc {
    cfg: SocConfig,
    pub mesh: Mesh,
    pub memory: MemoryModel,
    pub tiles: Vec<Tile>,
    index: BTreeMap<Peer, (usize, usize)>,
    invocations: Vec<(Invocation, InvState)>,
    host_queue: VecDeque<usize>,
    host_free_at: u64,
    now: u64,
    trace: Option<Vec<TraceEvent>>,
    activity: u64,
    last_activity: u64,
    shuffle: Option<ChaCha8Rng>,
    order: Vec<usize>,
}

fn acc_name(p: Peer) -> String {
    format!("{},{}/{}", p.tile.x, p.tile.y, p.slot)
}

fn tile_name(c: Coord) -> String {
    format!("{},{}", c.x, c.y)
}

impl Soc {
    pub fn new(cfg: SocConfig) -> Result<Soc, SimError> {
        cfg.validate()?;
        let mem = cfg.memory_tile().expect("validated");
        let mesh = Mesh::new(cfg.noc.clone())?;
        let memory = MemoryModel::new(mem, cfg.noc.clone(), cfg.memory);
        let mut tiles: Vec<Tile> = Vec::new();
        let mut index = BTreeMap::new();
        let n = cfg.accelerators().len();
        for (c, slot) in cfg.accelerators() {
            if tiles.last().is_none_or(|t| t.coord != c) {
                tiles.push(Tile { coord: c, hub: Hub::new(c), accs: Vec::new() });
            }
            let me = Peer::new(c, slot);
            let socket = Socket::new(me, cfg.noc.clone(), mem, TlbConfig::default(), DestLut::new(n), cfg.socket);
            let t = tiles.len() - 1;
            index.insert(me, (t, tiles[t].accs.len()));
            tiles[t].accs.push(Accel { socket, gen: TrafficGen::new() });
        }
        let order = (0..tiles.len()).collect();
        Ok(Soc {
            cfg,
            mesh,
            memory,
            tiles,
            index,
            invocations: Vec::new(),
            host_queue: VecDeque::new(),
            host_free_at: 0,
            now: 0,
            trace: None,
            activity: 0,
            last_activity: 0,
            shuffle: None,
            order,
        })
    }

    pub fn config(&self) -> &SocConfig {
        &self.cfg
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
        for t in &mut self.tiles {
            for a in &mut t.accs {
                a.socket.set_trace(true);
            }
        }
    }

    pub fn trace(&self) -> Option<&[TraceEvent]> {
        self.trace.as_deref()
    }

    /// Visits tiles in a fresh random order every cycle. Results must not
    /// change; used to check order independence.
    pub fn shuffle_evaluation(&mut self, seed: u64) {
        self.shuffle = Some(ChaCha8Rng::seed_from_u64(seed));
    }

    pub fn accelerator(&self, p: Peer) -> Option<&Accel> {
        self.index.get(&p).map(|(t, a)| &self.tiles[*t].accs[*a])
    }

    pub fn accelerator_mut(&mut self, p: Peer) -> Option<&mut Accel> {
        self.index.get(&p).map(|(t, a)| &mut self.tiles[*t].accs[*a])
    }

    pub fn accelerators(&self) -> impl Iterator<Item = Peer> + '_ {
        self.index.keys().copied()
    }

    /// Queues an invocation; returns its index for use in `after`.
    pub fn schedule(&mut self, inv: Invocation) -> Result<usize, SimError> {
        if !self.index.contains_key(&inv.acc) {
            return Err(SimError::Config(format!("no accelerator at {}", acc_name(inv.acc))));
        }
        let id = self.invocations.len();
        if let Some(bad) = inv.after.iter().find(|d| **d >= id) {
            return Err(SimError::Config(format!("invocation {id} waits on later invocation {bad}")));
        }
        inv.job.validate()?;
        inv.tlb.validate()?;
        self.invocations.push((inv, InvState::Waiting));
        Ok(id)
    }

    pub fn all_done(&self) -> bool {
        self.invocations.iter().all(|(_, s)| matches!(s, InvState::Done { .. }))
    }

    fn event(&mut self, component: String, kind: EventKind, detail: String) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent { cycle: self.now, component, kind, detail });
        }
    }

    fn launch(&mut self, id: usize) -> Result<(), SimError> {
        let now = self.now;
        let inv = self.invocations[id].0.clone();
        let acc = self.accelerator_mut(inv.acc).expect("checked at schedule");
        let mut lut = DestLut::new(acc.socket.lut.size());
        for (k, p) in &inv.lut {
            lut.configure(*k, *p)?;
        }
        if !matches!(acc.socket.phase(), Phase::Idle | Phase::Done { .. }) {
            return Err(SocketError::Busy.into());
        }
        acc.socket.tlb = inv.tlb.clone();
        acc.socket.lut = lut;
        acc.socket.invoke(now, inv.p2p_total)?;
        acc.gen.start(inv.job)?;
        self.invocations[id].1 = InvState::Invoked { at: now };
        self.activity += 1;
        self.event(acc_name(inv.acc), EventKind::Invoke, format!("{} bytes", inv.job.total_bytes));
        Ok(())
    }

    fn host_step(&mut self) -> Result<(), SimError> {
        let now = self.now;
        for id in 0..self.invocations.len() {
            match self.invocations[id].1 {
                InvState::Waiting => {
                    let ready = self.invocations[id]
                        .0
                        .after
                        .iter()
                        .all(|d| matches!(self.invocations[*d].1, InvState::Done { .. }));
                    if ready {
                        self.invocations[id].1 = InvState::Ready;
                        self.host_queue.push_back(id);
                    }
                }
                InvState::Invoked { at } => {
                    let acc = self.invocations[id].0.acc;
                    if let Phase::Done { at: done } = self.accelerator(acc).expect("exists").socket.phase() {
                        if done >= at && done <= now {
                            self.invocations[id].1 = InvState::Done { invoked: at, at: done };
                            self.activity += 1;
                            self.event(acc_name(acc), EventKind::Interrupt, String::new());
                        }
                    }
                }
                _ => {}
            }
        }
        while let Some(&id) = self.host_queue.front() {
            if self.cfg.host.serial_config && self.host_free_at > now {
                break;
            }
            self.host_queue.pop_front();
            self.launch(id)?;
            if self.cfg.host.serial_config {
                self.host_free_at = now + self.cfg.socket.c_cfg;
            }
        }
        Ok(())
    }

    fn pending_timer(&self) -> bool {
        let now = self.now;
        self.memory.in_latency(now)
            || (!self.host_queue.is_empty() && self.host_free_at > now)
            || self.tiles.iter().flat_map(|t| &t.accs).any(|a| {
                a.gen.is_computing()
                    || matches!(a.socket.phase(), Phase::Configuring { .. } | Phase::Interrupting { .. })
            })
    }

    fn channel_transfers(&self) -> u64 {
        self.tiles
            .iter()
            .flat_map(|t| &t.accs)
            .map(|a| {
                let s = &a.socket;
                s.read_ctrl.transfers() + s.read_data.transfers() + s.write_ctrl.transfers() + s.write_data.transfers()
            })
            .sum()
    }

    /// Advances one cycle.
    pub fn step(&mut self) -> Result<(), SimError> {
        let now = self.now;
        if let Some(rng) = self.shuffle.as_mut() {
            self.order.shuffle(rng);
        }
        let before = self.channel_transfers() + self.activity;
        let order = self.order.clone();
        for &t in &order {
            for a in &mut self.tiles[t].accs {
                a.socket.begin_cycle(now);
            }
        }

        // ejected flits to their tiles
        let cfg = self.cfg.noc.clone();
        for &t in &order {
            let tile = &mut self.tiles[t];
            for plane in [Plane::DmaRequest, Plane::DmaResponse] {
                let got: Vec<_> = self.mesh.take_delivered(tile.coord, plane).collect();
                for d in got {
                    if d.flit.kind.is_head() {
                        if let Some(tr) = self.trace.as_mut() {
                            let h = decode_header(&d.flit, &cfg)?;
                            tr.push(TraceEvent {
                                cycle: now,
                                component: tile_name(tile.coord),
                                kind: EventKind::FlitRx,
                                detail: format!("{:?} from {}", h.msg_type, tile_name(h.source)),
                            });
                        }
                    }
                    tile.hub.receive(&mut tile.accs, &d, &cfg)?;
                    self.activity += 1;
                }
            }
        }
        let mem = self.memory.coord;
        let got: Vec<_> = self.mesh.take_delivered(mem, Plane::DmaRequest).collect();
        for d in got {
            self.memory.accept(now, &d)?;
            self.activity += 1;
        }
        if self.mesh.pending_delivered(mem, Plane::DmaResponse) > 0 {
            return Err(SimError::Config(format!("traffic to the memory tile {mem} on the dma-response plane")));
        }

        // accelerators and memory
        for &t in &order {
            for a in &mut self.tiles[t].accs {
                a.gen.step(now, &mut a.socket)?;
                a.socket.step(now)?;
            }
        }
        self.memory.step(now)?;
        if let Some(tr) = self.trace.as_mut() {
            for t in &order {
                for a in &mut self.tiles[*t].accs {
                    for (cycle, e) in a.socket.events.drain(..) {
                        tr.push(socket_event(cycle, a.socket.me, e));
                    }
                }
            }
        }
        self.host_step()?;

        // injection
        let mut heads = Vec::new();
        for &t in &order {
            let tile = &mut self.tiles[t];
            let sink = self.trace.is_some().then_some(&mut heads);
            let n = tile.hub.inject(&mut tile.accs, &mut self.mesh, sink)?;
            let coord = tile.coord;
            self.activity += n as u64;
            for f in heads.drain(..) {
                let name = tile_name(coord);
                let h = decode_header(&f, &cfg)?;
                let dests: Vec<String> = h.destinations.iter().map(|c| tile_name(*c)).collect();
                self.event(name, EventKind::FlitTx, format!("{:?} to {}", h.msg_type, dests.join(" ")));
            }
        }
        if self.memory.peek_tx().is_some() && self.mesh.inject_queue_len(mem, Plane::DmaResponse) < 2 {
            let f = self.memory.pop_tx().expect("peeked");
            self.mesh.inject(mem, f)?;
            self.activity += 1;
        }
        self.mesh.step()?;
        if self.mesh.last_progress() == now {
            self.activity += 1;
        }
        if self.channel_transfers() + self.activity != before || self.pending_timer() {
            self.last_activity = now;
        }
        self.now += 1;
        Ok(())
    }

    /// Steps until `stop` holds, the watchdog fires or `max_cycles` cycles
    /// have run in this call.
    pub fn run_until<F: FnMut(&Soc) -> bool>(&mut self, mut stop: F, max_cycles: u64) -> Result<RunStats, SimError> {
        assert!(max_cycles > 0, "max_cycles must be positive");
        let end = self.now + max_cycles;
        self.last_activity = self.now;
        while !stop(self) {
            if self.now >= end {
                return Err(SimError::MaxCycles { cycles: max_cycles });
            }
            self.step()?;
            if !self.all_done() && self.now - self.last_activity > self.cfg.watchdog {
                return Err(SimError::Deadlock { since: self.last_activity, report: self.describe() });
            }
        }
        Ok(self.stats())
    }

    /// Runs until every scheduled invocation has completed.
    pub fn run(&mut self, max_cycles: u64) -> Result<RunStats, SimError> {
        self.run_until(Soc::all_done, max_cycles)
    }

    pub fn stats(&self) -> RunStats {
        stats::collect(self)
    }

    fn invocation_records(&self) -> Vec<InvocationStats> {
        self.invocations
            .iter()
            .map(|(inv, s)| {
                let acc = self.accelerator(inv.acc).expect("exists");
                let (invoked_at, completed_at) = match *s {
                    InvState::Done { invoked, at } => (Some(invoked), Some(at)),
                    InvState::Invoked { at } => (Some(at), None),
                    _ => (None, None),
                };
                InvocationStats {
                    acc: acc_name(inv.acc),
                    bytes: inv.job.total_bytes,
                    invoked_at,
                    started_at: acc.gen.stats.started_at.filter(|_| invoked_at.is_some()),
                    finished_at: acc.gen.stats.finished_at.filter(|_| invoked_at.is_some()),
                    completed_at,
                }
            })
            .collect()
    }

    /// Deadlock report: router reservations, then every socket and
    /// generator, then the memory tile.
    pub fn describe(&self) -> String {
        let mut s = format!("cycle {}\n", self.now);
        s += &self.mesh.describe();
        for t in &self.tiles {
            s += &t.hub.describe();
            s.push('\n');
            for a in &t.accs {
                s += &format!("  {}\n  {}\n", a.socket.describe(), a.gen.describe());
            }
        }
        s += &self.memory.describe();
        s.push('\n');
        s
    }

    /// Hash of the whole simulation state.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.now.hash(&mut h);
        self.mesh.fingerprint().hash(&mut h);
        self.memory.store.fingerprint().hash(&mut h);
        format!("{:?}", self.memory.stats).hash(&mut h);
        format!("{:?}", self.memory.log).hash(&mut h);
        for t in &self.tiles {
            format!("{:?}", t.hub).hash(&mut h);
            for a in &t.accs {
                format!("{:?}{:?}", a.socket.describe(), a.socket.stats).hash(&mut h);
                format!("{:?}", a.gen).hash(&mut h);
            }
        }
        for (_, s) in &self.invocations {
            s.hash(&mut h);
        }
        h.finish()
    }
}

fn socket_event(cycle: u64, me: Peer, e: SocketEvent) -> TraceEvent {
    let (kind, detail) = match e {
        SocketEvent::Start => (EventKind::Invoke, "running".to_string()),
        SocketEvent::BurstStart { write, user, bytes } => {
            (EventKind::BurstStart, format!("{} user={user} {bytes} bytes", if write { "write" } else { "read" }))
        }
        SocketEvent::BurstEnd { write } => (EventKind::BurstEnd, (if write { "write" } else { "read" }).to_string()),
        SocketEvent::P2pRequest { to, bytes } => {
            (EventKind::P2pRequest, format!("{bytes} bytes from {}", acc_name(to)))
        }
        SocketEvent::CreditUpdate { from, bytes } => {
            (EventKind::CreditUpdate, format!("{bytes} bytes for {}", acc_name(from)))
        }
        SocketEvent::Interrupt => (EventKind::Interrupt, "raised".to_string()),
    };
    TraceEvent { cycle, component: acc_name(me), kind, detail }
}
