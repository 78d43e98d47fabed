// SPDX-License-Identifier: Apache-2.0

//! Synthetic traffic for the bare mesh.
//!
//! Every node runs an open-loop Bernoulli source per plane. Payloads are a
//! pure function of (packet, flit index) so delivery can be checked without
//! storing them. The checker enforces exactly-once delivery, per-packet
//! contiguity and order, and per-flow packet order.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::header::{build_packet, decode_header, FlitKind, HeaderFields, MsgType, Payload};
use super::{Coord, Mesh, NocError, Plane};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pattern {
    Uniform,
    /// A fraction of packets go to the hotspot node; the rest are uniform.
    Hotspot {
        node: Coord,
        fraction: f64,
    },
}

#[derive(Debug, Clone)]
pub struct TrafficSpec {
    pub pattern: Pattern,
    /// Packets per node per plane per cycle.
    pub injection_rate: f64,
    /// Body flits per packet (0 makes single-flit packets).
    pub body_flits: std::ops::RangeInclusive<usize>,
    /// Destination count range; `1..=1` is unicast.
    pub destinations: std::ops::RangeInclusive<usize>,
    pub planes: Vec<Plane>,
    pub inject_cycles: u64,
    /// Source queue bound; generation pauses while a source is this full.
    pub source_queue: usize,
    pub watchdog: u64,
    pub seed: u64,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        Self {
            pattern: Pattern::Uniform,
            injection_rate: 0.05,
            body_flits: 0..=4,
            destinations: 1..=1,
            planes: vec![Plane::DmaRequest],
            inject_cycles: 1000,
            source_queue: 8,
            watchdog: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrafficReport {
    pub packets: u64,
    pub expected_copies: u64,
    pub delivered_copies: u64,
    pub violations: Vec<String>,
    /// Cycle at which the mesh was empty after injection stopped.
    pub drained_at: u64,
    pub mean_header_latency: f64,
    pub max_header_latency: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum TrafficError {
    #[error(transparent)]
    Noc(#[from] NocError),
    #[error("no progress for {idle} cycles at cycle {cycle} with {in_flight} flits in flight\n{dump}")]
    Deadlock { cycle: u64, idle: u64, in_flight: usize, dump: String },
}

/// Payload of flit `seq` of `packet`.
pub fn payload_for(packet: u64, seq: u32) -> Payload {
    let mut x = packet.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (seq as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut limb = || {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    Payload([limb(), limb(), limb(), limb()])
}

fn masked(p: Payload, bits: u32) -> Payload {
    let mut out = p;
    for (i, limb) in out.0.iter_mut().enumerate() {
        let lo = i as u32 * 64;
        if lo >= bits {
            *limb = 0;
        } else if bits - lo < 64 {
            *limb &= (1u64 << (bits - lo)) - 1;
        }
    }
    out
}

fn violation(report: &mut TrafficReport, msg: String) {
    if report.violations.len() < 100 {
        report.violations.push(msg);
    }
}

struct PacketInfo {
    dests: Vec<Coord>,
    received: u32,
    flits: u32,
    flow_seq: Vec<u64>,
}

struct Rx {
    packet: u64,
    next_seq: u32,
}

/// Tracks delivered flits against what was injected.
#[derive(Default)]
pub struct DeliveryChecker {
    packets: HashMap<u64, PacketInfo>,
    flow_next: HashMap<(Coord, Coord, Plane), u64>,
    flow_last: HashMap<(Coord, Coord, Plane), u64>,
    rx: HashMap<(Coord, Plane), Rx>,
    bits: u32,
    pub report: TrafficReport,
    latency_sum: u64,
}

impl DeliveryChecker {
    pub fn new(bitwidth: u32) -> Self {
        Self { bits: bitwidth, ..Default::default() }
    }

    pub fn injected(&mut self, packet: u64, src: Coord, plane: Plane, dests: &[Coord], flits: u32) {
        let flow_seq = dests
            .iter()
            .map(|d| {
                let n = self.flow_next.entry((src, *d, plane)).or_insert(0);
                *n += 1;
                *n
            })
            .collect();
        self.packets.insert(packet, PacketInfo { dests: dests.to_vec(), received: 0, flits, flow_seq });
        self.report.packets += 1;
        self.report.expected_copies += dests.len() as u64;
    }

    pub fn outstanding(&self) -> usize {
        self.packets.len()
    }

    pub fn delivered(&mut self, mesh: &Mesh, node: Coord, plane: Plane, d: &super::Delivered) {
        let f = &d.flit;
        let key = (node, plane);
        if f.kind.is_head() {
            if let Some(rx) = self.rx.get(&key) {
                let msg = format!("{node}: packet {} interleaved into packet {}", f.packet, rx.packet);
                violation(&mut self.report, msg);
            }
            let lat = d.delivered_at - d.injected_at;
            self.latency_sum += lat;
            self.report.max_header_latency = self.report.max_header_latency.max(lat);
            match decode_header(f, mesh.config()) {
                Ok(h) if h.destinations == [node] => {}
                Ok(h) => violation(&mut self.report, format!("{node}: header lists {:?}", h.destinations)),
                Err(e) => violation(&mut self.report, format!("{node}: {e}")),
            }
            let Some(info) = self.packets.get(&f.packet) else {
                violation(&mut self.report, format!("{node}: unknown packet {}", f.packet));
                return;
            };
            let Some(idx) = info.dests.iter().position(|c| *c == node) else {
                violation(&mut self.report, format!("{node}: not a destination of packet {}", f.packet));
                return;
            };
            if info.received >> idx & 1 == 1 {
                violation(&mut self.report, format!("{node}: packet {} delivered twice", f.packet));
            }
            let src = decode_header(f, mesh.config()).map(|h| h.source).unwrap_or(node);
            let seq = info.flow_seq[idx];
            let last = self.flow_last.entry((src, node, plane)).or_insert(0);
            if seq <= *last {
                let msg = format!("flow {src}->{node}: packet order {seq} after {last}");
                *last = seq.max(*last);
                violation(&mut self.report, msg);
            } else {
                *last = seq;
            }
            if f.kind == FlitKind::Header {
                self.rx.insert(key, Rx { packet: f.packet, next_seq: 1 });
            } else {
                self.finish(node, f.packet, 1);
            }
            return;
        }
        let Some(rx) = self.rx.get_mut(&key) else {
            violation(&mut self.report, format!("{node}: body flit of packet {} without header", f.packet));
            return;
        };
        if rx.packet != f.packet || rx.next_seq != d.seq {
            let msg = format!(
                "{node}: got packet {} flit {}, expected packet {} flit {}",
                f.packet, d.seq, rx.packet, rx.next_seq
            );
            violation(&mut self.report, msg);
        }
        rx.next_seq += 1;
        if f.payload != masked(payload_for(f.packet, d.seq), self.bits) {
            violation(&mut self.report, format!("{node}: payload mismatch in packet {} flit {}", f.packet, d.seq));
        }
        if f.kind == FlitKind::Tail {
            let n = rx.next_seq;
            self.rx.remove(&key);
            self.finish(node, f.packet, n);
        }
    }

    fn finish(&mut self, node: Coord, packet: u64, flits: u32) {
        self.report.delivered_copies += 1;
        let Some(info) = self.packets.get_mut(&packet) else { return };
        if flits != info.flits {
            let msg = format!("{node}: packet {packet} had {flits} flits, expected {}", info.flits);
            violation(&mut self.report, msg);
        }
        if let Some(idx) = info.dests.iter().position(|c| *c == node) {
            info.received |= 1 << idx;
        }
        if info.received.count_ones() as usize == info.dests.len() {
            self.packets.remove(&packet);
        }
    }

    pub fn finalize(mut self) -> TrafficReport {
        if !self.packets.is_empty() {
            let n = self.packets.len();
            violation(&mut self.report, format!("{n} packets not fully delivered"));
        }
        if self.report.expected_copies != self.report.delivered_copies {
            let msg =
                format!("expected {} copies, delivered {}", self.report.expected_copies, self.report.delivered_copies);
            violation(&mut self.report, msg);
        }
        if self.report.delivered_copies > 0 {
            self.report.mean_header_latency = self.latency_sum as f64 / self.report.delivered_copies as f64;
        }
        self.report
    }
}

/// Drives `mesh` with `spec` until injection stops and the mesh drains.
pub fn run_traffic(mesh: &mut Mesh, spec: &TrafficSpec) -> Result<TrafficReport, TrafficError> {
    let cfg = mesh.config().clone();
    let nodes: Vec<Coord> = (0..cfg.nodes()).map(|n| cfg.node_coord(n)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut checker = DeliveryChecker::new(cfg.bitwidth);
    let mut sources: HashMap<(Coord, Plane), VecDeque<Vec<super::Flit>>> = HashMap::new();
    let mut feeding: HashMap<(Coord, Plane), VecDeque<super::Flit>> = HashMap::new();
    let max_dests = (*spec.destinations.end()).min(cfg.capacity()?).min(nodes.len());
    let start = mesh.cycle();

    loop {
        let now = mesh.cycle();
        let injecting = now - start < spec.inject_cycles;
        if injecting {
            for &src in &nodes {
                for &plane in &spec.planes {
                    let q = sources.entry((src, plane)).or_default();
                    if q.len() >= spec.source_queue || !rng.gen_bool(spec.injection_rate.min(1.0)) {
                        continue;
                    }
                    let n = rng.gen_range(*spec.destinations.start()..=max_dests);
                    let dests: Vec<Coord> = if n == 1 {
                        let d = match spec.pattern {
                            Pattern::Hotspot { node, fraction } if rng.gen_bool(fraction) => node,
                            _ => nodes[rng.gen_range(0..nodes.len())],
                        };
                        vec![d]
                    } else {
                        nodes.choose_multiple(&mut rng, n).copied().collect()
                    };
                    let body = rng.gen_range(spec.body_flits.clone());
                    let msg = match plane {
                        Plane::DmaResponse => MsgType::P2pData,
                        Plane::Misc => MsgType::Config,
                        _ => MsgType::DmaWriteRequest,
                    };
                    let mut flits =
                        build_packet(&HeaderFields::new(src, dests, msg), &vec![Payload::ZERO; body], &cfg)?;
                    for f in &mut flits {
                        f.plane = plane;
                    }
                    q.push_back(flits);
                }
            }
        }
        // feed network interfaces one packet at a time
        for &src in &nodes {
            for &plane in &spec.planes {
                let feed = feeding.entry((src, plane)).or_default();
                if feed.is_empty() {
                    if let Some(p) = sources.get_mut(&(src, plane)).and_then(VecDeque::pop_front) {
                        feed.extend(p);
                    }
                }
                if mesh.inject_queue_len(src, plane) < 2 {
                    // body payloads are bound to the packet id once the header is in
                    if let Some(f) = feed.pop_front() {
                        let head = f.kind.is_head();
                        let flits = if head { feed.len() as u32 + 1 } else { 0 };
                        let id = mesh.inject(src, f)?;
                        if head {
                            let h = decode_header(&f, &cfg)?;
                            checker.injected(id, src, plane, &h.destinations, flits);
                            for (i, g) in feed.iter_mut().enumerate() {
                                g.payload = masked(payload_for(id, i as u32 + 1), cfg.bitwidth);
                                g.packet = id;
                            }
                        }
                    }
                }
            }
        }
        mesh.step()?;
        for &node in &nodes {
            for &plane in &spec.planes {
                let got: Vec<_> = mesh.take_delivered(node, plane).collect();
                for d in &got {
                    checker.delivered(mesh, node, plane, d);
                }
            }
        }
        let pending = sources.values().any(|q| !q.is_empty()) || feeding.values().any(|q| !q.is_empty());
        if !injecting && !pending && mesh.is_drained() {
            break;
        }
        let idle = mesh.cycle() - mesh.last_progress().max(start);
        if idle > spec.watchdog && !mesh.is_drained() {
            return Err(TrafficError::Deadlock {
                cycle: mesh.cycle(),
                idle,
                in_flight: mesh.in_flight(),
                dump: mesh.describe(),
            });
        }
    }
    let mut report = checker.finalize();
    report.drained_at = mesh.cycle();
    Ok(report)
}
