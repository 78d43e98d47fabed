// SPDX-License-Identifier: Apache-2.0

//! Network interface of an accelerator tile shared by its sockets.

use std::collections::{BTreeMap, VecDeque};

use super::SimError;
use crate::accel::TrafficGen;
use crate::noc::{decode_header, Coord, Delivered, Flit, FlitKind, Mesh, MsgType, NocConfig, Plane};
use crate::socket::packet::{DataMeta, P2pMeta, DATA_META_BYTES, P2P_META_BYTES};
use crate::socket::{ExpectKind, Peer, Socket, SocketError};

const PLANES: [Plane; 2] = [Plane::DmaRequest, Plane::DmaResponse];
const INJECT_DEPTH: usize = 2;

#[derive(Debug, Clone)]
pub struct Accel {
    pub socket: Socket,
    pub gen: TrafficGen,
}

#[derive(Debug, Clone)]
enum Rx {
    P2pRequest { src: Coord, meta: Vec<u8> },
    MemRead { slot: usize, left: u64 },
    P2pData { src: Coord, meta: Vec<u8>, targets: Vec<usize>, left: u64 },
}

#[derive(Debug, Clone)]
pub struct Hub {
    pub coord: Coord,
    owner: [Option<usize>; 2],
    rr: [usize; 2],
    expect: BTreeMap<Coord, VecDeque<(usize, ExpectKind)>>,
    rx: [Option<Rx>; 2],
}

fn protocol(msg: String) -> SimError {
    SimError::Socket(SocketError::Protocol(msg))
}

impl Hub {
    pub fn new(coord: Coord) -> Self {
        Hub { coord, owner: [None; 2], rr: [0; 2], expect: BTreeMap::new(), rx: [None, None] }
    }

    pub fn is_idle(&self) -> bool {
        self.owner.iter().all(Option::is_none)
            && self.rx.iter().all(Option::is_none)
            && self.expect.values().all(VecDeque::is_empty)
    }

    /// Moves at most one flit per plane from the sockets into the mesh.
    /// Returns the number of flits injected.
    pub fn inject(
        &mut self,
        accs: &mut [Accel],
        mesh: &mut Mesh,
        mut heads: Option<&mut Vec<Flit>>,
    ) -> Result<usize, SimError> {
        let mut sent = 0;
        for (p, plane) in PLANES.iter().enumerate() {
            if mesh.inject_queue_len(self.coord, *plane) >= INJECT_DEPTH {
                continue;
            }
            let slot = match self.owner[p] {
                Some(s) => s,
                None => {
                    let n = accs.len();
                    let Some(s) = (0..n).map(|k| (self.rr[p] + k) % n).find(|s| accs[*s].socket.has_out(p)) else {
                        continue;
                    };
                    self.rr[p] = (s + 1) % n;
                    s
                }
            };
            let out = accs[slot].socket.pop_out(p).expect("owner has a packet in progress");
            if let Some(e) = out.expect {
                self.expect.entry(e.from).or_default().push_back((slot, e.kind));
            }
            self.owner[p] = if out.flit.kind.is_last() { None } else { Some(slot) };
            if let Some(h) = heads.as_mut().filter(|_| out.flit.kind.is_head()) {
                h.push(out.flit);
            }
            mesh.inject(self.coord, out.flit)?;
            sent += 1;
        }
        Ok(sent)
    }

    fn slot_of(accs: &[Accel], slot: u8) -> Option<usize> {
        accs.iter().position(|a| a.socket.me.slot == slot)
    }

    /// Handles one flit ejected at this tile.
    pub fn receive(&mut self, accs: &mut [Accel], d: &Delivered, cfg: &NocConfig) -> Result<(), SimError> {
        let f = &d.flit;
        let p = match f.plane {
            Plane::DmaRequest => 0,
            Plane::DmaResponse => 1,
            other => return Err(protocol(format!("{}: traffic on the {other} plane", self.coord))),
        };
        let fb = cfg.flit_bytes();
        if f.kind.is_head() {
            if self.rx[p].is_some() {
                return Err(protocol(format!("{}: header inside a packet", self.coord)));
            }
            let h = decode_header(f, cfg)?;
            let rx = match h.msg_type {
                MsgType::P2pRequest => Rx::P2pRequest { src: h.source, meta: Vec::new() },
                MsgType::DmaResponse => {
                    let q = self.expect.get_mut(&h.source);
                    let Some((slot, kind)) = q.and_then(VecDeque::pop_front) else {
                        return Err(protocol(format!("{}: unexpected response from {}", self.coord, h.source)));
                    };
                    match kind {
                        ExpectKind::WriteAck if f.kind == FlitKind::Single => {
                            accs[slot].socket.deliver_ack()?;
                            return Ok(());
                        }
                        ExpectKind::Read { bytes } if f.kind == FlitKind::Header => Rx::MemRead { slot, left: bytes },
                        _ => {
                            return Err(protocol(format!("{}: response shape does not match the request", self.coord)))
                        }
                    }
                }
                MsgType::P2pData => Rx::P2pData { src: h.source, meta: Vec::new(), targets: Vec::new(), left: 0 },
                other => return Err(protocol(format!("{}: {other:?} sent to an accelerator tile", self.coord))),
            };
            if f.kind == FlitKind::Single {
                return Err(protocol(format!("{}: {:?} without a body", self.coord, h.msg_type)));
            }
            self.rx[p] = Some(rx);
            return Ok(());
        }
        let last = f.kind == FlitKind::Tail;
        let coord = self.coord;
        let Some(rx) = self.rx[p].as_mut() else {
            return Err(protocol(format!("{coord}: body flit without a header")));
        };
        match rx {
            Rx::P2pRequest { src, meta } => {
                let n = (P2P_META_BYTES - meta.len()).min(fb);
                f.payload.append_bytes_to(n, meta);
                if meta.len() == P2P_META_BYTES {
                    let m = P2pMeta::from_bytes(meta);
                    let Some(slot) = Self::slot_of(accs, m.producer_slot) else {
                        return Err(protocol(format!("{coord}: P2P request for missing slot {}", m.producer_slot)));
                    };
                    accs[slot].socket.deliver_p2p_request(Peer::new(*src, m.consumer_slot), m.len)?;
                }
            }
            Rx::MemRead { slot, left } => {
                let n = (*left).min(fb as u64) as usize;
                if n == 0 {
                    return Err(protocol(format!("{coord}: read response longer than requested")));
                }
                accs[*slot].socket.deliver_read_bytes(&f.payload.to_bytes(n))?;
                *left -= n as u64;
            }
            Rx::P2pData { src, meta, targets, left } => {
                if meta.len() < DATA_META_BYTES {
                    f.payload.append_bytes_to(DATA_META_BYTES.min(fb), meta);
                    let m = DataMeta::from_bytes(meta);
                    let from = Peer::new(*src, m.producer_slot);
                    *targets = (0..accs.len())
                        .filter(|s| accs[*s].socket.pulling().is_some_and(|(peer, _)| peer == from))
                        .collect();
                    if targets.is_empty() {
                        return Err(protocol(format!("{coord}: P2P data from {src} with no reader")));
                    }
                    *left = u64::from(m.len);
                } else {
                    let n = (*left).min(fb as u64) as usize;
                    if n == 0 {
                        return Err(protocol(format!("{coord}: P2P data longer than announced")));
                    }
                    let bytes = f.payload.to_bytes(n);
                    for s in targets.iter() {
                        accs[*s].socket.deliver_read_bytes(&bytes)?;
                    }
                    *left -= n as u64;
                }
            }
        }
        if last {
            let complete = match rx {
                Rx::P2pRequest { meta, .. } => meta.len() == P2P_META_BYTES,
                Rx::MemRead { left, .. } => *left == 0,
                Rx::P2pData { meta, left, .. } => meta.len() == DATA_META_BYTES && *left == 0,
            };
            if !complete {
                return Err(protocol(format!("{coord}: packet ended early")));
            }
            self.rx[p] = None;
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let pending: usize = self.expect.values().map(VecDeque::len).sum();
        format!(
            "hub {}: {pending} responses expected, rx {:?}",
            self.coord,
            self.rx.iter().map(Option::is_some).collect::<Vec<_>>()
        )
    }
}
