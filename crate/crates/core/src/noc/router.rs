// SPDX-License-Identifier: Apache-2.0

//! Single-cycle wormhole router with multicast forking.
//!
//! Each plane has five input FIFOs (N, S, E, W, local). A header flit at the
//! head of an input carries the routes of all its destinations at this
//! router, computed by the upstream router. The header departs only when
//! every output port it needs is unreserved and has downstream space; it
//! then reserves those ports until its tail leaves. Body and tail flits are
//! copied to every reserved port in lockstep.

use std::collections::VecDeque;
use std::fmt::Write as _;

use super::header::{encode_header, Flit, FlitKind, HeaderFields};
use super::routing::{fork_set, lookahead_routes, ForkSet};
use super::{Coord, Direction, NocConfig, NocError};

const PORTS: usize = 5;

/// Routing information travelling with a header flit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Lookahead {
    pub fields: HeaderFields,
    /// Direction of each destination at the router currently holding the
    /// flit, aligned with `fields.destinations`.
    pub routes: Vec<Direction>,
}

impl Lookahead {
    pub fn at(router: Coord, fields: HeaderFields) -> Lookahead {
        let routes = lookahead_routes(router, &fields.destinations);
        Lookahead { fields, routes }
    }

    pub fn fork(&self) -> ForkSet {
        fork_set(&self.fields.destinations, &self.routes)
    }
}

/// A flit inside the network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transit {
    pub flit: Flit,
    pub lookahead: Option<Box<Lookahead>>,
    /// Position of the flit within its packet.
    pub seq: u32,
    pub injected_at: u64,
}

#[derive(Debug, Clone, Hash)]
struct PlaneState {
    inputs: [VecDeque<Transit>; PORTS],
    /// Output mask of the packet currently streaming through each input.
    active: [u8; PORTS],
    /// Input owning each output.
    owner: [Option<u8>; PORTS],
    /// Round-robin pointer per output: the input with highest priority.
    rr: [u8; PORTS],
    occupancy: usize,
}

impl PlaneState {
    fn new() -> Self {
        Self { inputs: Default::default(), active: [0; PORTS], owner: [None; PORTS], rr: [0; PORTS], occupancy: 0 }
    }
}

/// One flit leaving an input this cycle, copied to every port in `outputs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Departure {
    pub input: Direction,
    pub outputs: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlaneDecision {
    pub departures: Vec<Departure>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouterDecision {
    pub planes: Vec<PlaneDecision>,
}

#[derive(Debug, Clone, Hash)]
pub struct Router {
    coord: Coord,
    depth: usize,
    planes: Vec<PlaneState>,
}

fn ports_in(mask: u8) -> impl Iterator<Item = usize> {
    (0..PORTS).filter(move |p| mask >> p & 1 == 1)
}

impl Router {
    pub fn new(coord: Coord, planes: usize, depth: usize) -> Self {
        Self { coord, depth, planes: (0..planes).map(|_| PlaneState::new()).collect() }
    }

    pub fn coord(&self) -> Coord {
        self.coord
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn queue_len(&self, plane: usize, port: Direction) -> usize {
        self.planes[plane].inputs[port.index()].len()
    }

    pub fn has_space(&self, plane: usize, port: Direction) -> bool {
        self.queue_len(plane, port) < self.depth
    }

    pub fn occupancy(&self, plane: usize) -> usize {
        self.planes[plane].occupancy
    }

    pub fn is_idle(&self) -> bool {
        self.planes.iter().all(|p| p.occupancy == 0)
    }

    pub fn owner(&self, plane: usize, output: Direction) -> Option<Direction> {
        self.planes[plane].owner[output.index()].map(|i| Direction::from_index(i as usize))
    }

    /// Places a flit arriving on `port`. Callers must respect `has_space`.
    pub fn accept(&mut self, plane: usize, port: Direction, t: Transit) {
        let st = &mut self.planes[plane];
        debug_assert!(st.inputs[port.index()].len() < self.depth, "input queue overflow");
        debug_assert!(!t.flit.kind.is_head() || t.lookahead.is_some());
        st.inputs[port.index()].push_back(t);
        st.occupancy += 1;
    }

    /// Phase one: decide departures from the current state. `space[o]` tells
    /// whether the queue behind output `o` can take a flit this cycle.
    pub fn evaluate_plane(&self, plane: usize, space: [bool; PORTS]) -> PlaneDecision {
        let st = &self.planes[plane];
        let mut decision = PlaneDecision::default();
        if st.occupancy == 0 {
            return decision;
        }
        let mut want = [0u8; PORTS];
        for (i, q) in st.inputs.iter().enumerate() {
            let Some(head) = q.front() else { continue };
            let active = st.active[i];
            if active != 0 {
                if ports_in(active).all(|o| space[o]) {
                    decision.departures.push(Departure { input: Direction::from_index(i), outputs: active });
                }
                continue;
            }
            let la = head.lookahead.as_ref().expect("packet must start with a header flit");
            let mask = la.routes.iter().fold(0u8, |m, d| m | 1 << d.index());
            if ports_in(mask).all(|o| space[o] && st.owner[o].is_none()) {
                want[i] = mask;
            }
        }
        let mut winner = [usize::MAX; PORTS];
        for (o, w) in winner.iter_mut().enumerate() {
            for k in 0..PORTS {
                let i = (st.rr[o] as usize + k) % PORTS;
                if want[i] >> o & 1 == 1 {
                    *w = i;
                    break;
                }
            }
        }
        for (i, &mask) in want.iter().enumerate() {
            if mask != 0 && ports_in(mask).all(|o| winner[o] == i) {
                decision.departures.push(Departure { input: Direction::from_index(i), outputs: mask });
            }
        }
        decision.departures.sort_by_key(|d| d.input);
        decision
    }

    pub fn evaluate(&self, space: &[[bool; PORTS]]) -> RouterDecision {
        RouterDecision { planes: (0..self.planes.len()).map(|p| self.evaluate_plane(p, space[p])).collect() }
    }

    /// Phase two: apply a decision. Returns every outgoing copy with its
    /// output port; header copies are rewritten with the destination sublist
    /// of their branch and carry the lookahead routes of the next router.
    pub fn commit_plane(
        &mut self,
        cfg: &NocConfig,
        plane: usize,
        decision: &PlaneDecision,
    ) -> Result<Vec<(Direction, Transit)>, NocError> {
        let coord = self.coord;
        let st = &mut self.planes[plane];
        let mut out = Vec::new();
        for dep in &decision.departures {
            let i = dep.input.index();
            let t = st.inputs[i].pop_front().expect("decided departure has a flit");
            st.occupancy -= 1;
            let kind = t.flit.kind;
            if kind.is_head() {
                let la = t.lookahead.as_ref().expect("header carries lookahead");
                let fork = la.fork();
                debug_assert_eq!(fork.port_mask(), dep.outputs);
                for (port, dests) in &fork.branches {
                    let fields = HeaderFields {
                        source: la.fields.source,
                        destinations: dests.clone(),
                        msg_type: la.fields.msg_type,
                    };
                    let mut flit = encode_header(&fields, cfg)?;
                    flit.kind = kind;
                    flit.packet = t.flit.packet;
                    let next = if *port == Direction::Local {
                        coord
                    } else {
                        coord.step(*port, cfg.mesh_cols, cfg.mesh_rows).expect("DOR never routes off the mesh")
                    };
                    let lookahead = Some(Box::new(Lookahead::at(next, fields)));
                    out.push((*port, Transit { flit, lookahead, seq: t.seq, injected_at: t.injected_at }));
                    st.rr[port.index()] = ((i + 1) % PORTS) as u8;
                }
                if kind == FlitKind::Header {
                    for o in ports_in(dep.outputs) {
                        st.owner[o] = Some(i as u8);
                    }
                    st.active[i] = dep.outputs;
                }
            } else {
                for o in ports_in(dep.outputs) {
                    let copy = Transit { lookahead: None, ..t.clone() };
                    out.push((Direction::from_index(o), copy));
                }
                if kind == FlitKind::Tail {
                    for o in ports_in(dep.outputs) {
                        st.owner[o] = None;
                    }
                    st.active[i] = 0;
                }
            }
        }
        Ok(out)
    }

    /// Evaluate and commit one plane in isolation.
    pub fn cycle_plane(
        &mut self,
        cfg: &NocConfig,
        plane: usize,
        space: [bool; PORTS],
    ) -> Result<Vec<(Direction, Transit)>, NocError> {
        let d = self.evaluate_plane(plane, space);
        self.commit_plane(cfg, plane, &d)
    }

    /// Human-readable reservation and queue dump for deadlock reports.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        for (p, st) in self.planes.iter().enumerate() {
            if st.occupancy == 0 && st.owner.iter().all(Option::is_none) {
                continue;
            }
            let _ = write!(s, "router {} plane {p}:", self.coord);
            for o in 0..PORTS {
                if let Some(i) = st.owner[o] {
                    let _ = write!(s, " {:?}<-{:?}", Direction::from_index(o), Direction::from_index(i as usize));
                }
            }
            for (i, q) in st.inputs.iter().enumerate() {
                if !q.is_empty() {
                    let _ = write!(s, " q[{:?}]={}", Direction::from_index(i), q.len());
                }
            }
            s.push('\n');
        }
        s
    }
}
