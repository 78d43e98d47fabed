// SPDX-License-Identifier: Apache-2.0

//! Mesh of routers with one network interface per tile and plane.
//!
//! `step` is two-phase: every router decides from the state at the start of
//! the cycle, then all decisions are applied together. A flit entering a
//! router queue at cycle `c` can leave it at cycle `c`, and is in the next
//! router's queue at `c + 1`.

use std::collections::{HashMap, VecDeque};
use std::hash::{DefaultHasher, Hash, Hasher};

use super::header::{decode_header, Flit};
use super::router::{Lookahead, Router, Transit};
use super::{Coord, Direction, NocConfig, NocError, Plane};

/// A directed link: output `port` of the router at `node` on `plane`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId {
    pub node: Coord,
    pub port: Direction,
    pub plane: Plane,
}

/// A flit handed to a tile by its router's local output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivered {
    pub flit: Flit,
    pub seq: u32,
    pub injected_at: u64,
    pub delivered_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MeshStats {
    /// Flits that entered a source router, per plane index.
    pub injected: Vec<u64>,
    /// Flit copies handed to tiles, per plane index.
    pub delivered: Vec<u64>,
    /// Extra copies created by multicast forks, per plane index.
    pub replicated: Vec<u64>,
    /// Flits sent on each inter-router link, indexed by `Mesh::link_index`.
    pub link_flits: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    cfg: NocConfig,
    routers: Vec<Router>,
    /// Network-interface output queues, `[node][plane]`.
    inject: Vec<Vec<VecDeque<(Flit, u32)>>>,
    /// Packet id and next flit sequence number of the packet being injected.
    open: Vec<Vec<(u64, u32)>>,
    ejected: Vec<Vec<VecDeque<Delivered>>>,
    cycle: u64,
    /// Packets started per node; ids are `count * nodes + node + 1`.
    started: Vec<u64>,
    stats: MeshStats,
    link_trace: Option<HashMap<(LinkId, u64, u32), u32>>,
    last_progress: u64,
}

impl Mesh {
    pub fn new(cfg: NocConfig) -> Result<Mesh, NocError> {
        cfg.validate()?;
        let nodes = cfg.nodes();
        let planes = cfg.planes.len();
        let routers = (0..nodes).map(|n| Router::new(cfg.node_coord(n), planes, cfg.queue_depth)).collect();
        let stats = MeshStats {
            injected: vec![0; planes],
            delivered: vec![0; planes],
            replicated: vec![0; planes],
            link_flits: vec![0; nodes * 5 * planes],
        };
        Ok(Mesh {
            routers,
            inject: vec![vec![VecDeque::new(); planes]; nodes],
            open: vec![vec![(0, 0); planes]; nodes],
            ejected: vec![vec![VecDeque::new(); planes]; nodes],
            cfg,
            cycle: 0,
            started: vec![0; nodes],
            stats,
            link_trace: None,
            last_progress: 0,
        })
    }

    pub fn config(&self) -> &NocConfig {
        &self.cfg
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn stats(&self) -> &MeshStats {
        &self.stats
    }

    pub fn router(&self, c: Coord) -> &Router {
        &self.routers[self.cfg.node_index(c)]
    }

    /// Cycle in which a flit last moved anywhere in the mesh.
    pub fn last_progress(&self) -> u64 {
        self.last_progress
    }

    /// Records every (link, packet, flit) traversal; used to check that a
    /// multicast crosses each link once.
    pub fn enable_link_trace(&mut self) {
        self.link_trace = Some(HashMap::new());
    }

    pub fn link_trace(&self) -> Option<&HashMap<(LinkId, u64, u32), u32>> {
        self.link_trace.as_ref()
    }

    pub fn link_index(&self, link: LinkId) -> usize {
        let p = self.cfg.plane_index(link.plane).expect("plane configured");
        (self.cfg.node_index(link.node) * 5 + link.port.index()) * self.cfg.planes.len() + p
    }

    pub fn link_flits(&self, link: LinkId) -> u64 {
        self.stats.link_flits[self.link_index(link)]
    }

    fn plane_idx(&self, plane: Plane) -> Result<usize, NocError> {
        self.cfg.plane_index(plane).ok_or_else(|| NocError::Config(format!("plane {plane} not configured")))
    }

    /// Queues a flit at the network interface of `node`. Header flits are
    /// validated here. Returns the packet id the flit belongs to.
    pub fn inject(&mut self, node: Coord, flit: Flit) -> Result<u64, NocError> {
        self.cfg.check_coord(node)?;
        let p = self.plane_idx(flit.plane)?;
        let n = self.cfg.node_index(node);
        let mut flit = flit;
        if flit.kind.is_head() {
            let fields = decode_header(&flit, &self.cfg)?;
            if fields.source != node {
                return Err(NocError::Config(format!("header source {} injected at {node}", fields.source)));
            }
            self.open[n][p] = (self.started[n] * self.cfg.nodes() as u64 + n as u64 + 1, 0);
            self.started[n] += 1;
        } else if self.open[n][p].0 == 0 {
            return Err(NocError::CorruptHeader("body flit without a header"));
        }
        flit.packet = self.open[n][p].0;
        let seq = self.open[n][p].1;
        self.open[n][p].1 += 1;
        self.inject[n][p].push_back((flit, seq));
        if flit.kind.is_last() {
            self.open[n][p].0 = 0;
        }
        Ok(flit.packet)
    }

    pub fn inject_queue_len(&self, node: Coord, plane: Plane) -> usize {
        match self.cfg.plane_index(plane) {
            Some(p) => self.inject[self.cfg.node_index(node)][p].len(),
            None => 0,
        }
    }

    pub fn take_delivered(&mut self, node: Coord, plane: Plane) -> impl Iterator<Item = Delivered> + '_ {
        let p = self.cfg.plane_index(plane);
        let n = self.cfg.node_index(node);
        let q = match p {
            Some(p) => std::mem::take(&mut self.ejected[n][p]),
            None => VecDeque::new(),
        };
        q.into_iter()
    }

    pub fn pending_delivered(&self, node: Coord, plane: Plane) -> usize {
        self.cfg.plane_index(plane).map_or(0, |p| self.ejected[self.cfg.node_index(node)][p].len())
    }

    /// Flits buffered inside routers or interfaces (not yet delivered).
    pub fn in_flight(&self) -> usize {
        let routers: usize =
            self.routers.iter().map(|r| (0..self.cfg.planes.len()).map(|p| r.occupancy(p)).sum::<usize>()).sum();
        let nis: usize = self.inject.iter().flatten().map(VecDeque::len).sum();
        routers + nis
    }

    pub fn in_flight_plane(&self, plane: usize) -> (usize, usize) {
        let routers = self.routers.iter().map(|r| r.occupancy(plane)).sum();
        let nis = self.inject.iter().map(|q| q[plane].len()).sum();
        (routers, nis)
    }

    pub fn is_drained(&self) -> bool {
        self.in_flight() == 0
    }

    pub fn step(&mut self) -> Result<(), NocError> {
        let order: Vec<usize> = (0..self.routers.len()).collect();
        self.step_in_order(&order)
    }

    /// One cycle, visiting routers in `order` in both phases. The result
    /// does not depend on `order`.
    pub fn step_in_order(&mut self, order: &[usize]) -> Result<(), NocError> {
        debug_assert_eq!(order.len(), self.routers.len());
        let planes = self.cfg.planes.len();
        let (cols, rows) = (self.cfg.mesh_cols, self.cfg.mesh_rows);

        // phase 1: decide from the snapshot
        let mut decisions = Vec::new();
        let mut accept_inject = Vec::new();
        for &n in order {
            let r = &self.routers[n];
            let c = r.coord();
            for p in 0..planes {
                if !self.inject[n][p].is_empty() && r.has_space(p, Direction::Local) {
                    accept_inject.push((n, p));
                }
                if r.occupancy(p) == 0 {
                    continue;
                }
                let mut space = [true; 5];
                for dir in [Direction::North, Direction::South, Direction::East, Direction::West] {
                    space[dir.index()] = match c.step(dir, cols, rows) {
                        Some(nb) => self.routers[self.cfg.node_index(nb)].has_space(p, dir.opposite()),
                        None => false,
                    };
                }
                let pd = r.evaluate_plane(p, space);
                if !pd.departures.is_empty() {
                    decisions.push((n, p, pd));
                }
            }
        }

        // phase 2: apply
        let now = self.cycle;
        let mut moved = false;
        let mut arrivals: Vec<(usize, usize, Direction, Transit)> = Vec::new();
        for (n, p, pd) in decisions {
            let c = self.routers[n].coord();
            moved = true;
            let copies = pd.departures.iter().map(|d| d.outputs.count_ones() as u64 - 1).sum::<u64>();
            self.stats.replicated[p] += copies;
            let out = self.routers[n].commit_plane(&self.cfg, p, &pd)?;
            for (port, t) in out {
                if port == Direction::Local {
                    self.stats.delivered[p] += 1;
                    self.ejected[n][p].push_back(Delivered {
                        flit: t.flit,
                        seq: t.seq,
                        injected_at: t.injected_at,
                        delivered_at: now + 1,
                    });
                    continue;
                }
                let link = LinkId { node: c, port, plane: self.cfg.planes[p] };
                let li = self.link_index(link);
                self.stats.link_flits[li] += 1;
                if let Some(trace) = self.link_trace.as_mut() {
                    *trace.entry((link, t.flit.packet, t.seq)).or_default() += 1;
                }
                let nb = c.step(port, cols, rows).expect("link stays in mesh");
                arrivals.push((self.cfg.node_index(nb), p, port.opposite(), t));
            }
        }
        for (n, p, port, t) in arrivals {
            self.routers[n].accept(p, port, t);
        }
        for (n, p) in accept_inject {
            moved = true;
            let (flit, seq) = self.inject[n][p].pop_front().expect("checked non-empty");
            let c = self.routers[n].coord();
            let lookahead = if flit.kind.is_head() {
                let fields = decode_header(&flit, &self.cfg)?;
                Some(Box::new(Lookahead::at(c, fields)))
            } else {
                None
            };
            self.stats.injected[p] += 1;
            self.routers[n].accept(p, Direction::Local, Transit { flit, lookahead, seq, injected_at: now + 1 });
        }
        if moved {
            self.last_progress = now;
        }
        self.cycle += 1;
        Ok(())
    }

    /// Hash of the complete mesh state.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.cycle.hash(&mut h);
        self.routers.hash(&mut h);
        for node in &self.inject {
            for q in node {
                q.hash(&mut h);
            }
        }
        for node in &self.ejected {
            for q in node {
                for d in q {
                    (d.flit, d.seq, d.injected_at, d.delivered_at).hash(&mut h);
                }
            }
        }
        self.stats.link_flits.hash(&mut h);
        h.finish()
    }

    pub fn describe(&self) -> String {
        self.routers.iter().map(Router::describe).collect()
    }
}
