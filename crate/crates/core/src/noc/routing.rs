// SPDX-License-Identifier: Apache-2.0

use super::{Coord, Direction};

/// X-first dimension-ordered next hop from `current` toward `dest`.
pub fn dor_next_hop(current: Coord, dest: Coord) -> Direction {
    use std::cmp::Ordering::*;
    match dest.x.cmp(&current.x) {
        Greater => Direction::East,
        Less => Direction::West,
        Equal => match dest.y.cmp(&current.y) {
            Greater => Direction::South,
            Less => Direction::North,
            Equal => Direction::Local,
        },
    }
}

/// Sequence of directions taken from `src` to `dest`, ending with `Local`.
pub fn dor_path(src: Coord, dest: Coord) -> Vec<Direction> {
    let mut path = Vec::with_capacity(src.manhattan(dest) + 1);
    let mut at = src;
    loop {
        let d = dor_next_hop(at, dest);
        path.push(d);
        if d == Direction::Local {
            return path;
        }
        // mesh bounds are irrelevant: the walk never leaves the src/dest box
        at = at.step(d, usize::MAX, usize::MAX).expect("DOR walk stays in bounds");
    }
}

/// Routes for every destination at `next_router`, as computed by the
/// replicated lookahead units of the upstream router in a single cycle.
pub fn lookahead_routes(next_router: Coord, dests: &[Coord]) -> Vec<Direction> {
    dests.iter().map(|d| dor_next_hop(next_router, *d)).collect()
}

/// Destination partition of one multicast header across output ports.
/// Branches are ordered by port index; destinations keep header order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ForkSet {
    pub branches: Vec<(Direction, Vec<Coord>)>,
}

impl ForkSet {
    pub fn ports(&self) -> impl Iterator<Item = Direction> + '_ {
        self.branches.iter().map(|(d, _)| *d)
    }

    pub fn port_mask(&self) -> u8 {
        self.ports().fold(0, |m, d| m | 1 << d.index())
    }

    pub fn get(&self, port: Direction) -> Option<&[Coord]> {
        self.branches.iter().find(|(d, _)| *d == port).map(|(_, v)| v.as_slice())
    }

    pub fn is_fork(&self) -> bool {
        self.branches.len() > 1
    }
}

/// Groups `dests` by their routed direction.
pub fn fork_set(dests: &[Coord], routes: &[Direction]) -> ForkSet {
    assert_eq!(dests.len(), routes.len(), "one route per destination");
    let mut per_port: [Vec<Coord>; 5] = Default::default();
    for (d, r) in dests.iter().zip(routes) {
        per_port[r.index()].push(*d);
    }
    ForkSet {
        branches: per_port
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(i, v)| (Direction::from_index(i), v))
            .collect(),
    }
}
