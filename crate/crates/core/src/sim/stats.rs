// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::Soc;
use crate::memsys::MemStats;
use crate::noc::{Direction, LinkId, Plane};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationStats {
    pub acc: String,
    pub bytes: u64,
    pub invoked_at: Option<u64>,
    /// First cycle the generator ran.
    pub started_at: Option<u64>,
    /// Cycle the generator retired its last transfer.
    pub finished_at: Option<u64>,
    /// Cycle the completion interrupt reached the host.
    pub completed_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneCount {
    pub plane: Plane,
    pub injected: u64,
    pub delivered: u64,
    pub replicated: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkUse {
    pub node: String,
    pub port: Direction,
    pub plane: Plane,
    pub flits: u64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub total_cycles: u64,
    pub first_invoke: Option<u64>,
    pub last_complete: Option<u64>,
    pub invocations: Vec<InvocationStats>,
    pub planes: Vec<PlaneCount>,
    /// Links that carried at least one flit.
    pub links: Vec<LinkUse>,
    pub memory: MemStats,
}

impl RunStats {
    /// Cycles from the first invocation to the last completion.
    pub fn makespan(&self) -> Option<u64> {
        Some(self.last_complete? - self.first_invoke?)
    }
}

pub(super) fn collect(soc: &Soc) -> RunStats {
    let invocations = soc.invocation_records();
    let cfg = soc.mesh.config();
    let ms = soc.mesh.stats();
    let planes = cfg
        .planes
        .iter()
        .enumerate()
        .map(|(i, p)| PlaneCount {
            plane: *p,
            injected: ms.injected[i],
            delivered: ms.delivered[i],
            replicated: ms.replicated[i],
        })
        .collect();
    let cycles = soc.now().max(1);
    let mut links = Vec::new();
    for n in 0..cfg.nodes() {
        let node = cfg.node_coord(n);
        for port in Direction::ALL {
            for plane in &cfg.planes {
                let flits = soc.mesh.link_flits(LinkId { node, port, plane: *plane });
                if flits > 0 {
                    links.push(LinkUse {
                        node: format!("{},{}", node.x, node.y),
                        port,
                        plane: *plane,
                        flits,
                        utilization: flits as f64 / cycles as f64,
                    });
                }
            }
        }
    }
    RunStats {
        total_cycles: soc.now(),
        first_invoke: invocations.iter().filter_map(|i| i.invoked_at).min(),
        last_complete: if invocations.iter().all(|i| i.completed_at.is_some()) {
            invocations.iter().filter_map(|i| i.completed_at).max()
        } else {
            None
        },
        invocations,
        planes,
        links,
        memory: soc.memory.stats.clone(),
    }
}
