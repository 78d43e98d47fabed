// SPDX-License-Identifier: Apache-2.0

//! Multi-plane 2D-mesh wormhole NoC with multicast headers.
//!
//! Packets are routed X-first (dimension ordered). A header flit carries the
//! full destination list; routers compute the next-hop direction of every
//! destination one router ahead and fork the packet onto several output
//! ports when the destinations diverge.

mod header;
mod mesh;
mod router;
mod routing;
pub mod traffic;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use header::{
    build_packet, capacity, decode_header, encode_header, raw_capacity, Flit, FlitKind, HeaderFields, MsgType, Payload,
    DEST_BITS, HEADER_OVERHEAD_BITS, PREAMBLE,
};
pub use mesh::{Delivered, LinkId, Mesh, MeshStats};
pub use router::{Departure, Lookahead, PlaneDecision, Router, RouterDecision, Transit};
pub use routing::{dor_next_hop, dor_path, fork_set, lookahead_routes, ForkSet};

/// Widest mesh the 7-bit destination field can address (4-bit x).
pub const MAX_COLS: usize = 16;
/// Tallest mesh the 7-bit destination field can address (3-bit y).
pub const MAX_ROWS: usize = 8;
/// Hard ceiling on multicast destinations (4-bit `dest_count - 1`).
pub const MAX_MCAST: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NocError {
    #[error("unsupported NoC bitwidth {0} (expected 64, 128 or 256)")]
    UnsupportedBitwidth(u32),
    #[error("{count} destinations exceed the header capacity of {capacity}")]
    TooManyDestinations { count: usize, capacity: usize },
    #[error("header has no destinations")]
    NoDestinations,
    #[error("duplicate destination {0}")]
    DuplicateDestination(Coord),
    #[error("coordinate {coord} outside {cols}x{rows} mesh")]
    OutOfMesh { coord: Coord, cols: usize, rows: usize },
    #[error("corrupt header: {0}")]
    CorruptHeader(&'static str),
    #[error("invalid NoC configuration: {0}")]
    Config(String),
}

/// Tile coordinate: `x` is the column, `y` the row. North is decreasing `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Coord {
    pub x: u8,
    pub y: u8,
}

impl Coord {
    pub const fn new(x: u8, y: u8) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Coord) -> usize {
        (self.x.abs_diff(other.x) + self.y.abs_diff(other.y)) as usize
    }

    /// Neighbouring coordinate in `dir`, or `None` when stepping off a mesh
    /// of the given size. `Local` returns `self`.
    pub fn step(self, dir: Direction, cols: usize, rows: usize) -> Option<Coord> {
        let (x, y) = (self.x as i32, self.y as i32);
        let (nx, ny) = match dir {
            Direction::North => (x, y - 1),
            Direction::South => (x, y + 1),
            Direction::East => (x + 1, y),
            Direction::West => (x - 1, y),
            Direction::Local => (x, y),
        };
        (nx >= 0 && ny >= 0 && (nx as usize) < cols && (ny as usize) < rows).then(|| Coord::new(nx as u8, ny as u8))
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Router port / routing direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    North,
    South,
    East,
    West,
    Local,
}

impl Direction {
    pub const ALL: [Direction; 5] =
        [Direction::North, Direction::South, Direction::East, Direction::West, Direction::Local];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn from_index(i: usize) -> Direction {
        Self::ALL[i]
    }

    /// The port on the neighbouring router that a flit sent out of `self`
    /// arrives on.
    pub const fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::South => Direction::North,
            Direction::East => Direction::West,
            Direction::West => Direction::East,
            Direction::Local => Direction::Local,
        }
    }
}

/// Physical NoC plane. Only the DMA planes and `Misc` carry traffic; the
/// coherence planes can be instantiated but stay idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Plane {
    DmaRequest,
    DmaResponse,
    Misc,
    CoherenceRequest,
    CoherenceForward,
    CoherenceResponse,
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Plane::DmaRequest => "dma-request",
            Plane::DmaResponse => "dma-response",
            Plane::Misc => "misc",
            Plane::CoherenceRequest => "coherence-request",
            Plane::CoherenceForward => "coherence-forward",
            Plane::CoherenceResponse => "coherence-response",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NocConfig {
    pub bitwidth: u32,
    #[serde(default = "default_planes")]
    pub planes: Vec<Plane>,
    pub mesh_rows: usize,
    pub mesh_cols: usize,
    #[serde(default = "default_max_mcast")]
    pub max_mcast: usize,
    #[serde(default = "default_queue_depth")]
    pub queue_depth: usize,
}

fn default_planes() -> Vec<Plane> {
    vec![Plane::DmaRequest, Plane::DmaResponse, Plane::Misc]
}

fn default_max_mcast() -> usize {
    MAX_MCAST
}

fn default_queue_depth() -> usize {
    4
}

impl NocConfig {
    pub fn new(bitwidth: u32, mesh_cols: usize, mesh_rows: usize) -> Self {
        Self {
            bitwidth,
            planes: default_planes(),
            mesh_rows,
            mesh_cols,
            max_mcast: MAX_MCAST,
            queue_depth: default_queue_depth(),
        }
    }

    pub fn validate(&self) -> Result<(), NocError> {
        header::raw_capacity(self.bitwidth)?;
        if self.mesh_cols == 0 || self.mesh_cols > MAX_COLS {
            return Err(NocError::Config(format!("mesh_cols must be in 1..={MAX_COLS}, got {}", self.mesh_cols)));
        }
        if self.mesh_rows == 0 || self.mesh_rows > MAX_ROWS {
            return Err(NocError::Config(format!("mesh_rows must be in 1..={MAX_ROWS}, got {}", self.mesh_rows)));
        }
        if self.max_mcast == 0 || self.max_mcast > MAX_MCAST {
            return Err(NocError::Config(format!("max_mcast must be in 1..={MAX_MCAST}, got {}", self.max_mcast)));
        }
        if self.queue_depth == 0 {
            return Err(NocError::Config("queue_depth must be at least 1".into()));
        }
        if self.planes.is_empty() {
            return Err(NocError::Config("at least one plane is required".into()));
        }
        for (i, p) in self.planes.iter().enumerate() {
            if self.planes[..i].contains(p) {
                return Err(NocError::Config(format!("plane {p} listed twice")));
            }
        }
        Ok(())
    }

    /// Destination capacity of a header flit under this configuration.
    pub fn capacity(&self) -> Result<usize, NocError> {
        Ok(header::raw_capacity(self.bitwidth)?.min(self.max_mcast))
    }

    pub fn flit_bytes(&self) -> usize {
        self.bitwidth as usize / 8
    }

    pub fn contains(&self, c: Coord) -> bool {
        (c.x as usize) < self.mesh_cols && (c.y as usize) < self.mesh_rows
    }

    pub fn check_coord(&self, c: Coord) -> Result<(), NocError> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(NocError::OutOfMesh { coord: c, cols: self.mesh_cols, rows: self.mesh_rows })
        }
    }

    pub fn plane_index(&self, plane: Plane) -> Option<usize> {
        self.planes.iter().position(|p| *p == plane)
    }

    pub fn node_index(&self, c: Coord) -> usize {
        c.y as usize * self.mesh_cols + c.x as usize
    }

    pub fn node_coord(&self, index: usize) -> Coord {
        Coord::new((index % self.mesh_cols) as u8, (index / self.mesh_cols) as u8)
    }

    pub fn nodes(&self) -> usize {
        self.mesh_cols * self.mesh_rows
    }
}
