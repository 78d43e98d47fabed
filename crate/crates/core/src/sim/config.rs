// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SimError;
use crate::memsys::MemoryParams;
use crate::noc::{Coord, NocConfig};
use crate::socket::SocketParams;

/// One grid cell. Written in configs as `cpu`, `mem`, `io`, `acc` or
/// `acc:N` for a tile holding N generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TileKind {
    Cpu,
    Mem,
    Io,
    Acc(u8),
    Empty,
}

impl fmt::Display for TileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TileKind::Cpu => f.write_str("cpu"),
            TileKind::Mem => f.write_str("mem"),
            TileKind::Io => f.write_str("io"),
            TileKind::Acc(1) => f.write_str("acc"),
            TileKind::Acc(n) => write!(f, "acc:{n}"),
            TileKind::Empty => f.write_str("empty"),
        }
    }
}

impl FromStr for TileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "cpu" => TileKind::Cpu,
            "mem" => TileKind::Mem,
            "io" => TileKind::Io,
            "acc" => TileKind::Acc(1),
            "empty" => TileKind::Empty,
            _ => match s.strip_prefix("acc:").map(str::parse::<u8>) {
                Some(Ok(n)) if n >= 1 => TileKind::Acc(n),
                _ => return Err(format!("unknown tile kind {s:?} (expected cpu, mem, io, empty, acc or acc:N)")),
            },
        })
    }
}

impl Serialize for TileKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TileKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostParams {
    /// Configure accelerators one at a time, each taking the full
    /// configuration time, instead of all at once.
    #[serde(default)]
    pub serial_config: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocConfig {
    pub noc: NocConfig,
    /// Rows of tiles, top row first.
    pub tiles: Vec<Vec<TileKind>>,
    #[serde(default)]
    pub memory: MemoryParams,
    #[serde(default)]
    pub socket: SocketParams,
    #[serde(default)]
    pub host: HostParams,
    #[serde(default = "default_page")]
    pub page_size: u64,
    #[serde(default)]
    pub seed: u64,
    /// Cycles without progress before a run is declared deadlocked.
    #[serde(default = "default_watchdog")]
    pub watchdog: u64,
}

fn default_page() -> u64 {
    1 << 20
}

pub const DEFAULT_WATCHDOG: u64 = 10_000;

fn default_watchdog() -> u64 {
    DEFAULT_WATCHDOG
}

impl SocConfig {
    /// A grid of the given rows, with default memory, socket and host
    /// parameters.
    pub fn grid(bitwidth: u32, rows: &[&[TileKind]]) -> SocConfig {
        let tiles: Vec<Vec<TileKind>> = rows.iter().map(|r| r.to_vec()).collect();
        let noc = NocConfig::new(bitwidth, tiles.first().map_or(0, Vec::len), tiles.len());
        SocConfig {
            noc,
            tiles,
            memory: MemoryParams::default(),
            socket: SocketParams::default(),
            host: HostParams::default(),
            page_size: default_page(),
            seed: 0,
            watchdog: DEFAULT_WATCHDOG,
        }
    }

    pub fn kind(&self, c: Coord) -> TileKind {
        self.tiles[c.y as usize][c.x as usize]
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        self.tiles.iter().enumerate().flat_map(|(y, row)| (0..row.len()).map(move |x| Coord::new(x as u8, y as u8)))
    }

    pub fn memory_tile(&self) -> Option<Coord> {
        self.coords().find(|c| self.kind(*c) == TileKind::Mem)
    }

    /// Accelerator slots in row-major order.
    pub fn accelerators(&self) -> Vec<(Coord, u8)> {
        let mut v = Vec::new();
        for c in self.coords() {
            if let TileKind::Acc(n) = self.kind(c) {
                v.extend((0..n).map(|s| (c, s)));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.noc.validate()?;
        self.memory.validate()?;
        let bad = |m: String| Err(SimError::Config(m));
        if self.tiles.len() != self.noc.mesh_rows {
            return bad(format!("{} tile rows for a mesh of {} rows", self.tiles.len(), self.noc.mesh_rows));
        }
        for (y, row) in self.tiles.iter().enumerate() {
            if row.len() != self.noc.mesh_cols {
                return bad(format!(
                    "tile row {y} has {} entries for a mesh of {} columns",
                    row.len(),
                    self.noc.mesh_cols
                ));
            }
        }
        let mems = self.coords().filter(|c| self.kind(*c) == TileKind::Mem).count();
        if mems != 1 {
            return bad(format!("expected exactly one memory tile, found {mems}"));
        }
        if self.accelerators().is_empty() {
            return bad("no accelerator tiles".into());
        }
        if !self.page_size.is_power_of_two() || self.page_size < 4096 {
            return bad(format!("page size {} must be a power of two of at least 4096", self.page_size));
        }
        if self.socket.out_packets == 0 {
            return bad("socket out_packets must be at least 1".into());
        }
        if self.watchdog == 0 {
            return bad("watchdog must be positive".into());
        }
        Ok(())
    }
}
