// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::SocketError;
use crate::noc::Coord;

/// A P2P peer: a tile and the accelerator slot within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Peer {
    pub tile: Coord,
    #[serde(default)]
    pub slot: u8,
}

impl Peer {
    pub const fn new(tile: Coord, slot: u8) -> Self {
        Peer { tile, slot }
    }
}

/// Socket table from the small integers on the read channel's user field to
/// peer coordinates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DestLut {
    entries: Vec<Option<Peer>>,
}

impl DestLut {
    /// A table with indices `1..n`.
    pub fn new(n: usize) -> Self {
        DestLut { entries: vec![None; n.saturating_sub(1)] }
    }

    pub fn size(&self) -> usize {
        self.entries.len() + 1
    }

    fn slot(&self, k: usize) -> Result<usize, SocketError> {
        if k == 0 || k > self.entries.len() {
            return Err(SocketError::Config(format!("LUT index {k} outside 1..={}", self.entries.len())));
        }
        Ok(k - 1)
    }

    pub fn configure(&mut self, k: usize, peer: Peer) -> Result<(), SocketError> {
        let i = self.slot(k)?;
        if self.entries.iter().enumerate().any(|(j, e)| j != i && *e == Some(peer)) {
            return Err(SocketError::Config(format!("LUT already maps {}/{} at another index", peer.tile, peer.slot)));
        }
        self.entries[i] = Some(peer);
        Ok(())
    }

    pub fn lookup(&self, k: usize) -> Result<Peer, SocketError> {
        self.entries[self.slot(k)?].ok_or_else(|| SocketError::Config(format!("LUT index {k} not configured")))
    }

    pub fn clear(&mut self) {
        self.entries.iter_mut().for_each(|e| *e = None);
    }
}
