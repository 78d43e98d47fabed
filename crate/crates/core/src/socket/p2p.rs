// SPDX-License-Identifier: Apache-2.0

//! Producer-side credit accounting for pull-based P2P transfers.
//!
//! Consumers send requests carrying a byte length. The producer sends data
//! only against outstanding credit, and for a multicast only up to the
//! smallest outstanding credit among its consumers, so every byte on the
//! network has a reader waiting for it.

use std::collections::BTreeMap;

use super::lut::Peer;
use super::SocketError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Credit {
    pub requested: u64,
    pub outstanding: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct P2pProducer {
    total: u64,
    sent: u64,
    consumers: BTreeMap<Peer, Credit>,
}

impl P2pProducer {
    /// A transaction of `total` bytes per consumer.
    pub fn new(total: u64) -> Self {
        P2pProducer { total, sent: 0, consumers: BTreeMap::new() }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn is_complete(&self) -> bool {
        self.sent == self.total
    }

    pub fn credit(&self, peer: Peer) -> Option<Credit> {
        self.consumers.get(&peer).copied()
    }

    pub fn consumers(&self) -> impl Iterator<Item = Peer> + '_ {
        self.consumers.keys().copied()
    }

    pub fn consumer_count(&self) -> usize {
        self.consumers.len()
    }

    pub fn request(&mut self, peer: Peer, len: u64) -> Result<(), SocketError> {
        if len == 0 {
            return Err(SocketError::Protocol(format!("empty P2P request from {}", peer.tile)));
        }
        let c = self.consumers.entry(peer).or_default();
        c.requested += len;
        c.outstanding += len;
        if c.requested > self.total {
            return Err(SocketError::Protocol(format!(
                "consumer {}/{} requested {} bytes of a {} byte transaction",
                peer.tile, peer.slot, c.requested, self.total
            )));
        }
        Ok(())
    }

    /// Bytes that may be sent now to a set of `d` consumers: `None` while
    /// fewer than `d` consumers have asked for data.
    pub fn sendable(&self, d: usize) -> Result<Option<u64>, SocketError> {
        match self.consumers.len().cmp(&d) {
            std::cmp::Ordering::Less => Ok(None),
            std::cmp::Ordering::Greater => Err(SocketError::Protocol(format!(
                "{} consumers requested data from a transfer to {d}",
                self.consumers.len()
            ))),
            std::cmp::Ordering::Equal => Ok(Some(self.consumers.values().map(|c| c.outstanding).min().unwrap_or(0))),
        }
    }

    /// Records `bytes` sent to every consumer.
    pub fn consume(&mut self, bytes: u64) -> Result<(), SocketError> {
        let min = self.consumers.values().map(|c| c.outstanding).min().unwrap_or(0);
        if bytes > min || self.sent + bytes > self.total {
            return Err(SocketError::Protocol(format!("sending {bytes} bytes against {min} bytes of credit")));
        }
        for c in self.consumers.values_mut() {
            c.outstanding -= bytes;
        }
        self.sent += bytes;
        Ok(())
    }
}
