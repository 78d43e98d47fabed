// SPDX-License-Identifier: Apache-2.0

//! Accelerator socket: DMA engine, TLB, destination table and the pull-based
//! P2P engine, facing the accelerator through four valid/ready channels.

mod channel;
mod engine;
mod lut;
mod p2p;
pub mod packet;
mod tlb;

use thiserror::Error;

pub use channel::{LiChannel, StallPattern, TransferDescriptor, WordSize, USER_BITS};
pub use engine::{Expect, ExpectKind, OutFlit, Phase, Socket, SocketEvent, SocketParams, SocketStats};
pub use lut::{DestLut, Peer};
pub use p2p::{Credit, P2pProducer};
pub use tlb::TlbConfig;

use crate::noc::NocError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SocketError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid descriptor: {0}")]
    Descriptor(String),
    #[error("offset {offset} overruns the {size} byte virtual buffer")]
    BufferOverrun { offset: u64, size: u64 },
    #[error("accelerator is busy")]
    Busy,
    #[error("P2P protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Noc(#[from] NocError),
}
