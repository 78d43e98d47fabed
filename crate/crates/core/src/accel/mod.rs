// SPDX-License-Identifier: Apache-2.0

//! Accelerator models driving a socket: the DMA tag engine and the identity
//! traffic generator.

mod dma;
mod gen;

use thiserror::Error;

pub use dma::{Direction, DmaEngine, DmaStatus, DmaTag, IdmaDescriptor, Plm, DEFAULT_WINDOW};
pub use gen::{GenJob, GenStats, TrafficGen, DEFAULT_CHUNK};

use crate::socket::SocketError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AccelError {
    #[error("no free DMA tag")]
    ResourceExhausted,
    #[error("invalid DMA request: {0}")]
    Argument(String),
    #[error("accelerator is busy")]
    Busy,
    #[error(transparent)]
    Socket(#[from] SocketError),
}
