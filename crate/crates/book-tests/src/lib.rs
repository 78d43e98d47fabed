// SPDX-License-Identifier: Apache-2.0

//! The book's code blocks, run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/noc.md")]
pub mod noc {}
#[doc = include_str!("../../../book/src/channels.md")]
pub mod channels {}
#[doc = include_str!("../../../book/src/sockets.md")]
pub mod sockets {}
#[doc = include_str!("../../../book/src/accelerators.md")]
pub mod accelerators {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
