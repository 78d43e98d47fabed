// SPDX-License-Identifier: Apache-2.0

//! Checks shared by the unit test targets and the acceptance run. Each one
//! panics on a violation and returns a short summary otherwise.

#![allow(dead_code)]

pub mod dma;
pub mod noc;
pub mod p2p;
