// SPDX-License-Identifier: Apache-2.0

pub mod accel;
pub mod experiment;
pub mod memsys;
pub mod noc;
pub mod sim;
pub mod socket;
