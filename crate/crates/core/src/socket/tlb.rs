// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::SocketError;

/// Maps the accelerator's contiguous virtual buffer onto physical pages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlbConfig {
    #[serde(default = "default_page_size")]
    pub page_size: u64,
    pub page_table: Vec<u64>,
    pub buffer_size: u64,
}

fn default_page_size() -> u64 {
    1 << 20
}

impl Default for TlbConfig {
    /// An empty buffer: every memory transfer overruns.
    fn default() -> Self {
        TlbConfig { page_size: default_page_size(), page_table: Vec::new(), buffer_size: 0 }
    }
}

impl TlbConfig {
    /// Contiguous pages starting at `base`.
    pub fn contiguous(base: u64, buffer_size: u64, page_size: u64) -> Self {
        let pages = buffer_size.div_ceil(page_size).max(1);
        TlbConfig { page_size, page_table: (0..pages).map(|i| base + i * page_size).collect(), buffer_size }
    }

    pub fn validate(&self) -> Result<(), SocketError> {
        if !self.page_size.is_power_of_two() {
            return Err(SocketError::Config(format!("page size {} is not a power of two", self.page_size)));
        }
        let need = self.buffer_size.div_ceil(self.page_size);
        if (self.page_table.len() as u64) < need {
            return Err(SocketError::Config(format!(
                "{} pages cannot map a {} byte buffer of {} byte pages",
                self.page_table.len(),
                self.buffer_size,
                self.page_size
            )));
        }
        if let Some(p) = self.page_table.iter().find(|p| *p % self.page_size != 0) {
            return Err(SocketError::Config(format!("page base {p:#x} is not page aligned")));
        }
        Ok(())
    }

    pub fn translate(&self, offset: u64) -> Result<u64, SocketError> {
        if offset >= self.buffer_size {
            return Err(SocketError::BufferOverrun { offset, size: self.buffer_size });
        }
        let page = (offset / self.page_size) as usize;
        Ok(self.page_table[page] + offset % self.page_size)
    }

    /// Splits `[offset, offset + len)` into physically contiguous pieces.
    pub fn segments(&self, offset: u64, len: u64) -> Result<Vec<(u64, u64)>, SocketError> {
        if len == 0 {
            return Ok(Vec::new());
        }
        if offset + len > self.buffer_size {
            return Err(SocketError::BufferOverrun { offset: offset + len - 1, size: self.buffer_size });
        }
        let mut out = Vec::new();
        let mut at = offset;
        let end = offset + len;
        while at < end {
            let page_end = (at / self.page_size + 1) * self.page_size;
            let n = page_end.min(end) - at;
            out.push((self.translate(at)?, n));
            at += n;
        }
        Ok(out)
    }
}
