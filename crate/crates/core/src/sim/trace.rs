// SPDX-License-Identifier: Apache-2.0

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    FlitTx,
    FlitRx,
    BurstStart,
    BurstEnd,
    Invoke,
    Interrupt,
    P2pRequest,
    CreditUpdate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    /// `x,y` for tiles, `x,y/slot` for accelerators.
    pub component: String,
    pub kind: EventKind,
    pub detail: String,
}

/// Writes events one JSON object per line.
pub fn write_ndjson<W: Write>(mut w: W, events: &[TraceEvent]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_ndjson(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
