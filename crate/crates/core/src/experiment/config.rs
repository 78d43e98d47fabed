// SPDX-License-Identifier: Apache-2.0

//! JSON experiment files: a `soc` object and an optional `sweep` object.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SweepSpec;
use crate::memsys::MemError;
use crate::noc::NocError;
use crate::sim::{SimError, SocConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub soc: SocConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Io,
    Parse,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    pub file: PathBuf,
    /// 1-based line the error points at, when known.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: {}", self.file.display(), self.message),
            None => write!(f, "{}: {}", self.file.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Line of the first `"key"` inside the `section` object, or anywhere if
/// there is no such section.
pub fn find_key_line(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let quoted = |k: &str| format!("\"{k}\"");
    let start = section.and_then(|s| text.lines().position(|l| l.contains(&quoted(s)))).unwrap_or(0);
    let needle = quoted(key);
    text.lines().enumerate().skip(start).find(|(_, l)| l.contains(&needle)).map(|(i, _)| i + 1)
}

fn soc_key(e: &SimError) -> &'static str {
    match e {
        SimError::Noc(NocError::UnsupportedBitwidth(_)) => "bitwidth",
        SimError::Noc(NocError::TooManyDestinations { .. }) => "max_mcast",
        SimError::Noc(_) => "noc",
        SimError::Memory(MemError::Config(m)) if m.contains("bandwidth") => "bandwidth",
        SimError::Memory(MemError::Config(m)) if m.contains("max_in_service") => "max_in_service",
        SimError::Memory(_) => "memory",
        SimError::Config(m) if m.contains("page size") => "page_size",
        SimError::Config(m) if m.contains("out_packets") => "out_packets",
        SimError::Config(m) if m.contains("watchdog") => "watchdog",
        _ => "tiles",
    }
}

fn serde_error(file: &Path, e: serde_json::Error) -> ConfigError {
    let line = e.line();
    ConfigError {
        kind: if e.is_io() { ConfigErrorKind::Io } else { ConfigErrorKind::Parse },
        file: file.to_path_buf(),
        line: (line > 0).then_some(line),
        message: e.to_string(),
    }
}

/// Parses and validates an experiment file's text. `file` only labels errors.
pub fn parse_config(text: &str, file: &Path) -> Result<(SocConfig, Option<SweepSpec>), ConfigError> {
    let x: ExperimentFile = serde_json::from_str(text).map_err(|e| serde_error(file, e))?;
    let invalid = |section: &str, key: &str, message: String| ConfigError {
        kind: ConfigErrorKind::Invalid,
        file: file.to_path_buf(),
        line: find_key_line(text, Some(section), key).or_else(|| find_key_line(text, None, section)),
        message,
    };
    x.soc.validate().map_err(|e| invalid("soc", soc_key(&e), e.to_string()))?;
    if let Some(s) = &x.sweep {
        s.validate(&x.soc).map_err(|e| invalid("sweep", e.key, e.message))?;
    }
    Ok((x.soc, x.sweep))
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError {
        kind: ConfigErrorKind::Io,
        file: path.to_path_buf(),
        line: None,
        message: e.to_string(),
    })
}

pub fn load_config(path: &Path) -> Result<(SocConfig, Option<SweepSpec>), ConfigError> {
    parse_config(&read(path)?, path)
}

/// Loads a standalone sweep file and checks it against `cfg`.
pub fn load_sweep(path: &Path, cfg: &SocConfig) -> Result<SweepSpec, ConfigError> {
    let text = read(path)?;
    let s: SweepSpec = serde_json::from_str(&text).map_err(|e| serde_error(path, e))?;
    s.validate(cfg).map_err(|e| ConfigError {
        kind: ConfigErrorKind::Invalid,
        file: path.to_path_buf(),
        line: find_key_line(&text, None, e.key),
        message: e.message,
    })?;
    Ok(s)
}
