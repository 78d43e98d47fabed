// SPDX-License-Identifier: Apache-2.0

//! Bundled experiment files.

/// The 3x4 SoC with one generator per accelerator tile.
pub const ESP_3X4: &str = include_str!("../../presets/esp-3x4.json");
/// 17 generators on the 3x4 SoC, with memory and socket costs fit to the
/// reference speedups.
pub const CALIBRATED_FIG5: &str = include_str!("../../presets/calibrated-fig5.json");
/// A 3x3 SoC with six generators for quick runs.
pub const DEMO_3X3: &str = include_str!("../../presets/demo-3x3.json");

pub const ALL: [(&str, &str); 3] = [("esp-3x4", ESP_3X4), ("calibrated-fig5", CALIBRATED_FIG5), ("demo-3x3", DEMO_3X3)];

pub fn by_name(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
