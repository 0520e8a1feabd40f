//! Bundled configs for the published parameter sets.

use crate::config::{parse_config, RunConfig};
use crate::error::{CliError, CliResult};

/// `(name, description, config)`.
pub const PRESETS: &[(&str, &str, &str)] = &[
    ("fig2b", "J-aggregate extinction ratio against detuning", include_str!("../presets/fig2b.json")),
    ("fig2c", "H-aggregate g2 on both dressed states at s = 27", include_str!("../presets/fig2c.json")),
    ("fig2d", "H-aggregate dressed-state lifetimes", include_str!("../presets/fig2d.json")),
    ("fig3h", "H-aggregate saturation series", include_str!("../presets/fig3h.json")),
    ("fig3j", "J-aggregate saturation series", include_str!("../presets/fig3j.json")),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn preset(name: &str) -> CliResult<RunConfig> {
    let (_, _, text) = PRESETS.iter().find(|p| p.0 == name).ok_or_else(|| {
        CliError::config("<preset>", format!("unknown preset `{name}`; known: {}", names().join(", ")))
    })?;
    parse_config(text)
}
