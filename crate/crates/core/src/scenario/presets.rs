//! Built-in reference scenarios, selectable by name.

use crate::error::{Error, Result};

use super::config::{parse_config, ScenarioConfig};

pub const PRESETS: [(&str, &str); 5] = [
    ("fig3", include_str!("../../presets/fig3.json")),
    ("fig4", include_str!("../../presets/fig4.json")),
    ("figA1", include_str!("../../presets/figA1.json")),
    ("figA2", include_str!("../../presets/figA2.json")),
    ("figA4", include_str!("../../presets/figA4.json")),
];

/// Raw JSON of a preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, s)| *s)
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let src = preset_source(name).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
        Error::Config(vec![format!(
            "unknown preset `{name}`; available: {}",
            names.join(", ")
        )])
    })?;
    parse_config(src)
}
