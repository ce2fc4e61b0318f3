//! Scenario files bundled into the binary.

pub struct ScenarioPreset {
    pub name: &'static str,
    pub json: &'static str,
}

pub const SCENARIO_PRESETS: &[ScenarioPreset] = &[
    ScenarioPreset { name: "sim50", json: include_str!("../presets/sim50.json") },
    ScenarioPreset { name: "insert4", json: include_str!("../presets/insert4.json") },
    ScenarioPreset { name: "physical5", json: include_str!("../presets/physical5.json") },
    ScenarioPreset { name: "degenerate", json: include_str!("../presets/degenerate.json") },
    ScenarioPreset { name: "equilibrium", json: include_str!("../presets/equilibrium.json") },
];

/// Looks a preset up by name, also accepting `name.json` and
/// `presets/name.json`.
pub fn scenario_preset(name: &str) -> Option<&'static ScenarioPreset> {
    let stem = std::path::Path::new(name).file_stem()?.to_str()?;
    SCENARIO_PRESETS.iter().find(|p| p.name == stem)
}

impl ScenarioPreset {
    pub fn description(&self) -> String {
        serde_json::from_str::<serde_json::Value>(self.json)
            .ok()
            .and_then(|v| v.get("description").and_then(|d| d.as_str()).map(str::to_string))
            .unwrap_or_default()
    }
}
