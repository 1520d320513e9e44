//! Run configuration and file formats: TOML decks, legacy ASCII VTK fields,
//! CSV tables, and the JSON run summary.

pub mod config;
pub mod csv;
pub mod vtk;

use std::collections::BTreeMap;
use std::path::Path;

/// Headline numbers for one solver within a run.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct MethodSummary {
    /// Largest displacement magnitude [m].
    pub u_max: f64,
    /// Where it occurs.
    pub u_max_position: [f64; 2],
    /// Peak damage as a percentage of the critical stretch measure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damage_max_percent: Option<f64>,
    /// Lattice node count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    /// Continuum unknown count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dofs: Option<usize>,
    /// Linear-solver iterations (0 on the direct path).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

/// Machine-readable summary written at the end of every command.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSummary {
    pub command: String,
    /// Hash of the resolved configuration (layout-independent).
    pub config_hash: String,
    pub wall_seconds: f64,
    /// Per-solver results keyed by method name (`pd`, `pum_static`, …).
    pub methods: BTreeMap<String, MethodSummary>,
    /// Every artifact this run wrote, relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunSummary {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self {
            command: command.to_string(),
            config_hash,
            wall_seconds: 0.0,
            methods: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("summary serializes");
        std::fs::write(path, text + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_serializes_with_omitted_optionals_and_sorted_methods() {
        let mut s = RunSummary::new("pd-run", "00ff".into());
        s.methods.insert(
            "pum_static".into(),
            MethodSummary { u_max: 1.0, dofs: Some(10), ..Default::default() },
        );
        s.methods.insert(
            "pd".into(),
            MethodSummary {
                u_max: 2.0,
                damage_max_percent: Some(7.3),
                nodes: Some(5),
                ..Default::default()
            },
        );
        let text = serde_json::to_string(&s).unwrap();
        // Map order is lexicographic, absent optionals are omitted.
        assert!(text.find("\"pd\"").unwrap() < text.find("\"pum_static\"").unwrap());
        assert!(!text.contains("iterations"));
        assert!(text.contains("\"damage_max_percent\":7.3"));
    }
}
