//! Scenario files: declarative experiment descriptions, their validation,
//! the run contract and result serialization.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "name": "double-slit",
//!   "experiment": "double_slit",
//!   "params": { "geometry": { "d": 10, "w": 1, "L": 10000 } },
//!   "n_events": 100000,
//!   "seed": 42,
//!   "outputs": ["analytic_pattern", "histogram", "summary"]
//! }
//! ```
//!
//! `seed` and `outputs` are optional. The parameter set depends on the
//! experiment; see `docs/scenario.schema.json` in the repository.

mod output;
mod params;
mod parse;
mod run;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

pub use output::{parse_bundle, serialize, to_canonical_json, Artifact, Format};
pub use params::{
    AbsorberParams, BinCount, DelayedChoiceParams, DoubleSlitParams, EraserParams,
    ExperimentParams, GeometryParams, MachZehnderParams, NeutronParams, NonNegative,
    OmegaRange, PhotoelectricParams, Positive, ScreenParams, UnitInterval, WhichPathParams,
    MAX_EVENTS,
};
pub use parse::{parse_scenario, Diagnostic, DiagnosticCode};
pub use run::{run_scenario, NamedHistogram, NamedPattern, ResultBundle, RunError, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    DoubleSlit,
    WhichPath,
    NeutronAbsorber,
    MachZehnder,
    DelayedChoice,
    QuantumEraser,
    Photoelectric,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::DoubleSlit,
        ExperimentKind::WhichPath,
        ExperimentKind::NeutronAbsorber,
        ExperimentKind::MachZehnder,
        ExperimentKind::DelayedChoice,
        ExperimentKind::QuantumEraser,
        ExperimentKind::Photoelectric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::DoubleSlit => "double_slit",
            ExperimentKind::WhichPath => "which_path",
            ExperimentKind::NeutronAbsorber => "neutron_absorber",
            ExperimentKind::MachZehnder => "mach_zehnder",
            ExperimentKind::DelayedChoice => "delayed_choice",
            ExperimentKind::QuantumEraser => "quantum_eraser",
            ExperimentKind::Photoelectric => "photoelectric",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    AnalyticPattern,
    Histogram,
    Summary,
}

impl OutputKind {
    pub const ALL: [OutputKind; 3] = [
        OutputKind::AnalyticPattern,
        OutputKind::Histogram,
        OutputKind::Summary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutputKind::AnalyticPattern => "analytic_pattern",
            OutputKind::Histogram => "histogram",
            OutputKind::Summary => "summary",
        }
    }
}

/// A validated scenario. Optional parameters that were absent stay `None`,
/// so serializing a parsed scenario reproduces its canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: ExperimentParams,
    pub n_events: u64,
    pub seed: Option<u64>,
    /// Sorted, without duplicates.
    pub outputs: Vec<OutputKind>,
}

impl Scenario {
    pub fn experiment(&self) -> ExperimentKind {
        self.params.kind()
    }

    pub fn wants(&self, output: OutputKind) -> bool {
        self.outputs.contains(&output)
    }

    /// Canonical JSON text of the scenario.
    pub fn canonical_json(&self) -> String {
        String::from_utf8(to_canonical_json(self)).expect("canonical JSON is UTF-8")
    }
}

#[derive(Serialize)]
struct ScenarioDocument<'a> {
    name: &'a str,
    experiment: ExperimentKind,
    params: &'a ExperimentParams,
    n_events: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    outputs: &'a [OutputKind],
}

impl Serialize for Scenario {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ScenarioDocument {
            name: &self.name,
            experiment: self.experiment(),
            params: &self.params,
            n_events: self.n_events,
            seed: self.seed,
            outputs: &self.outputs,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        parse_scenario(value.to_string().as_bytes()).map_err(serde::de::Error::custom)
    }
}

/// One entry of the built-in scenario catalog.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub file_name: &'static str,
    pub text: &'static str,
}

impl CatalogEntry {
    pub fn scenario(&self) -> Scenario {
        parse_scenario(self.text.as_bytes()).expect("catalog scenarios are valid")
    }
}

/// Built-in scenarios, one per experiment.
pub fn catalog() -> Vec<CatalogEntry> {
    macro_rules! entry {
        ($file:literal) => {
            CatalogEntry {
                file_name: $file,
                text: include_str!(concat!("../../scenarios/", $file)),
            }
        };
    }
    vec![
        entry!("double_slit.json"),
        entry!("which_path.json"),
        entry!("neutron_absorber.json"),
        entry!("mach_zehnder.json"),
        entry!("delayed_choice.json"),
        entry!("quantum_eraser.json"),
        entry!("photoelectric.json"),
    ]
}

/// Catalog entry whose file name, file stem or scenario name matches `name`.
pub fn catalog_entry(name: &str) -> Option<CatalogEntry> {
    let stem = name.strip_suffix(".json").unwrap_or(name);
    catalog().into_iter().find(|e| {
        e.file_name.strip_suffix(".json") == Some(stem) || e.scenario().name == name
    })
}
