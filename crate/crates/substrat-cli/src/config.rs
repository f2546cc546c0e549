//! Experiment configuration: JSON file plus flag overrides, echoed verbatim
//! into every output for provenance.

use serde::{Deserialize, Serialize};

use substrat::engine::StepSchedule;
use substrat::minnorm::SelectionPolicy;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub benchmark: String,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// schedule tag, e.g. "constant:0.1", "harmonic:1:1", "power:1:0.7:1"
    pub schedule: String,
    #[serde(default = "default_policy")]
    pub policy: String,
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub activity_tol: Option<f64>,
}

fn default_policy() -> String {
    "min_norm".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub benchmarks: Vec<String>,
    pub schedules: Vec<String>,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    pub seeds: Vec<u64>,
    pub k: usize,
    /// start override applied to every row (benchmark defaults otherwise)
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// verdict threshold on the last-decile diameter
    #[serde(default = "default_convergence_tol")]
    pub convergence_tol: f64,
}

fn default_convergence_tol() -> f64 {
    1e-6
}

fn default_policies() -> Vec<String> {
    vec!["min_norm".into()]
}

pub fn parse_schedule(tag: &str) -> Result<StepSchedule, String> {
    StepSchedule::parse_tag(tag)
}

pub fn parse_policy(tag: &str) -> Result<SelectionPolicy, String> {
    tag.parse()
}

/// Stable hash of the canonical JSON form, stamped into outputs.
pub fn config_hash<T: Serialize>(cfg: &T) -> u64 {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    substrat::fnv1a(canonical.as_bytes())
}

/// Read and parse a JSON config, reporting line/column on failure.
pub fn load_json<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        format!(
            "config parse error in {} at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        )
    })
}
