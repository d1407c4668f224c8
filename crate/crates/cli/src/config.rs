//! Experiment settings. The same fields come from a TOML file, a replayed
//! manifest, or command-line flags; flags win.

use std::fs;
use std::path::Path;

use clap::Args;
use mvtorus::FourierPotential;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Interaction W as cosine coefficients a_1,a_2,...
    #[arg(long = "W", allow_hyphen_values = true)]
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<FourierPotential>,

    /// Confinement V as cosine coefficients.
    #[arg(long = "V", allow_hyphen_values = true)]
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<FourierPotential>,

    /// Inverse temperature.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,

    /// Interaction strength.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,

    /// Grid size.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,

    /// Time step.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,

    /// Final time.
    #[arg(long = "T")]
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,

    /// Particles per run.
    #[arg(long = "N")]
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n_particles: Option<usize>,

    /// Independent particle runs.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// KDE bandwidth for particle densities.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,

    /// Snapshot times, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<f64>>,

    /// Number of evenly spaced snapshots when no explicit times are given.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_count: Option<usize>,

    /// Keep integrating after a steady state is detected.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_to_end: Option<bool>,

    /// Initial density: `default`, `uniform`, or a CSV file with an `rho` column.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,

    /// Order-parameter seed r_1,r_2,...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,

    /// Fixed-point method: picard or newton.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,

    /// Spectrum operator: growth, second-variation or schroedinger.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,

    /// Parity sector: full, even or odd.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<String>,

    /// Number of eigenvalues or table rows.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,

    /// Perturbation family: kuramoto, harmonic or bichromatic.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,

    /// Interaction mode n for the harmonic family.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// β = 2(1 + δ²).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,

    /// β = 2(1 + η⁴).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,

    /// HKB coefficient of -cos(x + π) in V.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,

    /// HKB coefficient of -cos(2(x + π)) in V.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,

    /// Target density CSV for design-v.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,

    /// Target cosine moments for design-v.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_cos: Option<Vec<f64>>,

    /// Target sine moments for design-v.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_sin: Option<Vec<f64>>,
}

impl Settings {
    /// Read a TOML config, or the `config` block of a JSON manifest.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let cfg = v.get_mut("config").map(Value::take).unwrap_or(v);
            serde_json::from_value(cfg).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: &Settings) -> CliResult<Self> {
        let mut base = to_map(&self)?;
        base.extend(to_map(over)?);
        serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn interaction(&self) -> CliResult<FourierPotential> {
        self.w.clone().ok_or_else(|| missing("W"))
    }

    pub fn beta(&self) -> CliResult<f64> {
        self.beta.ok_or_else(|| missing("beta"))
    }

    pub fn t_final(&self) -> CliResult<f64> {
        self.t_final.ok_or_else(|| missing("T"))
    }
}

fn to_map(s: &Settings) -> CliResult<serde_json::Map<String, Value>> {
    match serde_json::to_value(s).map_err(|e| CliError::Config(e.to_string()))? {
        Value::Object(m) => Ok(m),
        _ => unreachable!("settings serialise to an object"),
    }
}

pub fn missing(field: &str) -> CliError {
    CliError::Config(format!("missing required field `{field}`"))
}
