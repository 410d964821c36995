//! Scenario files: one TOML document describing inputs, per-command settings
//! and the output directory.
//!
//! Relative input paths are looked up next to the scenario file first and
//! then under `$AIRTOLL_DATA_DIR`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use crate::failure::Failure;

pub const DATA_DIR_ENV: &str = "AIRTOLL_DATA_DIR";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub inputs: Inputs,
    pub attribute: Option<AttributeConfig>,
    #[serde(default)]
    pub health: HealthConfig,
    #[serde(default)]
    pub glb: GlbConfig,
    #[serde(default)]
    pub stats: StatsConfig,
}

fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub regions: Option<String>,
    pub sr_matrix: Option<String>,
    pub kernel: Option<KernelConfig>,
    pub endpoints: Option<String>,
    pub sites: Option<String>,
    #[serde(default)]
    pub signals: Vec<String>,
    /// A previously written emissions report, used by `health` instead of re-running attribution.
    pub emissions: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub decay_km: f64,
    pub self_coefficient: f64,
    #[serde(default)]
    pub species_scale: Option<SpeciesAmounts>,
}

/// Per-species amounts keyed by name; missing species are zero.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesAmounts {
    #[serde(default)]
    pub pm25: f64,
    #[serde(default)]
    pub nox: f64,
    #[serde(default)]
    pub so2: f64,
    #[serde(default)]
    pub voc: f64,
}

impl SpeciesAmounts {
    pub fn to_array(self) -> [f64; 4] {
        [self.pm25, self.nox, self.so2, self.voc]
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeConfig {
    pub task: TaskConfig,
    pub scope1: Option<Scope1Config>,
    pub scope2: Option<Scope2Config>,
    #[serde(default)]
    pub scope3: Vec<Scope3Config>,
}

fn metric_ton() -> String {
    "metric_ton".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub power_fraction: f64,
    pub duration_hours: f64,
    /// PUE-inclusive energy; derived from `training` when absent.
    pub energy_mwh: Option<f64>,
    pub training: Option<TrainingConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub gpu_hours: f64,
    pub tdp_watts: f64,
    pub pue: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scope1Config {
    /// Region of the site; required with inline `emissions`.
    pub source_region: Option<String>,
    #[serde(default = "hours_per_year")]
    pub window_hours: f64,
    #[serde(default = "metric_ton")]
    pub unit: String,
    pub emissions: Option<SpeciesAmounts>,
    /// Permit CSV `facility_id,region_id,unit,pm25,nox,so2,voc`, summed per region.
    pub permits: Option<String>,
    /// Actual emissions as a share of the permitted level.
    #[serde(default = "one")]
    pub permitted_fraction: f64,
    /// Amortize tasks longer than the window instead of rejecting them.
    #[serde(default)]
    pub allow_spanning: bool,
}

fn hours_per_year() -> f64 {
    airtoll::attribution::HOURS_PER_YEAR
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scope2Config {
    pub source_region: String,
    /// Emission rate in metric tons per MWh.
    pub rate: Option<SpeciesAmounts>,
    /// Plant CSV `plant_id,generation_mwh,pm25,nox,so2,voc` with rates in t/MWh.
    pub plants: Option<String>,
    /// `average` (default) or `marginal`.
    #[serde(default = "average")]
    pub basis: String,
    pub marginal_plant: Option<String>,
}

fn average() -> String {
    "average".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scope3Config {
    pub location: String,
    pub lifespan_hours: f64,
    #[serde(default = "metric_ton")]
    pub unit: String,
    pub emissions: SpeciesAmounts,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealthConfig {
    pub discount_rate: Option<f64>,
    /// Energy used to express cost per MWh; defaults to the task energy.
    pub energy_mwh: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlbConfig {
    pub horizon: Option<usize>,
    pub lambda: Option<f64>,
    /// Carbon prices in USD/ton; `"inf"` for carbon-only.
    pub carbon_prices: Option<Vec<toml::Value>>,
    pub lambdas: Option<Vec<f64>>,
    /// Slot demand as a multiple of the summed default loads.
    pub demand_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    /// Average sub-hourly series into hours before computing statistics.
    #[serde(default)]
    pub hourly: bool,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub dir: PathBuf,
    pub file: ScenarioFile,
    data_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::io(format!("reading scenario {}: {e}", path.display())))?;
        let file: ScenarioFile = toml::from_str(&text)
            .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
        if file.name.trim().is_empty() {
            bail!(Failure::validation(format!("{}: empty scenario name", path.display())));
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let data_dir = std::env::var_os(DATA_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        Ok(Scenario {
            path: path.to_path_buf(),
            dir,
            file,
            data_dir,
        })
    }

    /// Resolves an input path, failing if it exists in neither location.
    pub fn resolve(&self, rel: &str) -> Result<PathBuf> {
        let p = Path::new(rel);
        let mut tried = Vec::new();
        if p.is_absolute() {
            tried.push(p.to_path_buf());
        } else {
            tried.push(self.dir.join(p));
            if let Some(d) = &self.data_dir {
                tried.push(d.join(p));
            }
        }
        if let Some(found) = tried.iter().find(|c| c.is_file()) {
            return Ok(found.clone());
        }
        let list: Vec<String> = tried.iter().map(|t| t.display().to_string()).collect();
        Err(Failure::io(format!("input `{rel}` not found (tried {})", list.join(", "))).into())
    }

    pub fn require(&self, what: &str, value: &Option<String>) -> Result<PathBuf> {
        match value {
            Some(rel) => self.resolve(rel).with_context(|| format!("inputs.{what}")),
            None => Err(Failure::validation(format!(
                "{}: scenario needs inputs.{what}",
                self.path.display()
            ))
            .into()),
        }
    }

    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        match override_dir {
            Some(d) => d.to_path_buf(),
            None => self.dir.join(&self.file.output_dir),
        }
    }
}

/// Parses the `carbon_prices` list, which mixes numbers and the string `"inf"`.
pub fn carbon_prices(values: &[toml::Value]) -> Result<Vec<airtoll::scheduler::CarbonPrice>> {
    values
        .iter()
        .map(|v| {
            let text = match v {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                other => bail!(Failure::validation(format!("invalid carbon price {other}"))),
            };
            text.parse()
                .map_err(|e: airtoll::Error| Failure::validation(e.to_string()).into())
        })
        .collect()
}

/// Groups species amounts by region in a stable order.
pub type RegionEmissions = BTreeMap<String, airtoll::PollutantVector>;
