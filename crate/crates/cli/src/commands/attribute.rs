use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use airtoll::attribution::{
    self, EmissionRate, HardwareComponent, PowerPlant, SiteScope1Profile, TaskProfile,
};
use airtoll::pollutants::MassUnit;
use airtoll::PollutantVector;

use crate::failure::Failure;
use crate::output::{num, Outputs};
use crate::scenario::{AttributeConfig, RegionEmissions, Scenario, SpeciesAmounts};

pub const EMISSIONS_FILE: &str = "emissions.csv";
pub const EMISSIONS_HEADER: [&str; 6] = ["scope", "source_region", "pm25", "nox", "so2", "voc"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    One,
    Two,
    Three,
}

impl Scope {
    pub fn label(self) -> &'static str {
        match self {
            Scope::One => "scope1",
            Scope::Two => "scope2",
            Scope::Three => "scope3",
        }
    }

    fn parse(s: &str) -> Option<Scope> {
        match s {
            "scope1" => Some(Scope::One),
            "scope2" => Some(Scope::Two),
            "scope3" => Some(Scope::Three),
            _ => None,
        }
    }
}

/// Emissions in metric tons by scope, then by source region.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmissionsReport {
    pub scopes: BTreeMap<Scope, RegionEmissions>,
    /// Task energy when the report was computed rather than read back.
    pub task_energy_mwh: Option<f64>,
}

impl EmissionsReport {
    /// All scopes summed per source region.
    pub fn by_region(&self) -> RegionEmissions {
        let mut out = RegionEmissions::new();
        for rows in self.scopes.values() {
            for (region, v) in rows {
                *out.entry(region.clone()).or_insert(PollutantVector::ZERO) += *v;
            }
        }
        out
    }

    pub fn total(&self) -> PollutantVector {
        self.by_region().into_values().sum()
    }
}

fn amounts(a: SpeciesAmounts, unit: &str, what: &str) -> Result<PollutantVector> {
    let unit: MassUnit = unit
        .parse()
        .map_err(|e: airtoll::Error| Failure::validation(format!("{what}: {e}")))?;
    let v = PollutantVector::new(a.to_array()).with_context(|| what.to_owned())?;
    Ok(v.convert(unit, MassUnit::MetricTon))
}

fn task_profile(cfg: &AttributeConfig) -> Result<TaskProfile> {
    let t = &cfg.task;
    let energy = match (t.energy_mwh, &t.training) {
        (Some(e), None) => e,
        (None, Some(tr)) => attribution::training_energy_estimate(tr.gpu_hours, tr.tdp_watts, tr.pue)
            .context("attribute.task.training")?,
        (Some(_), Some(_)) => bail!(Failure::validation(
            "attribute.task: give either energy_mwh or training, not both"
        )),
        (None, None) => bail!(Failure::validation(
            "attribute.task: needs energy_mwh or a training block"
        )),
    };
    TaskProfile::new(t.power_fraction, t.duration_hours, energy).context("attribute.task")
}

/// Reads a CSV into typed rows, reporting the file and line of the first bad row.
pub fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(u64, T)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?
        .clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Failure::validation(format!("{}:{line}: {e}", path.display()))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: T = rec
            .deserialize(Some(&headers))
            .map_err(|e| Failure::validation(format!("{}:{line}: {e}", path.display())))?;
        out.push((line, row));
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct PermitRow {
    region_id: String,
    unit: String,
    pm25: f64,
    nox: f64,
    so2: f64,
    voc: f64,
}

#[derive(Debug, Deserialize)]
struct PlantRow {
    plant_id: String,
    generation_mwh: f64,
    pm25: f64,
    nox: f64,
    so2: f64,
    voc: f64,
}

fn scope1(scn: &Scenario, cfg: &AttributeConfig, task: &TaskProfile) -> Result<Option<RegionEmissions>> {
    let Some(s1) = &cfg.scope1 else {
        return Ok(None);
    };
    if !(s1.permitted_fraction >= 0.0) {
        bail!(Failure::validation(format!(
            "attribute.scope1.permitted_fraction must be >= 0, got {}",
            s1.permitted_fraction
        )));
    }
    let mut sites = RegionEmissions::new();
    match (&s1.emissions, &s1.permits) {
        (Some(a), None) => {
            let Some(region) = &s1.source_region else {
                bail!(Failure::validation("attribute.scope1: inline emissions need source_region"));
            };
            sites.insert(region.clone(), amounts(*a, &s1.unit, "attribute.scope1.emissions")?);
        }
        (None, Some(rel)) => {
            let path = scn.resolve(rel).context("attribute.scope1.permits")?;
            for (line, row) in read_rows::<PermitRow>(&path)? {
                let a = SpeciesAmounts {
                    pm25: row.pm25,
                    nox: row.nox,
                    so2: row.so2,
                    voc: row.voc,
                };
                let v = amounts(a, &row.unit, &format!("{}:{line}", path.display()))?;
                *sites.entry(row.region_id).or_insert(PollutantVector::ZERO) += v;
            }
            if let Some(r) = &s1.source_region {
                sites.retain(|k, _| k == r);
                if sites.is_empty() {
                    bail!(Failure::validation(format!("{}: no permits for region `{r}`", path.display())));
                }
            }
        }
        _ => bail!(Failure::validation(
            "attribute.scope1: give exactly one of emissions or permits"
        )),
    }
    let mut out = RegionEmissions::new();
    for (region, total) in sites {
        let site = SiteScope1Profile {
            emissions: total.scale(s1.permitted_fraction)?,
            window_hours: s1.window_hours,
        };
        let v = if s1.allow_spanning {
            attribution::scope1_spanning(&site, task)
        } else {
            attribution::scope1(&site, task)
        }
        .context("attribute.scope1")?;
        out.insert(region, v);
    }
    Ok(Some(out))
}

fn scope2(scn: &Scenario, cfg: &AttributeConfig, task: &TaskProfile) -> Result<Option<RegionEmissions>> {
    let Some(s2) = &cfg.scope2 else {
        return Ok(None);
    };
    let rate = match (&s2.rate, &s2.plants) {
        (Some(r), None) => {
            let v = PollutantVector::new(r.to_array()).context("attribute.scope2.rate")?;
            match s2.basis.as_str() {
                "average" => EmissionRate::average(v),
                "marginal" => EmissionRate::marginal(v),
                other => bail!(Failure::validation(format!("attribute.scope2.basis: unknown `{other}`"))),
            }
        }
        (None, Some(rel)) => {
            let path = scn.resolve(rel).context("attribute.scope2.plants")?;
            let rows = read_rows::<PlantRow>(&path)?;
            let mut plants = Vec::with_capacity(rows.len());
            for (line, r) in &rows {
                let rate = PollutantVector::new([r.pm25, r.nox, r.so2, r.voc])
                    .map_err(|e| Failure::validation(format!("{}:{line}: {e}", path.display())))?;
                plants.push(PowerPlant {
                    rate,
                    generation_mwh: r.generation_mwh,
                });
            }
            match s2.basis.as_str() {
                "average" => attribution::average_rate(&plants).with_context(|| path.display().to_string())?,
                "marginal" => {
                    let Some(id) = &s2.marginal_plant else {
                        bail!(Failure::validation("attribute.scope2: marginal basis needs marginal_plant"));
                    };
                    let idx = rows.iter().position(|(_, r)| &r.plant_id == id).ok_or_else(|| {
                        Failure::validation(format!("{}: no plant `{id}`", path.display()))
                    })?;
                    attribution::marginal_rate(&plants, idx)?
                }
                other => bail!(Failure::validation(format!("attribute.scope2.basis: unknown `{other}`"))),
            }
        }
        _ => bail!(Failure::validation("attribute.scope2: give exactly one of rate or plants")),
    };
    let v = attribution::scope2(task, &rate)?;
    Ok(Some(RegionEmissions::from([(s2.source_region.clone(), v)])))
}

fn scope3(cfg: &AttributeConfig, task: &TaskProfile) -> Result<Option<RegionEmissions>> {
    if cfg.scope3.is_empty() {
        return Ok(None);
    }
    let components = cfg
        .scope3
        .iter()
        .enumerate()
        .map(|(k, c)| {
            Ok(HardwareComponent {
                manufacture_emissions: amounts(c.emissions, &c.unit, &format!("attribute.scope3[{k}]"))?,
                lifespan_hours: c.lifespan_hours,
                location: c.location.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(attribution::scope3(&components, task.duration_hours).context("attribute.scope3")?))
}

pub fn compute(scn: &Scenario) -> Result<EmissionsReport> {
    let Some(cfg) = &scn.file.attribute else {
        bail!(Failure::validation(format!(
            "{}: scenario has no [attribute] section",
            scn.path.display()
        )));
    };
    let task = task_profile(cfg)?;
    let mut report = EmissionsReport {
        task_energy_mwh: Some(task.energy_mwh),
        ..Default::default()
    };
    for (scope, rows) in [
        (Scope::One, scope1(scn, cfg, &task)?),
        (Scope::Two, scope2(scn, cfg, &task)?),
        (Scope::Three, scope3(cfg, &task)?),
    ] {
        if let Some(rows) = rows {
            report.scopes.insert(scope, rows);
        }
    }
    if report.scopes.is_empty() {
        bail!(Failure::validation("[attribute] configures no scope"));
    }
    Ok(report)
}

pub fn render(report: &EmissionsReport, out: &mut Outputs) -> Result<()> {
    let rows = report.scopes.iter().flat_map(|(scope, regions)| {
        regions.iter().map(move |(region, v)| {
            let mut row = vec![scope.label().to_string(), region.clone()];
            row.extend(v.amounts().iter().map(|a| num(*a)));
            row
        })
    });
    out.csv(EMISSIONS_FILE, &EMISSIONS_HEADER, rows)
}

#[derive(Debug, Deserialize)]
struct EmissionsRow {
    scope: String,
    source_region: String,
    pm25: f64,
    nox: f64,
    so2: f64,
    voc: f64,
}

/// Reads a report written by [`render`].
pub fn read_report(path: &Path) -> Result<EmissionsReport> {
    let mut report = EmissionsReport::default();
    for (line, row) in read_rows::<EmissionsRow>(path)? {
        let bad = |msg: String| Failure::validation(format!("{}:{line}: {msg}", path.display()));
        let scope = Scope::parse(&row.scope).ok_or_else(|| bad(format!("unknown scope `{}`", row.scope)))?;
        let v = PollutantVector::new([row.pm25, row.nox, row.so2, row.voc]).map_err(|e| bad(e.to_string()))?;
        let rows = report.scopes.entry(scope).or_default();
        if rows.insert(row.source_region.clone(), v).is_some() {
            return Err(bad(format!("duplicate {} row for `{}`", row.scope, row.source_region)).into());
        }
    }
    Ok(report)
}

pub fn run(scn: &Scenario) -> Result<Outputs> {
    let report = compute(scn)?;
    let mut out = Outputs::default();
    render(&report, &mut out)?;
    Ok(out)
}
