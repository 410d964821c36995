use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use airtoll::dispersion::{synthesize_matrix, KernelParams, RegionRegistry, SourceReceptorMatrix};
use airtoll::health::{self, Band, DEFAULT_DISCOUNT_RATE};
use airtoll::Species;

use super::attribute::{self, EmissionsReport};
use crate::failure::Failure;
use crate::output::{num, opt, Outputs};
use crate::scenario::Scenario;

pub const REPORT_FILE: &str = "health_report.json";
pub const HOUSEHOLD_FILE: &str = "per_household.csv";
pub const CAR_TRIPS_FILE: &str = "car_trips.csv";

#[derive(Debug, Serialize)]
struct RegionEntry {
    region_id: String,
    cost_low: f64,
    cost_mid: f64,
    cost_high: f64,
    per_household_mid: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TripEntry {
    pm25: f64,
    nox: f64,
}

#[derive(Debug, Serialize)]
struct National {
    cost_low: f64,
    cost_mid: f64,
    cost_high: f64,
    incidences: BTreeMap<String, Band>,
    health_price_usd_per_mwh: Option<Band>,
    car_trips: TripEntry,
}

#[derive(Debug, Serialize)]
struct ReportJson<'a> {
    scenario: &'a str,
    discount_rate: f64,
    regions: Vec<RegionEntry>,
    national: National,
}

pub fn load_matrix(scn: &Scenario, registry: &RegionRegistry) -> Result<SourceReceptorMatrix> {
    let inputs = &scn.file.inputs;
    match (&inputs.sr_matrix, &inputs.kernel) {
        (Some(_), None) => {
            let path = scn.require("sr_matrix", &inputs.sr_matrix)?;
            Ok(SourceReceptorMatrix::load_with_registry(&path, registry)?)
        }
        (None, Some(k)) => {
            let mut params = KernelParams::new(k.decay_km, k.self_coefficient);
            if let Some(scale) = k.species_scale {
                params.species_scale = scale.to_array();
            }
            let regions: Vec<_> = registry.iter().cloned().collect();
            Ok(synthesize_matrix(&regions, &params).context("inputs.kernel")?)
        }
        _ => bail!(Failure::validation(format!(
            "{}: give exactly one of inputs.sr_matrix or inputs.kernel",
            scn.path.display()
        ))),
    }
}

fn upstream_emissions(scn: &Scenario) -> Result<EmissionsReport> {
    if scn.file.inputs.emissions.is_some() {
        let path = scn.require("emissions", &scn.file.inputs.emissions)?;
        return attribute::read_report(&path);
    }
    if scn.file.attribute.is_some() {
        return attribute::compute(scn);
    }
    bail!(Failure::validation(format!(
        "{}: health needs emissions: set inputs.emissions or add an [attribute] section",
        scn.path.display()
    )))
}

pub fn run(scn: &Scenario, discount_override: Option<f64>) -> Result<Outputs> {
    let registry = RegionRegistry::load(scn.require("regions", &scn.file.inputs.regions)?)?;
    let endpoints = health::load_endpoints(scn.require("endpoints", &scn.file.inputs.endpoints)?)?;
    let matrix = load_matrix(scn, &registry)?;
    let emissions = upstream_emissions(scn)?;
    let discount_rate = discount_override
        .or(scn.file.health.discount_rate)
        .unwrap_or(DEFAULT_DISCOUNT_RATE);

    let by_region = emissions.by_region();
    let field = matrix.apply(&by_region).context("dispersing emissions")?;
    let inc = health::incidences(&field, &endpoints, &registry)?;
    let report = health::monetize(&inc, &endpoints, discount_rate)?;
    let households = health::per_household(&report, &registry)?;

    let energy = scn.file.health.energy_mwh.or(emissions.task_energy_mwh);
    let price = match energy {
        Some(e) if e > 0.0 => Some(health::health_price_per_mwh(&report, e)?),
        _ => None,
    };
    let total = emissions.total();
    let trips = health::car_trip_equivalent(&total);

    let json = ReportJson {
        scenario: &scn.file.name,
        discount_rate,
        regions: report
            .regions
            .iter()
            .map(|rc| RegionEntry {
                region_id: rc.region_id.clone(),
                cost_low: rc.cost.low,
                cost_mid: rc.cost.mid,
                cost_high: rc.cost.high,
                per_household_mid: households[&rc.region_id].map(|b| b.mid),
            })
            .collect(),
        national: National {
            cost_low: report.national.low,
            cost_mid: report.national.mid,
            cost_high: report.national.high,
            incidences: report.national_incidences.clone(),
            health_price_usd_per_mwh: price,
            car_trips: TripEntry {
                pm25: trips.pm25,
                nox: trips.nox,
            },
        },
    };

    let mut out = Outputs::default();
    out.json(REPORT_FILE, &json)?;
    out.csv(
        HOUSEHOLD_FILE,
        &["region_id", "households", "cost_low", "cost_mid", "cost_high", "per_household_low", "per_household_mid", "per_household_high"],
        report.regions.iter().map(|rc| {
            let hh = registry.get(&rc.region_id).map_or(0.0, |r| r.households);
            let per = households[&rc.region_id];
            vec![
                rc.region_id.clone(),
                num(hh),
                num(rc.cost.low),
                num(rc.cost.mid),
                num(rc.cost.high),
                opt(per.map(|b| b.low)),
                opt(per.map(|b| b.mid)),
                opt(per.map(|b| b.high)),
            ]
        }),
    )?;
    let trip_row = |label: String, v: &airtoll::PollutantVector| {
        let t = health::car_trip_equivalent(v);
        vec![label, num(v[Species::Pm25]), num(v[Species::Nox]), num(t.pm25), num(t.nox)]
    };
    let mut rows: Vec<Vec<String>> = by_region.iter().map(|(r, v)| trip_row(r.clone(), v)).collect();
    rows.push(trip_row("total".into(), &total));
    out.csv(
        CAR_TRIPS_FILE,
        &["source_region", "pm25_t", "nox_t", "pm25_round_trips", "nox_round_trips"],
        rows,
    )?;
    Ok(out)
}
