//! Exposure-response and monetization of receptor concentration changes.
//!
//! Incidences follow the log-linear excess-incidence form
//! `Δh = population · baseline_rate · (1 − exp(−β·ΔC))` driven by the total
//! PM2.5 concentration delta at each receptor. Every quantity carries a
//! low/mid/high band; the low and high bands come from swapping in alternative
//! parameter sets rather than from confidence intervals.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dispersion::{check_header, line_of, parse_f64, ConcentrationField, RegionRegistry};
use crate::error::{from_csv, Error, Result};
use crate::pollutants::{convert_mass, MassUnit, PollutantVector, Species};

pub const DEFAULT_DISCOUNT_RATE: f64 = 0.02;

/// A low/mid/high triple.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub mid: f64,
    pub high: f64,
}

impl Band {
    pub const ZERO: Band = Band {
        low: 0.0,
        mid: 0.0,
        high: 0.0,
    };

    pub fn new(low: f64, mid: f64, high: f64) -> Self {
        Band { low, mid, high }
    }

    pub fn uniform(v: f64) -> Self {
        Band::new(v, v, v)
    }

    pub fn is_ordered(&self) -> bool {
        self.low <= self.mid && self.mid <= self.high
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Band {
        Band::new(f(self.low), f(self.mid), f(self.high))
    }

    pub fn zip(self, other: Band, f: impl Fn(f64, f64) -> f64) -> Band {
        Band::new(f(self.low, other.low), f(self.mid, other.mid), f(self.high, other.high))
    }
}

impl std::ops::Add for Band {
    type Output = Band;

    fn add(self, rhs: Band) -> Band {
        self.zip(rhs, |a, b| a + b)
    }
}

impl std::ops::AddAssign for Band {
    fn add_assign(&mut self, rhs: Band) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointId {
    Mortality,
    AsthmaSymptoms,
    WorkLossDays,
    SchoolLossDays,
    ErVisits,
    Hospitalizations,
    Other(String),
}

impl EndpointId {
    pub fn as_str(&self) -> &str {
        match self {
            EndpointId::Mortality => "mortality",
            EndpointId::AsthmaSymptoms => "asthma_symptoms",
            EndpointId::WorkLossDays => "work_loss_days",
            EndpointId::SchoolLossDays => "school_loss_days",
            EndpointId::ErVisits => "er_visits",
            EndpointId::Hospitalizations => "hospitalizations",
            EndpointId::Other(s) => s,
        }
    }

    /// Endpoints whose valuation is spread over a cessation lag and discounted.
    pub fn is_lagged(&self) -> bool {
        matches!(self, EndpointId::Mortality)
    }
}

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EndpointId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::domain("empty endpoint id"));
        }
        Ok(match s {
            "mortality" => EndpointId::Mortality,
            "asthma_symptoms" => EndpointId::AsthmaSymptoms,
            "work_loss_days" => EndpointId::WorkLossDays,
            "school_loss_days" => EndpointId::SchoolLossDays,
            "er_visits" => EndpointId::ErVisits,
            "hospitalizations" => EndpointId::Hospitalizations,
            other => EndpointId::Other(other.to_owned()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthEndpoint {
    pub id: EndpointId,
    /// Exposure-response slope per µg/m³, one per parameter set.
    pub beta: Band,
    /// Incidences per person per year.
    pub baseline_rate: f64,
    /// USD (2023) per incidence.
    pub unit_value: Band,
}

impl HealthEndpoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.low >= 0.0) || !self.beta.is_ordered() {
            return Err(Error::domain(format!(
                "endpoint {}: betas must satisfy 0 <= low <= mid <= high",
                self.id
            )));
        }
        if !(self.baseline_rate >= 0.0) {
            return Err(Error::Negative {
                what: format!("baseline rate of {}", self.id),
                value: self.baseline_rate,
            });
        }
        if !(self.unit_value.low >= 0.0) || !self.unit_value.is_ordered() {
            return Err(Error::domain(format!(
                "endpoint {}: unit values must satisfy 0 <= low <= mid <= high",
                self.id
            )));
        }
        Ok(())
    }
}

const ENDPOINT_HEADER: [&str; 8] = [
    "endpoint_id",
    "beta_low",
    "beta_mid",
    "beta_high",
    "baseline_rate",
    "unit_value_low",
    "unit_value_mid",
    "unit_value_high",
];

/// Reads the endpoint parameter CSV.
pub fn load_endpoints(path: impl AsRef<Path>) -> Result<Vec<HealthEndpoint>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| from_csv(path, e))?;
    check_header(path, &mut rdr, &ENDPOINT_HEADER)?;
    let mut out: Vec<HealthEndpoint> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| from_csv(path, e))?;
        let line = line_of(&rec);
        let num = |i: usize| parse_f64(path, line, ENDPOINT_HEADER[i], &rec[i]);
        let id: EndpointId = rec[0]
            .parse()
            .map_err(|e: Error| Error::parse(path, line, Some("endpoint_id"), e.to_string()))?;
        let ep = HealthEndpoint {
            id,
            beta: Band::new(num(1)?, num(2)?, num(3)?),
            baseline_rate: num(4)?,
            unit_value: Band::new(num(5)?, num(6)?, num(7)?),
        };
        ep.validate()
            .map_err(|e| Error::parse(path, line, None, e.to_string()))?;
        if out.iter().any(|o| o.id == ep.id) {
            return Err(Error::parse(
                path,
                line,
                Some("endpoint_id"),
                format!("duplicate endpoint `{}`", ep.id),
            ));
        }
        out.push(ep);
    }
    Ok(out)
}

/// Per (receptor, endpoint) incidence counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceField {
    pub receptors: Vec<String>,
    pub endpoints: Vec<EndpointId>,
    /// `counts[receptor][endpoint]`.
    pub counts: Vec<Vec<Band>>,
}

impl IncidenceField {
    pub fn endpoint_totals(&self) -> Vec<Band> {
        let mut totals = vec![Band::ZERO; self.endpoints.len()];
        for row in &self.counts {
            for (t, c) in totals.iter_mut().zip(row) {
                *t += *c;
            }
        }
        totals
    }
}

fn excess_incidence(population: f64, baseline_rate: f64, beta: f64, delta_c: f64) -> f64 {
    // -expm1 keeps precision in the linear regime where β·ΔC is tiny.
    population * baseline_rate * -(-beta * delta_c).exp_m1()
}

pub fn incidences(
    field: &ConcentrationField,
    endpoints: &[HealthEndpoint],
    regions: &RegionRegistry,
) -> Result<IncidenceField> {
    for ep in endpoints {
        ep.validate()?;
    }
    let mut counts = Vec::with_capacity(field.len());
    for (i, rid) in field.receptors.iter().enumerate() {
        let region = regions.require(rid)?;
        let dc = field.pm25_total(i);
        if !(dc >= 0.0) {
            return Err(Error::Negative {
                what: format!("concentration delta at {rid}"),
                value: dc,
            });
        }
        let row = endpoints
            .iter()
            .map(|ep| {
                ep.beta
                    .map(|b| excess_incidence(region.population, ep.baseline_rate, b, dc))
            })
            .collect();
        counts.push(row);
    }
    Ok(IncidenceField {
        receptors: field.receptors.clone(),
        endpoints: endpoints.iter().map(|e| e.id.clone()).collect(),
        counts,
    })
}

/// Share of a lagged endpoint's value realized in each year after exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSchedule(pub Vec<f64>);

impl Default for LagSchedule {
    /// 20-year cessation lag: 30% in year one, 50% over years two to five,
    /// 20% over years six to twenty.
    fn default() -> Self {
        let mut shares = vec![0.30];
        shares.extend(std::iter::repeat_n(0.50 / 4.0, 4));
        shares.extend(std::iter::repeat_n(0.20 / 15.0, 15));
        LagSchedule(shares)
    }
}

impl LagSchedule {
    /// Present-value factor `Σ_y share_y / (1+r)^y`, year one undiscounted.
    pub fn discount_factor(&self, rate: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(y, share)| share / (1.0 + rate).powi(y as i32))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Valuation {
    pub discount_rate: f64,
    pub mortality_lag: LagSchedule,
}

impl Default for Valuation {
    fn default() -> Self {
        Valuation {
            discount_rate: DEFAULT_DISCOUNT_RATE,
            mortality_lag: LagSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCost {
    pub region_id: String,
    pub cost: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthReport {
    pub regions: Vec<RegionCost>,
    pub national: Band,
    pub national_incidences: BTreeMap<String, Band>,
    pub discount_rate: f64,
}

pub fn monetize(
    inc: &IncidenceField,
    endpoints: &[HealthEndpoint],
    discount_rate: f64,
) -> Result<HealthReport> {
    monetize_with(
        inc,
        endpoints,
        &Valuation {
            discount_rate,
            ..Valuation::default()
        },
    )
}

pub fn monetize_with(
    inc: &IncidenceField,
    endpoints: &[HealthEndpoint],
    valuation: &Valuation,
) -> Result<HealthReport> {
    if !(valuation.discount_rate > -1.0) || !valuation.discount_rate.is_finite() {
        return Err(Error::domain(format!(
            "discount rate must exceed -1, got {}",
            valuation.discount_rate
        )));
    }
    let params: Vec<&HealthEndpoint> = inc
        .endpoints
        .iter()
        .map(|id| {
            endpoints
                .iter()
                .find(|e| &e.id == id)
                .ok_or_else(|| Error::domain(format!("no parameters for endpoint {id}")))
        })
        .collect::<Result<_>>()?;
    let lag_factor = valuation.mortality_lag.discount_factor(valuation.discount_rate);

    let mut regions = Vec::with_capacity(inc.receptors.len());
    let mut national = Band::ZERO;
    for (rid, row) in inc.receptors.iter().zip(&inc.counts) {
        let mut cost = Band::ZERO;
        for (count, ep) in row.iter().zip(&params) {
            let factor = if ep.id.is_lagged() { lag_factor } else { 1.0 };
            cost += count.zip(ep.unit_value, |c, v| c * v * factor);
        }
        national += cost;
        regions.push(RegionCost {
            region_id: rid.clone(),
            cost,
        });
    }
    let national_incidences = inc
        .endpoints
        .iter()
        .zip(inc.endpoint_totals())
        .map(|(id, b)| (id.to_string(), b))
        .collect();
    Ok(HealthReport {
        regions,
        national,
        national_incidences,
        discount_rate: valuation.discount_rate,
    })
}

/// Cost per household by region; `None` where the household count is zero.
pub fn per_household(
    report: &HealthReport,
    regions: &RegionRegistry,
) -> Result<BTreeMap<String, Option<Band>>> {
    let mut out = BTreeMap::new();
    for rc in &report.regions {
        let households = regions.require(&rc.region_id)?.households;
        let v = (households > 0.0).then(|| rc.cost.map(|c| c / households));
        out.insert(rc.region_id.clone(), v);
    }
    Ok(out)
}

/// PM2.5 emitted by an average gasoline light-duty vehicle per mile (exhaust, brake, tire), g.
pub const CAR_PM25_G_PER_MILE: f64 = 0.008;
pub const CAR_NOX_G_PER_MILE: f64 = 0.199;
/// Los Angeles to New York City and back, miles.
pub const LA_NYC_ROUND_TRIP_MILES: f64 = 5580.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarTrips {
    pub pm25: f64,
    pub nox: f64,
}

/// Equivalent number of LA–NYC round trips by car for the PM2.5 and NOx in `emissions`.
pub fn car_trip_equivalent(emissions: &PollutantVector) -> CarTrips {
    let per_trip = |g_per_mile: f64| g_per_mile * LA_NYC_ROUND_TRIP_MILES;
    let grams = |s: Species| convert_mass(emissions[s], MassUnit::MetricTon, MassUnit::Gram);
    CarTrips {
        pm25: grams(Species::Pm25) / per_trip(CAR_PM25_G_PER_MILE),
        nox: grams(Species::Nox) / per_trip(CAR_NOX_G_PER_MILE),
    }
}

/// Health cost per MWh of electricity behind `report`.
pub fn health_price_per_mwh(report: &HealthReport, energy_mwh: f64) -> Result<Band> {
    if !(energy_mwh > 0.0) {
        return Err(Error::domain(format!("energy must be positive, got {energy_mwh}")));
    }
    Ok(report.national.map(|c| c / energy_mwh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::Region;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn registry(pop: f64, households: f64) -> RegionRegistry {
        RegionRegistry::new(vec![Region {
            region_id: "R".into(),
            name: "R".into(),
            lat: 0.0,
            lon: 0.0,
            population: pop,
            households,
            income_ratio: 1.0,
        }])
        .unwrap()
    }

    fn field(dc: f64) -> ConcentrationField {
        ConcentrationField {
            receptors: vec!["R".into()],
            values: vec![[dc, 0.0, 0.0, 0.0]],
        }
    }

    fn endpoint(id: EndpointId, beta: f64, base: f64, value: Band) -> HealthEndpoint {
        HealthEndpoint {
            id,
            beta: Band::uniform(beta),
            baseline_rate: base,
            unit_value: value,
        }
    }

    #[test]
    fn zero_concentration_zero_incidence() {
        let eps = [endpoint(EndpointId::AsthmaSymptoms, 0.01, 0.1, Band::uniform(100.0))];
        let inc = incidences(&field(0.0), &eps, &registry(1e6, 4e5)).unwrap();
        assert_eq!(inc.counts[0][0], Band::ZERO);
    }

    #[test]
    fn closed_form_incidence() {
        let eps = [endpoint(EndpointId::Mortality, 0.005, 0.01, Band::uniform(1.0))];
        let inc = incidences(&field(2.0), &eps, &registry(1e6, 4e5)).unwrap();
        let want = 1e6 * 0.01 * (1.0 - (-0.01f64).exp());
        assert_relative_eq!(inc.counts[0][0].mid, want, max_relative = 1e-12);
        assert_relative_eq!(inc.counts[0][0].mid, 99.50, max_relative = 1e-3);
    }

    #[test]
    fn linear_regime_matches_first_order() {
        let eps = [endpoint(EndpointId::ErVisits, 0.004, 0.02, Band::uniform(1.0))];
        let inc = incidences(&field(0.5), &eps, &registry(2e5, 1e5)).unwrap();
        let linear = 2e5 * 0.02 * 0.004 * 0.5;
        assert_relative_eq!(inc.counts[0][0].mid, linear, max_relative = 0.01);
    }

    #[test]
    fn missing_receptor_population() {
        let eps = [endpoint(EndpointId::ErVisits, 0.004, 0.02, Band::uniform(1.0))];
        let mut f = field(1.0);
        f.receptors[0] = "nowhere".into();
        assert!(matches!(
            incidences(&f, &eps, &registry(1.0, 1.0)),
            Err(Error::UnknownRegion(_))
        ));
    }

    fn fixed_incidence(id: EndpointId, n: f64) -> IncidenceField {
        IncidenceField {
            receptors: vec!["R".into()],
            endpoints: vec![id],
            counts: vec![vec![Band::uniform(n)]],
        }
    }

    #[test]
    fn monetize_examples() {
        let ep = endpoint(
            EndpointId::Hospitalizations,
            0.0,
            0.0,
            Band::new(80_000.0, 100_000.0, 120_000.0),
        );
        let zero = monetize(&fixed_incidence(ep.id.clone(), 0.0), std::slice::from_ref(&ep), 0.02).unwrap();
        assert_eq!(zero.national, Band::ZERO);

        let rep = monetize(&fixed_incidence(ep.id.clone(), 10.0), &[ep], 0.02).unwrap();
        assert_relative_eq!(rep.national.mid, 1.0e6, max_relative = 1e-12);
        assert_relative_eq!(rep.national.low, 0.8e6, max_relative = 1e-12);
        assert_relative_eq!(rep.national.high, 1.2e6, max_relative = 1e-12);
    }

    #[test]
    fn mortality_is_discounted() {
        let ep = endpoint(EndpointId::Mortality, 0.0, 0.0, Band::uniform(1.0e7));
        let inc = fixed_incidence(EndpointId::Mortality, 1.0);
        let undiscounted = monetize(&inc, std::slice::from_ref(&ep), 0.0).unwrap();
        assert_relative_eq!(undiscounted.national.mid, 1.0e7, max_relative = 1e-12);
        let discounted = monetize(&inc, &[ep], 0.02).unwrap();
        assert!(discounted.national.mid < undiscounted.national.mid);
        // Oracle: explicit per-year sum.
        let mut pv = 0.30;
        for y in 1..5 {
            pv += 0.125 / 1.02f64.powi(y);
        }
        for y in 5..20 {
            pv += (0.20 / 15.0) / 1.02f64.powi(y);
        }
        assert_relative_eq!(discounted.national.mid, 1.0e7 * pv, max_relative = 1e-12);
        assert_relative_eq!(LagSchedule::default().0.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn per_household_examples() {
        let report = HealthReport {
            regions: vec![RegionCost {
                region_id: "R".into(),
                cost: Band::uniform(200.0),
            }],
            national: Band::uniform(200.0),
            national_incidences: BTreeMap::new(),
            discount_rate: 0.02,
        };
        let ph = per_household(&report, &registry(500.0, 100.0)).unwrap();
        assert_eq!(ph["R"].unwrap().mid, 2.0);
        let ph = per_household(&report, &registry(500.0, 0.0)).unwrap();
        assert!(ph["R"].is_none());

        // National figure: $6.67B over the back-derived household count.
        let households = 140_480_202.0;
        let national = HealthReport {
            regions: vec![RegionCost {
                region_id: "R".into(),
                cost: Band::uniform(6.67e9),
            }],
            national: Band::uniform(6.67e9),
            national_incidences: BTreeMap::new(),
            discount_rate: 0.02,
        };
        let ph = per_household(&national, &registry(3.3e8, households)).unwrap();
        assert_relative_eq!(ph["R"].unwrap().mid, 47.48, max_relative = 0.01);
    }

    #[test]
    fn car_trip_examples() {
        let one = car_trip_equivalent(&PollutantVector::new([44.64e-6, 1110.42e-6, 0.0, 0.0]).unwrap());
        assert_relative_eq!(one.pm25, 1.0, max_relative = 1e-12);
        assert_relative_eq!(one.nox, 1.0, max_relative = 1e-12);

        let huntsville = car_trip_equivalent(&PollutantVector::new([0.61, 2.80, 2.72, 0.0]).unwrap());
        assert_relative_eq!(huntsville.pm25, 13_665.0, max_relative = 1e-4);
        assert_relative_eq!(huntsville.pm25, 13_800.0, max_relative = 0.02);
        assert_relative_eq!(huntsville.nox, 2_521.6, max_relative = 1e-4);
        assert_relative_eq!(huntsville.nox, 2_500.0, max_relative = 0.02);
    }

    #[test]
    fn health_price_examples() {
        let report = |c: f64| HealthReport {
            regions: vec![],
            national: Band::new(0.54e6 * c / 0.70e6, c, 0.87e6 * c / 0.70e6),
            national_incidences: BTreeMap::new(),
            discount_rate: 0.02,
        };
        let p = health_price_per_mwh(&report(0.70e6), 30_000.0).unwrap();
        assert_relative_eq!(p.mid, 23.333333333333332, max_relative = 1e-12);
        assert!(p.is_ordered());
        assert_eq!(health_price_per_mwh(&report(0.0), 30_000.0).unwrap().mid, 0.0);
        assert_relative_eq!(
            health_price_per_mwh(&report(1.4e6), 30_000.0).unwrap().mid,
            2.0 * p.mid,
            max_relative = 1e-15
        );
        assert!(health_price_per_mwh(&report(1.0), 0.0).is_err());
    }

    #[test]
    fn endpoint_file_parsing() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{}", ENDPOINT_HEADER.join(",")).unwrap();
        writeln!(f, "mortality,0.004,0.006,0.008,0.008,9e6,1.1e7,1.3e7").unwrap();
        writeln!(f, "er_visits,0.002,0.003,0.004,0.01,800,1000,1200").unwrap();
        let eps = load_endpoints(f.path()).unwrap();
        assert_eq!(eps.len(), 2);
        assert_eq!(eps[0].id, EndpointId::Mortality);
        assert_eq!(eps[1].unit_value.high, 1200.0);

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "{}", ENDPOINT_HEADER.join(",")).unwrap();
        writeln!(bad, "er_visits,0.004,0.003,0.002,0.01,800,1000,1200").unwrap();
        assert!(matches!(load_endpoints(bad.path()), Err(Error::Parse { line: 2, .. })));
    }
}
