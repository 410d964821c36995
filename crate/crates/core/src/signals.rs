//! Grid signal ingestion: electricity price, health price and carbon
//! intensity time series, the site registry, and resampling helpers.
//!
//! Signal files use the long format `timestamp_utc,region_id,kind,value`
//! with ISO-8601 UTC timestamps. One file may hold several series; rows of
//! one series must be in strictly increasing time order.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::attribution::RateKind;
use crate::dispersion::{check_header, line_of, parse_f64};
use crate::error::{from_csv, Error, Result};

pub const SIGNAL_HEADER: [&str; 4] = ["timestamp_utc", "region_id", "kind", "value"];
pub const SITE_HEADER: [&str; 6] = [
    "site_id",
    "region_id",
    "annual_energy_mwh",
    "electricity_price_usd_mwh",
    "health_price_usd_mwh",
    "carbon_ton_mwh",
];

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    ElectricityPrice,
    HealthPrice,
    CarbonIntensity,
}

/// What a signal measures plus whether it is a marginal or average figure.
///
/// File tokens are `electricity_price_usd_per_mwh`, `health_price_usd_per_mwh`
/// and `carbon_intensity_ton_per_mwh`; the latter two may carry an
/// `average_` prefix for average-basis signals. Unprefixed tokens are marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignalType {
    pub kind: SignalKind,
    pub basis: RateKind,
}

impl SignalType {
    pub const ELECTRICITY_PRICE: SignalType = SignalType {
        kind: SignalKind::ElectricityPrice,
        basis: RateKind::Marginal,
    };
    pub const HEALTH_PRICE: SignalType = SignalType {
        kind: SignalKind::HealthPrice,
        basis: RateKind::Marginal,
    };
    pub const CARBON_INTENSITY: SignalType = SignalType {
        kind: SignalKind::CarbonIntensity,
        basis: RateKind::Marginal,
    };
}

impl fmt::Display for SignalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.basis == RateKind::Average {
            f.write_str("average_")?;
        }
        f.write_str(match self.kind {
            SignalKind::ElectricityPrice => "electricity_price_usd_per_mwh",
            SignalKind::HealthPrice => "health_price_usd_per_mwh",
            SignalKind::CarbonIntensity => "carbon_intensity_ton_per_mwh",
        })
    }
}

impl FromStr for SignalType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (basis, rest) = match s.strip_prefix("average_") {
            Some(rest) => (RateKind::Average, rest),
            None => (RateKind::Marginal, s),
        };
        let kind = match rest {
            "electricity_price_usd_per_mwh" if basis == RateKind::Marginal => {
                SignalKind::ElectricityPrice
            }
            "health_price_usd_per_mwh" => SignalKind::HealthPrice,
            "carbon_intensity_ton_per_mwh" => SignalKind::CarbonIntensity,
            _ => return Err(Error::domain(format!("unknown signal kind `{s}`"))),
        };
        Ok(SignalType { kind, basis })
    }
}

pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(Utc.from_utc_datetime(&naive));
        }
    }
    None
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSeries {
    pub region: String,
    pub signal: SignalType,
    pub timestamps: Vec<DateTime<Utc>>,
    pub values: Vec<f64>,
}

/// A stretch where consecutive samples are further apart than the series step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    pub after: DateTime<Utc>,
    pub before: DateTime<Utc>,
}

impl SignalSeries {
    pub fn new(
        region: impl Into<String>,
        signal: SignalType,
        timestamps: Vec<DateTime<Utc>>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: timestamps.len(),
                found: values.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::domain("a signal series needs at least one sample"));
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::domain(format!(
                "timestamps not strictly increasing at index {}",
                w + 1
            )));
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Negative {
                what: format!("signal value at index {i}"),
                value: v,
            });
        }
        Ok(SignalSeries {
            region: region.into(),
            signal,
            timestamps,
            values,
        })
    }

    /// Evenly spaced series starting at `start` with the given step.
    pub fn regular(
        region: impl Into<String>,
        signal: SignalType,
        start: DateTime<Utc>,
        step: chrono::Duration,
        values: Vec<f64>,
    ) -> Result<Self> {
        let timestamps = (0..values.len() as i32).map(|k| start + step * k).collect();
        SignalSeries::new(region, signal, timestamps, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Smallest spacing between consecutive samples, in seconds.
    pub fn step_seconds(&self) -> Option<i64> {
        self.timestamps
            .windows(2)
            .map(|w| (w[1] - w[0]).num_seconds())
            .min()
    }

    pub fn gaps(&self) -> Vec<Gap> {
        let Some(step) = self.step_seconds() else {
            return Vec::new();
        };
        self.timestamps
            .windows(2)
            .filter(|w| (w[1] - w[0]).num_seconds() > step)
            .map(|w| Gap {
                after: w[0],
                before: w[1],
            })
            .collect()
    }
}

/// Reads every series in a signal file, in order of first appearance.
pub fn load_signals(path: impl AsRef<Path>) -> Result<Vec<SignalSeries>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| from_csv(path, e))?;
    check_header(path, &mut rdr, &SIGNAL_HEADER)?;

    struct Partial {
        region: String,
        signal: SignalType,
        timestamps: Vec<DateTime<Utc>>,
        values: Vec<f64>,
    }
    let mut groups: Vec<Partial> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| from_csv(path, e))?;
        let line = line_of(&rec);
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| {
            Error::parse(path, line, Some("timestamp_utc"), format!("bad timestamp `{}`", &rec[0]))
        })?;
        let region = rec[1].trim();
        if region.is_empty() {
            return Err(Error::parse(path, line, Some("region_id"), "empty region id"));
        }
        let signal: SignalType = rec[2]
            .parse()
            .map_err(|e: Error| Error::parse(path, line, Some("kind"), e.to_string()))?;
        let value = parse_f64(path, line, "value", &rec[3])?;
        if value < 0.0 {
            return Err(Error::parse(path, line, Some("value"), format!("negative value {value}")));
        }
        let g = match groups
            .iter_mut()
            .position(|g| g.region == region && g.signal == signal)
        {
            Some(i) => &mut groups[i],
            None => {
                groups.push(Partial {
                    region: region.to_owned(),
                    signal,
                    timestamps: Vec::new(),
                    values: Vec::new(),
                });
                groups.last_mut().unwrap()
            }
        };
        if let Some(prev) = g.timestamps.last() {
            if ts <= *prev {
                return Err(Error::parse(
                    path,
                    line,
                    Some("timestamp_utc"),
                    format!(
                        "timestamp {} does not follow {} for {region}/{signal}",
                        format_timestamp(&ts),
                        format_timestamp(prev)
                    ),
                ));
            }
        }
        g.timestamps.push(ts);
        g.values.push(value);
    }
    let series: Vec<SignalSeries> = groups
        .into_iter()
        .map(|g| SignalSeries::new(g.region, g.signal, g.timestamps, g.values))
        .collect::<Result<_>>()?;
    for s in &series {
        let gaps = s.gaps();
        if !gaps.is_empty() {
            log::warn!(
                "{}: {}/{} has {} gap(s), first after {}",
                path.display(),
                s.region,
                s.signal,
                gaps.len(),
                format_timestamp(&gaps[0].after)
            );
        }
    }
    Ok(series)
}

/// Reads a file that must contain exactly one series.
pub fn load_series(path: impl AsRef<Path>) -> Result<SignalSeries> {
    let path = path.as_ref();
    let mut all = load_signals(path)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        0 => Err(Error::parse(path, 1, None, "file contains no samples")),
        n => Err(Error::parse(path, 1, None, format!("expected one series, found {n}"))),
    }
}

/// Writes series one after another in the signal CSV schema.
pub fn save_signals(path: impl AsRef<Path>, series: &[SignalSeries]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| from_csv(path, e))?;
    w.write_record(SIGNAL_HEADER).map_err(|e| from_csv(path, e))?;
    for s in series {
        let kind = s.signal.to_string();
        for (ts, v) in s.timestamps.iter().zip(&s.values) {
            w.write_record([
                format_timestamp(ts).as_str(),
                s.region.as_str(),
                kind.as_str(),
                v.to_string().as_str(),
            ])
            .map_err(|e| from_csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Result of [`hourly_mean`].
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyMean {
    /// Hour-start timestamps of every hour with enough samples.
    pub series: SignalSeries,
    /// Hours inside the span that lacked enough samples.
    pub missing_hours: Vec<DateTime<Utc>>,
    /// Incomplete final hour that was dropped, if any.
    pub dropped_trailing: Option<DateTime<Utc>>,
}

fn hour_start(ts: &DateTime<Utc>) -> DateTime<Utc> {
    ts.with_minute(0)
        .and_then(|t| t.with_second(0))
        .and_then(|t| t.with_nanosecond(0))
        .expect("zeroing minutes is always valid")
}

/// Averages a sub-hourly series into clock hours.
///
/// An hour is kept when at least three quarters of its sub-samples are
/// present (9 of 12 at 5-minute cadence), otherwise it is reported missing.
/// A final hour cut short by the end of the series is dropped.
pub fn hourly_mean(series: &SignalSeries) -> Result<HourlyMean> {
    let step = series
        .step_seconds()
        .ok_or_else(|| Error::Cadence("need at least two samples to infer cadence".into()))?;
    if step <= 0 || 3600 % step != 0 {
        return Err(Error::Cadence(format!("{step} s does not divide one hour")));
    }
    for w in series.timestamps.windows(2) {
        let d = (w[1] - w[0]).num_seconds();
        if d % step != 0 {
            return Err(Error::Cadence(format!(
                "spacing of {d} s at {} is not a multiple of {step} s",
                format_timestamp(&w[0])
            )));
        }
    }
    for ts in &series.timestamps {
        let offset = (*ts - hour_start(ts)).num_milliseconds();
        if offset % (step * 1000) != 0 {
            return Err(Error::Cadence(format!(
                "sample at {} is not aligned to the {step} s grid",
                format_timestamp(ts)
            )));
        }
    }

    let per_hour = (3600 / step) as usize;
    let required = (3 * per_hour).div_ceil(4);
    let last_ts = *series.timestamps.last().unwrap();
    let last_slot_of = |h: DateTime<Utc>| h + chrono::Duration::seconds(3600 - step);

    let mut hours = Vec::new();
    let mut means = Vec::new();
    let mut missing_hours = Vec::new();
    let mut dropped_trailing = None;

    let mut i = 0;
    let mut hour = hour_start(&series.timestamps[0]);
    while hour <= last_ts {
        let next = hour + chrono::Duration::hours(1);
        // Summing offsets from the hour's first sample keeps constant hours exact.
        let pivot = series.values.get(i).copied().unwrap_or(0.0);
        let mut sum = 0.0;
        let mut n = 0usize;
        while i < series.len() && series.timestamps[i] < next {
            sum += series.values[i] - pivot;
            n += 1;
            i += 1;
        }
        if last_slot_of(hour) > last_ts && n < per_hour {
            log::warn!(
                "{}/{}: dropping partial trailing hour {} ({n} of {per_hour} samples)",
                series.region,
                series.signal,
                format_timestamp(&hour)
            );
            dropped_trailing = Some(hour);
        } else if n >= required {
            hours.push(hour);
            means.push(pivot + sum / n as f64);
        } else {
            missing_hours.push(hour);
        }
        hour = next;
    }
    if means.is_empty() {
        return Err(Error::Cadence("no complete hour in series".into()));
    }
    Ok(HourlyMean {
        series: SignalSeries::new(series.region.clone(), series.signal, hours, means)?,
        missing_hours,
        dropped_trailing,
    })
}

/// Linear interpolation between two reference years.
pub fn interpolate_years(y0: f64, v_start: f64, y1: f64, v_end: f64, y: f64) -> Result<f64> {
    if !(y0 <= y1) {
        return Err(Error::domain(format!("reference years out of order: {y0} > {y1}")));
    }
    if !(y0 <= y && y <= y1) {
        return Err(Error::domain(format!("year {y} outside [{y0}, {y1}]")));
    }
    if y1 == y0 {
        return Ok(v_start);
    }
    let frac = (y - y0) / (y1 - y0);
    Ok(v_start + (v_end - v_start) * frac)
}

/// A data-center site with annual energy use and annual-average signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub site_id: String,
    pub region_id: String,
    pub annual_energy_mwh: f64,
    pub electricity_price: f64,
    pub health_price: f64,
    pub carbon_intensity: f64,
}

pub fn load_sites(path: impl AsRef<Path>) -> Result<Vec<SiteRecord>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| from_csv(path, e))?;
    check_header(path, &mut rdr, &SITE_HEADER)?;
    let mut sites: Vec<SiteRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| from_csv(path, e))?;
        let line = line_of(&rec);
        let mut nums = [0.0; 4];
        for (k, slot) in nums.iter_mut().enumerate() {
            let col = SITE_HEADER[k + 2];
            *slot = parse_f64(path, line, col, &rec[k + 2])?;
            if *slot < 0.0 {
                return Err(Error::parse(path, line, Some(col), format!("negative value {slot}")));
            }
        }
        let site_id = rec[0].trim().to_owned();
        if site_id.is_empty() {
            return Err(Error::parse(path, line, Some("site_id"), "empty site id"));
        }
        if sites.iter().any(|s| s.site_id == site_id) {
            return Err(Error::parse(path, line, Some("site_id"), format!("duplicate site `{site_id}`")));
        }
        sites.push(SiteRecord {
            site_id,
            region_id: rec[1].trim().to_owned(),
            annual_energy_mwh: nums[0],
            electricity_price: nums[1],
            health_price: nums[2],
            carbon_intensity: nums[3],
        });
    }
    if sites.is_empty() {
        return Err(Error::parse(path, 1, None, "site registry is empty"));
    }
    Ok(sites)
}
