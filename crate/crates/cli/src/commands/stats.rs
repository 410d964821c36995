use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};

use airtoll::signals::{self, SignalKind, SignalSeries, SiteRecord};
use airtoll::stats::{self, SummaryStats};
use airtoll::Error as CoreError;

use super::glb::load_series;
use crate::failure::Failure;
use crate::output::{num, opt, Outputs};
use crate::scenario::Scenario;

pub const SUMMARY_FILE: &str = "summary_stats.csv";
pub const SPREAD_FILE: &str = "spread_table.csv";
pub const SPATIAL_FILE: &str = "spatial_correlation.csv";
pub const CORRELATION_CDF_FILE: &str = "correlation_cdf.csv";
pub const HEALTH_CDF_FILE: &str = "health_price_cdf.csv";
pub const OVERVIEW_FILE: &str = "stats_overview.csv";

/// Pearson correlation over the timestamps both series share; `None` when undefined.
fn aligned_pearson(a: &SignalSeries, b: &SignalSeries) -> Result<Option<f64>> {
    let (mut i, mut j) = (0, 0);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    while i < a.len() && j < b.len() {
        match a.timestamps[i].cmp(&b.timestamps[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                x.push(a.values[i]);
                y.push(b.values[j]);
                i += 1;
                j += 1;
            }
        }
    }
    match stats::pearson(&x, &y) {
        Ok(r) => Ok(Some(r)),
        Err(CoreError::Undefined(_)) => Ok(None),
        Err(e) => Err(e).with_context(|| format!("correlating {}/{} with {}/{}", a.region, a.signal, b.region, b.signal)),
    }
}

fn ratio(h: Option<f64>, c: Option<f64>) -> Option<f64> {
    match (h, c) {
        (Some(h), Some(c)) if c > 0.0 => Some(h / c),
        _ => None,
    }
}

struct RegionSpread {
    region: String,
    pearson: Option<f64>,
    health: SummaryStats,
    carbon: SummaryStats,
}

fn spatial_rows(sites: &[SiteRecord]) -> Vec<Vec<String>> {
    type Getter = fn(&SiteRecord) -> f64;
    let pairs: [(&str, Getter, &str, Getter); 3] = [
        ("health_price", |s| s.health_price, "carbon_intensity", |s| s.carbon_intensity),
        ("electricity_price", |s| s.electricity_price, "health_price", |s| s.health_price),
        ("electricity_price", |s| s.electricity_price, "carbon_intensity", |s| s.carbon_intensity),
    ];
    pairs
        .iter()
        .map(|(xn, xf, yn, yf)| {
            let x: Vec<f64> = sites.iter().map(xf).collect();
            let y: Vec<f64> = sites.iter().map(yf).collect();
            let r = stats::pearson(&x, &y).ok();
            vec![
                xn.to_string(),
                yn.to_string(),
                sites.len().to_string(),
                opt(r),
                if r.is_some() { "ok" } else { "undefined" }.to_string(),
            ]
        })
        .collect()
}

pub fn run(scn: &Scenario) -> Result<Outputs> {
    if scn.file.inputs.signals.is_empty() {
        bail!(Failure::validation(format!(
            "{}: stats needs at least one file in inputs.signals",
            scn.path.display()
        )));
    }
    let sites = match &scn.file.inputs.sites {
        Some(_) => Some(signals::load_sites(scn.require("sites", &scn.file.inputs.sites)?)?),
        None => None,
    };
    let mut series = load_series(scn)?;
    if scn.file.stats.hourly {
        series = series
            .iter()
            .map(|s| {
                let h = signals::hourly_mean(s).with_context(|| format!("hourly averaging {}/{}", s.region, s.signal))?;
                for m in &h.missing_hours {
                    log::warn!("{}/{}: hour {} has too few samples", s.region, s.signal, signals::format_timestamp(m));
                }
                Ok(h.series)
            })
            .collect::<Result<_>>()?;
    }

    let mut summaries = Vec::with_capacity(series.len());
    for s in &series {
        let st = stats::summary(&s.values).with_context(|| format!("series {}/{}", s.region, s.signal))?;
        summaries.push(st);
    }

    let mut by_region: BTreeMap<&str, (Option<usize>, Option<usize>)> = BTreeMap::new();
    for (k, s) in series.iter().enumerate() {
        let entry = by_region.entry(s.region.as_str()).or_default();
        match s.signal.kind {
            SignalKind::HealthPrice => entry.0 = entry.0.or(Some(k)),
            SignalKind::CarbonIntensity => entry.1 = entry.1.or(Some(k)),
            SignalKind::ElectricityPrice => {}
        }
    }
    let mut spreads = Vec::new();
    for (region, pair) in &by_region {
        if let (Some(h), Some(c)) = *pair {
            spreads.push(RegionSpread {
                region: region.to_string(),
                pearson: aligned_pearson(&series[h], &series[c])?,
                health: summaries[h],
                carbon: summaries[c],
            });
        }
    }

    let defined: Vec<f64> = spreads.iter().filter_map(|s| s.pearson).collect();
    let correlation_cdf = if defined.is_empty() { Vec::new() } else { stats::cdf(&defined)? };
    let health_means: Vec<f64> = series
        .iter()
        .zip(&summaries)
        .filter(|(s, _)| s.signal.kind == SignalKind::HealthPrice)
        .map(|(_, st)| st.mean)
        .collect();
    let health_cdf = if health_means.is_empty() { Vec::new() } else { stats::cdf(&health_means)? };

    let mut out = Outputs::default();
    out.csv(
        SUMMARY_FILE,
        &["region_id", "signal", "samples", "mean", "std", "iqr", "normalized_std", "normalized_iqr"],
        series.iter().zip(&summaries).map(|(s, st)| {
            vec![
                s.region.clone(),
                s.signal.to_string(),
                s.len().to_string(),
                num(st.mean),
                num(st.std),
                num(st.iqr),
                opt(st.normalized_std),
                opt(st.normalized_iqr),
            ]
        }),
    )?;
    out.csv(
        SPREAD_FILE,
        &[
            "region_id",
            "pearson",
            "health_normalized_iqr",
            "carbon_normalized_iqr",
            "normalized_iqr_ratio",
            "health_normalized_std",
            "carbon_normalized_std",
            "normalized_std_ratio",
        ],
        spreads.iter().map(|s| {
            vec![
                s.region.clone(),
                opt(s.pearson),
                opt(s.health.normalized_iqr),
                opt(s.carbon.normalized_iqr),
                opt(ratio(s.health.normalized_iqr, s.carbon.normalized_iqr)),
                opt(s.health.normalized_std),
                opt(s.carbon.normalized_std),
                opt(ratio(s.health.normalized_std, s.carbon.normalized_std)),
            ]
        }),
    )?;
    if let Some(sites) = &sites {
        out.csv(SPATIAL_FILE, &["x", "y", "sites", "pearson", "status"], spatial_rows(sites))?;
    }
    out.csv(
        CORRELATION_CDF_FILE,
        &["pearson", "cdf"],
        correlation_cdf.iter().map(|(v, p)| vec![num(*v), num(*p)]),
    )?;
    out.csv(
        HEALTH_CDF_FILE,
        &["mean_health_price", "cdf"],
        health_cdf.iter().map(|(v, p)| vec![num(*v), num(*p)]),
    )?;

    let exceeds = |f: fn(&SummaryStats) -> Option<f64>| {
        spreads
            .iter()
            .filter(|s| matches!((f(&s.health), f(&s.carbon)), (Some(h), Some(c)) if h > c))
            .count()
    };
    let below_06 = (!defined.is_empty())
        .then(|| defined.iter().filter(|r| **r < 0.6).count() as f64 / defined.len() as f64);
    let overview: Vec<(&str, String)> = vec![
        ("series", series.len().to_string()),
        ("regions_with_health_and_carbon", spreads.len().to_string()),
        ("undefined_correlations", (spreads.len() - defined.len()).to_string()),
        ("health_iqr_exceeds_carbon", exceeds(|s| s.normalized_iqr).to_string()),
        ("health_std_exceeds_carbon", exceeds(|s| s.normalized_std).to_string()),
        ("share_correlation_below_0.6", opt(below_06)),
        ("health_price_cdf_span_ratio", opt(stats::cdf_span_ratio(&health_cdf))),
    ];
    out.csv(OVERVIEW_FILE, &["metric", "value"], overview.into_iter().map(|(k, v)| vec![k.to_string(), v]))?;
    Ok(out)
}
