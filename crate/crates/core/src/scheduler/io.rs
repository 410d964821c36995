//! CSV output for scheduler results.

use std::io::Write;

use super::{AllocationCosts, GlbAllocation, GlbInstance};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 4] = ["metric", "baseline", "value", "percent_change"];
pub const ALLOCATION_HEADER: [&str; 3] = ["slot", "site_id", "mwh"];

fn csv_err(err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io("<output>", e),
        other => Error::domain(format!("csv write failed: {other:?}")),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Totals of one solver run against the baseline.
pub fn write_results<W: Write>(out: W, baseline: &AllocationCosts, costs: &AllocationCosts) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    let deltas = costs.against(baseline).deltas.expect("deltas just computed");
    for (metric, b, v, d) in [
        ("health_cost_usd", baseline.health_cost, costs.health_cost, deltas.health),
        ("energy_cost_usd", baseline.energy_cost, costs.energy_cost, deltas.energy),
        ("carbon_ton", baseline.carbon, costs.carbon, deltas.carbon),
    ] {
        w.write_record([metric.to_string(), b.to_string(), v.to_string(), opt(d)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))
}

/// One row per site and slot, slot-major.
pub fn write_allocation<W: Write>(out: W, instance: &GlbInstance, alloc: &GlbAllocation) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ALLOCATION_HEADER).map_err(csv_err)?;
    for t in 0..instance.horizon() {
        for (site, row) in instance.sites.iter().zip(&alloc.w) {
            w.write_record([t.to_string(), site.site_id.clone(), row[t].to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<output>", e))
}
