//! Geographic load balancing across data-center sites.
//!
//! Each hourly slot `t` must dispatch its total demand `M_t` across sites,
//! with site `i` taking between zero and `λ·l_i` MWh, where `l_i` is the
//! site's default per-slot load. The objective weighs per-MWh electricity
//! price, health price and (optionally) carbon cost. Slots are uncoupled, so
//! the optimum is a per-slot fractional knapsack solved greedily in
//! [`solve_greedy`]; [`lp_oracle`] re-solves the joint program with a generic
//! simplex for verification.

mod greedy;
pub mod io;
pub mod lp;
mod oracle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attribution::RateKind;
use crate::error::{Error, Result};
use crate::signals::{SignalKind, SignalSeries, SiteRecord};

pub use greedy::solve_greedy;
pub use oracle::{lp_oracle, LpOptimum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlbSite {
    pub site_id: String,
    pub region_id: String,
    /// Default load per slot `l_i`, MWh.
    pub capacity: f64,
}

/// Per-site, per-slot price and intensity signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSignals {
    /// USD/MWh.
    pub electricity_price: Vec<f64>,
    /// USD/MWh.
    pub health_price: Vec<f64>,
    /// Metric tons CO2 per MWh.
    pub carbon_intensity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlbInstance {
    pub sites: Vec<GlbSite>,
    /// Total demand `M_t` per slot, MWh.
    pub demand: Vec<f64>,
    /// Capacity slackness `λ ≥ 1`.
    pub lambda: f64,
    /// One entry per site, each series of length `demand.len()`.
    pub signals: Vec<SiteSignals>,
}

impl GlbInstance {
    pub fn new(
        sites: Vec<GlbSite>,
        demand: Vec<f64>,
        lambda: f64,
        signals: Vec<SiteSignals>,
    ) -> Result<Self> {
        let inst = GlbInstance {
            sites,
            demand,
            lambda,
            signals,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 1.0) || !self.lambda.is_finite() {
            return Err(Error::domain(format!("slackness must be >= 1, got {}", self.lambda)));
        }
        if self.sites.is_empty() {
            return Err(Error::domain("instance has no sites"));
        }
        if self.demand.is_empty() {
            return Err(Error::domain("instance has an empty horizon"));
        }
        if self.signals.len() != self.sites.len() {
            return Err(Error::LengthMismatch {
                expected: self.sites.len(),
                found: self.signals.len(),
            });
        }
        for (i, site) in self.sites.iter().enumerate() {
            if self.sites[..i].iter().any(|s| s.site_id == site.site_id) {
                return Err(Error::domain(format!("duplicate site `{}`", site.site_id)));
            }
            if !(site.capacity >= 0.0) || !site.capacity.is_finite() {
                return Err(Error::Negative {
                    what: format!("capacity of {}", site.site_id),
                    value: site.capacity,
                });
            }
        }
        for (t, &m) in self.demand.iter().enumerate() {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::Negative {
                    what: format!("demand in slot {t}"),
                    value: m,
                });
            }
        }
        let horizon = self.horizon();
        for (site, sig) in self.sites.iter().zip(&self.signals) {
            for (name, series) in [
                ("electricity price", &sig.electricity_price),
                ("health price", &sig.health_price),
                ("carbon intensity", &sig.carbon_intensity),
            ] {
                if series.len() != horizon {
                    return Err(Error::LengthMismatch {
                        expected: horizon,
                        found: series.len(),
                    });
                }
                if let Some(&v) = series.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Negative {
                        what: format!("{name} at {}", site.site_id),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    /// `λ·l_i` for every site.
    pub fn upper_bounds(&self) -> Vec<f64> {
        self.sites.iter().map(|s| self.lambda * s.capacity).collect()
    }

    /// Sites from a registry with constant annual-average signals.
    ///
    /// The default load is `l_i = W_i / horizon` and demand is `M_t = Σ l_i`,
    /// so the baseline dispatches exactly each site's annual energy.
    pub fn from_site_records(records: &[SiteRecord], horizon: usize, lambda: f64) -> Result<Self> {
        Self::from_site_records_with_signals(records, &[], horizon, lambda)
    }

    /// Like [`from_site_records`](Self::from_site_records), but any
    /// `(region, kind)` present in `series` replaces the constant signal.
    ///
    /// Series must cover at least `horizon` samples; the first `horizon` are
    /// used. Health and carbon signals must all share one basis (marginal or
    /// average).
    pub fn from_site_records_with_signals(
        records: &[SiteRecord],
        series: &[SignalSeries],
        horizon: usize,
        lambda: f64,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::domain("horizon must be at least one slot"));
        }
        let bases: Vec<RateKind> = series
            .iter()
            .filter(|s| s.signal.kind != SignalKind::ElectricityPrice)
            .map(|s| s.signal.basis)
            .collect();
        if bases.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::domain(
                "health and carbon signals mix marginal and average bases",
            ));
        }
        let pick = |region: &str, kind: SignalKind, constant: f64| -> Result<Vec<f64>> {
            match series
                .iter()
                .find(|s| s.region == region && s.signal.kind == kind)
            {
                Some(s) if s.len() < horizon => Err(Error::domain(format!(
                    "{}/{} has {} samples, horizon needs {horizon}",
                    s.region,
                    s.signal,
                    s.len()
                ))),
                Some(s) => Ok(s.values[..horizon].to_vec()),
                None => Ok(vec![constant; horizon]),
            }
        };
        let mut sites = Vec::with_capacity(records.len());
        let mut signals = Vec::with_capacity(records.len());
        for r in records {
            sites.push(GlbSite {
                site_id: r.site_id.clone(),
                region_id: r.region_id.clone(),
                capacity: r.annual_energy_mwh / horizon as f64,
            });
            signals.push(SiteSignals {
                electricity_price: pick(&r.region_id, SignalKind::ElectricityPrice, r.electricity_price)?,
                health_price: pick(&r.region_id, SignalKind::HealthPrice, r.health_price)?,
                carbon_intensity: pick(&r.region_id, SignalKind::CarbonIntensity, r.carbon_intensity)?,
            });
        }
        let total: f64 = sites.iter().map(|s| s.capacity).sum();
        GlbInstance::new(sites, vec![total; horizon], lambda, signals)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut inst = self.clone();
        inst.lambda = lambda;
        inst.validate()?;
        Ok(inst)
    }
}

/// Carbon price in USD per metric ton; `Infinite` ranks sites purely by carbon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CarbonPrice {
    Finite(f64),
    Infinite,
}

impl CarbonPrice {
    pub const ZERO: CarbonPrice = CarbonPrice::Finite(0.0);

    pub fn is_active(&self) -> bool {
        !matches!(self, CarbonPrice::Finite(p) if *p == 0.0)
    }
}

impl fmt::Display for CarbonPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CarbonPrice::Finite(p) => write!(f, "{p}"),
            CarbonPrice::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for CarbonPrice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(CarbonPrice::Infinite),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::domain(format!("invalid carbon price `{s}`")))?;
                if p.is_infinite() && p > 0.0 {
                    return Ok(CarbonPrice::Infinite);
                }
                if !(p >= 0.0) {
                    return Err(Error::domain(format!("carbon price must be >= 0, got {s}")));
                }
                Ok(CarbonPrice::Finite(p))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlbObjectiveWeights {
    pub include_electricity: bool,
    pub carbon_price: CarbonPrice,
    pub include_health: bool,
}

impl GlbObjectiveWeights {
    /// Electricity plus health cost.
    pub fn hi_glb() -> Self {
        GlbObjectiveWeights {
            include_electricity: true,
            carbon_price: CarbonPrice::ZERO,
            include_health: true,
        }
    }

    /// Health cost alone, with electricity priced at zero.
    pub fn health_only() -> Self {
        GlbObjectiveWeights {
            include_electricity: false,
            carbon_price: CarbonPrice::ZERO,
            include_health: true,
        }
    }

    /// Electricity cost plus carbon at the given price.
    pub fn carbon_aware(price: CarbonPrice) -> Self {
        GlbObjectiveWeights {
            include_electricity: true,
            carbon_price: price,
            include_health: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let CarbonPrice::Finite(p) = self.carbon_price {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::domain(format!("carbon price must be >= 0, got {p}")));
            }
        }
        if !self.include_electricity && !self.include_health && !self.carbon_price.is_active() {
            return Err(Error::domain("objective has no cost term enabled"));
        }
        Ok(())
    }

    /// Per-MWh cost of the non-carbon terms at site `i`, slot `t`.
    pub(crate) fn price_terms(&self, sig: &SiteSignals, t: usize) -> f64 {
        let mut k = 0.0;
        if self.include_electricity {
            k += sig.electricity_price[t];
        }
        if self.include_health {
            k += sig.health_price[t];
        }
        k
    }

    /// Per-MWh objective coefficient for finite carbon prices.
    pub(crate) fn finite_key(&self, sig: &SiteSignals, t: usize) -> f64 {
        let mut k = self.price_terms(sig, t);
        if let CarbonPrice::Finite(p) = self.carbon_price {
            if p != 0.0 {
                k += p * sig.carbon_intensity[t];
            }
        }
        k
    }
}

/// Assigned load `w[i][t]` in MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlbAllocation {
    pub w: Vec<Vec<f64>>,
}

impl GlbAllocation {
    pub fn scaled(&self, k: f64) -> GlbAllocation {
        GlbAllocation {
            w: self.w.iter().map(|row| row.iter().map(|v| v * k).collect()).collect(),
        }
    }
}

/// Value of an allocation under an objective.
///
/// For finite carbon prices `primary` is the full weighted cost and
/// `secondary` is zero. For an infinite price `primary` is total carbon and
/// `secondary` the remaining price terms, compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub primary: f64,
    pub secondary: f64,
}

pub fn objective(
    alloc: &GlbAllocation,
    instance: &GlbInstance,
    weights: &GlbObjectiveWeights,
) -> ObjectiveValue {
    let mut primary = 0.0;
    let mut secondary = 0.0;
    for (row, sig) in alloc.w.iter().zip(&instance.signals) {
        for (t, &w) in row.iter().enumerate() {
            match weights.carbon_price {
                CarbonPrice::Infinite => {
                    primary += sig.carbon_intensity[t] * w;
                    secondary += weights.price_terms(sig, t) * w;
                }
                CarbonPrice::Finite(_) => primary += weights.finite_key(sig, t) * w,
            }
        }
    }
    ObjectiveValue { primary, secondary }
}

/// Every site carries its default share of demand: `w_it = l_i·M_t/Σ_j l_j`,
/// which is exactly `l_i` when demand equals the summed default loads.
pub fn baseline(instance: &GlbInstance) -> GlbAllocation {
    let total: f64 = instance.sites.iter().map(|s| s.capacity).sum();
    GlbAllocation {
        w: instance
            .sites
            .iter()
            .map(|s| {
                instance
                    .demand
                    .iter()
                    .map(|&m| {
                        if m == total {
                            s.capacity
                        } else if total > 0.0 {
                            s.capacity * (m / total)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Checks the dispatch and capacity constraints.
///
/// Demand balance must hold to `balance_tol·max(M_t, 1)`; capacity bounds
/// allow a relative slack of `bound_tol`.
pub fn check_feasible(
    alloc: &GlbAllocation,
    instance: &GlbInstance,
    balance_tol: f64,
    bound_tol: f64,
) -> Result<()> {
    if alloc.w.len() != instance.sites.len() {
        return Err(Error::InfeasibleAllocation {
            constraint: "shape",
            detail: format!("{} site rows for {} sites", alloc.w.len(), instance.sites.len()),
        });
    }
    let horizon = instance.horizon();
    if let Some(row) = alloc.w.iter().find(|r| r.len() != horizon) {
        return Err(Error::InfeasibleAllocation {
            constraint: "shape",
            detail: format!("{} slots for horizon {horizon}", row.len()),
        });
    }
    for (i, (row, site)) in alloc.w.iter().zip(&instance.sites).enumerate() {
        let cap = instance.lambda * site.capacity;
        for (t, &w) in row.iter().enumerate() {
            let slack = bound_tol * cap.max(1.0);
            if !(w >= -slack) || w > cap + slack {
                return Err(Error::InfeasibleAllocation {
                    constraint: "capacity 0 <= w <= lambda*l",
                    detail: format!("site {i} ({}) slot {t}: w = {w}, cap = {cap}", site.site_id),
                });
            }
        }
    }
    for (t, &m) in instance.demand.iter().enumerate() {
        let total: f64 = alloc.w.iter().map(|row| row[t]).sum();
        if (total - m).abs() > balance_tol * m.max(1.0) {
            return Err(Error::InfeasibleAllocation {
                constraint: "demand balance sum_i w = M",
                detail: format!("slot {t}: dispatched {total}, demand {m}"),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentDeltas {
    pub health: Option<f64>,
    pub energy: Option<f64>,
    pub carbon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationCosts {
    /// USD.
    pub health_cost: f64,
    /// USD.
    pub energy_cost: f64,
    /// Metric tons.
    pub carbon: f64,
    pub deltas: Option<PercentDeltas>,
}

pub fn percent_change(value: f64, baseline: f64) -> Option<f64> {
    (baseline != 0.0).then(|| (value - baseline) / baseline * 100.0)
}

impl AllocationCosts {
    pub fn against(mut self, baseline: &AllocationCosts) -> Self {
        self.deltas = Some(PercentDeltas {
            health: percent_change(self.health_cost, baseline.health_cost),
            energy: percent_change(self.energy_cost, baseline.energy_cost),
            carbon: percent_change(self.carbon, baseline.carbon),
        });
        self
    }
}

/// Feasibility tolerances used when evaluating externally supplied allocations.
pub const BALANCE_TOL: f64 = 1e-9;
pub const BOUND_TOL: f64 = 1e-12;

/// Health, electricity and carbon totals of a feasible allocation.
pub fn evaluate(alloc: &GlbAllocation, instance: &GlbInstance) -> Result<AllocationCosts> {
    check_feasible(alloc, instance, BALANCE_TOL, BOUND_TOL)?;
    let mut costs = AllocationCosts {
        health_cost: 0.0,
        energy_cost: 0.0,
        carbon: 0.0,
        deltas: None,
    };
    for (row, sig) in alloc.w.iter().zip(&instance.signals) {
        for (t, &w) in row.iter().enumerate() {
            costs.health_cost += sig.health_price[t] * w;
            costs.energy_cost += sig.electricity_price[t] * w;
            costs.carbon += sig.carbon_intensity[t] * w;
        }
    }
    Ok(costs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<P> {
    pub parameter: P,
    pub allocation: GlbAllocation,
    pub costs: AllocationCosts,
}

/// Carbon-aware GLB (electricity + carbon) at each carbon price, compared with the baseline.
pub fn sweep_carbon_price(
    instance: &GlbInstance,
    prices: &[CarbonPrice],
) -> Result<Vec<SweepRow<CarbonPrice>>> {
    let base = evaluate(&baseline(instance), instance)?;
    prices
        .iter()
        .map(|&p| {
            let allocation = solve_greedy(instance, &GlbObjectiveWeights::carbon_aware(p))?;
            let costs = evaluate(&allocation, instance)?.against(&base);
            Ok(SweepRow {
                parameter: p,
                allocation,
                costs,
            })
        })
        .collect()
}

/// HI-GLB at each slackness, compared with the baseline.
pub fn sweep_lambda(instance: &GlbInstance, lambdas: &[f64]) -> Result<Vec<SweepRow<f64>>> {
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 1.0)) {
        return Err(Error::domain(format!("slackness must be >= 1, got {l}")));
    }
    let base = evaluate(&baseline(instance), instance)?;
    lambdas
        .iter()
        .map(|&lambda| {
            let inst = instance.with_lambda(lambda)?;
            let allocation = solve_greedy(&inst, &GlbObjectiveWeights::hi_glb())?;
            let costs = evaluate(&allocation, &inst)?.against(&base);
            Ok(SweepRow {
                parameter: lambda,
                allocation,
                costs,
            })
        })
        .collect()
}
