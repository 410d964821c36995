use anyhow::{bail, Context, Result};

use airtoll::scheduler::{
    self, io as sched_io, AllocationCosts, CarbonPrice, GlbAllocation, GlbInstance,
    GlbObjectiveWeights,
};
use airtoll::signals::{self, SignalSeries};

use crate::failure::Failure;
use crate::output::{num, opt, Outputs};
use crate::scenario::{carbon_prices, Scenario};

pub const SUMMARY_FILE: &str = "glb_summary.csv";
pub const LAMBDA_FILE: &str = "lambda_sweep.csv";
pub const DEFAULT_HORIZON: usize = 24;
pub const DEFAULT_LAMBDA: f64 = 1.5;
pub const DEFAULT_LAMBDAS: [f64; 4] = [1.0, 1.2, 1.5, 2.0];

pub fn default_carbon_prices() -> Vec<CarbonPrice> {
    vec![
        CarbonPrice::ZERO,
        CarbonPrice::Finite(5.0),
        CarbonPrice::Finite(200.0),
        CarbonPrice::Infinite,
    ]
}

pub fn load_series(scn: &Scenario) -> Result<Vec<SignalSeries>> {
    let mut all = Vec::new();
    for rel in &scn.file.inputs.signals {
        let path = scn.resolve(rel).context("inputs.signals")?;
        all.extend(signals::load_signals(&path)?);
    }
    Ok(all)
}

pub fn build_instance(scn: &Scenario, lambda_override: Option<f64>) -> Result<GlbInstance> {
    let cfg = &scn.file.glb;
    let records = signals::load_sites(scn.require("sites", &scn.file.inputs.sites)?)?;
    let series = load_series(scn)?;
    let horizon = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
    let lambda = lambda_override.or(cfg.lambda).unwrap_or(DEFAULT_LAMBDA);
    let mut inst = GlbInstance::from_site_records_with_signals(&records, &series, horizon, lambda)?;
    if let Some(f) = cfg.demand_factor {
        if !(f >= 0.0) || !f.is_finite() {
            bail!(Failure::validation(format!("glb.demand_factor must be >= 0, got {f}")));
        }
        inst.demand.iter_mut().for_each(|m| *m *= f);
    }
    Ok(inst)
}

struct SolverRun {
    name: String,
    carbon_price: Option<CarbonPrice>,
    allocation: GlbAllocation,
    costs: AllocationCosts,
}

fn solver_name(p: CarbonPrice) -> String {
    format!("carbon_{p}")
}

pub fn run(scn: &Scenario, lambda_override: Option<f64>, carbon_override: Option<CarbonPrice>) -> Result<Outputs> {
    let cfg = &scn.file.glb;
    let inst = build_instance(scn, lambda_override)?;
    let prices = match (carbon_override, &cfg.carbon_prices) {
        (Some(p), _) => vec![p],
        (None, Some(list)) => carbon_prices(list)?,
        (None, None) => default_carbon_prices(),
    };
    let lambdas = cfg.lambdas.clone().unwrap_or_else(|| DEFAULT_LAMBDAS.to_vec());

    let mut plans: Vec<(String, Option<CarbonPrice>, GlbObjectiveWeights)> = prices
        .iter()
        .map(|&p| (solver_name(p), Some(p), GlbObjectiveWeights::carbon_aware(p)))
        .collect();
    plans.push(("hi_glb_health_only".into(), None, GlbObjectiveWeights::health_only()));
    plans.push(("hi_glb".into(), None, GlbObjectiveWeights::hi_glb()));

    let mut allocations = Vec::with_capacity(plans.len());
    for (name, price, weights) in plans {
        let allocation = scheduler::solve_greedy(&inst, &weights).with_context(|| format!("solver {name}"))?;
        allocations.push((name, price, allocation));
    }
    let base_alloc = scheduler::baseline(&inst);
    let base = scheduler::evaluate(&base_alloc, &inst).context("baseline allocation")?;
    let mut runs = vec![SolverRun {
        name: "baseline".into(),
        carbon_price: None,
        allocation: base_alloc,
        costs: base.against(&base),
    }];
    for (name, carbon_price, allocation) in allocations {
        let costs = scheduler::evaluate(&allocation, &inst)?.against(&base);
        runs.push(SolverRun {
            name,
            carbon_price,
            allocation,
            costs,
        });
    }

    let sweep = scheduler::sweep_lambda(&inst, &lambdas)?;

    let mut out = Outputs::default();
    out.csv(
        SUMMARY_FILE,
        &[
            "solver",
            "carbon_price_usd_per_ton",
            "lambda",
            "health_cost_usd",
            "energy_cost_usd",
            "carbon_ton",
            "health_change_pct",
            "energy_change_pct",
            "carbon_change_pct",
        ],
        runs.iter().map(|r| {
            let d = r.costs.deltas.expect("deltas set against baseline");
            vec![
                r.name.clone(),
                r.carbon_price.map_or_else(|| "NA".into(), |p| p.to_string()),
                num(inst.lambda),
                num(r.costs.health_cost),
                num(r.costs.energy_cost),
                num(r.costs.carbon),
                opt(d.health),
                opt(d.energy),
                opt(d.carbon),
            ]
        }),
    )?;
    for r in &runs {
        let mut buf = Vec::new();
        sched_io::write_results(&mut buf, &base, &r.costs)?;
        out.add(&format!("results_{}.csv", r.name), buf);
        let mut buf = Vec::new();
        sched_io::write_allocation(&mut buf, &inst, &r.allocation)?;
        out.add(&format!("allocation_{}.csv", r.name), buf);
    }
    out.csv(
        LAMBDA_FILE,
        &[
            "lambda",
            "health_cost_usd",
            "energy_cost_usd",
            "carbon_ton",
            "health_change_pct",
            "energy_change_pct",
            "carbon_change_pct",
        ],
        sweep.iter().map(|row| {
            let d = row.costs.deltas.expect("deltas set against baseline");
            vec![
                num(row.parameter),
                num(row.costs.health_cost),
                num(row.costs.energy_cost),
                num(row.costs.carbon),
                opt(d.health),
                opt(d.energy),
                opt(d.carbon),
            ]
        }),
    )?;
    Ok(out)
}
