use super::lp::LinearProgram;
use super::{objective, CarbonPrice, GlbAllocation, GlbInstance, GlbObjectiveWeights};
use crate::error::{Error, Result};

/// Largest joint program the dense oracle accepts, in variables.
pub const ORACLE_MAX_VARIABLES: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct LpOptimum {
    /// Weighted cost, or total carbon for an infinite carbon price.
    pub primary: f64,
    /// Remaining price terms after carbon is minimized; only for an infinite carbon price.
    pub secondary: Option<f64>,
    pub allocation: GlbAllocation,
}

/// Solves the whole horizon as one linear program with the simplex solver.
///
/// An infinite carbon price is handled in two stages: minimize carbon, then
/// fix it at its optimum and minimize the remaining terms.
pub fn lp_oracle(instance: &GlbInstance, weights: &GlbObjectiveWeights) -> Result<LpOptimum> {
    instance.validate()?;
    weights.validate()?;
    let n = instance.sites.len();
    let horizon = instance.horizon();
    let vars = n * horizon;
    if vars > ORACLE_MAX_VARIABLES {
        return Err(Error::domain(format!(
            "oracle limited to {ORACLE_MAX_VARIABLES} variables, instance has {vars}"
        )));
    }
    let idx = |i: usize, t: usize| i * horizon + t;

    let mut upper = vec![0.0; vars];
    for (i, site) in instance.sites.iter().enumerate() {
        for t in 0..horizon {
            upper[idx(i, t)] = instance.lambda * site.capacity;
        }
    }
    let mut rows = Vec::with_capacity(horizon + 1);
    for t in 0..horizon {
        let mut row = vec![0.0; vars];
        for i in 0..n {
            row[idx(i, t)] = 1.0;
        }
        rows.push(row);
    }
    let mut lp = LinearProgram {
        costs: vec![0.0; vars],
        upper,
        rows,
        rhs: instance.demand.clone(),
    };
    let fill = |lp: &mut LinearProgram, f: &dyn Fn(usize, usize) -> f64| {
        for i in 0..n {
            for t in 0..horizon {
                lp.costs[idx(i, t)] = f(i, t);
            }
        }
    };
    let to_alloc = |x: &[f64]| GlbAllocation {
        w: (0..n).map(|i| x[i * horizon..(i + 1) * horizon].to_vec()).collect(),
    };

    match weights.carbon_price {
        CarbonPrice::Finite(_) => {
            fill(&mut lp, &|i, t| weights.finite_key(&instance.signals[i], t));
            let sol = lp.solve()?;
            Ok(LpOptimum {
                primary: sol.objective,
                secondary: None,
                allocation: to_alloc(&sol.x),
            })
        }
        CarbonPrice::Infinite => {
            fill(&mut lp, &|i, t| instance.signals[i].carbon_intensity[t]);
            let first = lp.solve()?;
            let carbon_row = lp.costs.clone();
            lp.rows.push(carbon_row);
            lp.rhs.push(first.objective);
            fill(&mut lp, &|i, t| weights.price_terms(&instance.signals[i], t));
            let second = lp.solve()?;
            let allocation = to_alloc(&second.x);
            let value = objective(&allocation, instance, weights);
            Ok(LpOptimum {
                primary: value.primary,
                secondary: Some(value.secondary),
                allocation,
            })
        }
    }
}
