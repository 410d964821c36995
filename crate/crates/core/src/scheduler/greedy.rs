use super::{CarbonPrice, GlbAllocation, GlbInstance, GlbObjectiveWeights};
use crate::error::{Error, Result};

/// Per-slot ordering key. Compared lexicographically; the second component
/// only matters for an infinite carbon price.
fn slot_key(weights: &GlbObjectiveWeights, instance: &GlbInstance, i: usize, t: usize) -> (f64, f64) {
    let sig = &instance.signals[i];
    match weights.carbon_price {
        CarbonPrice::Infinite => (sig.carbon_intensity[t], weights.price_terms(sig, t)),
        CarbonPrice::Finite(_) => (weights.finite_key(sig, t), 0.0),
    }
}

/// Optimal dispatch by filling the cheapest sites first in every slot.
///
/// Equal keys are broken by `site_id`, so the result is deterministic.
pub fn solve_greedy(instance: &GlbInstance, weights: &GlbObjectiveWeights) -> Result<GlbAllocation> {
    instance.validate()?;
    weights.validate()?;
    let n = instance.sites.len();
    let caps = instance.upper_bounds();
    let total_cap: f64 = caps.iter().sum();
    let mut w = vec![vec![0.0; instance.horizon()]; n];
    let mut order: Vec<usize> = (0..n).collect();

    for (t, &demand) in instance.demand.iter().enumerate() {
        if demand > total_cap + 1e-9 * demand.max(1.0) {
            return Err(Error::InfeasibleSlot {
                slot: t,
                demand,
                capacity: total_cap,
            });
        }
        let keys: Vec<(f64, f64)> = (0..n).map(|i| slot_key(weights, instance, i, t)).collect();
        order.sort_by(|&a, &b| {
            keys[a]
                .0
                .total_cmp(&keys[b].0)
                .then(keys[a].1.total_cmp(&keys[b].1))
                .then_with(|| instance.sites[a].site_id.cmp(&instance.sites[b].site_id))
        });
        let mut remaining = demand;
        for &i in &order {
            if remaining <= 0.0 {
                break;
            }
            let take = caps[i].min(remaining);
            w[i][t] = take;
            remaining -= take;
        }
    }
    Ok(GlbAllocation { w })
}
