use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use airtoll::scheduler::{
    check_feasible, lp_oracle, objective, solve_greedy, CarbonPrice, GlbInstance,
    GlbObjectiveWeights, GlbSite, SiteSignals,
};

fn random_instance(rng: &mut ChaCha8Rng) -> GlbInstance {
    let n = rng.gen_range(1..=5);
    let t = rng.gen_range(1..=8);
    let caps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..50.0)).collect();
    let lambda = rng.gen_range(1.0..2.5);
    let total: f64 = caps.iter().sum();
    let sites = caps
        .iter()
        .enumerate()
        .map(|(i, &c)| GlbSite {
            site_id: format!("site{i}"),
            region_id: format!("r{i}"),
            capacity: c,
        })
        .collect();
    let signals = (0..n)
        .map(|_| SiteSignals {
            electricity_price: (0..t).map(|_| rng.gen_range(20.0..120.0)).collect(),
            health_price: (0..t).map(|_| rng.gen_range(0.0..80.0)).collect(),
            carbon_intensity: (0..t).map(|_| rng.gen_range(0.2..1.0)).collect(),
        })
        .collect();
    let demand = (0..t).map(|_| total * rng.gen_range(0.0..lambda)).collect();
    GlbInstance::new(sites, demand, lambda, signals).unwrap()
}

#[test]
fn greedy_matches_joint_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let inst = random_instance(&mut rng);
        let price = match rng.gen_range(0..4) {
            0 => CarbonPrice::ZERO,
            1 => CarbonPrice::Finite(rng.gen_range(0.0..300.0)),
            2 => CarbonPrice::Infinite,
            _ => CarbonPrice::Finite(5.0),
        };
        for w in [GlbObjectiveWeights::carbon_aware(price), GlbObjectiveWeights::hi_glb(), GlbObjectiveWeights::health_only()] {
            let greedy = solve_greedy(&inst, &w).unwrap();
            check_feasible(&greedy, &inst, 1e-9, 1e-12).unwrap();
            let g = objective(&greedy, &inst, &w);
            let lp = lp_oracle(&inst, &w).unwrap();
            check_feasible(&lp.allocation, &inst, 1e-9, 1e-9).unwrap();
            let gap = (g.primary - lp.primary).abs() / lp.primary.abs().max(1e-12);
            assert!(gap <= 1e-9, "gap {gap} for {w:?}");
        }
    }
}

#[test]
fn infeasible_demand_is_reported_by_both_solvers() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut inst = random_instance(&mut rng);
    let cap: f64 = inst.upper_bounds().iter().sum();
    let last = inst.horizon() - 1;
    inst.demand[last] = cap * 1.01;
    let w = GlbObjectiveWeights::hi_glb();
    let err = solve_greedy(&inst, &w).unwrap_err();
    assert!(err.is_infeasibility());
    assert!(err.to_string().contains(&format!("slot {last}")) || format!("{err:?}").contains(&format!("slot: {last}")));
    assert!(lp_oracle(&inst, &w).unwrap_err().is_infeasibility());
}
