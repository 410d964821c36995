use std::collections::BTreeMap;

use approx::assert_relative_eq;

use airtoll::attribution::{self, EmissionRate, TaskProfile};
use airtoll::dispersion::{synthesize_matrix, KernelParams, Region, RegionRegistry, SourceReceptorMatrix};
use airtoll::health::{self, Band, EndpointId, HealthEndpoint};
use airtoll::{PollutantVector, Species};

fn region(id: &str, lat: f64, lon: f64, population: f64, households: f64) -> Region {
    Region {
        region_id: id.into(),
        name: id.into(),
        lat,
        lon,
        population,
        households,
        income_ratio: 1.0,
    }
}

fn regions() -> Vec<Region> {
    vec![
        region("a", 34.7, -86.6, 400_000.0, 160_000.0),
        region("b", 36.4, -86.5, 200_000.0, 80_000.0),
        region("c", 37.5, -77.4, 335_000.0, 130_000.0),
    ]
}

fn mortality(beta: f64, value: f64) -> HealthEndpoint {
    HealthEndpoint {
        id: EndpointId::Mortality,
        beta: Band::new(0.75 * beta, beta, 1.5 * beta),
        baseline_rate: 0.008,
        unit_value: Band::uniform(value),
    }
}

#[test]
fn identity_matrix_single_endpoint_closed_form() {
    let reg = RegionRegistry::new(vec![region("a", 0.0, 0.0, 1.0e6, 4.0e5)]).unwrap();
    let mut m = SourceReceptorMatrix::zeros(vec!["a".into()], vec!["a".into()]).unwrap();
    m.set_coefficient(0, 0, Species::Pm25, 1.0).unwrap();
    let ep = HealthEndpoint {
        id: EndpointId::ErVisits,
        beta: Band::uniform(0.01),
        baseline_rate: 0.005,
        unit_value: Band::uniform(1000.0),
    };
    let emissions = BTreeMap::from([("a".to_string(), PollutantVector::new([2.0, 0.0, 0.0, 0.0]).unwrap())]);
    let field = m.apply(&emissions).unwrap();
    let inc = health::incidences(&field, std::slice::from_ref(&ep), &reg).unwrap();
    let report = health::monetize(&inc, &[ep], 0.03).unwrap();
    let expected = 1.0e6 * 0.005 * (1.0 - (-0.01f64 * 2.0).exp()) * 1000.0;
    assert_relative_eq!(report.national.mid, expected, max_relative = 1e-12);
    let per_hh = health::per_household(&report, &reg).unwrap();
    assert_relative_eq!(per_hh["a"].unwrap().mid, expected / 4.0e5, max_relative = 1e-12);
}

#[test]
fn end_to_end_cost_scales_with_task_energy() {
    let regs = regions();
    let reg = RegionRegistry::new(regs.clone()).unwrap();
    let matrix = synthesize_matrix(&regs, &KernelParams::new(300.0, 1e-3)).unwrap();
    let endpoints = [mortality(0.0077, 1.2e7)];
    let rate = EmissionRate::average(PollutantVector::new([2.0e-5, 9.0e-5, 9.0e-5, 1.0e-6]).unwrap());

    let cost_for = |energy: f64| {
        let task = TaskProfile::new(1.0, 720.0, energy).unwrap();
        let e = attribution::scope2(&task, &rate).unwrap();
        let field = matrix.apply(&BTreeMap::from([("a".to_string(), e)])).unwrap();
        let inc = health::incidences(&field, &endpoints, &reg).unwrap();
        health::monetize(&inc, &endpoints, 0.02).unwrap().national.mid
    };
    let base = cost_for(30_000.0);
    assert!(base > 0.0);
    for k in 1..=10 {
        let x = k as f64 / 10.0;
        assert_relative_eq!(cost_for(30_000.0 * x) / base, x, max_relative = 1e-3);
    }
    assert_eq!(cost_for(0.0), 0.0);
}

#[test]
fn mortality_discounting_only_touches_lagged_endpoints() {
    let reg = RegionRegistry::new(regions()).unwrap();
    let matrix = synthesize_matrix(&regions(), &KernelParams::new(300.0, 1e-3)).unwrap();
    let e = BTreeMap::from([("b".to_string(), PollutantVector::new([1.0, 5.0, 5.0, 0.0]).unwrap())]);
    let field = matrix.apply(&e).unwrap();
    let er = HealthEndpoint {
        id: EndpointId::ErVisits,
        beta: Band::uniform(0.005),
        baseline_rate: 0.004,
        unit_value: Band::uniform(1000.0),
    };
    let inc = health::incidences(&field, std::slice::from_ref(&er), &reg).unwrap();
    let r0 = health::monetize(&inc, std::slice::from_ref(&er), 0.0).unwrap();
    let r7 = health::monetize(&inc, &[er], 0.07).unwrap();
    assert_eq!(r0.national, r7.national);

    let m = mortality(0.0077, 1.0e7);
    let inc = health::incidences(&field, std::slice::from_ref(&m), &reg).unwrap();
    let r0 = health::monetize(&inc, std::slice::from_ref(&m), 0.0).unwrap();
    let r3 = health::monetize(&inc, &[m], 0.03).unwrap();
    assert!(r3.national.mid < r0.national.mid);
}
