//! Scope-1/2/3 emission attribution for a single computing task.
//!
//! * Scope 1 shares a site's onsite (backup generator) emissions over a window
//!   in proportion to the task's power fraction and duration.
//! * Scope 2 multiplies task energy by a grid emission rate, either the
//!   generation-weighted average of all plants or the marginal plant's rate.
//! * Scope 3 amortizes hardware manufacturing emissions over expected
//!   lifespan, grouped by manufacturing location.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pollutants::PollutantVector;

/// Hours in a non-leap year, the usual scope-1 accounting window.
pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    /// Share of the site's power capacity allocated to the task, in (0, 1].
    pub power_fraction: f64,
    pub duration_hours: f64,
    /// Electricity consumed including facility overhead (PUE-inclusive), MWh.
    pub energy_mwh: f64,
}

impl TaskProfile {
    pub fn new(power_fraction: f64, duration_hours: f64, energy_mwh: f64) -> Result<Self> {
        let task = TaskProfile {
            power_fraction,
            duration_hours,
            energy_mwh,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power_fraction > 0.0 && self.power_fraction <= 1.0) {
            return Err(Error::domain(format!(
                "power fraction must lie in (0, 1], got {}",
                self.power_fraction
            )));
        }
        if !(self.duration_hours > 0.0) || !self.duration_hours.is_finite() {
            return Err(Error::domain(format!(
                "task duration must be positive, got {}",
                self.duration_hours
            )));
        }
        if !(self.energy_mwh >= 0.0) || !self.energy_mwh.is_finite() {
            return Err(Error::Negative {
                what: "task energy".into(),
                value: self.energy_mwh,
            });
        }
        Ok(())
    }
}

/// A site's total onsite emissions over an accounting window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteScope1Profile {
    pub emissions: PollutantVector,
    pub window_hours: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPlant {
    /// Tons of each species per MWh generated.
    pub rate: PollutantVector,
    pub generation_mwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Average,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionRate {
    pub per_mwh: PollutantVector,
    pub kind: RateKind,
}

impl EmissionRate {
    pub fn average(per_mwh: PollutantVector) -> Self {
        EmissionRate {
            per_mwh,
            kind: RateKind::Average,
        }
    }

    pub fn marginal(per_mwh: PollutantVector) -> Self {
        EmissionRate {
            per_mwh,
            kind: RateKind::Marginal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareComponent {
    pub manufacture_emissions: PollutantVector,
    pub lifespan_hours: f64,
    /// Source region where the component was manufactured.
    pub location: String,
}

fn check_window(window_hours: f64) -> Result<()> {
    if !(window_hours > 0.0) || !window_hours.is_finite() {
        return Err(Error::domain(format!(
            "scope-1 window must be positive, got {window_hours}"
        )));
    }
    Ok(())
}

/// Scope-1 share `(x·T/T̄)·p̄` for a task that fits inside one window.
///
/// Tasks longer than the window are rejected; use [`scope1_spanning`] to
/// amortize them proportionally across windows.
pub fn scope1(site: &SiteScope1Profile, task: &TaskProfile) -> Result<PollutantVector> {
    check_window(site.window_hours)?;
    if task.duration_hours > site.window_hours {
        return Err(Error::domain(format!(
            "task duration {} h exceeds the scope-1 window of {} h",
            task.duration_hours, site.window_hours
        )));
    }
    scope1_spanning(site, task)
}

/// Scope-1 share without the single-window restriction.
pub fn scope1_spanning(site: &SiteScope1Profile, task: &TaskProfile) -> Result<PollutantVector> {
    check_window(site.window_hours)?;
    task.validate()?;
    if task.duration_hours > site.window_hours {
        log::warn!(
            "task spans {:.3} scope-1 windows; amortizing proportionally",
            task.duration_hours / site.window_hours
        );
    }
    let share = task.power_fraction * task.duration_hours / site.window_hours;
    Ok(site.emissions.scaled(share))
}

/// Generation-weighted average emission rate over all plants.
pub fn average_rate(plants: &[PowerPlant]) -> Result<EmissionRate> {
    let mut weighted = PollutantVector::ZERO;
    let mut total = 0.0;
    for (k, plant) in plants.iter().enumerate() {
        if !(plant.generation_mwh >= 0.0) {
            return Err(Error::Negative {
                what: format!("generation of plant {k}"),
                value: plant.generation_mwh,
            });
        }
        weighted += plant.rate.scaled(plant.generation_mwh);
        total += plant.generation_mwh;
    }
    if total <= 0.0 {
        return Err(Error::domain("total plant generation is zero"));
    }
    Ok(EmissionRate::average(weighted.scaled(1.0 / total)))
}

pub fn marginal_rate(plants: &[PowerPlant], marginal_index: usize) -> Result<EmissionRate> {
    let plant = plants.get(marginal_index).ok_or_else(|| {
        Error::domain(format!(
            "marginal plant index {marginal_index} out of range for {} plants",
            plants.len()
        ))
    })?;
    Ok(EmissionRate::marginal(plant.rate))
}

/// Scope-2 emissions `e·γ`.
pub fn scope2(task: &TaskProfile, rate: &EmissionRate) -> Result<PollutantVector> {
    if !(task.energy_mwh >= 0.0) {
        return Err(Error::Negative {
            what: "task energy".into(),
            value: task.energy_mwh,
        });
    }
    Ok(rate.per_mwh.scaled(task.energy_mwh))
}

/// Scope-2 emissions summed over time slots, `Σ_t e_t·γ_t`.
pub fn scope2_timeseries(
    energy_per_slot: &[f64],
    rates_per_slot: &[EmissionRate],
) -> Result<PollutantVector> {
    if energy_per_slot.len() != rates_per_slot.len() {
        return Err(Error::LengthMismatch {
            expected: energy_per_slot.len(),
            found: rates_per_slot.len(),
        });
    }
    let mut total = PollutantVector::ZERO;
    for (t, (&e, rate)) in energy_per_slot.iter().zip(rates_per_slot).enumerate() {
        if !(e >= 0.0) {
            return Err(Error::Negative {
                what: format!("energy in slot {t}"),
                value: e,
            });
        }
        total += rate.per_mwh.scaled(e);
    }
    Ok(total)
}

/// Scope-3 manufacturing emissions attributed to a task of `duration_hours`,
/// keyed by manufacturing location.
pub fn scope3(
    components: &[HardwareComponent],
    duration_hours: f64,
) -> Result<BTreeMap<String, PollutantVector>> {
    if !(duration_hours >= 0.0) {
        return Err(Error::Negative {
            what: "task duration".into(),
            value: duration_hours,
        });
    }
    let mut by_location: BTreeMap<String, PollutantVector> = BTreeMap::new();
    for c in components {
        if !(c.lifespan_hours > 0.0) || !c.lifespan_hours.is_finite() {
            return Err(Error::domain(format!(
                "hardware lifespan must be positive, got {} at {}",
                c.lifespan_hours, c.location
            )));
        }
        let share = c.manufacture_emissions.scaled(duration_hours / c.lifespan_hours);
        *by_location.entry(c.location.clone()).or_default() += share;
    }
    Ok(by_location)
}

/// Fraction of a region's generation consumed by data centers.
pub fn grid_share_fraction(e_dc: f64, e_total: f64) -> Result<f64> {
    if !(e_total > 0.0) {
        return Err(Error::domain(format!(
            "total consumption must be positive, got {e_total}"
        )));
    }
    if !(e_dc >= 0.0) {
        return Err(Error::Negative {
            what: "data-center consumption".into(),
            value: e_dc,
        });
    }
    if e_dc > e_total {
        return Err(Error::domain(format!(
            "data-center consumption {e_dc} exceeds total {e_total}"
        )));
    }
    Ok(e_dc / e_total)
}

/// Facility energy of a training run, in MWh: GPU-hours × TDP × PUE.
pub fn training_energy_estimate(gpu_hours: f64, tdp_watts: f64, pue: f64) -> Result<f64> {
    for (what, v) in [("GPU hours", gpu_hours), ("TDP", tdp_watts), ("PUE", pue)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::domain(format!("{what} must be positive, got {v}")));
        }
    }
    Ok(gpu_hours * tdp_watts * pue / 1.0e6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pollutants::{convert_mass, MassUnit, Species};
    use approx::assert_relative_eq;

    fn pv(a: [f64; 4]) -> PollutantVector {
        PollutantVector::new(a).unwrap()
    }

    fn assert_pv(got: PollutantVector, want: [f64; 4], tol: f64) {
        for (g, w) in got.amounts().iter().zip(want) {
            assert_relative_eq!(*g, w, max_relative = tol, epsilon = 1e-15);
        }
    }

    fn site() -> SiteScope1Profile {
        SiteScope1Profile {
            emissions: pv([10., 20., 30., 40.]),
            window_hours: HOURS_PER_YEAR,
        }
    }

    #[test]
    fn scope1_full_and_quarter() {
        let s = site();
        let full = TaskProfile::new(1.0, HOURS_PER_YEAR, 0.0).unwrap();
        assert_eq!(scope1(&s, &full).unwrap(), s.emissions);
        let quarter = TaskProfile::new(0.5, HOURS_PER_YEAR / 2.0, 0.0).unwrap();
        assert_pv(scope1(&s, &quarter).unwrap(), [2.5, 5., 7.5, 10.], 1e-15);
    }

    #[test]
    fn scope1_permitted_level_in_short_tons() {
        let permits_short = pv([600., 13000., 50., 1400.]);
        let s = SiteScope1Profile {
            emissions: permits_short.convert(MassUnit::UsShortTon, MassUnit::MetricTon),
            window_hours: HOURS_PER_YEAR,
        };
        let task = TaskProfile::new(0.1, HOURS_PER_YEAR, 0.0).unwrap();
        let out = scope1(&s, &task)
            .unwrap()
            .convert(MassUnit::MetricTon, MassUnit::UsShortTon);
        assert_pv(out, [60., 1300., 5., 140.], 1e-12);
    }

    #[test]
    fn scope1_domain_errors() {
        let s = site();
        assert!(TaskProfile::new(0.0, 1.0, 0.0).is_err());
        assert!(TaskProfile::new(1.5, 1.0, 0.0).is_err());
        let bad_fraction = TaskProfile {
            power_fraction: 1.2,
            duration_hours: 1.0,
            energy_mwh: 0.0,
        };
        assert!(matches!(scope1(&s, &bad_fraction), Err(Error::Domain(_))));
        let zero_window = SiteScope1Profile {
            window_hours: 0.0,
            ..s
        };
        let t = TaskProfile::new(1.0, 1.0, 0.0).unwrap();
        assert!(matches!(scope1(&zero_window, &t), Err(Error::Domain(_))));
    }

    #[test]
    fn scope1_long_task_requires_spanning() {
        let s = site();
        let two_years = TaskProfile::new(1.0, 2.0 * HOURS_PER_YEAR, 0.0).unwrap();
        assert!(scope1(&s, &two_years).is_err());
        assert_pv(
            scope1_spanning(&s, &two_years).unwrap(),
            [20., 40., 60., 80.],
            1e-15,
        );
    }

    #[test]
    fn average_rate_examples() {
        let p = |g: f64, b: f64| PowerPlant {
            rate: pv([g; 4]),
            generation_mwh: b,
        };
        assert_eq!(average_rate(&[p(3.0, 7.0)]).unwrap().per_mwh, pv([3.0; 4]));
        assert_pv(average_rate(&[p(1.0, 5.0), p(3.0, 5.0)]).unwrap().per_mwh, [2.0; 4], 1e-15);
        let r = average_rate(&[p(2.0, 100.0), p(0.0, 300.0)]).unwrap();
        assert_eq!(r.kind, RateKind::Average);
        assert_pv(r.per_mwh, [0.5; 4], 1e-15);
        assert!(average_rate(&[p(1.0, 0.0)]).is_err());
        assert!(average_rate(&[]).is_err());
    }

    #[test]
    fn marginal_rate_examples() {
        let clean = PowerPlant {
            rate: PollutantVector::ZERO,
            generation_mwh: 500.0,
        };
        let dirty = PowerPlant {
            rate: pv([1.0, 2.0, 3.0, 0.5]),
            generation_mwh: 100.0,
        };
        let m = marginal_rate(&[dirty, clean], 1).unwrap();
        assert_eq!(m.per_mwh, PollutantVector::ZERO);
        assert_eq!(m.kind, RateKind::Marginal);

        let single = [dirty];
        assert_eq!(
            marginal_rate(&single, 0).unwrap().per_mwh,
            average_rate(&single).unwrap().per_mwh
        );

        let grid = [clean, dirty];
        let avg = average_rate(&grid).unwrap();
        let marg = marginal_rate(&grid, 1).unwrap();
        for s in Species::ALL {
            assert!(marg.per_mwh[s] > avg.per_mwh[s]);
        }
        assert!(marginal_rate(&grid, 2).is_err());
    }

    #[test]
    fn scope2_table_row_calibration() {
        // Rate backed out of the Huntsville row: tonnage / 30 GWh.
        let rate = EmissionRate::average(pv([0.61 / 30_000.0, 2.80 / 30_000.0, 2.72 / 30_000.0, 0.0]));
        let task = TaskProfile::new(1.0, 1.0, 30_000.0).unwrap();
        assert_pv(scope2(&task, &rate).unwrap(), [0.61, 2.80, 2.72, 0.0], 1e-12);

        let zero = TaskProfile::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(scope2(&zero, &rate).unwrap(), PollutantVector::ZERO);

        let doubled = TaskProfile::new(1.0, 1.0, 60_000.0).unwrap();
        assert_pv(scope2(&doubled, &rate).unwrap(), [1.22, 5.60, 5.44, 0.0], 1e-12);
    }

    #[test]
    fn scope2_timeseries_examples() {
        let r = |g: f64| EmissionRate::marginal(pv([g; 4]));
        assert_pv(
            scope2_timeseries(&[10.0, 20.0], &[r(1.0), r(2.0)]).unwrap(),
            [50.0; 4],
            1e-15,
        );
        assert_eq!(
            scope2_timeseries(&[0.0, 0.0], &[r(1.0), r(2.0)]).unwrap(),
            PollutantVector::ZERO
        );
        let constant = scope2_timeseries(&[3.0, 4.0, 5.0], &[r(0.25); 3]).unwrap();
        let whole = scope2(&TaskProfile::new(1.0, 1.0, 12.0).unwrap(), &r(0.25)).unwrap();
        assert_pv(constant, *whole.amounts(), 1e-15);
        assert!(matches!(
            scope2_timeseries(&[1.0], &[r(1.0), r(1.0)]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn scope3_examples() {
        let c = |loc: &str, amt: f64| HardwareComponent {
            manufacture_emissions: pv([amt; 4]),
            lifespan_hours: 1000.0,
            location: loc.into(),
        };
        let full = scope3(&[c("TW", 4.0)], 1000.0).unwrap();
        assert_eq!(full["TW"], pv([4.0; 4]));
        let half = scope3(&[c("TW", 4.0)], 500.0).unwrap();
        assert_eq!(half["TW"], pv([2.0; 4]));
        let both = scope3(&[c("TW", 4.0), c("TW", 1.5), c("KR", 1.0)], 1000.0).unwrap();
        assert_eq!(both["TW"], pv([5.5; 4]));
        assert_eq!(both["KR"], pv([1.0; 4]));
        let mut dead = c("TW", 1.0);
        dead.lifespan_hours = 0.0;
        assert!(scope3(&[dead], 1.0).is_err());
    }

    #[test]
    fn grid_share_examples() {
        assert_eq!(grid_share_fraction(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(grid_share_fraction(10.0, 10.0).unwrap(), 1.0);
        assert!(grid_share_fraction(11.0, 10.0).is_err());
        assert!(grid_share_fraction(1.0, 0.0).is_err());
        // 176.39 TWh at a 4.4% share implies roughly 4009 TWh nationally.
        let national = 176.39 / 0.044;
        assert_relative_eq!(national, 4009.0, max_relative = 0.01);
        assert_relative_eq!(grid_share_fraction(176.39, national).unwrap(), 0.044, max_relative = 1e-12);
    }

    #[test]
    fn training_energy_examples() {
        let e = training_energy_estimate(39.3e6, 700.0, 1.08).unwrap();
        assert_relative_eq!(e, 29_710.8, max_relative = 1e-12);
        assert_relative_eq!(e, 30_000.0, max_relative = 0.01);
        assert_relative_eq!(training_energy_estimate(1000.0, 1000.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            training_energy_estimate(2000.0, 400.0, 1.2).unwrap(),
            2.0 * training_energy_estimate(1000.0, 400.0, 1.2).unwrap(),
            max_relative = 1e-15
        );
        assert!(training_energy_estimate(0.0, 700.0, 1.08).is_err());
    }

    #[test]
    fn unit_conversion_at_boundary_matches_constant() {
        assert_relative_eq!(
            convert_mass(0.61, MassUnit::MetricTon, MassUnit::Gram),
            610_000.0,
            max_relative = 1e-15
        );
    }
}
