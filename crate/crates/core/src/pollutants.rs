//! Criteria air pollutant species and the emission-quantity vector shared by
//! every accounting stage.
//!
//! All quantities are held in metric tons. Other mass units are converted at
//! ingestion and report boundaries with [`convert_mass`].

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The fixed, ordered set of pollutant species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Pm25,
    Nox,
    So2,
    Voc,
}

impl Species {
    pub const COUNT: usize = 4;
    pub const ALL: [Species; Species::COUNT] =
        [Species::Pm25, Species::Nox, Species::So2, Species::Voc];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Species::Pm25 => "PM2.5",
            Species::Nox => "NOx",
            Species::So2 => "SO2",
            Species::Voc => "VOC",
        }
    }

    /// Lower-case identifier used in file schemas.
    pub fn key(self) -> &'static str {
        match self {
            Species::Pm25 => "pm25",
            Species::Nox => "nox",
            Species::So2 => "so2",
            Species::Voc => "voc",
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Species {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match norm.as_str() {
            "pm25" => Ok(Species::Pm25),
            "nox" => Ok(Species::Nox),
            "so2" => Ok(Species::So2),
            "voc" | "vocs" => Ok(Species::Voc),
            _ => Err(Error::domain(format!("unknown pollutant species `{s}`"))),
        }
    }
}

/// Non-negative quantity of each species, in metric tons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PollutantVector([f64; Species::COUNT]);

impl PollutantVector {
    pub const ZERO: PollutantVector = PollutantVector([0.0; Species::COUNT]);

    /// Builds a vector from amounts in species order (PM2.5, NOx, SO2, VOC).
    pub fn new(amounts: [f64; Species::COUNT]) -> Result<Self> {
        for (s, &a) in Species::ALL.iter().zip(&amounts) {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::Negative {
                    what: format!("{s} amount"),
                    value: a,
                });
            }
        }
        Ok(PollutantVector(amounts))
    }

    pub fn amounts(&self) -> &[f64; Species::COUNT] {
        &self.0
    }

    pub fn get(&self, s: Species) -> f64 {
        self.0[s.index()]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Component-wise multiple by a non-negative factor.
    pub fn scale(&self, k: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::Negative {
                what: "scale factor".into(),
                value: k,
            });
        }
        Ok(self.scaled(k))
    }

    // k is known to be non-negative at every call site.
    pub(crate) fn scaled(&self, k: f64) -> Self {
        PollutantVector(self.0.map(|a| a * k))
    }

    /// Re-expresses every component from `from` units into `to` units.
    pub fn convert(&self, from: MassUnit, to: MassUnit) -> Self {
        PollutantVector(self.0.map(|a| convert_mass(a, from, to)))
    }
}

impl Add for PollutantVector {
    type Output = PollutantVector;

    fn add(mut self, rhs: PollutantVector) -> PollutantVector {
        self += rhs;
        self
    }
}

impl AddAssign for PollutantVector {
    fn add_assign(&mut self, rhs: PollutantVector) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl std::iter::Sum for PollutantVector {
    fn sum<I: Iterator<Item = PollutantVector>>(iter: I) -> Self {
        iter.fold(PollutantVector::ZERO, Add::add)
    }
}

impl Index<Species> for PollutantVector {
    type Output = f64;

    fn index(&self, s: Species) -> &f64 {
        &self.0[s.index()]
    }
}

impl IndexMut<Species> for PollutantVector {
    fn index_mut(&mut self, s: Species) -> &mut f64 {
        &mut self.0[s.index()]
    }
}

pub fn pv_add(a: PollutantVector, b: PollutantVector) -> PollutantVector {
    a + b
}

pub fn pv_scale(a: PollutantVector, k: f64) -> Result<PollutantVector> {
    a.scale(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassUnit {
    MetricTon,
    UsShortTon,
    Gram,
}

/// Metric tons per U.S. short ton.
pub const METRIC_TONS_PER_SHORT_TON: f64 = 0.907_184_74;
pub const GRAMS_PER_METRIC_TON: f64 = 1.0e6;

impl MassUnit {
    fn metric_tons_per_unit(self) -> f64 {
        match self {
            MassUnit::MetricTon => 1.0,
            MassUnit::UsShortTon => METRIC_TONS_PER_SHORT_TON,
            MassUnit::Gram => 1.0 / GRAMS_PER_METRIC_TON,
        }
    }
}

impl FromStr for MassUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "metric_ton" | "t" | "tonne" => Ok(MassUnit::MetricTon),
            "us_short_ton" | "short_ton" => Ok(MassUnit::UsShortTon),
            "gram" | "g" => Ok(MassUnit::Gram),
            other => Err(Error::domain(format!("unknown mass unit `{other}`"))),
        }
    }
}

pub fn convert_mass(q: f64, from: MassUnit, to: MassUnit) -> f64 {
    if from == to {
        return q;
    }
    // Multiply-then-divide keeps the defined constants exact in the common directions.
    match (from, to) {
        (MassUnit::MetricTon, MassUnit::Gram) => q * GRAMS_PER_METRIC_TON,
        (MassUnit::Gram, MassUnit::MetricTon) => q / GRAMS_PER_METRIC_TON,
        _ => q * from.metric_tons_per_unit() / to.metric_tons_per_unit(),
    }
}
