//! Descriptive statistics for signal spread and correlation.
//!
//! Quantiles interpolate linearly between order statistics (position
//! `q·(n−1)`), and standard deviation is the population form (divide by `n`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub iqr: f64,
    /// `std / mean`, `None` unless the mean is positive.
    pub normalized_std: Option<f64>,
    /// `iqr / mean`, `None` unless the mean is positive.
    pub normalized_iqr: Option<f64>,
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in statistics input"));
    }
    Ok(())
}

pub fn mean(values: &[f64]) -> f64 {
    // Offsets from the first value keep constant inputs exact.
    let Some(&pivot) = values.first() else {
        return f64::NAN;
    };
    pivot + values.iter().map(|v| v - pivot).sum::<f64>() / values.len() as f64
}

pub fn summary(values: &[f64]) -> Result<SummaryStats> {
    if values.len() < 2 {
        return Err(Error::domain(format!(
            "summary needs at least two values, got {}",
            values.len()
        )));
    }
    check_finite(values)?;
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
    let std = var.sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let norm = |x: f64| (m > 0.0).then(|| x / m);
    Ok(SummaryStats {
        mean: m,
        std,
        iqr,
        normalized_std: norm(std),
        normalized_iqr: norm(iqr),
    })
}

/// Product-moment correlation; undefined when either input has no variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::domain("correlation needs at least two pairs"));
    }
    check_finite(x)?;
    check_finite(y)?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Empirical CDF: sorted values paired with `k/n`.
pub fn cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::domain("CDF of an empty sample"));
    }
    check_finite(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(k, v)| (v, (k + 1) as f64 / n))
        .collect())
}

/// Ratio of the largest to the smallest value of a CDF; `None` if the minimum is not positive.
pub fn cdf_span_ratio(cdf: &[(f64, f64)]) -> Option<f64> {
    let (first, last) = (cdf.first()?.0, cdf.last()?.0);
    (first > 0.0).then(|| last / first)
}
