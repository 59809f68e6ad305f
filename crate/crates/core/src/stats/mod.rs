//! Single-factor ANOVA and the F distribution.

pub mod special;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use special::regularized_incomplete_beta;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("degrees of freedom must be positive (got {d1}, {d2})")]
    InvalidDof { d1: f64, d2: f64 },
    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),
    #[error("ANOVA needs at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {group} has {count} observations, need at least 2")]
    TooFewObservations { group: usize, count: usize },
    #[error("group {0} has a negative or non-finite variance")]
    InvalidVariance(usize),
    #[error("F is undefined: every group has zero variance and the same mean")]
    Degenerate,
}

fn check_dof(d1: f64, d2: f64) -> Result<(), StatsError> {
    if d1 > 0.0 && d2 > 0.0 && d1.is_finite() && d2.is_finite() {
        Ok(())
    } else {
        Err(StatsError::InvalidDof { d1, d2 })
    }
}

/// CDF of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> Result<f64, StatsError> {
    check_dof(d1, d2)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let z = d1 * x / (d1 * x + d2);
    Ok(regularized_incomplete_beta(d1 / 2.0, d2 / 2.0, z))
}

/// Upper tail `1 - F(x)`, computed without cancellation.
pub fn f_sf(x: f64, d1: f64, d2: f64) -> Result<f64, StatsError> {
    check_dof(d1, d2)?;
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let z = d2 / (d2 + d1 * x);
    Ok(regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, z))
}

/// Quantile of the F distribution by bracketed bisection.
pub fn f_inverse_cdf(p: f64, d1: f64, d2: f64) -> Result<f64, StatsError> {
    check_dof(d1, d2)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::InvalidProbability(p));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f_cdf(hi, d1, d2)? < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, d1, d2)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub count: usize,
    pub sum: f64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
}

impl GroupSummary {
    pub fn from_moments(count: usize, mean: f64, variance: f64) -> Self {
        Self { count, sum: mean * count as f64, mean, variance }
    }

    /// From a published summary row; the mean is recomputed from the sum.
    pub fn from_sum(count: usize, sum: f64, variance: f64) -> Self {
        Self { count, sum, mean: sum / count as f64, variance }
    }

    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let sum: f64 = samples.iter().sum();
        let mean = sum / n as f64;
        let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
        let variance = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
        Self { count: n, sum, mean, variance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub p_value: f64,
    pub f_crit: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    pub groups: Vec<GroupSummary>,
}

/// Significance level used for `f_crit`.
pub const ANOVA_ALPHA: f64 = 0.05;

pub fn one_way_anova(groups: &[GroupSummary]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.count < 2 {
            return Err(StatsError::TooFewObservations { group: i, count: g.count });
        }
        if !(g.variance >= 0.0 && g.variance.is_finite()) {
            return Err(StatsError::InvalidVariance(i));
        }
    }
    let total: usize = groups.iter().map(|g| g.count).sum();
    let grand_mean = groups.iter().map(|g| g.count as f64 * g.mean).sum::<f64>() / total as f64;
    let ss_between: f64 = groups.iter().map(|g| g.count as f64 * (g.mean - grand_mean).powi(2)).sum();
    let ss_within: f64 = groups.iter().map(|g| (g.count - 1) as f64 * g.variance).sum();
    let df_between = groups.len() - 1;
    let df_within = total - groups.len();
    let (d1, d2) = (df_between as f64, df_within as f64);

    let f = if ss_within > 0.0 {
        (ss_between / d1) / (ss_within / d2)
    } else if ss_between > 0.0 {
        f64::INFINITY
    } else {
        return Err(StatsError::Degenerate);
    };
    Ok(AnovaResult {
        f,
        p_value: f_sf(f, d1, d2)?,
        f_crit: f_inverse_cdf(1.0 - ANOVA_ALPHA, d1, d2)?,
        df_between,
        df_within,
        ss_between,
        ss_within,
        groups: groups.to_vec(),
    })
}

/// ANOVA straight from raw observations.
pub fn one_way_anova_samples(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    let summaries: Vec<GroupSummary> = groups.iter().map(|g| GroupSummary::from_samples(g)).collect();
    one_way_anova(&summaries)
}

impl AnovaResult {
    /// Plain-text summary laid out as Groups / Count / Sum / Average /
    /// Variance, followed by F, P-value and F crit.
    pub fn table(&self, names: &[String]) -> String {
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$} | {:>6} | {:>12} | {:>12} | {:>12}", "Groups", "Count", "Sum", "Average", "Variance");
        for (i, g) in self.groups.iter().enumerate() {
            let name = names.get(i).cloned().unwrap_or_else(|| format!("group {}", i + 1));
            let _ = writeln!(
                out,
                "{:<width$} | {:>6} | {:>12.2} | {:>12.2} | {:>12.4}",
                name, g.count, g.sum, g.mean, g.variance
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>10} | {:>12} | {:>10}", "F", "P-value", "F crit.");
        let _ = writeln!(out, "{:>10.3} | {:>12.5} | {:>10.5}", self.f, self.p_value, self.f_crit);
        out
    }
}
