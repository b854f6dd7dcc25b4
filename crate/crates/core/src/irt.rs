//! Item-level models: acquisition-age quantiles and the 1PL response curve.
//!
//! Grades are real-valued semester levels. The logistic is unscaled (no 1.7
//! factor).

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::normal::std_normal_quantile;

/// A test item with its difficulty on the grade scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub difficulty: f64,
}

impl Item {
    pub fn new(id: impl Into<String>, difficulty: f64) -> Result<Self> {
        if !difficulty.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "item difficulty must be finite, got {difficulty}"
            )));
        }
        Ok(Self {
            id: id.into(),
            difficulty,
        })
    }

    /// Item with a positional id, for simulated tests.
    pub fn anonymous(index: usize, difficulty: f64) -> Self {
        Self {
            id: format!("i{index}"),
            difficulty,
        }
    }
}

/// Normal model of the grade at which a population acquires an item's
/// underlying knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionDistribution {
    mu: f64,
    sigma: f64,
}

impl AcquisitionDistribution {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "acquisition distribution needs finite mu and sigma >= 0, got ({mu}, {sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Grade by which a fraction `r` of the population has acquired the item,
/// given its full acquisition distribution.
pub fn item_grade_quantile_normal(dist: &AcquisitionDistribution, r: f64) -> Result<f64> {
    let z = std_normal_quantile(r)?;
    Ok(dist.mu + z * dist.sigma)
}

/// Grade at which a fraction `r` of examinees answers the item correctly
/// under the 1PL model: `ln(r / (1 - r)) + b`.
pub fn item_grade_quantile_1pl(item: &Item, r: f64) -> Result<f64> {
    let r = check_open_unit("r", r)?;
    Ok((r / (1.0 - r)).ln() + item.difficulty)
}

/// Probability of a correct response at ability `theta` (1PL).
pub fn icc_1pl(theta: f64, item: &Item) -> f64 {
    logistic(theta - item.difficulty)
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
