//! The acquisition-distribution ability estimator.
//!
//! A single test is scored by mapping every item to the grade at which a
//! fraction `r` of the population answers it correctly, fitting a normal
//! to those grades, and reading off the `s`-th quantile (with `s` the
//! smoothed proportion correct) together with the large-sample variance of
//! that order statistic. Successive tests are blended with an exponential
//! moving average of period `n`.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::irt::{item_grade_quantile_1pl, Item};
use crate::normal::{std_normal_pdf, std_normal_quantile};

/// Default population proportion.
pub const DEFAULT_R: f64 = 0.5;
/// Default smoothing constant for all-correct / all-incorrect tests.
pub const DEFAULT_C: f64 = 0.01;
/// Floor on the fitted grade spread, keeps the density positive when all
/// items share one difficulty.
pub const SIGMA_MIN: f64 = 1e-3;

/// An administered test: items in order and whether each was answered
/// correctly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResponse {
    items: Vec<Item>,
    correct: Vec<bool>,
}

impl TestResponse {
    pub fn new(items: Vec<Item>, correct: Vec<bool>) -> Result<Self> {
        if items.len() != correct.len() {
            return Err(Error::LengthMismatch {
                left: items.len(),
                right: correct.len(),
            });
        }
        if items.is_empty() {
            return Err(Error::EmptyTest);
        }
        Ok(Self { items, correct })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn correct(&self) -> &[bool] {
        &self.correct
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn correct_count(&self) -> usize {
        self.correct.iter().filter(|&&c| c).count()
    }

    pub(crate) fn pairs(&self) -> impl Iterator<Item = (&Item, bool)> {
        self.items.iter().zip(self.correct.iter().copied())
    }
}

/// Order-statistic estimate for one test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbilityEstimate {
    pub mean: f64,
    pub variance: f64,
    pub s_used: f64,
    pub r_used: f64,
}

/// Distribution of per-item grades within one test.
pub trait GradeDistribution {
    fn quantile(&self, s: f64) -> Result<f64>;
    fn density(&self, grade: f64) -> f64;
}

/// Maximum-likelihood normal fit (divisor `m`) with a floored spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalGradeFit {
    pub mean: f64,
    pub sd: f64,
}

impl NormalGradeFit {
    pub fn fit(grades: &[f64], sd_floor: f64) -> Result<Self> {
        if grades.is_empty() {
            return Err(Error::EmptyTest);
        }
        let m = grades.len() as f64;
        let mean = grades.iter().sum::<f64>() / m;
        let var = grades.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / m;
        Ok(Self {
            mean,
            sd: var.sqrt().max(sd_floor),
        })
    }
}

impl GradeDistribution for NormalGradeFit {
    fn quantile(&self, s: f64) -> Result<f64> {
        Ok(self.mean + std_normal_quantile(s)? * self.sd)
    }

    fn density(&self, grade: f64) -> f64 {
        std_normal_pdf((grade - self.mean) / self.sd) / self.sd
    }
}

/// Proportion correct, pulled in to `c` / `1 - c` at the extremes.
pub fn smooth_proportion(correct_count: usize, m: usize, c: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::EmptyTest);
    }
    if correct_count > m {
        return Err(Error::InvalidParameter(format!(
            "correct count {correct_count} exceeds test length {m}"
        )));
    }
    if !(c > 0.0 && c < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "smoothing constant must lie in (0, 0.5), got {c}"
        )));
    }
    Ok(match correct_count {
        0 => c,
        k if k == m => 1.0 - c,
        k => k as f64 / m as f64,
    })
}

/// Normal approximation of the `s`-th sample quantile out of `m` draws.
/// Returns `(mean, variance)`.
pub fn order_statistic_moments<D: GradeDistribution>(
    dist: &D,
    s: f64,
    m: usize,
) -> Result<(f64, f64)> {
    let mean = dist.quantile(s)?;
    let density = dist.density(mean);
    let variance = s * (1.0 - s) / (m as f64 * density * density);
    Ok((mean, variance))
}

/// Ability implied by a single test.
pub fn estimate_current_ability(test: &TestResponse, r: f64, c: f64) -> Result<AbilityEstimate> {
    let r = check_open_unit("r", r)?;
    let grades = test
        .items()
        .iter()
        .map(|item| item_grade_quantile_1pl(item, r))
        .collect::<Result<Vec<_>>>()?;
    let fit = NormalGradeFit::fit(&grades, SIGMA_MIN)?;
    let s = smooth_proportion(test.correct_count(), test.len(), c)?;
    let (mean, variance) = order_statistic_moments(&fit, s, test.len())?;
    Ok(AbilityEstimate {
        mean,
        variance,
        s_used: s,
        r_used: r,
    })
}

/// EMA weight for a window of `n` periods.
pub fn ema_alpha(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("EMA period must be >= 1".into()));
    }
    Ok(2.0 / (f64::from(n) + 1.0))
}

/// One EMA step. Without a previous value the current estimate is returned.
pub fn ema_update(theta_t: f64, prev_ability: Option<f64>, n: u32) -> Result<f64> {
    let alpha = ema_alpha(n)?;
    Ok(match prev_ability {
        None => theta_t,
        Some(prev) => alpha * theta_t + (1.0 - alpha) * prev,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub estimate: AbilityEstimate,
    pub ability: f64,
}

/// Longitudinal ability of one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilityState {
    pub ability: Option<f64>,
    pub n_window: u32,
    pub alpha: f64,
    pub test_count: usize,
    pub history: Vec<HistoryEntry>,
}

impl AbilityState {
    /// Fresh state; the first test seeds the ability.
    pub fn new(n_window: u32) -> Result<Self> {
        Ok(Self {
            ability: None,
            n_window,
            alpha: ema_alpha(n_window)?,
            test_count: 0,
            history: Vec::new(),
        })
    }

    /// Fresh state with a prior ability (e.g. the learner's school grade)
    /// that the first test is blended with.
    pub fn with_initial_ability(n_window: u32, ability: f64) -> Result<Self> {
        if !ability.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial ability must be finite, got {ability}"
            )));
        }
        let mut state = Self::new(n_window)?;
        state.ability = Some(ability);
        Ok(state)
    }

    /// Checks the invariants of a state loaded from outside.
    pub fn validate(&self) -> Result<()> {
        let alpha = ema_alpha(self.n_window)?;
        if (alpha - self.alpha).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "alpha {} does not match n_window {}",
                self.alpha, self.n_window
            )));
        }
        if self.test_count != self.history.len() {
            return Err(Error::InvalidParameter(format!(
                "test_count {} but {} history entries",
                self.test_count,
                self.history.len()
            )));
        }
        if self.ability.is_some_and(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("ability must be finite".into()));
        }
        Ok(())
    }

    /// Scores `test` and blends it into a new state. `self` is unchanged.
    pub fn process_test(&self, test: &TestResponse, r: f64, c: f64) -> Result<AbilityState> {
        self.clone().absorb(test, r, c)
    }

    /// Owning variant of [`AbilityState::process_test`].
    pub fn absorb(mut self, test: &TestResponse, r: f64, c: f64) -> Result<AbilityState> {
        let estimate = estimate_current_ability(test, r, c)?;
        let ability = ema_update(estimate.mean, self.ability, self.n_window)?;
        self.ability = Some(ability);
        self.history.push(HistoryEntry { estimate, ability });
        self.test_count += 1;
        Ok(self)
    }
}
