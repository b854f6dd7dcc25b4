use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A trajectory has converged once `run_length` consecutive estimates are
/// closer than `thd` to the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRule {
    thd: f64,
    run_length: usize,
}

impl ConvergenceRule {
    pub fn new(thd: f64, run_length: usize) -> Result<Self> {
        if !(thd > 0.0 && thd.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "convergence threshold must be positive, got {thd}"
            )));
        }
        if run_length == 0 {
            return Err(Error::InvalidParameter("run length must be >= 1".into()));
        }
        Ok(Self { thd, run_length })
    }

    pub fn thd(&self) -> f64 {
        self.thd
    }

    pub fn run_length(&self) -> usize {
        self.run_length
    }
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        Self {
            thd: 0.25,
            run_length: 4,
        }
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Root mean square distance between two equal-length, nonempty vectors.
pub fn rmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    check_lengths(estimates, truths)?;
    if estimates.is_empty() {
        return Err(Error::InvalidParameter(
            "rmse needs at least one value".into(),
        ));
    }
    let sse: f64 = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e - t).powi(2))
        .sum();
    Ok((sse / estimates.len() as f64).sqrt())
}

/// Index of the first estimate opening a qualifying run, if any.
pub fn convergence_point(
    estimates: &[f64],
    truths: &[f64],
    rule: ConvergenceRule,
) -> Result<Option<usize>> {
    check_lengths(estimates, truths)?;
    let mut detector = ConvergenceDetector::new(rule);
    Ok(estimates
        .iter()
        .zip(truths)
        .find_map(|(&e, &t)| detector.push(e, t)))
}

/// Streaming form of [`convergence_point`].
#[derive(Debug, Clone)]
pub struct ConvergenceDetector {
    rule: ConvergenceRule,
    seen: usize,
    streak: usize,
    found: Option<usize>,
}

impl ConvergenceDetector {
    pub fn new(rule: ConvergenceRule) -> Self {
        Self {
            rule,
            seen: 0,
            streak: 0,
            found: None,
        }
    }

    /// Feeds the next (estimate, truth) pair; returns the convergence
    /// index once known. Later pairs never change it.
    pub fn push(&mut self, estimate: f64, truth: f64) -> Option<usize> {
        if self.found.is_none() {
            if (estimate - truth).abs() < self.rule.thd {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
            if self.streak == self.rule.run_length {
                self.found = Some(self.seen + 1 - self.rule.run_length);
            }
        }
        self.seen += 1;
        self.found
    }

    pub fn found(&self) -> Option<usize> {
        self.found
    }
}
