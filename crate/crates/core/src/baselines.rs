//! Baseline ability estimators on the 1PL likelihood.
//!
//! * [`mle_estimate`]: Newton-Raphson maximum likelihood, clamped to a grade
//!   range.
//! * [`bme_estimate`]: Bayes modal estimate with a Gaussian prior; the
//!   posterior is summarized by its mode and the curvature there (Laplace
//!   approximation) so it can be fed back as the next test's prior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::TestResponse;
use crate::irt::icc_1pl;

pub const MAX_ITERATIONS: usize = 50;
pub const STEP_TOLERANCE: f64 = 1e-6;
const MAX_HALVINGS: usize = 30;

/// Closed grade interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lo: f64,
    hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "bounds need finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

impl Default for Bounds {
    /// The grade range 1..=6.
    fn default() -> Self {
        Self { lo: 1.0, hi: 6.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    mu: f64,
    sigma: f64,
}

impl GaussianBelief {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian belief needs finite mu and sigma > 0, got ({mu}, {sigma})"
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

/// Log-likelihood of the responses at `theta`, with its score and
/// information.
fn likelihood_terms(test: &TestResponse, theta: f64) -> (f64, f64, f64) {
    test.pairs()
        .fold((0.0, 0.0, 0.0), |(ll, score, info), (item, y)| {
            let p = icc_1pl(theta, item);
            // ln P = -ln(1 + e^{-(theta-b)}), ln(1-P) = -ln(1 + e^{theta-b})
            let x = theta - item.difficulty;
            let term = if y { -softplus(-x) } else { -softplus(x) };
            let yv = if y { 1.0 } else { 0.0 };
            (ll + term, score + (yv - p), info + p * (1.0 - p))
        })
}

/// Derivative of the log-likelihood with respect to `theta`.
pub fn likelihood_score(test: &TestResponse, theta: f64) -> f64 {
    likelihood_terms(test, theta).1
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Maximizes a concave objective with damped Newton steps.
fn newton_maximize<F>(init: f64, objective: F) -> f64
where
    F: Fn(f64) -> (f64, f64, f64),
{
    let mut theta = init;
    let (mut value, mut grad, mut curv) = objective(theta);
    for _ in 0..MAX_ITERATIONS {
        if curv <= f64::MIN_POSITIVE {
            break;
        }
        let mut step = grad / curv;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = theta + step;
            let eval = objective(candidate);
            if eval.0 >= value {
                accepted = Some((candidate, eval));
                break;
            }
            step *= 0.5;
        }
        let Some((next, eval)) = accepted else { break };
        theta = next;
        (value, grad, curv) = eval;
        if step.abs() < STEP_TOLERANCE {
            break;
        }
    }
    theta
}

/// Newton-Raphson maximum-likelihood ability for one test.
///
/// All-correct and all-incorrect patterns have no finite maximizer and map
/// to `bounds.hi()` and `bounds.lo()`.
pub fn mle_estimate(test: &TestResponse, init: f64, bounds: Bounds) -> f64 {
    let correct = test.correct_count();
    if correct == test.len() {
        return bounds.hi;
    }
    if correct == 0 {
        return bounds.lo;
    }
    let theta = newton_maximize(init, |t| likelihood_terms(test, t));
    bounds.clamp(theta)
}

/// Laplace approximation of the posterior after one test.
pub fn bme_estimate(test: &TestResponse, prior: GaussianBelief) -> GaussianBelief {
    let precision = prior.sigma.powi(-2);
    let objective = |t: f64| {
        let (ll, score, info) = likelihood_terms(test, t);
        let d = t - prior.mu;
        (
            ll - 0.5 * precision * d * d,
            score - precision * d,
            info + precision,
        )
    };
    let mode = newton_maximize(prior.mu, objective);
    let (_, _, curvature) = objective(mode);
    GaussianBelief {
        mu: mode,
        sigma: curvature.sqrt().recip(),
    }
}
