//! Independent reference implementations used by the integration suites.
//! Nothing here calls into the library's numerics.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::erf::erf;

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Inverts the erf-based CDF by bisection.
pub fn bisect_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Brute-force argmax of `f` on `lo, lo + step, ..., hi`.
pub fn grid_argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let steps = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..=steps {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best.0
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Rasch log-likelihood written out directly.
pub fn rasch_loglik(theta: f64, difficulties: &[f64], correct: &[bool]) -> f64 {
    difficulties
        .iter()
        .zip(correct)
        .map(|(&b, &u)| {
            let p = logistic(theta - b);
            if u {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum()
}

/// Sample mean and variance of the `k`-th smallest (1-based) of `m`
/// draws from N(mu, sd), over `draws` resamples.
pub fn order_statistic_mc(
    mu: f64,
    sd: f64,
    m: usize,
    k: usize,
    draws: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(k >= 1 && k <= m);
    let normal = Normal::new(mu, sd).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = vec![0.0; m];
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..draws {
        for x in sample.iter_mut() {
            *x = normal.sample(&mut rng);
        }
        let (_, kth, _) = sample.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        let x = *kth;
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    (mean, m2 / (draws - 1) as f64)
}

/// One random instance for the order-statistic comparison.
#[derive(Debug, Clone)]
pub struct OrderStatInstance {
    pub difficulties: Vec<f64>,
    pub correct: Vec<bool>,
    pub r: f64,
}

impl OrderStatInstance {
    pub fn m(&self) -> usize {
        self.difficulties.len()
    }

    pub fn k(&self) -> usize {
        self.correct.iter().filter(|&&c| c).count()
    }

    /// Mean and population sd of the per-item grades, computed here
    /// rather than by the library.
    pub fn grade_fit(&self) -> (f64, f64) {
        let logit = (self.r / (1.0 - self.r)).ln();
        let grades: Vec<f64> = self.difficulties.iter().map(|b| b + logit).collect();
        let m = grades.len() as f64;
        let mu = grades.iter().sum::<f64>() / m;
        let var = grades.iter().map(|g| (g - mu).powi(2)).sum::<f64>() / m;
        (mu, var.sqrt())
    }
}

/// Test lengths and proportions correct drawn for the comparison. The
/// proportion stays within [0.3, 0.7]; nearer the ends the asymptotic
/// variance of a sample quantile is not within 15% of the exact one at
/// these test lengths.
pub fn order_stat_instances(count: usize, seed: u64) -> Vec<OrderStatInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = [5usize, 10, 20][rng.random_range(0..3)];
            let lo = (0.3 * m as f64 - 1e-9).ceil() as usize;
            let hi = (0.7 * m as f64 + 1e-9).floor() as usize;
            let k = rng.random_range(lo..=hi);
            let centre: f64 = rng.random_range(1.5..5.5);
            let spread: f64 = rng.random_range(0.3..1.5);
            let mut difficulties: Vec<f64> = (0..m)
                .map(|_| centre + spread * Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
                .collect();
            // keep the spread well away from the floor
            if difficulties
                .iter()
                .all(|d| (d - difficulties[0]).abs() < 1e-6)
            {
                difficulties[0] += 1.0;
            }
            let mut correct = vec![false; m];
            for c in correct.iter_mut().take(k) {
                *c = true;
            }
            OrderStatInstance {
                difficulties,
                correct,
                r: rng.random_range(0.2..0.8),
            }
        })
        .collect()
}

/// Outcome of comparing one instance with the Monte-Carlo oracle.
#[derive(Debug, Clone, Copy)]
pub struct OrderStatComparison {
    /// |estimate mean - oracle mean| in units of the estimate's standard error.
    pub mean_z: f64,
    /// |estimate variance / oracle variance - 1|.
    pub variance_rel: f64,
}

pub fn compare_with_oracle(
    inst: &OrderStatInstance,
    est_mean: f64,
    est_variance: f64,
    draws: usize,
    seed: u64,
) -> OrderStatComparison {
    let (mu, sd) = inst.grade_fit();
    let (mc_mean, mc_var) = order_statistic_mc(mu, sd, inst.m(), inst.k(), draws, seed);
    OrderStatComparison {
        mean_z: (est_mean - mc_mean).abs() / est_variance.sqrt(),
        variance_rel: (est_variance / mc_var - 1.0).abs(),
    }
}
