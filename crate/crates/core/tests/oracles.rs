mod common;

use acquest::baselines::{bme_estimate, mle_estimate, Bounds, GaussianBelief};
use acquest::estimator::{estimate_current_ability, TestResponse, DEFAULT_C};
use acquest::irt::{
    icc_1pl, item_grade_quantile_1pl, item_grade_quantile_normal, AcquisitionDistribution, Item,
};
use acquest::normal::{std_normal_pdf, std_normal_quantile};
use approx::assert_abs_diff_eq;
use common::*;

fn test_of(diffs: &[f64], answers: &[bool]) -> TestResponse {
    let items = diffs
        .iter()
        .enumerate()
        .map(|(i, &d)| Item::anonymous(i, d))
        .collect();
    TestResponse::new(items, answers.to_vec()).unwrap()
}

fn sample_test(correct: usize) -> TestResponse {
    let diffs = [2.0, 2.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 4.0, 4.0];
    let answers: Vec<bool> = (0..10).map(|i| i < correct).collect();
    test_of(&diffs, &answers)
}

#[test]
fn bisection_oracle_reproduces_frozen_quantiles() {
    assert_abs_diff_eq!(bisect_quantile(0.8), 0.841_621, epsilon = 1e-6);
    assert_abs_diff_eq!(bisect_quantile(0.975), 1.959_964, epsilon = 1e-6);
}

#[test]
fn quantile_agrees_with_bisection() {
    for i in 1..100 {
        let p = i as f64 / 100.0;
        assert_abs_diff_eq!(
            std_normal_quantile(p).unwrap(),
            bisect_quantile(p),
            epsilon = 1e-9
        );
    }
    for p in [1e-6, 1e-4, 0.999_9, 1.0 - 1e-6] {
        assert_abs_diff_eq!(
            std_normal_quantile(p).unwrap(),
            bisect_quantile(p),
            epsilon = 1e-8
        );
    }
}

#[test]
fn pdf_is_derivative_of_cdf() {
    let h = 1e-5;
    for i in -40..=40 {
        let z = i as f64 / 10.0;
        let numeric = (normal_cdf(z + h) - normal_cdf(z - h)) / (2.0 * h);
        assert_abs_diff_eq!(std_normal_pdf(z), numeric, epsilon = 1e-9);
    }
    assert_abs_diff_eq!(std_normal_pdf(0.0), 0.398_942, epsilon = 1e-6);
}

#[test]
fn grade_quantiles_match_oracle() {
    let d = AcquisitionDistribution::new(4.0, 1.0).unwrap();
    let expected = 4.0 + bisect_quantile(0.8);
    assert_abs_diff_eq!(
        item_grade_quantile_normal(&d, 0.8).unwrap(),
        expected,
        epsilon = 1e-9
    );
    assert_abs_diff_eq!(expected, 4.841_621, epsilon = 1e-6);

    let d = AcquisitionDistribution::new(2.0, 0.5).unwrap();
    let expected = 2.0 + 0.5 * bisect_quantile(0.2);
    assert_abs_diff_eq!(
        item_grade_quantile_normal(&d, 0.2).unwrap(),
        expected,
        epsilon = 1e-9
    );
    assert_abs_diff_eq!(expected, 1.579_190, epsilon = 1e-6);

    let item = Item::new("x", 2.0).unwrap();
    assert_abs_diff_eq!(
        item_grade_quantile_1pl(&item, 0.8).unwrap(),
        3.386_294,
        epsilon = 1e-6
    );
}

#[test]
fn icc_crosses_point_nine_at_numeric_root() {
    let item = Item::new("x", 1.7).unwrap();
    let (mut lo, mut hi) = (-20.0_f64, 20.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if logistic(mid - 1.7) < 0.9 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    assert_abs_diff_eq!(root, 1.7 + 9f64.ln(), epsilon = 1e-9);
    assert_abs_diff_eq!(icc_1pl(root, &item), 0.9, epsilon = 1e-9);
}

#[test]
fn mle_matches_grid_search() {
    let diffs = [2.0, 3.0, 4.0];
    let answers = [true, true, false];
    let grid = grid_argmax(|t| rasch_loglik(t, &diffs, &answers), -2.0, 9.0, 1e-4);
    assert_abs_diff_eq!(grid, 3.8029, epsilon = 1e-4);
    let wide = Bounds::new(-2.0, 9.0).unwrap();
    let mle = mle_estimate(&test_of(&diffs, &answers), 3.0, wide);
    assert_abs_diff_eq!(mle, grid, epsilon = 2e-4);
}

#[test]
fn bme_matches_grid_search() {
    let log_post = |t: f64| -0.5 * (t - 3.0).powi(2) + logistic(t - 3.0).ln();
    let grid = grid_argmax(log_post, -2.0, 9.0, 1e-4);
    assert_abs_diff_eq!(grid, 3.4011, epsilon = 1e-4);
    let prior = GaussianBelief::new(3.0, 1.0).unwrap();
    let post = bme_estimate(&test_of(&[3.0], &[true]), prior);
    assert_abs_diff_eq!(post.mu(), grid, epsilon = 1e-3);
}

#[test]
fn half_correct_variance_matches_monte_carlo() {
    let est = estimate_current_ability(&sample_test(5), 0.5, DEFAULT_C).unwrap();
    assert_abs_diff_eq!(est.mean, 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(est.variance, 0.0628, epsilon = 5e-5);
    let (mc_mean, mc_var) = order_statistic_mc(3.0, 0.4f64.sqrt(), 10, 5, 1_000_000, 11);
    assert!(
        (est.variance / mc_var - 1.0).abs() < 0.15,
        "mc variance {mc_var}"
    );
    assert!((est.mean - mc_mean).abs() < 3.0 * est.variance.sqrt());
}

#[test]
fn nine_of_ten_matches_oracle() {
    let est = estimate_current_ability(&sample_test(9), 0.5, DEFAULT_C).unwrap();
    let expected = 3.0 + bisect_quantile(0.9) * 0.4f64.sqrt();
    assert_abs_diff_eq!(est.mean, expected, epsilon = 1e-9);
    assert_abs_diff_eq!(est.mean, 3.8106, epsilon = 1e-4);
}

#[test]
fn order_statistic_approximation_matches_monte_carlo() {
    for (i, inst) in order_stat_instances(50, 2024).iter().enumerate() {
        let test = test_of(&inst.difficulties, &inst.correct);
        let est = estimate_current_ability(&test, inst.r, DEFAULT_C).unwrap();
        let cmp = compare_with_oracle(inst, est.mean, est.variance, 200_000, 100 + i as u64);
        assert!(cmp.mean_z < 3.0, "instance {i}: {inst:?} {cmp:?}");
        assert!(cmp.variance_rel < 0.15, "instance {i}: {inst:?} {cmp:?}");
    }
}

#[test]
fn approximation_degrades_at_extreme_proportions() {
    // 9 of 10: the asymptotic variance overshoots the exact one by about a third
    let est = estimate_current_ability(&sample_test(9), 0.5, DEFAULT_C).unwrap();
    let (_, mc_var) = order_statistic_mc(3.0, 0.4f64.sqrt(), 10, 9, 400_000, 5);
    let rel = est.variance / mc_var - 1.0;
    assert!(rel > 0.25 && rel < 0.5, "relative error {rel}");
}
