//! Analytic derivatives and optimisers checked against brute-force oracles.

mod common;

use balkwise_core::inference::{log_likelihood, observed_information, outer_product_information, score};
use balkwise_core::{
    derive_seed, fit_mle, simulate_path, Model, QueuePath, SimOptions, ValueFamily,
};
use common::*;

fn fd_gradient_check(model: &Model<'_>, path: &QueuePath, theta: &[f64]) {
    let k = path.steps() as f64;
    let g = score(path, theta, model).unwrap();
    let info = observed_information(path, theta, model).unwrap();
    for j in 0..theta.len() {
        let h = 1e-3 * theta[j];
        let at = |x: f64| {
            let mut t = theta.to_vec();
            t[j] = x;
            t
        };
        let fd = diff5(|x| log_likelihood(path, &at(x), model).unwrap() / k, theta[j], h);
        assert!(rel_err(g[j], fd) <= 1e-6, "score[{j}] {} vs fd {}", g[j], fd);
        for i in 0..theta.len() {
            let fd = -diff5(|x| score(path, &at(x), model).unwrap()[i], theta[j], h);
            assert!(
                rel_err(info[(i, j)], fd) <= 1e-5,
                "info[({i},{j})] {} vs fd {}",
                info[(i, j)],
                fd
            );
        }
    }
}

#[test]
fn score_and_information_match_finite_differences_exponential() {
    let fam = exp_family();
    for rep in 0..50u64 {
        let price = 5.0 + 3.0 * rep as f64;
        let model = unit_model(&fam, price);
        let path = simulate_path(&model, &[0.02], &SimOptions::new(1000, derive_seed(40, rep))).unwrap();
        // evaluate away from the truth too, where the score is not small
        fd_gradient_check(&model, &path, &[0.02]);
        fd_gradient_check(&model, &path, &[0.035]);
    }
}

#[test]
fn score_and_information_match_finite_differences_two_parameters() {
    let fam = QuadExp::new([1e-3, 1e-5], [1.0, 0.1]);
    for rep in 0..20u64 {
        let model = unit_model(&fam, 10.0);
        let theta = [0.02, 0.0005];
        let path = simulate_path(&model, &theta, &SimOptions::new(1000, derive_seed(41, rep))).unwrap();
        fd_gradient_check(&model, &path, &theta);
        fd_gradient_check(&model, &path, &[0.03, 0.0002]);
    }
}

#[test]
fn up_probability_derivatives_match_finite_differences() {
    let fam = exp_family();
    let model = unit_model(&fam, 15.0);
    for q in 1..=30u32 {
        for theta in [0.015, 0.02, 0.05, 0.3] {
            let h = 1e-4 * theta;
            let fd = diff5(|x| model.up_probability(q, &[x]).unwrap(), theta, h);
            let g = model.up_prob_grad(q, &[theta]).unwrap()[0];
            assert!(rel_err(g, fd) <= 1e-6 || (g - fd).abs() < 1e-14, "q={q} theta={theta}");
            let fd2 = diff5(|x| model.up_prob_grad(q, &[x]).unwrap()[0], theta, h);
            let hh = model.up_prob_hess(q, &[theta]).unwrap()[(0, 0)];
            assert!(rel_err(hh, fd2) <= 1e-6 || (hh - fd2).abs() < 1e-12, "q={q} theta={theta}");
        }
    }
}

#[test]
fn worked_example_matches_grid_search() {
    let fam = balkwise_core::ExponentialFamily::new(0.01, 5.0).unwrap();
    let model = unit_model(&fam, 0.0);
    let path = QueuePath::from_states(vec![0, 1, 0, 1, 2, 1, 0], 0.0).unwrap();
    let fit = fit_mle(&path, &model, None).unwrap();

    let mut best = (0.0, f64::NEG_INFINITY);
    let mut x: f64 = 0.01;
    while x <= 5.0 {
        let ll = log_likelihood(&path, &[x], &model).unwrap();
        if ll > best.1 {
            best = (x, ll);
        }
        x += 1e-4;
    }
    assert!((fit.theta_hat[0] - best.0).abs() <= 1e-3, "{} vs {}", fit.theta_hat[0], best.0);
    assert!((fit.theta_hat[0] - 0.545).abs() <= 1e-3, "{}", fit.theta_hat[0]);
    assert!(!fit.boundary);
    assert!(fit.score_norm <= 1e-8 * fit.loglik.abs().max(1.0));
}

#[test]
fn two_parameter_fit_reaches_stationary_point() {
    let fam = QuadExp::new([1e-3, 1e-5], [1.0, 0.1]);
    let model = unit_model(&fam, 10.0);
    let theta = [0.02, 0.0005];
    let path = simulate_path(&model, &theta, &SimOptions::new(20_000, 9)).unwrap();
    let fit = fit_mle(&path, &model, None).unwrap();
    if !fit.boundary {
        assert!(fit.score_norm <= 1e-6, "score norm {}", fit.score_norm);
    }
    // no grid point beats the fit
    let ll = fit.loglik;
    for i in 0..40 {
        for j in 0..40 {
            let t = [1e-3 + i as f64 * 0.002, 1e-5 + j as f64 * 5e-5];
            assert!(log_likelihood(&path, &t, &model).unwrap() <= ll + 1e-9);
        }
    }
}

#[test]
fn information_identity_holds_on_long_paths() {
    // observed information and outer product of scores agree at the truth
    let fam = exp_family();
    let model = unit_model(&fam, 15.0);
    let path = simulate_path(&model, &[0.02], &SimOptions::new(200_000, 77)).unwrap();
    let a = observed_information(&path, &[0.02], &model).unwrap()[(0, 0)];
    let b = outer_product_information(&path, &[0.02], &model).unwrap()[(0, 0)];
    assert!(rel_err(a, b) < 0.03, "{a} vs {b}");
}

#[test]
fn uniform_family_masks_full_balking_states() {
    let fam = UniformFamily::new(1.0, 100.0);
    let model = unit_model(&fam, 2.0);
    let theta = [8.0];
    // r(q) = 3 + q reaches the top of the support at q = 5
    assert!(model.is_informative(1, &theta));
    assert!(!model.is_informative(5, &theta));
    assert_eq!(model.joining_rate(5, &theta).unwrap(), 0.0);
    let path = simulate_path(&model, &theta, &SimOptions::new(5000, 3)).unwrap();
    assert!(path.states().iter().all(|q| *q <= 5));
    let masked = path.clone().with_informative_mask(&model, &theta);
    for (t, m) in masked.transitions().zip(masked.informative_mask()) {
        assert_eq!(*m, t.from > 0 && t.from < 5);
    }
    assert!(fam.cdf(-1.0, &theta) == 0.0);
}
