use lplm_core::data::make_folds;
use lplm_core::optim::{
    cv_select_lambda, default_lambda_grid, solve_penalized, solve_scalar_root, Link, LossKind, PenalizedProblem,
};
use lplm_core::rng;
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian_matrix(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::rng_from(seed);
    Array2::from_shape_simple_fn((n, p), || r.sample(StandardNormal))
}

#[test]
fn soft_threshold_closed_form() {
    let n = 200;
    let mut x = gaussian_matrix(n, 1, 1).column(0).to_owned();
    let mean = x.mean().unwrap();
    x -= mean;
    let scale = (x.dot(&x) / n as f64).sqrt();
    x /= scale;
    let mut r = rng::rng_from(2);
    let y = Array1::from_shape_fn(n, |i| 0.7 * x[i] + r.sample::<f64, _>(StandardNormal));
    let rho = x.dot(&y) / n as f64;
    for lambda in [0.0, 0.1, 0.5, rho.abs() * 0.999, rho.abs() * 1.5] {
        let design = x.clone().insert_axis(Axis(1));
        let prob = PenalizedProblem::new(LossKind::Squared, design, y.clone(), lambda);
        let sol = solve_penalized(&prob, 1e-10, 10_000).unwrap();
        let expect = rho.signum() * (rho.abs() - lambda).max(0.0);
        assert!(sol.converged);
        assert!((sol.coef[0] - expect).abs() < 1e-8, "lambda {lambda}: {} vs {expect}", sol.coef[0]);
    }
}

#[test]
fn lambda_max_zeroes_penalized_coefficients() {
    let (n, p) = (120, 8);
    let mut x = gaussian_matrix(n, p + 1, 3);
    x.column_mut(0).fill(1.0);
    let y = x.column(1).mapv(|v| 2.0 * v + 1.0) + x.column(2);
    let ybar = y.mean().unwrap();
    let lambda_max = x
        .columns()
        .into_iter()
        .skip(1)
        .map(|c| (c.dot(&(&y - ybar)) / n as f64).abs())
        .fold(0.0, f64::max);
    let prob = PenalizedProblem::new(LossKind::Squared, x, y, lambda_max).unpenalized(0);
    let sol = solve_penalized(&prob, 1e-9, 10_000).unwrap();
    assert!(sol.converged);
    assert!(sol.coef.iter().skip(1).all(|&b| b == 0.0));
    assert!((sol.coef[0] - ybar).abs() < 1e-8);
}

#[test]
fn unpenalized_matches_normal_equations() {
    let (n, p) = (50, 3);
    let x = gaussian_matrix(n, p, 4);
    let mut r = rng::rng_from(5);
    let y = Array1::from_shape_fn(n, |i| x[[i, 0]] - 0.5 * x[[i, 2]] + r.sample::<f64, _>(StandardNormal));
    let prob = PenalizedProblem::new(LossKind::Squared, x.clone(), y.clone(), 0.0);
    let sol = solve_penalized(&prob, 1e-10, 100_000).unwrap();

    let xm = nalgebra::DMatrix::from_fn(n, p, |i, j| x[[i, j]]);
    let ym = nalgebra::DVector::from_fn(n, |i, _| y[i]);
    let beta = (xm.transpose() * &xm).lu().solve(&(xm.transpose() * ym)).unwrap();
    for j in 0..p {
        assert!((sol.coef[j] - beta[j]).abs() < 1e-6);
    }
}

fn random_problem(kind: LossKind, n: usize, p: usize, seed: u64, lambda: f64) -> PenalizedProblem<f64> {
    let mut x = gaussian_matrix(n, p, seed);
    x.column_mut(0).fill(1.0);
    let mut r = rng::rng_from(seed + 1);
    let signal = x.column(1).to_owned() * 0.8 - x.column(2).to_owned() * 0.5;
    let y = match kind {
        LossKind::Logistic | LossKind::CalibrationExponential => signal.mapv(|s| {
            let pr = 1.0 / (1.0 + (-s).exp());
            f64::from(r.random::<f64>() < pr)
        }),
        // the expit-link objective is bounded below only for responses in [0, 1]
        LossKind::LinkIntegral(Link::Expit) => {
            signal.mapv(|s| 1.0 / (1.0 + (-(s + r.sample::<f64, _>(StandardNormal))).exp()))
        }
        _ => signal.mapv(|s| s + r.sample::<f64, _>(StandardNormal)),
    };
    let w = Array1::from_shape_fn(n, |_| 0.2 + r.random::<f64>());
    let off = Array1::from_shape_fn(n, |_| 0.3 * r.random::<f64>());
    PenalizedProblem::new(kind, x, y, lambda).with_weights(w).with_offset(off).unpenalized(0)
}

const KINDS: [LossKind; 5] = [
    LossKind::Squared,
    LossKind::Logistic,
    LossKind::LinkIntegral(Link::Identity),
    LossKind::LinkIntegral(Link::Expit),
    LossKind::CalibrationExponential,
];

#[test]
fn trace_is_monotone_for_every_loss() {
    for (s, kind) in KINDS.iter().enumerate() {
        let prob = random_problem(*kind, 150, 12, 10 + s as u64, 0.02);
        let sol = solve_penalized(&prob, 1e-8, 10_000).unwrap();
        assert!(sol.converged, "{kind:?}");
        for w in sol.trace.windows(2) {
            assert!(w[1] <= w[0], "{kind:?}: objective rose {} -> {}", w[0], w[1]);
        }
        let recomputed = prob.objective(&sol.coef);
        assert!((recomputed - sol.objective).abs() < 1e-10);
    }
}

#[test]
fn row_permutation_invariance() {
    let tol = 1e-8;
    for (s, kind) in KINDS.iter().enumerate() {
        let prob = random_problem(*kind, 100, 6, 30 + s as u64, 0.03);
        let sol = solve_penalized(&prob, tol, 10_000).unwrap();
        let perm: Vec<usize> = (0..100).rev().collect();
        let permuted = PenalizedProblem {
            design: prob.design.select(Axis(0), &perm),
            response: prob.response.select(Axis(0), &perm),
            weights: prob.weights.select(Axis(0), &perm),
            offset: prob.offset.select(Axis(0), &perm),
            ..prob.clone()
        };
        let other = solve_penalized(&permuted, tol, 10_000).unwrap();
        for (a, b) in sol.coef.iter().zip(other.coef.iter()) {
            assert!((a - b).abs() <= 10.0 * tol.sqrt(), "{kind:?}: {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn converged_solutions_satisfy_subgradient_conditions(
        kind_idx in 0usize..5, seed in 0u64..1000, lambda in 0.001f64..0.3
    ) {
        let tol = 1e-7;
        let prob = random_problem(KINDS[kind_idx], 80, 7, seed, lambda);
        let sol = solve_penalized(&prob, tol, 10_000).unwrap();
        prop_assert!(sol.converged);
        // independent gradient from the problem definition
        let g = prob.gradient(&sol.coef);
        for j in 0..prob.p() {
            let b = sol.coef[j];
            if !prob.penalty_mask[j] {
                prop_assert!(g[j].abs() <= tol * 1.0001);
            } else if b != 0.0 {
                prop_assert!((g[j] + lambda * b.signum()).abs() <= tol * 1.0001);
            } else {
                prop_assert!(g[j].abs() <= lambda + tol);
            }
        }
    }
}

#[test]
fn default_grid_endpoints() {
    let g = default_lambda_grid(1000, 200, 0.2, 2.0, 20);
    assert_eq!(g.len(), 20);
    assert!((g[0] - 0.14558).abs() < 1e-4);
    assert!((g[19] - 0.014558).abs() < 1e-5);
    assert!(g.windows(2).all(|w| w[0] > w[1]));
}

#[test]
fn cv_single_point_grid() {
    let prob = random_problem(LossKind::Squared, 60, 4, 1, 0.0);
    let folds = make_folds(60, 5, 0).unwrap();
    let sel = cv_select_lambda(&prob, &[0.37], &folds, None, 1e-7, 1000).unwrap();
    assert_eq!(sel.lambda, 0.37);
}

#[test]
fn cv_prefers_heavy_penalty_on_noise() {
    let (n, p) = (200, 30);
    let mut x = gaussian_matrix(n, p, 77);
    x.column_mut(0).fill(1.0);
    let mut r = rng::rng_from(78);
    let y = Array1::from_shape_fn(n, |_| r.sample::<f64, _>(StandardNormal));
    let prob = PenalizedProblem::new(LossKind::Squared, x, y, 0.0).unpenalized(0);
    let folds = make_folds(n, 5, 79).unwrap();
    let grid = [1.0, 0.01];
    let sel = cv_select_lambda(&prob, &grid, &folds, None, 1e-8, 10_000).unwrap();

    // held-out squared loss recomputed here, fold by fold
    let mut mean = [0.0; 2];
    for k in 0..5 {
        let tr = folds.complement(k);
        let te = folds.members(k);
        for (g, &lambda) in grid.iter().enumerate() {
            let sub = PenalizedProblem::new(
                LossKind::Squared,
                prob.design.select(Axis(0), &tr),
                prob.response.select(Axis(0), &tr),
                lambda,
            )
            .unpenalized(0);
            let coef = solve_penalized(&sub, 1e-8, 10_000).unwrap().coef;
            let pred = prob.design.select(Axis(0), &te).dot(&coef);
            let resid = &prob.response.select(Axis(0), &te) - &pred;
            mean[g] += resid.dot(&resid) / 2.0 / te.len() as f64 / 5.0;
        }
    }
    let expect = if mean[1] < mean[0] { 0.01 } else { 1.0 };
    assert_eq!(sel.lambda, expect);
    assert_eq!(sel.lambda, 1.0);
    for g in 0..2 {
        assert!((sel.mean_loss[g] - mean[g]).abs() < 1e-6);
    }
}

#[test]
fn cv_skips_single_class_folds() {
    let n = 40;
    let mut prob = random_problem(LossKind::Logistic, n, 3, 5, 0.0);
    // rows of fold 0 all controls, everything else mixed
    let folds = make_folds(n, 4, 1).unwrap();
    for i in folds.members(0) {
        prob.response[i] = 0.0;
    }
    for (c, i) in folds.complement(0).into_iter().enumerate() {
        prob.response[i] = (c % 2) as f64;
    }
    let sel = cv_select_lambda(&prob, &[0.1, 0.01], &folds, None, 1e-7, 1000).unwrap();
    assert_eq!(sel.skipped_folds, vec![0]);

    prob.response.fill(1.0);
    assert!(cv_select_lambda(&prob, &[0.1, 0.01], &folds, None, 1e-7, 1000).is_err());
}

#[test]
fn root_closed_forms() {
    let r = solve_scalar_root(|b: f64| Ok((-b).exp() - 0.5), 0.0, 1e-12).unwrap();
    assert!((r - std::f64::consts::LN_2).abs() < 1e-10);
    let r = solve_scalar_root(|b: f64| Ok(b), 0.0, 1e-12).unwrap();
    assert_eq!(r, 0.0);
    let r = solve_scalar_root(|b: f64| Ok(b - 37.0), 0.0, 1e-12).unwrap();
    assert!((r - 37.0).abs() < 1e-10);
    assert!(solve_scalar_root(|b: f64| Ok(1.0 + b * b), 0.0, 1e-12).is_err());
    let r32 = solve_scalar_root(|b: f32| Ok((-b).exp() - 0.5), 0.0, 1e-6).unwrap();
    assert!((r32 - std::f32::consts::LN_2).abs() < 1e-5);
}
