use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use lplm_core::data::make_folds;
use lplm_core::learners::{
    apply_dropout, fit_learner, fit_tree, select_best, ForestParams, LearnerParams, LearnerSpec, Objective, PROB_CLIP,
};
use lplm_core::rng;
use ndarray::{Array2, ArrayView2, Axis};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn all_kinds() -> Vec<LearnerSpec> {
    vec![
        LearnerSpec::boosted_trees(),
        LearnerSpec::random_forest(),
        LearnerSpec::penalized_linear(),
        LearnerSpec::k_nearest(),
    ]
}

fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::rng_from(seed);
    Array2::from_shape_fn((n, p), |_| r.sample(StandardNormal))
}

fn hash_matrix(c: ArrayView2<f64>) -> u64 {
    let mut h = DefaultHasher::new();
    for v in c.iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

#[test]
fn constant_target_gives_constant_predictor() {
    let c = gaussian(40, 3, 1);
    let probe = gaussian(25, 3, 2);
    for spec in all_kinds() {
        let m = fit_learner(&spec, c.view(), &[2.5; 40]).unwrap();
        assert!(m.predict(probe.view()).iter().all(|&v| v == 2.5), "{}", spec.kind());
    }
}

#[test]
fn boosted_depth_two_learns_a_step() {
    let mut r = rng::rng_from(5);
    let draw = |n: usize, r: &mut rng::Rng| {
        let x = Array2::from_shape_fn((n, 1), |_| r.random_range(-1.0..1.0));
        let y: Vec<f64> = x.column(0).iter().map(|&v| if v > 0.2 { 2.0 } else { 0.0 } + 0.3 * r.sample::<f64, _>(StandardNormal)).collect();
        (x, y)
    };
    let (x, y) = draw(400, &mut r);
    let (xt, yt) = draw(400, &mut r);
    let mut spec = LearnerSpec::boosted_trees();
    if let LearnerParams::BoostedTrees(p) = &mut spec.params {
        p.depth = 2;
    }
    let m = fit_learner(&spec, x.view(), &y).unwrap();
    let pred = m.predict(xt.view());
    let mse = pred.iter().zip(&yt).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / 400.0;
    let mean = y.iter().sum::<f64>() / 400.0;
    let base = yt.iter().map(|y| (mean - y).powi(2)).sum::<f64>() / 400.0;
    assert!(mse < 0.25 * base, "{mse} vs baseline {base}");
}

#[test]
fn logistic_predictions_respect_clip_bounds() {
    // separable in the first covariate
    let c = gaussian(60, 2, 3);
    let y: Vec<f64> = c.column(0).iter().map(|&v| f64::from(v > 0.0)).collect();
    let probe = gaussian(200, 2, 4) * 5.0;
    for spec in all_kinds() {
        let m = fit_learner(&spec.clone().with_objective(Objective::Logistic), c.view(), &y).unwrap();
        for v in m.predict(probe.view()) {
            assert!((PROB_CLIP.0..=PROB_CLIP.1).contains(&v), "{}: {v}", spec.kind());
        }
    }
}

/// Held-out SSE over `folds`, computed here from plain fits.
fn cv_sse(spec: &LearnerSpec, c: ArrayView2<f64>, r: &[f64], folds: &lplm_core::data::FoldAssignment) -> f64 {
    let mut sse = 0.0;
    for k in 0..folds.k {
        let tr = folds.complement(k);
        let rt: Vec<f64> = tr.iter().map(|&i| r[i]).collect();
        let m = fit_learner(spec, c.select(Axis(0), &tr).view(), &rt).unwrap();
        for i in folds.members(k) {
            sse += (r[i] - m.predict_row(c.row(i))).powi(2);
        }
    }
    sse
}

#[test]
fn selection_prefers_linear_fit_for_linear_target() {
    let c = gaussian(150, 5, 8);
    let mut r = rng::rng_from(9);
    let y: Vec<f64> = c
        .rows()
        .into_iter()
        .map(|x| 2.0 * x[0] - x[1] + 0.5 * x[3] + 0.2 * r.sample::<f64, _>(StandardNormal))
        .collect();
    let folds = make_folds(150, 5, 10).unwrap();
    let specs = [LearnerSpec::k_nearest(), LearnerSpec::penalized_linear()];
    let sel = select_best(&specs, c.view(), &y, &folds).unwrap();
    let expected: Vec<f64> = specs.iter().map(|s| cv_sse(s, c.view(), &y, &folds)).collect();
    assert_eq!(sel.cv_sse, expected);
    assert!(expected[1] < expected[0]);
    assert_eq!(sel.spec.kind(), "penalized-linear");
}

#[test]
fn selection_ties_and_arity() {
    let c = gaussian(50, 2, 11);
    let y: Vec<f64> = c.column(0).to_vec();
    let folds = make_folds(50, 5, 1).unwrap();
    let a = LearnerSpec::k_nearest().with_seed(1);
    let b = LearnerSpec::k_nearest().with_seed(1);
    let sel = select_best(&[a.clone(), b], c.view(), &y, &folds).unwrap();
    assert_eq!(sel.index, 0);
    assert!(select_best(&[a], c.view(), &y, &folds).is_err());
}

#[test]
fn single_tree_forest_is_the_tree() {
    let c = gaussian(120, 4, 12);
    let y: Vec<f64> = c.rows().into_iter().map(|x| x[0] * x[1] + x[2].sin()).collect();
    let spec = LearnerSpec::new(LearnerParams::RandomForest(ForestParams {
        trees: 1,
        mtry: Some(4),
        min_leaf: 5,
        bootstrap: false,
    }));
    let forest = fit_learner(&spec, c.view(), &y).unwrap();
    let tree = fit_tree(c.view(), &y, None, 5);
    let probe = gaussian(100, 4, 13);
    for x in probe.rows() {
        assert_eq!(forest.predict_row(x), tree.predict_row(x));
    }
}

#[test]
fn forest_averages_its_trees() {
    let c = gaussian(80, 3, 14);
    let y: Vec<f64> = c.column(1).iter().map(|v| v * v).collect();
    let mut spec = LearnerSpec::random_forest();
    if let LearnerParams::RandomForest(p) = &mut spec.params {
        p.trees = 7;
    }
    let m = fit_learner(&spec, c.view(), &y).unwrap();
    let trees = &m.forest().unwrap().trees;
    for x in gaussian(20, 3, 15).rows() {
        let avg = trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / 7.0;
        assert_eq!(m.predict_row(x), avg);
    }
}

#[test]
fn dropout_leaves_the_input_untouched() {
    let c = gaussian(100, 4, 16);
    let y: Vec<f64> = c.column(0).to_vec();
    let before = hash_matrix(c.view());
    let spec = LearnerSpec::boosted_trees().with_dropout(0.4).with_seed(3);
    let dropped = fit_learner(&spec, c.view(), &y).unwrap();
    assert_eq!(hash_matrix(c.view()), before);
    let plain = fit_learner(&LearnerSpec::boosted_trees(), c.view(), &y).unwrap();
    assert_ne!(dropped.predict_row(c.row(0)), plain.predict_row(c.row(0)));
    let copy = apply_dropout(c.view(), 0.4, 1);
    assert_ne!(hash_matrix(copy.view()), before);
}

#[test]
fn constant_covariates_fall_back_to_the_mean() {
    let c = Array2::from_elem((30, 2), 1.0);
    let y: Vec<f64> = (0..30).map(|i| i as f64).collect();
    for spec in [LearnerSpec::boosted_trees(), LearnerSpec::random_forest()] {
        let m = fit_learner(&spec, c.view(), &y).unwrap();
        assert!(m.is_constant());
        assert_eq!(m.predict_row(c.row(0)), 14.5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn predictions_are_deterministic(seed in 0u64..1000, kind in 0usize..4) {
        let c = gaussian(60, 3, seed);
        let y: Vec<f64> = c.rows().into_iter().map(|x| x[0] - x[2] * x[1]).collect();
        let spec = all_kinds()[kind].clone().with_seed(seed);
        let a = fit_learner(&spec, c.view(), &y).unwrap().predict(c.view());
        let b = fit_learner(&spec, c.view(), &y).unwrap().predict(c.view());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn boosting_training_error_never_increases(seed in 0u64..1000, shrinkage in 0.05..1.0f64) {
        let c = gaussian(80, 3, seed);
        let y: Vec<f64> = c.rows().into_iter().map(|x| (2.0 * x[0]).tanh() + x[1] * x[2]).collect();
        let mut spec = LearnerSpec::boosted_trees();
        if let LearnerParams::BoostedTrees(p) = &mut spec.params {
            p.shrinkage = shrinkage;
            p.rounds = 60;
        }
        let m = fit_learner(&spec, c.view(), &y).unwrap();
        let trace = m.boosting_trace().unwrap();
        prop_assert_eq!(trace.len(), 60);
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} then {}", w[0], w[1]);
        }
    }
}
