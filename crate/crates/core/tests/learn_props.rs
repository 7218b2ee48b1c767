mod common;

use deeprad::learn::{
    cross_validate, oob_importance, predict_proba, roc_auc, stratified_kfold, train_forest, ForestParams,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn params(seed: u64) -> ForestParams {
    ForestParams {
        n_trees: 60,
        seed,
        ..ForestParams::default()
    }
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((0u8..12, any::<bool>()), 2..60)
        .prop_filter("both classes", |v| v.iter().any(|p| p.1) && v.iter().any(|p| !p.1))
        .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64, l)).unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_matches_pairwise_count((s, y) in scored()) {
        let auc = roc_auc(&s, &y).unwrap();
        prop_assert!((auc - common::pairwise_auc(&s, &y)).abs() < 1e-12);
        let flipped: Vec<bool> = y.iter().map(|l| !l).collect();
        prop_assert!((roc_auc(&s, &flipped).unwrap() - (1.0 - auc)).abs() < 1e-12);
        let warped: Vec<f64> = s.iter().map(|v| v.powi(3) + 5.0).collect();
        prop_assert_eq!(roc_auc(&warped, &y).unwrap(), auc);
    }

    #[test]
    fn folds_are_stratified_and_balanced(n_pos in 5usize..40, n_neg in 5usize..40, k in 2usize..6, seed: u64) {
        let y: Vec<bool> = (0..n_pos + n_neg).map(|i| i < n_pos).collect();
        let folds = stratified_kfold(&y, k, seed).unwrap();
        for class in [false, true] {
            let mut sizes = vec![0usize; k];
            for (f, _) in folds.iter().zip(&y).filter(|p| *p.1 == class) {
                sizes[*f] += 1;
            }
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        prop_assert_eq!(folds, stratified_kfold(&y, k, seed).unwrap());
    }
}

#[test]
fn forest_is_bit_identical_for_a_seed() {
    let (x, y) = common::separable(3, 80);
    let a = train_forest(&x, &y, &params(11)).unwrap();
    let b = train_forest(&x, &y, &params(11)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_text(), b.to_text());
    let c = train_forest(&x, &y, &params(12)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn monotone_feature_transform_keeps_training_predictions() {
    // splits are thresholds between training values, so a strictly increasing
    // map of a feature leaves every training-point prediction unchanged
    let (x, y) = common::separable(5, 60);
    let warped: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0].exp(), r[1] * 10.0 - 3.0]).collect();
    let a = predict_proba(&train_forest(&x, &y, &params(2)).unwrap(), &x).unwrap();
    let b = predict_proba(&train_forest(&warped, &y, &params(2)).unwrap(), &warped).unwrap();
    assert_eq!(a, b);
}

#[test]
fn separable_data_is_learned_and_noise_is_not() {
    let (x, y) = common::separable(9, 200);
    let cv = cross_validate(&x, &y, &params(1), 5).unwrap();
    assert!(cv.mean_auc >= 0.95, "{}", cv.mean_auc);
    let mut shuffled = y.clone();
    shuffled.shuffle(&mut common::rng(4));
    let noise: Vec<Vec<f64>> = x.iter().map(|r| vec![r[1]]).collect();
    let cv = cross_validate(&noise, &shuffled, &params(1), 5).unwrap();
    assert!(cv.mean_auc < 0.8, "{}", cv.mean_auc);
}

#[test]
fn constant_feature_has_zero_importance() {
    let (x, y) = common::separable(8, 100);
    let with_const: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0], r[1], 4.0]).collect();
    let model = train_forest(&with_const, &y, &params(3)).unwrap();
    assert!(model.trees.iter().all(|t| !t.uses_feature(2)));
    let imp = oob_importance(&model, &with_const, &y, 3).unwrap();
    assert_eq!(imp.importance[2], 0.0);
    assert_eq!(imp.mean_drop[2], 0.0);
    assert!(imp.importance[0] > imp.importance[1]);
}
