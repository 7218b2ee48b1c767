use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::forest::{check_design, derive_seed, predict_proba, train_forest, ForestParams};
use super::metrics::roc_auc;

/// Stream id reserved for fold assignment.
const FOLD_STREAM: u64 = 0xF01D;

/// Stratified fold assignment: each class is shuffled with its own seeded
/// stream, then dealt round-robin, the second class continuing where the
/// first stopped so overall fold sizes also differ by at most one.
pub fn stratified_kfold(y: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Argument(format!("need k >= 2 folds, got {k}")));
    }
    let mut folds = vec![0usize; y.len()];
    let mut next = 0usize;
    for (class_id, class) in [false, true].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < k {
            return Err(Error::Argument(format!(
                "class {} has {} members, fewer than {k} folds",
                class as u8,
                members.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, FOLD_STREAM + class_id as u64));
        members.shuffle(&mut rng);
        for &m in &members {
            folds[m] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
    /// Out-of-fold class-1 probability per patient.
    pub scores: Vec<f64>,
    /// Out-of-fold label (`score >= 0.5`).
    pub predicted: Vec<bool>,
    pub folds: Vec<usize>,
}

/// k-fold cross-validation of the forest. Folds come from `params.seed`;
/// fold `f` trains with a seed derived from it.
pub fn cross_validate(x: &[Vec<f64>], y: &[bool], params: &ForestParams, k: usize) -> Result<CvReport> {
    check_design(x, y)?;
    let folds = stratified_kfold(y, k, params.seed)?;
    let mut scores = vec![f64::NAN; y.len()];
    let mut fold_aucs = Vec::with_capacity(k);
    for fold in 0..k {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| folds[i] != fold);
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let fold_params = ForestParams {
            seed: derive_seed(params.seed, fold as u64 + 1),
            ..params.clone()
        };
        let model = train_forest(&xt, &yt, &fold_params)?;
        let xs: Vec<Vec<f64>> = test.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        let s = predict_proba(&model, &xs)?;
        fold_aucs.push(roc_auc(&s, &ys)?);
        for (&i, v) in test.iter().zip(s) {
            scores[i] = v;
        }
    }
    let mean_auc = fold_aucs.iter().sum::<f64>() / k as f64;
    let predicted = scores.iter().map(|&s| s >= 0.5).collect();
    Ok(CvReport {
        fold_aucs,
        mean_auc,
        scores,
        predicted,
        folds,
    })
}
