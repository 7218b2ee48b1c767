//! Random-forest classification with stratified cross-validation, ROC AUC,
//! a paired chi-square classifier comparison, and normalized out-of-bag
//! permutation importance.

mod cv;
mod forest;
mod metrics;

pub use cv::{cross_validate, stratified_kfold, CvReport};
pub use forest::{
    derive_seed, oob_importance, predict_proba, train_forest, ForestModel, ForestParams,
    ImportanceReport, Node, Tree,
};
pub use metrics::{chisquare_auc_compare, roc_auc, AucComparison};
