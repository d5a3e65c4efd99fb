//! Rank correlation, the one-sample t-test and evaluation reports.

mod eval;
mod rank;
mod ttest;

pub use eval::{evaluate_predictions, evaluate_regressor, predict_windows, EvalReport};
pub use rank::{pearson, ranks, spearman};
pub use ttest::{one_sample_t_test, TTest};
