//! Cross-validation and ROC analysis.

mod cv;
mod folds;
mod roc;

pub use cv::{cross_validate, permute_labels, CvConfig, CvReport, FoldResult};
pub use folds::{stratified_kfold, FoldSplit};
pub use roc::{auroc_pair_oracle, interpolate_tpr, mean_roc, roc_curve, MeanRoc, RocCurve, RocPoint, MEAN_ROC_GRID};
