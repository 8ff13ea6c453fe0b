//! k-fold cross-validation with training-only resampling.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::stratified_kfold;
use super::roc::{mean_roc, roc_curve, MeanRoc, RocCurve};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::labeling::Label;
use crate::models::ModelSpec;
use crate::real::Real;
use crate::rng::{self, purpose};
use crate::sampling::{apply_sampling, SamplingPolicy, SmoteParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub sampling: SamplingPolicy,
    #[serde(default)]
    pub smote: SmoteParams,
    /// Resample the whole dataset before splitting. Synthetic rows then leak
    /// information between folds; off by default.
    #[serde(default)]
    pub balance_before_split: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 6,
            sampling: SamplingPolicy::Hybrid,
            smote: SmoteParams::default(),
            balance_before_split: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult<F> {
    pub fold: usize,
    /// Rows of the evaluated dataset held out in this fold.
    pub test_indices: Vec<usize>,
    /// Rows of the evaluated dataset that fed the training set, directly or
    /// as SMOTE endpoints.
    pub training_sources: BTreeSet<usize>,
    pub scores: Vec<F>,
    pub curve: RocCurve<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport<F> {
    pub folds: Vec<FoldResult<F>>,
    pub mean: MeanRoc,
}

fn run_fold<F: Real>(
    data: &Dataset<F>,
    split: &super::FoldSplit,
    fold: usize,
    spec: &ModelSpec,
    config: &CvConfig,
    seed: u64,
    resample: bool,
) -> Result<FoldResult<F>> {
    let test_indices = split.test_indices(fold);
    let train = data.subset(&split.train_indices(fold));
    let train = if resample {
        apply_sampling(
            &train,
            config.sampling,
            config.smote,
            rng::derive_seed(seed, &[purpose::SAMPLING, fold as u64]),
        )?
    } else {
        train
    };
    let training_sources: BTreeSet<usize> = train.origins().iter().flat_map(|o| o.sources()).collect();
    let model = spec.fit(&train, rng::derive_seed(seed, &[purpose::FOLDS, fold as u64]))?;
    let test = data.subset(&test_indices);
    let scores = model.score_all(&test)?;
    let curve = roc_curve(&scores, test.labels())?;
    Ok(FoldResult {
        fold,
        test_indices,
        training_sources,
        scores,
        curve,
    })
}

/// Splits into stratified folds, resamples each training portion, fits
/// `spec` and scores the untouched test rows. Folds run in parallel; every
/// random choice is keyed by `(seed, fold)`.
pub fn cross_validate<F: Real>(
    dataset: &Dataset<F>,
    spec: &ModelSpec,
    config: &CvConfig,
    seed: u64,
) -> Result<CvReport<F>> {
    spec.validate()?;
    dataset.require_both_classes()?;
    let mut data = dataset.clone();
    data.reset_origins();
    if config.balance_before_split {
        data = apply_sampling(&data, config.sampling, config.smote, rng::derive_seed(seed, &[purpose::SAMPLING]))?;
    }
    let split = stratified_kfold(data.labels(), config.k, seed)?;
    let folds = (0..config.k)
        .into_par_iter()
        .map(|f| run_fold(&data, &split, f, spec, config, seed, !config.balance_before_split))
        .collect::<Result<Vec<_>>>()?;
    if !config.balance_before_split {
        for f in &folds {
            if f.test_indices.iter().any(|i| f.training_sources.contains(i)) {
                return Err(Error::Invariant(format!("fold {} trained on held-out rows", f.fold)));
            }
        }
    }
    let curves: Vec<RocCurve<F>> = folds.iter().map(|f| f.curve.clone()).collect();
    let mean = mean_roc(&curves)?;
    Ok(CvReport { folds, mean })
}

/// Labels shuffled by a seeded permutation.
pub fn permute_labels(labels: &[Label], seed: u64) -> Vec<Label> {
    let mut out = labels.to_vec();
    out.shuffle(&mut rng::stream(seed, &[purpose::PERMUTATION]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ForestParams, MapSpec};
    use rand::Rng;

    fn blobs(n: usize, gap: f64, seed: u64) -> Dataset<f64> {
        let mut r = rng::stream(seed, &[]);
        let mut ds = Dataset::empty(vec!["a".into(), "b".into()]).unwrap();
        for i in 0..n {
            let y = i % 4 == 0;
            let c = if y { gap } else { 0.0 };
            ds.push(&[c + r.random::<f64>(), r.random::<f64>()], Label::from_bool(y)).unwrap();
        }
        ds
    }

    fn small_forest() -> ModelSpec {
        ModelSpec::Forest(ForestParams {
            n_trees: 20,
            ..ForestParams::default()
        })
    }

    #[test]
    fn separable_folds_are_perfect() {
        let ds = blobs(240, 2.0, 1);
        let rep = cross_validate(&ds, &small_forest(), &CvConfig::default(), 3).unwrap();
        assert_eq!(rep.folds.len(), 6);
        for f in &rep.folds {
            assert_eq!(f.curve.auroc, 1.0);
        }
        assert_eq!(rep.mean.mean_auroc, 1.0);
    }

    #[test]
    fn training_never_touches_test_rows() {
        let ds = blobs(200, 0.5, 2);
        let rep = cross_validate(&ds, &small_forest(), &CvConfig::default(), 4).unwrap();
        let mut seen = BTreeSet::new();
        for f in &rep.folds {
            assert!(f.test_indices.iter().all(|i| !f.training_sources.contains(i)));
            seen.extend(f.test_indices.iter().copied());
        }
        assert_eq!(seen.len(), ds.len());
    }

    #[test]
    fn permuted_labels_give_chance() {
        let ds = blobs(2000, 1.0, 3);
        let ds = ds.with_labels(permute_labels(ds.labels(), 11)).unwrap();
        let rep = cross_validate(&ds, &small_forest(), &CvConfig::default(), 5).unwrap();
        assert!((rep.mean.mean_auroc - 0.5).abs() < 0.1, "{}", rep.mean.mean_auroc);
    }

    #[test]
    fn map_baseline_runs() {
        let mut ds = Dataset::empty(vec!["energy".into()]).unwrap();
        let mut r = rng::stream(6, &[]);
        for i in 0..300 {
            let y = i % 3 == 0;
            let e: f64 = if y { 10.0 } else { 1.0 } * (0.5 + r.random::<f64>());
            ds.push(&[e], Label::from_bool(y)).unwrap();
        }
        let rep = cross_validate(&ds, &ModelSpec::Map(MapSpec::default()), &CvConfig::default(), 0).unwrap();
        assert!(rep.mean.mean_auroc > 0.95);
    }

    #[test]
    fn deterministic_and_compat_mode() {
        let ds = blobs(180, 0.7, 7);
        let a = cross_validate(&ds, &small_forest(), &CvConfig::default(), 8).unwrap();
        let b = cross_validate(&ds, &small_forest(), &CvConfig::default(), 8).unwrap();
        assert_eq!(a, b);
        let compat = CvConfig {
            balance_before_split: true,
            ..CvConfig::default()
        };
        let c = cross_validate(&ds, &small_forest(), &compat, 8).unwrap();
        let total: usize = c.folds.iter().map(|f| f.test_indices.len()).sum();
        assert_eq!(total % 2, 0);
    }
}
