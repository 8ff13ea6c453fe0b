//! Class-imbalance mitigation: SMOTE oversampling, random undersampling and
//! hybrid sampling to a class ratio of exactly one.

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::dataset::{Dataset, RowOrigin};
use crate::error::{Error, Result};
use crate::labeling::Label;
use crate::real::Real;
use crate::rng::{self, purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteParams {
    pub k: usize,
    /// Search neighbours in z-scored space; interpolation stays in raw space.
    pub standardize: bool,
}

impl SmoteParams {
    pub fn with_k(self, k: usize) -> Self {
        SmoteParams { k, ..self }
    }
}

impl Default for SmoteParams {
    fn default() -> Self {
        SmoteParams { k: 5, standardize: true }
    }
}

/// A synthetic point and the minority rows it interpolates between.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRow<F> {
    pub values: Vec<F>,
    pub base: usize,
    pub neighbor: usize,
    pub weight: F,
}

/// The `k` nearest rows to row `i` (excluding itself) by Euclidean distance,
/// ties broken by row index.
fn nearest_neighbors<F: Real>(rows: &[Vec<F>], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(F, usize)> = rows
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, r)| {
            let dist = r.iter().zip(&rows[i]).map(|(&a, &b)| (a - b) * (a - b)).sum::<F>();
            (dist, j)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, j)| j).collect()
}

fn standardized<F: Real>(rows: &[&[F]]) -> Vec<Vec<F>> {
    let d = rows[0].len();
    let n = F::of_usize(rows.len());
    let mut mean = vec![F::zero(); d];
    for r in rows {
        for (m, &v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut sd = vec![F::zero(); d];
    for r in rows {
        for ((s, &v), &m) in sd.iter_mut().zip(r.iter()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut sd {
        *s = (*s / n).sqrt();
        if !(*s > F::zero()) {
            *s = F::one();
        }
    }
    rows.iter()
        .map(|r| r.iter().zip(&mean).zip(&sd).map(|((&v, &m), &s)| (v - m) / s).collect())
        .collect()
}

/// Generates `n_synthetic` points, each `x + u·(x_nn − x)` for a uniformly
/// drawn minority row `x`, one of its `k` nearest minority neighbours `x_nn`
/// and `u ~ U[0, 1)`.
pub fn smote<F: Real>(
    minority_rows: &[&[F]],
    params: SmoteParams,
    n_synthetic: usize,
    seed: u64,
) -> Result<Vec<SyntheticRow<F>>> {
    let m = minority_rows.len();
    if m < 2 {
        return Err(Error::data(format!("SMOTE needs at least two minority rows, got {m}")));
    }
    if params.k == 0 || params.k >= m {
        return Err(Error::config(format!(
            "SMOTE neighbour count k={} must lie in 1..{m}",
            params.k
        )));
    }
    if n_synthetic == 0 {
        return Ok(Vec::new());
    }
    let space: Vec<Vec<F>> = if params.standardize {
        standardized(minority_rows)
    } else {
        minority_rows.iter().map(|r| r.to_vec()).collect()
    };

    let mut rng = rng::stream(seed, &[purpose::SAMPLING, 1]);
    let mut cache: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut out = Vec::with_capacity(n_synthetic);
    for _ in 0..n_synthetic {
        let base = rng.random_range(0..m);
        let nn = cache
            .entry(base)
            .or_insert_with(|| nearest_neighbors(&space, base, params.k));
        let neighbor = nn[rng.random_range(0..nn.len())];
        let u = F::of(rng.random::<f64>());
        let x = minority_rows[base];
        let y = minority_rows[neighbor];
        out.push(SyntheticRow {
            values: x.iter().zip(y).map(|(&a, &b)| a + u * (b - a)).collect(),
            base,
            neighbor,
            weight: u,
        });
    }
    Ok(out)
}

/// Uniform subset of `n_keep` items without replacement, in input order.
pub fn undersample<T: Clone>(majority_rows: &[T], n_keep: usize, seed: u64) -> Result<Vec<T>> {
    Ok(undersample_indices(majority_rows.len(), n_keep, seed)?
        .into_iter()
        .map(|i| majority_rows[i].clone())
        .collect())
}

/// Sorted indices of an `n_keep`-subset of `0..n`.
pub fn undersample_indices(n: usize, n_keep: usize, seed: u64) -> Result<Vec<usize>> {
    if n_keep > n {
        return Err(Error::data(format!("cannot keep {n_keep} of {n} rows")));
    }
    let mut rng = rng::stream(seed, &[purpose::SAMPLING, 2]);
    let mut idx = index::sample(&mut rng, n, n_keep).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

fn root_id(origin: RowOrigin) -> usize {
    match origin {
        RowOrigin::Original(i) => i,
        RowOrigin::Synthetic { base, .. } => base,
    }
}

/// Synthetic rows with their origins.
type Synthetic<F> = Vec<(Vec<F>, RowOrigin)>;

/// Resizes class `label` of `dataset` to exactly `target` rows: SMOTE when it
/// is too small, undersampling when too large. Returns retained row indices
/// and synthetic rows (with origins).
fn resize_class<F: Real>(
    dataset: &Dataset<F>,
    label: Label,
    target: usize,
    params: SmoteParams,
    seed: u64,
) -> Result<(Vec<usize>, Synthetic<F>)> {
    let members = dataset.indices_of(label);
    let n = members.len();
    if n >= target {
        let keep = undersample_indices(n, target, rng::derive_seed(seed, &[label.as_u8() as u64]))?;
        return Ok((keep.into_iter().map(|i| members[i]).collect(), Vec::new()));
    }
    if n < 2 {
        return Err(Error::data(format!(
            "class {label} has {n} row(s); SMOTE needs at least two"
        )));
    }
    let rows: Vec<&[F]> = members.iter().map(|&i| dataset.row(i)).collect();
    let params = SmoteParams {
        k: params.k.min(n - 1),
        ..params
    };
    let synth = smote(&rows, params, target - n, seed)?;
    let origins = dataset.origins();
    let synth = synth
        .into_iter()
        .map(|s| {
            let origin = RowOrigin::Synthetic {
                base: root_id(origins[members[s.base]]),
                neighbor: root_id(origins[members[s.neighbor]]),
            };
            (s.values, origin)
        })
        .collect();
    Ok((members, synth))
}

fn assemble<F: Real>(
    dataset: &Dataset<F>,
    parts: Vec<(Label, Vec<usize>, Synthetic<F>)>,
) -> Result<Dataset<F>> {
    let mut keep: Vec<usize> = parts.iter().flat_map(|p| p.1.iter().copied()).collect();
    keep.sort_unstable();
    let mut out = dataset.subset(&keep);
    for (label, _, synth) in parts {
        for (values, origin) in synth {
            out.push_with_origin(&values, label, origin)?;
        }
    }
    Ok(out)
}

/// Oversamples the minority and undersamples the majority so both classes
/// hold exactly `floor(n/2)` rows.
pub fn hybrid_sample<F: Real>(dataset: &Dataset<F>, params: SmoteParams, seed: u64) -> Result<Dataset<F>> {
    dataset.require_both_classes()?;
    let target = dataset.len() / 2;
    let mut parts = Vec::with_capacity(2);
    for label in [Label::Zero, Label::One] {
        let (keep, synth) = resize_class(dataset, label, target, params, rng::derive_seed(seed, &[label.as_u8() as u64]))?;
        parts.push((label, keep, synth));
    }
    assemble(dataset, parts)
}

/// Resampling applied to a training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingPolicy {
    None,
    /// SMOTE the minority up to the majority count.
    Smote,
    /// Undersample the majority down to the minority count.
    Undersample,
    Hybrid,
}

pub fn apply_sampling<F: Real>(
    dataset: &Dataset<F>,
    policy: SamplingPolicy,
    params: SmoteParams,
    seed: u64,
) -> Result<Dataset<F>> {
    let ratio = dataset.require_both_classes()?;
    let (minority, majority, n_min, n_max) = if ratio.ones <= ratio.zeros {
        (Label::One, Label::Zero, ratio.ones, ratio.zeros)
    } else {
        (Label::Zero, Label::One, ratio.zeros, ratio.ones)
    };
    match policy {
        SamplingPolicy::None => Ok(dataset.clone()),
        SamplingPolicy::Hybrid => hybrid_sample(dataset, params, seed),
        SamplingPolicy::Smote => {
            let (keep_min, synth) = resize_class(dataset, minority, n_max, params, seed)?;
            let keep_maj = dataset.indices_of(majority);
            assemble(dataset, vec![(minority, keep_min, synth), (majority, keep_maj, Vec::new())])
        }
        SamplingPolicy::Undersample => {
            let (keep_maj, _) = resize_class(dataset, majority, n_min, params, seed)?;
            let keep_min = dataset.indices_of(minority);
            assemble(dataset, vec![(minority, keep_min, Vec::new()), (majority, keep_maj, Vec::new())])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    /// Distance from `p` to the segment `[a, b]`.
    fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        let ap: Vec<f64> = a.iter().zip(p).map(|(x, y)| y - x).collect();
        let len2: f64 = ab.iter().map(|v| v * v).sum();
        let t = if len2 > 0.0 {
            (ab.iter().zip(&ap).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        a.iter()
            .zip(&ab)
            .zip(p)
            .map(|((x, d), q)| (x + t * d - q).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Brute-force k-NN by full sort in raw space.
    fn brute_knn(rows: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = (0..rows.len())
            .filter(|&j| j != i)
            .map(|j| {
                let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b).powi(2)).sum();
                (d, j)
            })
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.into_iter().take(k).map(|x| x.1).collect()
    }

    fn dataset(ones: usize, zeros: usize, seed: u64) -> Dataset<f64> {
        let mut rng = rng::stream(seed, &[]);
        let mut ds = Dataset::empty(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        for i in 0..ones + zeros {
            let label = Label::from_bool(i < ones);
            let shift = if label.is_one() { 2.0 } else { 0.0 };
            let row = [
                rng.random::<f64>() + shift,
                rng.random::<f64>() * 10.0,
                rng.random::<f64>() - shift,
            ];
            ds.push(&row, label).unwrap();
        }
        ds
    }

    #[test]
    fn two_point_minority_stays_on_segment() {
        let a = [0.0, 0.0];
        let b = [1.0, 1.0];
        let rows: Vec<&[f64]> = vec![&a, &b];
        let out = smote(&rows, SmoteParams { k: 1, standardize: false }, 50, 3).unwrap();
        assert_eq!(out.len(), 50);
        for s in out {
            assert!(segment_distance(&s.values, &a, &b) < 1e-12);
            assert_eq!(s.values[0], s.values[1]);
        }
    }

    #[test]
    fn zero_synthetic_rows() {
        let a = [0.0];
        let b = [1.0];
        assert!(smote(&[&a[..], &b[..]], SmoteParams::default().with_k(1), 0, 0).unwrap().is_empty());
    }

    #[test]
    fn smote_preconditions() {
        let a = [0.0];
        let b = [1.0];
        assert!(smote(&[&a[..]], SmoteParams::default().with_k(1), 3, 0).is_err());
        assert!(smote(&[&a[..], &b[..]], SmoteParams::default().with_k(2), 3, 0).is_err());
        assert!(smote(&[&a[..], &b[..]], SmoteParams::default().with_k(0), 3, 0).is_err());
    }

    #[test]
    fn synthetic_rows_pass_segment_oracle() {
        let ds = dataset(10, 0, 17);
        let rows: Vec<Vec<f64>> = ds.rows().map(|r| r.to_vec()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let k = 3;
        let out = smote(&refs, SmoteParams { k, standardize: false }, 100, 5).unwrap();
        for s in &out {
            let ok = (0..rows.len()).any(|i| {
                brute_knn(&rows, i, k)
                    .into_iter()
                    .any(|j| segment_distance(&s.values, &rows[i], &rows[j]) <= 1e-9)
            });
            assert!(ok, "{:?} lies on no neighbour segment", s.values);
        }
    }

    #[test]
    fn undersample_examples() {
        let items: Vec<u32> = (0..20).collect();
        let mut all = undersample(&items, 20, 1).unwrap();
        all.sort();
        assert_eq!(all, items);
        assert!(undersample(&items, 0, 1).unwrap().is_empty());
        assert_eq!(undersample(&items, 7, 9).unwrap(), undersample(&items, 7, 9).unwrap());
        assert!(undersample(&items, 21, 1).is_err());
    }

    #[test]
    fn hybrid_examples() {
        let out = hybrid_sample(&dataset(10, 90, 1), SmoteParams::default(), 4).unwrap();
        assert_eq!((out.class_ratio().ones, out.class_ratio().zeros), (50, 50));

        let balanced = dataset(40, 40, 2);
        let out = hybrid_sample(&balanced, SmoteParams::default(), 4).unwrap();
        assert_eq!((out.class_ratio().ones, out.class_ratio().zeros), (40, 40));
        assert!(out.origins().iter().all(|o| !o.is_synthetic()));

        assert!(hybrid_sample(&dataset(1, 99, 3), SmoteParams::default(), 4).is_err());
        assert!(matches!(
            hybrid_sample(&dataset(0, 9, 3), SmoteParams::default(), 4),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn other_policies() {
        let ds = dataset(12, 30, 8);
        let s = apply_sampling(&ds, SamplingPolicy::Smote, SmoteParams::default(), 1).unwrap();
        assert_eq!((s.class_ratio().ones, s.class_ratio().zeros), (30, 30));
        let u = apply_sampling(&ds, SamplingPolicy::Undersample, SmoteParams::default(), 1).unwrap();
        assert_eq!((u.class_ratio().ones, u.class_ratio().zeros), (12, 12));
        let n = apply_sampling(&ds, SamplingPolicy::None, SmoteParams::default(), 1).unwrap();
        assert_eq!(n, ds);
    }

    #[test]
    fn generic_in_f32() {
        let ds: Dataset<f32> = Dataset::new(
            vec!["x".into()],
            (0..10).map(|i| vec![i as f32]).collect(),
            (0..10).map(|i| Label::from_bool(i < 3)).collect(),
        )
        .unwrap();
        let out = hybrid_sample(&ds, SmoteParams::default(), 0).unwrap();
        assert_eq!(out.class_ratio().ones, 5);
        assert!(out.rows().all(|r| (0.0..=9.0).contains(&r[0])));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn hybrid_is_exact_and_deterministic(ones in 2usize..60, zeros in 2usize..60, seed in any::<u64>()) {
            let ds = dataset(ones, zeros, seed);
            let a = hybrid_sample(&ds, SmoteParams::default(), seed).unwrap();
            let b = hybrid_sample(&ds, SmoteParams::default(), seed).unwrap();
            prop_assert_eq!(&a, &b);
            let r = a.class_ratio();
            prop_assert_eq!(r.ones, r.zeros);
            prop_assert_eq!(r.ones, (ones + zeros) / 2);
            // Retained originals are a sub-multiset of the input.
            for (i, o) in a.origins().iter().enumerate() {
                if let RowOrigin::Original(src) = *o {
                    prop_assert_eq!(a.row(i), ds.row(src));
                    prop_assert_eq!(a.label(i), ds.label(src));
                }
            }
        }
    }
}
