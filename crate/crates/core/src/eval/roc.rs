//! ROC curves, AUROC and fold averaging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::Label;
use crate::real::Real;

/// Points of the vertically averaged curve.
pub const MEAN_ROC_GRID: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint<F> {
    pub fpr: f64,
    pub tpr: f64,
    /// Rows with `score >= threshold` are predicted positive.
    pub threshold: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve<F> {
    pub points: Vec<RocPoint<F>>,
    pub auroc: f64,
}

fn class_counts(labels: &[Label]) -> Result<(usize, usize)> {
    let p = labels.iter().filter(|l| l.is_one()).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClass(format!("ROC needs both classes, got {p} ones and {n} zeros")));
    }
    Ok((p, n))
}

fn check_scores<F: Real>(scores: &[F], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::data("score and label counts differ"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::data("scores contain NaN"));
    }
    Ok(())
}

/// Sweeps the threshold over the distinct scores in descending order,
/// starting from `+inf`. AUROC is the trapezoid area, accumulated in integer
/// counts so it is exact up to the final division.
pub fn roc_curve<F: Real>(scores: &[F], labels: &[Label]) -> Result<RocCurve<F>> {
    check_scores(scores, labels)?;
    let (p, n) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("no NaN scores"));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: F::infinity(),
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]].is_one() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push(RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            threshold: t,
        });
    }
    Ok(RocCurve {
        points,
        auroc: twice_area as f64 / (2.0 * p as f64 * n as f64),
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by direct enumeration of all pairs.
pub fn auroc_pair_oracle<F: Real>(scores: &[F], labels: &[Label]) -> Result<f64> {
    check_scores(scores, labels)?;
    let (p, n) = class_counts(labels)?;
    let mut twice = 0u128;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i].is_one() {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j].is_one() {
                continue;
            }
            if si > sj {
                twice += 2;
            } else if si == sj {
                twice += 1;
            }
        }
    }
    Ok(twice as f64 / (2.0 * p as f64 * n as f64))
}

/// TPR of `curve` at `fpr`, linearly interpolated; on a vertical segment the
/// highest TPR wins.
pub fn interpolate_tpr<F>(curve: &RocCurve<F>, fpr: f64) -> f64 {
    let pts = &curve.points;
    let upper = pts.partition_point(|q| q.fpr <= fpr);
    if upper > 0 && pts[upper - 1].fpr == fpr {
        return pts[upper - 1].tpr;
    }
    if upper == 0 {
        return pts[0].tpr;
    }
    if upper == pts.len() {
        return pts[pts.len() - 1].tpr;
    }
    let (a, b) = (&pts[upper - 1], &pts[upper]);
    a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr)
}

/// Vertically averaged ROC with the per-fold AUROC statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRoc {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub aurocs: Vec<f64>,
    pub mean_auroc: f64,
    /// Population standard deviation of `aurocs`.
    pub std_auroc: f64,
}

pub fn mean_roc<F>(curves: &[RocCurve<F>]) -> Result<MeanRoc> {
    if curves.is_empty() {
        return Err(Error::data("mean ROC needs at least one curve"));
    }
    let fpr: Vec<f64> = (0..MEAN_ROC_GRID).map(|i| i as f64 / (MEAN_ROC_GRID - 1) as f64).collect();
    let tpr = fpr
        .iter()
        .map(|&x| curves.iter().map(|c| interpolate_tpr(c, x)).sum::<f64>() / curves.len() as f64)
        .collect();
    let aurocs: Vec<f64> = curves.iter().map(|c| c.auroc).collect();
    let k = aurocs.len() as f64;
    let mean_auroc = aurocs.iter().sum::<f64>() / k;
    let std_auroc = (aurocs.iter().map(|a| (a - mean_auroc).powi(2)).sum::<f64>() / k).sqrt();
    Ok(MeanRoc {
        fpr,
        tpr,
        aurocs,
        mean_auroc,
        std_auroc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn y(v: &[u8]) -> Vec<Label> {
        v.iter().map(|&b| Label::try_from(b).unwrap()).collect()
    }

    #[test]
    fn examples() {
        assert_eq!(roc_curve(&[0.9, 0.8], &y(&[1, 0])).unwrap().auroc, 1.0);
        assert_eq!(roc_curve(&[0.8, 0.9], &y(&[1, 0])).unwrap().auroc, 0.0);
        let s = [0.7, 0.6, 0.6, 0.2];
        let l = y(&[1, 1, 0, 0]);
        let c = roc_curve(&s, &l).unwrap();
        assert_eq!(c.auroc, auroc_pair_oracle(&s, &l).unwrap());
        assert_eq!(c.auroc, 0.875);
        assert!(roc_curve(&[0.1, 0.2], &y(&[1, 1])).is_err());
        assert!(roc_curve(&[f64::NAN, 0.2], &y(&[1, 0])).is_err());
    }

    #[test]
    fn endpoints_and_monotone() {
        let c = roc_curve(&[0.3f64, 0.3, 0.1, 0.9, 0.5], &y(&[0, 1, 0, 1, 1])).unwrap();
        let first = c.points[0];
        let last = c.points[c.points.len() - 1];
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert!(first.threshold.is_infinite());
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(last.threshold, 0.1);
        for w in c.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            assert!(w[1].threshold < w[0].threshold);
        }
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(auroc_pair_oracle(&[0.9, 0.1], &y(&[1, 0])).unwrap(), 1.0);
        assert_eq!(auroc_pair_oracle(&[0.4; 6], &y(&[1, 0, 1, 0, 0, 1])).unwrap(), 0.5);
        let mut r = rng::stream(5, &[]);
        let s: Vec<f64> = (0..2000).map(|_| r.random()).collect();
        let l: Vec<Label> = (0..2000).map(|_| Label::from_bool(r.random())).collect();
        assert!((auroc_pair_oracle(&s, &l).unwrap() - 0.5).abs() < 0.03);
    }

    #[test]
    fn mean_roc_examples() {
        let a = roc_curve(&[0.9, 0.4, 0.5, 0.1], &y(&[1, 1, 0, 0])).unwrap();
        let m = mean_roc(std::slice::from_ref(&a)).unwrap();
        assert_eq!(m.fpr.len(), MEAN_ROC_GRID);
        assert_eq!(m.mean_auroc, a.auroc);
        for (x, t) in m.fpr.iter().zip(&m.tpr) {
            assert_eq!(*t, interpolate_tpr(&a, *x));
        }
        assert_eq!(m.tpr[0], 0.5);
        assert_eq!(m.tpr[50], 1.0);
        assert_eq!(m.tpr[25], 0.5);

        let two = mean_roc(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(two.tpr, m.tpr);
        assert_eq!(two.std_auroc, 0.0);

        let mut b = a.clone();
        let mut c = a;
        b.auroc = 0.9;
        c.auroc = 1.0;
        assert!((mean_roc(&[b, c]).unwrap().mean_auroc - 0.95).abs() < 1e-15);
        assert!(mean_roc::<f64>(&[]).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..12).prop_map(|v| v as f64 / 11.0), n),
                prop::collection::vec(any::<bool>().prop_map(Label::from_bool), n),
            )
        })
    }

    proptest! {
        #[test]
        fn trapezoid_matches_pair_oracle((s, l) in instance()) {
            prop_assume!(l.iter().any(|x| x.is_one()) && l.iter().any(|x| !x.is_one()));
            let a = roc_curve(&s, &l).unwrap().auroc;
            prop_assert!((a - auroc_pair_oracle(&s, &l).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_increasing_transform((s, l) in instance()) {
            prop_assume!(l.iter().any(|x| x.is_one()) && l.iter().any(|x| !x.is_one()));
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            let a = roc_curve(&s, &l).unwrap();
            let b = roc_curve(&t, &l).unwrap();
            prop_assert_eq!(a.auroc, b.auroc);
            let pa: Vec<_> = a.points.iter().map(|p| (p.fpr, p.tpr)).collect();
            let pb: Vec<_> = b.points.iter().map(|p| (p.fpr, p.tpr)).collect();
            prop_assert_eq!(pa, pb);
        }
    }
}
