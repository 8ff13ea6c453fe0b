//! Random forest of Gini-impurity classification trees.
//!
//! Each tree sees a bootstrap sample of the training rows and considers a
//! fresh random subset of features at every node. Tree `t` draws everything
//! from the stream `(seed, t)`, so fitted forests do not depend on how the
//! trees are scheduled across threads.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{self, purpose, Stream};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Candidate features per node; `None` means `ceil(sqrt(d))`.
    #[serde(default)]
    pub features_per_split: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_samples_leaf: 2,
            features_per_split: None,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("a forest needs at least one tree"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::config("min_samples_leaf must be positive"));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::config("features_per_split must be positive"));
        }
        Ok(())
    }

    fn candidates(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d)
    }
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub enum Node<F> {
    Split {
        feature: usize,
        threshold: F,
        left: Box<Node<F>>,
        right: Box<Node<F>>,
    },
    /// Fraction of class-one training rows that reached the leaf.
    Leaf { fraction: F },
}

impl<F: Real> Node<F> {
    pub fn leaf(fraction: F) -> Self {
        Node::Leaf { fraction }
    }

    pub fn split(feature: usize, threshold: F, left: Node<F>, right: Node<F>) -> Self {
        Node::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn predict(&self, x: &[F]) -> F {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { fraction } => return *fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<F> {
        let mut out = Vec::new();
        self.for_each_preorder(&mut |n| {
            if let Node::Leaf { fraction } = n {
                out.push(*fraction);
            }
        });
        out
    }

    fn for_each_preorder(&self, f: &mut impl FnMut(&Node<F>)) {
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            f(n);
            if let Node::Split { left, right, .. } = n {
                stack.push(right);
                stack.push(left);
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        let mut m = None;
        self.for_each_preorder(&mut |n| {
            if let Node::Split { feature, .. } = n {
                m = m.max(Some(*feature));
            }
        });
        m
    }
}

/// Weighted Gini impurity of a two-way partition of class-one/total counts.
fn gini(ones: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = ones as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn weighted_gini(left_ones: usize, left_n: usize, ones: usize, n: usize) -> f64 {
    let right_n = n - left_n;
    let right_ones = ones - left_ones;
    (left_n as f64 * gini(left_ones, left_n) + right_n as f64 * gini(right_ones, right_n)) / n as f64
}

/// Best split found among candidate features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice<F> {
    pub feature: usize,
    pub threshold: F,
    pub impurity: f64,
    pub parent_impurity: f64,
}

fn midpoint<F: Real>(a: F, b: F) -> F {
    let m = a / F::of(2.0) + b / F::of(2.0);
    if m >= a && m < b {
        m
    } else {
        a
    }
}

/// Lowest weighted Gini impurity split over `candidates` (visited in
/// ascending order) with both children holding at least `min_leaf` rows.
/// Thresholds are midpoints between adjacent distinct values; ties go to the
/// lower feature, then the lower threshold.
pub fn best_split<F: Real>(
    dataset: &Dataset<F>,
    rows: &[usize],
    candidates: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice<F>> {
    let n = rows.len();
    let ones = rows.iter().filter(|&&r| dataset.label(r).is_one()).count();
    let parent_impurity = gini(ones, n);
    let mut best: Option<SplitChoice<F>> = None;
    let mut pairs: Vec<(F, bool)> = Vec::with_capacity(n);
    for &feature in candidates {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (dataset.row(r)[feature], dataset.label(r).is_one())));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        let mut left_ones = 0;
        for i in 1..n {
            left_ones += pairs[i - 1].1 as usize;
            if i < min_leaf || n - i < min_leaf || !(pairs[i - 1].0 < pairs[i].0) {
                continue;
            }
            let impurity = weighted_gini(left_ones, i, ones, n);
            if best.is_none_or(|b| impurity < b.impurity) {
                best = Some(SplitChoice {
                    feature,
                    threshold: midpoint(pairs[i - 1].0, pairs[i].0),
                    impurity,
                    parent_impurity,
                });
            }
        }
    }
    best
}

struct TreeBuilder<'a, F> {
    dataset: &'a Dataset<F>,
    params: ForestParams,
    n_candidates: usize,
    rng: Stream,
}

impl<F: Real> TreeBuilder<'_, F> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> Node<F> {
        let n = rows.len();
        let ones = rows.iter().filter(|&&r| self.dataset.label(r).is_one()).count();
        let fraction = F::of_usize(ones) / F::of_usize(n);
        if depth >= self.params.max_depth || ones == 0 || ones == n || n < 2 * self.params.min_samples_leaf {
            return Node::leaf(fraction);
        }
        let d = self.dataset.n_features();
        let mut candidates = index::sample(&mut self.rng, d, self.n_candidates).into_vec();
        candidates.sort_unstable();
        let Some(choice) = best_split(self.dataset, rows, &candidates, self.params.min_samples_leaf) else {
            return Node::leaf(fraction);
        };
        debug_assert!(choice.impurity <= choice.parent_impurity + 1e-12);

        let ds = self.dataset;
        let mut cut = 0;
        for i in 0..n {
            if ds.row(rows[i])[choice.feature] <= choice.threshold {
                rows.swap(i, cut);
                cut += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(cut);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        Node::split(choice.feature, choice.threshold, left, right)
    }
}

fn fit_tree<F: Real>(dataset: &Dataset<F>, params: ForestParams, seed: u64, tree: usize) -> Node<F> {
    let mut rng = rng::stream(seed, &[purpose::FOREST, tree as u64]);
    let n = dataset.len();
    let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut builder = TreeBuilder {
        dataset,
        params,
        n_candidates: params.candidates(dataset.n_features()),
        rng,
    };
    builder.build(&mut rows, 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel<F> {
    trees: Vec<Node<F>>,
    n_features: usize,
    params: ForestParams,
    seed: u64,
}

impl<F: Real> RandomForestModel<F> {
    /// Assembles a forest from explicit trees.
    pub fn from_trees(trees: Vec<Node<F>>, n_features: usize, params: ForestParams, seed: u64) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::data("a forest needs at least one tree"));
        }
        for t in &trees {
            if t.max_feature().is_some_and(|f| f >= n_features) {
                return Err(Error::data("tree splits on a feature beyond the input dimension"));
            }
            if t.leaves().iter().any(|f| !(*f >= F::zero() && *f <= F::one())) {
                return Err(Error::data("leaf fractions must lie in [0, 1]"));
            }
        }
        Ok(RandomForestModel {
            trees,
            n_features,
            params,
            seed,
        })
    }

    pub fn trees(&self) -> &[Node<F>] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mean leaf fraction across trees.
    pub fn score(&self, x: &[F]) -> Result<F> {
        if x.len() != self.n_features {
            return Err(Error::data(format!(
                "forest expects {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        let sum: F = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / F::of_usize(self.trees.len()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&PersistedForest::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: PersistedForest<F> = serde_json::from_str(text)?;
        p.into_model()
    }
}

/// Trains `params.n_trees` trees in parallel.
pub fn fit_forest<F: Real>(dataset: &Dataset<F>, params: &ForestParams, seed: u64) -> Result<RandomForestModel<F>> {
    params.validate()?;
    if dataset.len() < 2 {
        return Err(Error::data("a forest needs at least two training rows"));
    }
    dataset.require_both_classes()?;
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| fit_tree(dataset, *params, seed, t))
        .collect();
    RandomForestModel::from_trees(trees, dataset.n_features(), *params, seed)
}

pub fn forest_score<F: Real>(model: &RandomForestModel<F>, x: &[F]) -> Result<F> {
    model.score(x)
}

/// One node of a pre-order tree listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum FlatNode<F> {
    Split { feature: usize, threshold: F },
    Leaf { leaf: F },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersistedForest<F> {
    format: String,
    version: u32,
    n_features: usize,
    seed: u64,
    params: ForestParams,
    trees: Vec<Vec<FlatNode<F>>>,
}

const FORMAT_TAG: &str = "random-forest";

impl<F: Real> From<&RandomForestModel<F>> for PersistedForest<F> {
    fn from(m: &RandomForestModel<F>) -> Self {
        let trees = m
            .trees
            .iter()
            .map(|t| {
                let mut flat = Vec::new();
                t.for_each_preorder(&mut |n| {
                    flat.push(match n {
                        Node::Leaf { fraction } => FlatNode::Leaf { leaf: *fraction },
                        Node::Split { feature, threshold, .. } => FlatNode::Split {
                            feature: *feature,
                            threshold: *threshold,
                        },
                    })
                });
                flat
            })
            .collect();
        PersistedForest {
            format: FORMAT_TAG.to_string(),
            version: MODEL_FORMAT_VERSION,
            n_features: m.n_features,
            seed: m.seed,
            params: m.params,
            trees,
        }
    }
}

impl<F: Real> PersistedForest<F> {
    fn into_model(self) -> Result<RandomForestModel<F>> {
        if self.format != FORMAT_TAG || self.version != MODEL_FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported model format {} v{}",
                self.format, self.version
            )));
        }
        let trees = self
            .trees
            .into_iter()
            .map(|flat| {
                let mut it = flat.into_iter();
                let root = rebuild(&mut it)?;
                if it.next().is_some() {
                    return Err(Error::data("trailing nodes in serialized tree"));
                }
                Ok(root)
            })
            .collect::<Result<Vec<_>>>()?;
        RandomForestModel::from_trees(trees, self.n_features, self.params, self.seed)
    }
}

fn rebuild<F: Real>(it: &mut impl Iterator<Item = FlatNode<F>>) -> Result<Node<F>> {
    // Explicit stack so deep trees cannot overflow the call stack.
    enum Pending<F> {
        Split(usize, F, Option<Node<F>>),
    }
    let mut stack: Vec<Pending<F>> = Vec::new();
    loop {
        let mut node = match it.next() {
            None => return Err(Error::data("truncated serialized tree")),
            Some(FlatNode::Split { feature, threshold }) => {
                if !threshold.is_finite() {
                    return Err(Error::data("non-finite split threshold"));
                }
                stack.push(Pending::Split(feature, threshold, None));
                continue;
            }
            Some(FlatNode::Leaf { leaf }) => Node::leaf(leaf),
        };
        loop {
            match stack.pop() {
                None => return Ok(node),
                Some(Pending::Split(f, t, None)) => {
                    stack.push(Pending::Split(f, t, Some(node)));
                    break;
                }
                Some(Pending::Split(f, t, Some(left))) => node = Node::split(f, t, left, node),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::labeling::Label;
    use proptest::prelude::*;

    fn separable(n: usize, seed: u64) -> Dataset<f64> {
        let mut r = rng::stream(seed, &[]);
        let mut ds = Dataset::empty(vec!["sep".into(), "noise".into(), "noise2".into()]).unwrap();
        for i in 0..n {
            let y = i % 3 == 0;
            let x0 = if y { r.random_range(1.0..2.0) } else { r.random_range(-2.0..0.9) };
            ds.push(&[x0, r.random::<f64>(), r.random::<f64>()], Label::from_bool(y)).unwrap();
        }
        ds
    }

    fn noisy(n: usize, seed: u64) -> Dataset<f64> {
        let mut r = rng::stream(seed, &[]);
        let mut ds = Dataset::empty(vec!["a".into(), "b".into(), "c".into(), "d".into()]).unwrap();
        for _ in 0..n {
            let x: [f64; 4] = [r.random(), r.random(), r.random(), r.random()];
            let y = x[0] + 0.5 * x[1] + 0.3 * r.random::<f64>() > 0.9;
            ds.push(&x, Label::from_bool(y)).unwrap();
        }
        ds
    }

    #[test]
    fn separable_training_accuracy() {
        let ds = separable(120, 1);
        let params = ForestParams {
            n_trees: 25,
            features_per_split: Some(3),
            ..ForestParams::default()
        };
        let m = fit_forest(&ds, &params, 9).unwrap();
        for (i, row) in ds.rows().enumerate() {
            let s = m.score(row).unwrap();
            assert_eq!(Label::from_bool(s >= 0.5), ds.label(i));
        }
    }

    #[test]
    fn depth_zero_is_bootstrap_prior() {
        let ds = noisy(50, 2);
        let params = ForestParams {
            n_trees: 1,
            max_depth: 0,
            ..ForestParams::default()
        };
        let m = fit_forest(&ds, &params, 4).unwrap();
        // Re-draw the bootstrap sample from the documented stream.
        let mut r = rng::stream(4, &[purpose::FOREST, 0]);
        let boot: Vec<usize> = (0..ds.len()).map(|_| r.random_range(0..ds.len())).collect();
        let frac = boot.iter().filter(|&&i| ds.label(i).is_one()).count() as f64 / ds.len() as f64;
        for row in ds.rows() {
            assert_eq!(m.score(row).unwrap(), frac);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let ds = noisy(300, 3);
        let params = ForestParams {
            n_trees: 16,
            ..ForestParams::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| fit_forest(&ds, &params, 77).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
        let probe = noisy(50, 99);
        for row in probe.rows() {
            assert_eq!(a.score(row).unwrap(), b.score(row).unwrap());
        }
    }

    #[test]
    fn hand_built_scores() {
        let one = RandomForestModel::from_trees(vec![Node::leaf(1.0); 3], 1, ForestParams::default(), 0).unwrap();
        assert_eq!(one.score(&[0.3]).unwrap(), 1.0);
        let zero = RandomForestModel::from_trees(vec![Node::leaf(0.0); 3], 1, ForestParams::default(), 0).unwrap();
        assert_eq!(zero.score(&[0.3]).unwrap(), 0.0);
        let mixed =
            RandomForestModel::from_trees(vec![Node::leaf(0.2f64), Node::leaf(0.6)], 1, ForestParams::default(), 0).unwrap();
        assert!((mixed.score(&[0.0]).unwrap() - 0.4).abs() < 1e-15);
        assert!(mixed.score(&[0.0, 1.0]).is_err());
        assert!(RandomForestModel::from_trees(vec![Node::leaf(1.5)], 1, ForestParams::default(), 0).is_err());
        assert!(RandomForestModel::<f64>::from_trees(vec![], 1, ForestParams::default(), 0).is_err());
    }

    #[test]
    fn rejects_bad_training_sets() {
        let single = Dataset::new(vec!["a".into()], vec![vec![1.0], vec![2.0]], vec![Label::One; 2]).unwrap();
        assert!(fit_forest(&single, &ForestParams::default(), 0).is_err());
        let empty = Dataset::<f64>::empty(vec!["a".into()]).unwrap();
        assert!(fit_forest(&empty, &ForestParams::default(), 0).is_err());
        let bad = ForestParams {
            n_trees: 0,
            ..ForestParams::default()
        };
        assert!(fit_forest(&noisy(20, 0), &bad, 0).is_err());
    }

    #[test]
    fn json_round_trip_scores_identically() {
        let ds = noisy(200, 5);
        let m = fit_forest(
            &ds,
            &ForestParams {
                n_trees: 8,
                ..ForestParams::default()
            },
            1,
        )
        .unwrap();
        let back = RandomForestModel::<f64>::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        for row in noisy(40, 6).rows() {
            assert_eq!(m.score(row).unwrap().to_bits(), back.score(row).unwrap().to_bits());
        }
    }

    #[test]
    fn preorder_layout() {
        let tree = Node::split(0, 0.5, Node::leaf(0.0), Node::split(1, 2.0, Node::leaf(0.25), Node::leaf(1.0)));
        let m = RandomForestModel::from_trees(vec![tree], 2, ForestParams::default(), 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(
            v["trees"][0],
            serde_json::json!([
                {"feature": 0, "threshold": 0.5},
                {"leaf": 0.0},
                {"feature": 1, "threshold": 2.0},
                {"leaf": 0.25},
                {"leaf": 1.0}
            ])
        );
        assert!(RandomForestModel::<f64>::from_json(&m.to_json().unwrap().replace("\"version\":1", "\"version\":9")).is_err());
    }

    #[test]
    fn f32_forest() {
        let ds64 = separable(90, 8);
        let ds: Dataset<f32> = Dataset::new(
            ds64.feature_names().to_vec(),
            ds64.rows().map(|r| r.iter().map(|&v| v as f32).collect()).collect(),
            ds64.labels().to_vec(),
        )
        .unwrap();
        let m = fit_forest(&ds, &ForestParams { n_trees: 10, ..ForestParams::default() }, 0).unwrap();
        let back = RandomForestModel::<f32>::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn chosen_split_never_raises_impurity(seed in any::<u64>(), n in 4usize..80, min_leaf in 1usize..4) {
            let ds = noisy(n, seed);
            let rows: Vec<usize> = (0..n).collect();
            if let Some(s) = best_split(&ds, &rows, &[0, 1, 2, 3], min_leaf) {
                prop_assert!(s.impurity <= s.parent_impurity + 1e-12);
            }
        }

        #[test]
        fn invariant_under_positive_affine_rescaling(seed in 0u64..500, scale_pow in -3i32..4, shift in -8i32..8) {
            let ds = noisy(80, seed);
            let scale = 2f64.powi(scale_pow);
            let shift = shift as f64 * 0.25;
            let transform = |d: &Dataset<f64>| {
                Dataset::new(
                    d.feature_names().to_vec(),
                    d.rows().map(|r| r.iter().enumerate().map(|(j, &v)| if j == 1 { v * scale + shift } else { v }).collect()).collect(),
                    d.labels().to_vec(),
                ).unwrap()
            };
            let params = ForestParams { n_trees: 5, ..ForestParams::default() };
            let a = fit_forest(&ds, &params, seed).unwrap();
            let b = fit_forest(&transform(&ds), &params, seed).unwrap();
            let probe = noisy(30, seed + 1000);
            let probe_t = transform(&probe);
            for i in 0..probe.len() {
                prop_assert_eq!(a.score(probe.row(i)).unwrap(), b.score(probe_t.row(i)).unwrap());
            }
        }
    }
}
