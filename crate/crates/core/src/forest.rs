//! CART trees on Gini impurity and a bagged random forest over them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tfidf::SparseVector;

/// Read access to one feature row.
pub trait FeatureRow<T: Scalar> {
    fn value(&self, feature: usize) -> T;
}

impl<T: Scalar> FeatureRow<T> for [T] {
    fn value(&self, feature: usize) -> T {
        self.get(feature).copied().unwrap_or_else(T::zero)
    }
}

impl<T: Scalar> FeatureRow<T> for Vec<T> {
    fn value(&self, feature: usize) -> T {
        self.as_slice().value(feature)
    }
}

impl<T: Scalar> FeatureRow<T> for SparseVector<T> {
    fn value(&self, feature: usize) -> T {
        self.get(feature)
    }
}

/// `1 - sum(p_i^2)` over (negative, positive) counts.
pub fn gini_impurity<T: Scalar>(negatives: usize, positives: usize) -> Result<T> {
    let n = negatives + positives;
    if n == 0 {
        return Err(Error::DegenerateNode);
    }
    let n = T::of_usize(n);
    let p0 = T::of_usize(negatives) / n;
    let p1 = T::of_usize(positives) / n;
    Ok(T::one() - (p0 * p0 + p1 * p1))
}

fn gini_unchecked<T: Scalar>(negatives: usize, positives: usize) -> T {
    gini_impurity(negatives, positives).unwrap_or_else(|_| T::zero())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "snake_case")]
pub enum Node<T: Scalar> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        positive_fraction: T,
    },
}

/// Nodes in an arena; the root is node 0. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tree<T: Scalar> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn leaf_for<R: FeatureRow<T> + ?Sized>(&self, x: &R) -> usize {
        let mut at = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[at]
        {
            at = if x.value(*feature) <= *threshold {
                *left
            } else {
                *right
            };
        }
        at
    }

    pub fn predict<R: FeatureRow<T> + ?Sized>(&self, x: &R) -> T {
        match &self.nodes[self.leaf_for(x)] {
            Node::Leaf { positive_fraction } => *positive_fraction,
            Node::Split { .. } => unreachable!("leaf_for stops at leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T: Scalar>(tree: &Tree<T>, at: usize) -> usize {
            match &tree.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(tree, *left).max(walk(tree, *right)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until purity or `min_samples_split`.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features drawn per node; `None` means `ceil(sqrt(n_features))`.
    pub feature_subsample: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            feature_subsample: None,
        }
    }
}

impl ForestParams {
    pub fn resolved_subsample(&self, n_features: usize) -> usize {
        self.feature_subsample
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig("min_samples_split must be at least 2".into()));
        }
        if self.feature_subsample == Some(0) {
            return Err(Error::InvalidConfig("feature_subsample must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate<T: Scalar> {
    pub feature: usize,
    pub threshold: T,
    pub gain: T,
}

impl<T: Scalar> SplitCandidate<T> {
    fn beats(&self, other: &SplitCandidate<T>) -> bool {
        self.gain > other.gain
            || (self.gain == other.gain
                && (self.feature < other.feature
                    || (self.feature == other.feature && self.threshold < other.threshold)))
    }
}

fn class_counts(y: &[u8], samples: &[usize]) -> (usize, usize) {
    let pos = samples.iter().filter(|&&i| y[i] == 1).count();
    (samples.len() - pos, pos)
}

/// Best Gini-gain split of `samples` over `features`. Thresholds are
/// midpoints of consecutive distinct values; ties go to the lowest feature
/// index, then the lowest threshold.
pub fn best_split<T, R>(
    x: &[R],
    y: &[u8],
    samples: &[usize],
    features: &[usize],
) -> Option<SplitCandidate<T>>
where
    T: Scalar,
    R: FeatureRow<T>,
{
    let (neg, pos) = class_counts(y, samples);
    let n = samples.len();
    let parent = gini_unchecked::<T>(neg, pos);
    let n_t = T::of_usize(n);
    let two = T::one() + T::one();
    let mut best: Option<SplitCandidate<T>> = None;
    let mut column: Vec<(T, u8)> = Vec::with_capacity(n);
    for &feature in features {
        column.clear();
        column.extend(samples.iter().map(|&i| (x[i].value(feature), y[i])));
        column.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let (mut left_neg, mut left_pos) = (0usize, 0usize);
        for k in 0..n.saturating_sub(1) {
            if column[k].1 == 1 {
                left_pos += 1;
            } else {
                left_neg += 1;
            }
            let (here, next) = (column[k].0, column[k + 1].0);
            if here == next {
                continue;
            }
            let n_left = k + 1;
            let n_right = n - n_left;
            let weighted = T::of_usize(n_left) / n_t * gini_unchecked::<T>(left_neg, left_pos)
                + T::of_usize(n_right) / n_t
                    * gini_unchecked::<T>(neg - left_neg, pos - left_pos);
            let candidate = SplitCandidate {
                feature,
                threshold: (here + next) / two,
                gain: parent - weighted,
            };
            if best.as_ref().map_or(true, |b| candidate.beats(b)) {
                best = Some(candidate);
            }
        }
    }
    best
}

struct Builder<'a, T: Scalar, R> {
    x: &'a [R],
    y: &'a [u8],
    params: ForestParams,
    n_features: usize,
    subsample: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node<T>>,
}

impl<'a, T: Scalar, R: FeatureRow<T>> Builder<'a, T, R> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let (neg, pos) = class_counts(self.y, &samples);
        let fraction = T::of_usize(pos) / T::of_usize(samples.len().max(1));
        self.nodes.push(Node::Leaf {
            positive_fraction: fraction,
        });
        let stop = neg == 0
            || pos == 0
            || samples.len() < self.params.min_samples_split
            || self.params.max_depth.is_some_and(|d| depth >= d);
        if stop {
            return id;
        }
        // Draw features in a seeded order; keep drawing past the subsample
        // size only while no valid split has been found.
        let mut order: Vec<usize> = (0..self.n_features).collect();
        order.shuffle(&mut self.rng);
        let mut found = None;
        for chunk in order.chunks(self.subsample) {
            if let Some(split) = best_split(self.x, self.y, &samples, chunk) {
                found = Some(split);
                break;
            }
        }
        let Some(split) = found else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| self.x[i].value(split.feature) <= split.threshold);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows one tree on the given sample indices (duplicates allowed).
pub fn build_tree<T, R>(
    x: &[R],
    y: &[u8],
    samples: Vec<usize>,
    n_features: usize,
    params: &ForestParams,
    seed: u64,
) -> Tree<T>
where
    T: Scalar,
    R: FeatureRow<T>,
{
    let mut builder = Builder {
        x,
        y,
        params: *params,
        n_features,
        subsample: params.resolved_subsample(n_features),
        rng: ChaCha8Rng::seed_from_u64(seed),
        nodes: Vec::new(),
    };
    builder.grow(samples, 0);
    Tree {
        nodes: builder.nodes,
    }
}

fn tree_seed(master: u64, index: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Forest<T: Scalar> {
    pub trees: Vec<Tree<T>>,
    pub n_features: usize,
    pub feature_subsample: usize,
    pub seed: u64,
}

impl<T: Scalar> Forest<T> {
    /// Bags `params.n_trees` trees, each on a bootstrap sample drawn from a
    /// seed derived from `seed` and the tree index.
    pub fn train<R>(
        x: &[R],
        y: &[u8],
        n_features: usize,
        params: &ForestParams,
        seed: u64,
    ) -> Result<Self>
    where
        R: FeatureRow<T> + Sync,
    {
        params.validate()?;
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(x.len(), y.len()));
        }
        if x.len() < 2 {
            return Err(Error::InvalidConfig("need at least two training rows".into()));
        }
        let positives = y.iter().filter(|&&l| l == 1).count();
        if positives == 0 || positives == y.len() {
            return Err(Error::SingleClass);
        }
        let n = x.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let seed = tree_seed(seed, t);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                build_tree(x, y, bootstrap, n_features, params, rng.gen())
            })
            .collect();
        Ok(Forest {
            trees,
            n_features,
            feature_subsample: params.resolved_subsample(n_features),
            seed,
        })
    }

    /// Mean leaf positive fraction across trees.
    pub fn predict<R: FeatureRow<T> + ?Sized>(&self, x: &R) -> T {
        let total: T = self.trees.iter().map(|t| t.predict(x)).sum();
        total / T::of_usize(self.trees.len().max(1))
    }
}
