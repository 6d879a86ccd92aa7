//! Random forest of exact-CART classification trees.
//!
//! Each tree is grown on a bootstrap resample by recursive best-Gini splits
//! over a random subset of features. Split thresholds are midpoints between
//! consecutive distinct sorted values; samples with `x <= threshold` go left.
//! Tree `t` draws from its own generator seeded with `seed + t`, so trees can
//! be grown in parallel without changing the result.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::volume::ClassId;

/// Gini impurity `1 - sum p_c^2` of a class histogram.
pub fn gini(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = f64::from(n);
    1.0 - counts.iter().map(|&c| (f64::from(c) / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until purity.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidate features per node; `None` means `floor(sqrt(n_features))`.
    pub features_per_split: Option<usize>,
    /// Bootstrap sample size as a fraction of the rows; `None` uses every row once.
    pub bootstrap: Option<f64>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: Some(16),
            min_samples_split: 2,
            features_per_split: None,
            bootstrap: Some(1.0),
        }
    }
}

impl ForestParams {
    /// One unpruned tree on all rows considering every feature at every node.
    pub fn single_unconstrained_tree() -> Self {
        ForestParams {
            n_trees: 1,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: Some(usize::MAX),
            bootstrap: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("forest: {m}")));
        if self.n_trees == 0 {
            return bad("n_trees must be >= 1");
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be >= 2");
        }
        if self.features_per_split == Some(0) {
            return bad("features_per_split must be >= 1");
        }
        if let Some(f) = self.bootstrap {
            if !(f > 0.0 && f <= 1.0) {
                return bad("bootstrap fraction must lie in (0, 1]");
            }
        }
        Ok(())
    }

    fn candidates(&self, n_features: usize) -> usize {
        match self.features_per_split {
            Some(m) => m.min(n_features),
            None => ((n_features as f64).sqrt().floor() as usize).max(1),
        }
    }
}

/// Tree node as stored in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Training samples per class; index 0 is class 1.
        counts: Vec<u32>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

/// Array form of a tree. Children of a split node `i` sit at `next` and
/// `next + 1`. A leaf points at itself with an infinite threshold, so walking
/// `depth` steps from the root always lands on a leaf without branching.
#[derive(Debug, Clone, Copy)]
struct FlatNode {
    threshold: f64,
    feature: u32,
    next: u32,
}

#[derive(Debug, Clone)]
struct FlatTree {
    nodes: Vec<FlatNode>,
    /// Offset into `probs` for every node (meaningful for leaves only).
    leaf_offset: Vec<u32>,
    /// Normalized leaf histograms, `n_classes` per leaf.
    probs: Vec<f64>,
    depth: usize,
}

impl FlatTree {
    fn compile(root: &TreeNode, k: usize) -> Self {
        let blank = FlatNode {
            threshold: f64::INFINITY,
            feature: 0,
            next: 0,
        };
        let mut nodes = vec![blank];
        let mut leaf_offset = vec![0];
        let mut probs = Vec::new();
        let mut queue = std::collections::VecDeque::from([(root, 0usize)]);
        while let Some((node, at)) = queue.pop_front() {
            match node {
                TreeNode::Leaf { counts } => {
                    let total: u32 = counts.iter().sum();
                    leaf_offset[at] = probs.len() as u32;
                    probs.extend((0..k).map(|c| {
                        f64::from(counts.get(c).copied().unwrap_or(0)) / f64::from(total.max(1))
                    }));
                    nodes[at] = FlatNode {
                        threshold: f64::INFINITY,
                        feature: 0,
                        next: at as u32,
                    };
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let child = nodes.len();
                    nodes.extend([blank, blank]);
                    leaf_offset.extend([0, 0]);
                    nodes[at] = FlatNode {
                        threshold: *threshold,
                        feature: *feature as u32,
                        next: child as u32,
                    };
                    queue.push_back((left, child));
                    queue.push_back((right, child + 1));
                }
            }
        }
        FlatTree {
            nodes,
            leaf_offset,
            probs,
            depth: root.depth(),
        }
    }

    #[inline]
    fn step(&self, at: usize, row: &[f64]) -> usize {
        let n = self.nodes[at];
        n.next as usize + usize::from(row[n.feature as usize] > n.threshold)
    }

    fn leaf_probs(&self, node: usize, k: usize) -> &[f64] {
        let o = self.leaf_offset[node] as usize;
        &self.probs[o..o + k]
    }
}

/// Rows walked through a tree together.
const BLOCK: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ForestRepr {
    params: ForestParams,
    seed: u64,
    n_features: usize,
    n_classes: usize,
    trees: Vec<TreeNode>,
}

/// Trained forest. Immutable; safe to share across prediction threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "ForestRepr", into = "ForestRepr")]
pub struct RandomForestModel {
    repr: ForestRepr,
    compiled: Vec<FlatTree>,
}

impl From<ForestRepr> for RandomForestModel {
    fn from(repr: ForestRepr) -> Self {
        let compiled = repr
            .trees
            .iter()
            .map(|t| FlatTree::compile(t, repr.n_classes))
            .collect();
        RandomForestModel { repr, compiled }
    }
}

impl From<RandomForestModel> for ForestRepr {
    fn from(m: RandomForestModel) -> Self {
        m.repr
    }
}

impl PartialEq for RandomForestModel {
    fn eq(&self, other: &Self) -> bool {
        self.repr.params == other.repr.params
            && self.repr.seed == other.repr.seed
            && self.repr.n_features == other.repr.n_features
            && self.repr.n_classes == other.repr.n_classes
            && self.repr.trees == other.repr.trees
    }
}

struct Grower<'a> {
    values: &'a [f64],
    n_features: usize,
    /// 0-based class per row.
    classes: Vec<usize>,
    k: usize,
    params: &'a ForestParams,
    mtry: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn histogram(&self, idx: &[usize]) -> Vec<u32> {
        let mut h = vec![0u32; self.k];
        for &i in idx {
            h[self.classes[i]] += 1;
        }
        h
    }

    /// Best threshold on one feature by the Gini proxy
    /// `sum_c l_c^2 / n_l + sum_c r_c^2 / n_r` (larger is better).
    fn best_on_feature(
        &self,
        idx: &[usize],
        feature: usize,
        parent: &[u32],
        pairs: &mut Vec<(f64, usize)>,
    ) -> Option<Split> {
        pairs.clear();
        pairs.extend(
            idx.iter()
                .map(|&i| (self.values[i * self.n_features + feature], self.classes[i])),
        );
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[pairs.len() - 1].0 {
            return None;
        }
        let n = pairs.len();
        let mut left = vec![0u64; self.k];
        let mut right: Vec<u64> = parent.iter().map(|&c| u64::from(c)).collect();
        let mut sq_left = 0u64;
        let mut sq_right: u64 = right.iter().map(|c| c * c).sum();
        let mut best: Option<Split> = None;
        for i in 0..n - 1 {
            let c = pairs[i].1;
            sq_left += 2 * left[c] + 1;
            left[c] += 1;
            sq_right -= 2 * right[c] - 1;
            right[c] -= 1;
            let (a, b) = (pairs[i].0, pairs[i + 1].0);
            if a == b {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = (n - i - 1) as f64;
            let score = sq_left as f64 / nl + sq_right as f64 / nr;
            if best.as_ref().is_none_or(|s| score > s.score) {
                let mid = 0.5 * (a + b);
                let threshold = if mid < b { mid } else { a };
                best = Some(Split {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        best
    }

    fn grow(
        &self,
        idx: &mut [usize],
        depth: usize,
        rng: &mut ChaCha8Rng,
        order: &mut Vec<usize>,
        pairs: &mut Vec<(f64, usize)>,
    ) -> TreeNode {
        let counts = self.histogram(idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || idx.len() < self.params.min_samples_split {
            return TreeNode::Leaf { counts };
        }

        order.clear();
        order.extend(0..self.n_features);
        order.shuffle(rng);
        let mut best: Option<Split> = None;
        // Keep looking past `mtry` features only while no valid split exists.
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some(s) = self.best_on_feature(idx, f, &counts, pairs) {
                if best.as_ref().is_none_or(|b| s.score > b.score) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            return TreeNode::Leaf { counts };
        };

        let mut boundary = 0;
        for j in 0..idx.len() {
            if self.values[idx[j] * self.n_features + split.feature] <= split.threshold {
                idx.swap(j, boundary);
                boundary += 1;
            }
        }
        let (l, r) = idx.split_at_mut(boundary);
        let left = self.grow(l, depth + 1, rng, order, pairs);
        let right = self.grow(r, depth + 1, rng, order, pairs);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

impl RandomForestModel {
    pub fn fit(data: &Dataset, params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let labels = data.require_labels()?;
        if data.is_empty() {
            return Err(Error::Empty("random forest needs at least one row".into()));
        }
        let n = data.n_rows();
        let grower = Grower {
            values: data.values(),
            n_features: data.n_features(),
            classes: labels.iter().map(|&l| usize::from(l) - 1).collect(),
            k: data.n_classes(),
            params,
            mtry: params.candidates(data.n_features()),
        };
        let trees: Vec<TreeNode> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
                let mut idx: Vec<usize> = match params.bootstrap {
                    Some(f) => {
                        let m = ((f * n as f64).round() as usize).max(1);
                        (0..m).map(|_| rng.random_range(0..n)).collect()
                    }
                    None => (0..n).collect(),
                };
                let mut order = Vec::with_capacity(grower.n_features);
                let mut pairs = Vec::with_capacity(idx.len());
                grower.grow(&mut idx, 0, &mut rng, &mut order, &mut pairs)
            })
            .collect();
        Ok(ForestRepr {
            params: params.clone(),
            seed,
            n_features: data.n_features(),
            n_classes: grower.k,
            trees,
        }
        .into())
    }

    pub fn n_features(&self) -> usize {
        self.repr.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.repr.n_classes
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.repr.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.repr.params
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: row.len(),
            });
        }
        Ok(())
    }

    /// Average of the per-tree normalized leaf histograms, written into `out`.
    pub fn predict_proba_into(&self, row: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_row(row)?;
        self.predict_proba_rows(row, out)
    }

    /// Distributions for row-major `values`, `n_classes` entries per row.
    pub fn predict_proba_rows(&self, values: &[f64], out: &mut [f64]) -> Result<()> {
        let nf = self.n_features();
        let k = self.n_classes();
        if nf == 0 || values.len() % nf != 0 {
            return Err(Error::DimensionMismatch {
                expected: nf,
                actual: values.len(),
            });
        }
        let n = values.len() / nf;
        let out = &mut out[..n * k];
        out.iter_mut().for_each(|p| *p = 0.0);
        let mut at = [0usize; BLOCK];
        for (rows, probs) in values.chunks(BLOCK * nf).zip(out.chunks_mut(BLOCK * k)) {
            let m = rows.len() / nf;
            for tree in &self.compiled {
                at[..m].iter_mut().for_each(|a| *a = 0);
                for _ in 0..tree.depth {
                    for (r, a) in at[..m].iter_mut().enumerate() {
                        *a = tree.step(*a, &rows[r * nf..(r + 1) * nf]);
                    }
                }
                for (r, &a) in at[..m].iter().enumerate() {
                    for (o, &p) in probs[r * k..(r + 1) * k].iter_mut().zip(tree.leaf_probs(a, k)) {
                        *o += p;
                    }
                }
            }
        }
        let trees = self.compiled.len() as f64;
        out.iter_mut().for_each(|p| *p /= trees);
        Ok(())
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_classes()];
        self.predict_proba_into(row, &mut out)?;
        Ok(out)
    }

    /// Most probable class; ties go to the lowest id.
    pub fn predict(&self, row: &[f64]) -> Result<ClassId> {
        Ok(argmax(&self.predict_proba(row)?))
    }
}

/// 1-based index of the largest entry, first one on ties.
pub(crate) fn argmax(scores: &[f64]) -> ClassId {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    (best + 1) as ClassId
}
