//! Least-squares CART regression trees used as the boosting base learner.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(3),
            min_leaf: 5,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::BadParameter("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

/// Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Reduction in training SSE achieved by this split.
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: ArrayView1<f64>) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    /// Visits every split node in pre-order.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, f64, f64)) {
        if let TreeNode::Split {
            feature,
            threshold,
            gain,
            left,
            right,
        } = self
        {
            f(*feature, *threshold, *gain);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }
}

/// Column-wise sample orderings, computed once and shared by every tree
/// grown on the same design matrix.
pub(crate) struct SortedColumns {
    order: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub(crate) fn new(x: ArrayView2<f64>) -> Self {
        let order = (0..x.ncols())
            .into_par_iter()
            .map(|j| {
                let col = x.column(j);
                let mut idx: Vec<u32> = (0..x.nrows() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        SortedColumns { order }
    }
}

/// Relative (to the node's SSE) gain difference below which two candidate
/// splits are considered equally good.
const TIE_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    residuals: ArrayView1<'a, f64>,
    sorted: &'a SortedColumns,
    params: TreeParams,
}

impl Grower<'_> {
    fn leaf(&self, samples: &[usize]) -> TreeNode {
        let sum: f64 = samples.iter().map(|&i| self.residuals[i]).sum();
        TreeNode::Leaf {
            value: sum / samples.len() as f64,
        }
    }

    fn grow(&self, samples: Vec<usize>, in_node: &mut [bool], depth: usize) -> TreeNode {
        let n = samples.len();
        if self.params.max_depth.is_some_and(|d| depth >= d) || n < 2 * self.params.min_leaf {
            return self.leaf(&samples);
        }
        let mean = samples.iter().map(|&i| self.residuals[i]).sum::<f64>() / n as f64;
        let scale = samples.iter().fold(1.0f64, |m, &i| m.max(self.residuals[i].abs()));
        if samples.iter().all(|&i| (self.residuals[i] - mean).abs() <= 1e-12 * scale) {
            return self.leaf(&samples);
        }

        // gains closer than this count as ties: partitions that are identical
        // up to summation order must not be told apart by rounding
        let tie = TIE_RTOL * samples.iter().map(|&i| (self.residuals[i] - mean).powi(2)).sum::<f64>();
        for &i in &samples {
            in_node[i] = true;
        }
        let best = self.best_split(n, mean, tie, in_node);
        for &i in &samples {
            in_node[i] = false;
        }

        let Some(best) = best else {
            return self.leaf(&samples);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.x[[i, best.feature]] <= best.threshold);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            gain: best.gain,
            left: Box::new(self.grow(left, in_node, depth + 1)),
            right: Box::new(self.grow(right, in_node, depth + 1)),
        }
    }

    fn best_split(&self, n: usize, mean: f64, tie: f64, in_node: &[bool]) -> Option<Candidate> {
        let per_feature: Vec<Option<Candidate>> = (0..self.x.ncols())
            .into_par_iter()
            .map(|j| self.best_split_on(j, n, mean, tie, in_node))
            .collect();
        // sequential reduction keeps the lowest feature index on ties
        per_feature.into_iter().flatten().fold(None, |best: Option<Candidate>, c| match best {
            Some(b) if c.gain <= b.gain + tie => Some(b),
            _ => Some(c),
        })
    }

    fn best_split_on(&self, feature: usize, n: usize, mean: f64, tie: f64, in_node: &[bool]) -> Option<Candidate> {
        let col = self.x.column(feature);
        let min_leaf = self.params.min_leaf;
        let nf = n as f64;
        let mut best: Option<Candidate> = None;
        let mut left_sum = 0.0;
        let mut left_n = 0usize;
        let mut prev: Option<usize> = None;
        for &s in &self.sorted.order[feature] {
            let s = s as usize;
            if !in_node[s] {
                continue;
            }
            if let Some(p) = prev {
                let (lo, hi) = (col[p], col[s]);
                if hi > lo && left_n >= min_leaf && n - left_n >= min_leaf {
                    let ln = left_n as f64;
                    // with centred residuals the parent sum is zero, so the
                    // SSE reduction collapses to sL^2 * n / (nL * nR)
                    let gain = left_sum * left_sum * nf / (ln * (nf - ln));
                    if gain > tie && best.is_none_or(|b| gain > b.gain + tie) {
                        let mut threshold = lo + (hi - lo) / 2.0;
                        if threshold >= hi {
                            threshold = lo;
                        }
                        best = Some(Candidate {
                            feature,
                            threshold,
                            gain,
                        });
                    }
                }
            }
            left_sum += self.residuals[s] - mean;
            left_n += 1;
            prev = Some(s);
        }
        best
    }
}

pub(crate) fn fit_with_sorted(
    x: ArrayView2<f64>,
    residuals: ArrayView1<f64>,
    sorted: &SortedColumns,
    params: TreeParams,
) -> TreeNode {
    let grower = Grower {
        x,
        residuals,
        sorted,
        params,
    };
    let mut in_node = vec![false; x.nrows()];
    grower.grow((0..x.nrows()).collect(), &mut in_node, 0)
}

/// Grows one least-squares regression tree on `residuals`.
///
/// Each split maximizes the reduction in sum of squared errors over every
/// feature and every midpoint between consecutive distinct feature values,
/// subject to both children holding at least `min_leaf` samples. Leaves
/// predict the mean residual of their samples.
pub fn fit_regression_tree(x: ArrayView2<f64>, residuals: ArrayView1<f64>, params: TreeParams) -> Result<TreeNode> {
    params.validate()?;
    if x.nrows() != residuals.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows vs {} residuals",
            x.nrows(),
            residuals.len()
        )));
    }
    let need = (2 * params.min_leaf).max(1);
    if x.nrows() < need {
        return Err(Error::InsufficientSamples { got: x.nrows(), need });
    }
    let sorted = SortedColumns::new(x);
    Ok(fit_with_sorted(x, residuals, &sorted, params))
}
