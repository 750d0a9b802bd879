//! Wavelength selection from a boosted regression-tree ensemble.
//!
//! An LSBoost ensemble is fitted on the normalized spectra; each wavelength
//! is scored by the total training-SSE reduction of the splits made on it,
//! and the selection policy turns those scores into a feature subset.

mod boost;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

pub use boost::{lsboost_fit, BoostEnsemble, BoostParams};
pub use tree::{fit_regression_tree, TreeNode, TreeParams};

use crate::error::{Error, Result};
use crate::ingest::WavelengthAxis;

/// Non-negative importance score per wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector(Vec<f64>);

impl ImportanceVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::BadParameter("importances must be finite and non-negative".into()));
        }
        Ok(ImportanceVector(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.0.iter().filter(|&&s| s > 0.0).count()
    }
}

fn accumulate_gains(
    node: &TreeNode,
    x: ArrayView2<f64>,
    residuals: ArrayView1<f64>,
    rows: Vec<usize>,
    scores: &mut [f64],
) {
    let TreeNode::Split {
        feature,
        threshold,
        left,
        right,
        ..
    } = node
    else {
        return;
    };
    let sse = |idx: &[usize]| -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let m = idx.iter().map(|&i| residuals[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (residuals[i] - m).powi(2)).sum()
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[[i, *feature]] <= *threshold);
    let reduction = sse(&rows) - sse(&l) - sse(&r);
    scores[*feature] += reduction.max(0.0);
    accumulate_gains(left, x, residuals, l, scores);
    accumulate_gains(right, x, residuals, r, scores);
}

/// Per-wavelength importance: the summed reduction in squared error of every
/// split on that wavelength, replayed stage by stage on `(x, y)`.
///
/// On the training data this equals the sum of the gains stored in the trees.
pub fn feature_importance(ens: &BoostEnsemble, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<ImportanceVector> {
    if x.ncols() != ens.n_features {
        return Err(Error::ColumnMismatch {
            expected: ens.n_features,
            got: x.ncols(),
        });
    }
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows vs {} responses", x.nrows(), y.len())));
    }
    let mut scores = vec![0.0; ens.n_features];
    let mut residuals: Array1<f64> = y.mapv(|v| v - ens.initial_prediction);
    for tree in &ens.trees {
        accumulate_gains(tree, x, residuals.view(), (0..x.nrows()).collect(), &mut scores);
        for (i, r) in residuals.iter_mut().enumerate() {
            *r -= ens.learn_rate * tree.predict(x.row(i));
        }
    }
    // a split whose replayed reduction rounds to zero still counts as used
    for tree in &ens.trees {
        tree.for_each_split(&mut |f, _, _| {
            if scores[f] == 0.0 {
                scores[f] = f64::MIN_POSITIVE;
            }
        });
    }
    ImportanceVector::new(scores)
}

/// Rule turning importances into a feature subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Every wavelength with positive importance.
    Positive,
    /// The `k` most important wavelengths (ties go to the lower index).
    TopK(usize),
    /// Positive wavelengths whose importance exceeds the mean positive importance.
    AboveMeanPositive,
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionPolicy::Positive => f.write_str("positive"),
            SelectionPolicy::TopK(k) => write!(f, "topk:{k}"),
            SelectionPolicy::AboveMeanPositive => f.write_str("above_mean"),
        }
    }
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(k) = s.strip_prefix("topk:").or_else(|| s.strip_prefix("topk=")) {
            let k: usize = k
                .parse()
                .map_err(|_| Error::Config(format!("bad top-k count in {s:?}")))?;
            if k == 0 {
                return Err(Error::Config("top-k count must be at least 1".into()));
            }
            return Ok(SelectionPolicy::TopK(k));
        }
        match s.as_str() {
            "positive" => Ok(SelectionPolicy::Positive),
            "above_mean" | "above_mean_positive" => Ok(SelectionPolicy::AboveMeanPositive),
            other => Err(Error::Config(format!("unknown selection policy {other:?}"))),
        }
    }
}

/// Selected wavelength indices (ascending) with their axis positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSubset {
    indices: Vec<usize>,
    axis_values: Vec<f64>,
    /// Width of the full spectra the indices refer to.
    source_len: usize,
}

impl FeatureSubset {
    pub fn new(indices: Vec<usize>, axis: &WavelengthAxis) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySelection);
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadParameter("subset indices must be strictly increasing".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= axis.len() {
                return Err(Error::ColumnMismatch {
                    expected: axis.len(),
                    got: last + 1,
                });
            }
        }
        let axis_values = indices.iter().map(|&i| axis.values()[i]).collect();
        Ok(FeatureSubset {
            indices,
            axis_values,
            source_len: axis.len(),
        })
    }

    /// Every column of `axis`.
    pub fn all(axis: &WavelengthAxis) -> Self {
        FeatureSubset {
            indices: (0..axis.len()).collect(),
            axis_values: axis.values().to_vec(),
            source_len: axis.len(),
        }
    }

    pub(crate) fn from_parts(indices: Vec<usize>, axis_values: Vec<f64>, source_len: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySelection);
        }
        if indices.len() != axis_values.len()
            || indices.windows(2).any(|w| w[0] >= w[1])
            || indices.last().is_some_and(|&l| l >= source_len)
        {
            return Err(Error::BadParameter("inconsistent feature subset".into()));
        }
        Ok(FeatureSubset {
            indices,
            axis_values,
            source_len,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn axis_values(&self) -> &[f64] {
        &self.axis_values
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn select_features(imp: &ImportanceVector, policy: SelectionPolicy, axis: &WavelengthAxis) -> Result<FeatureSubset> {
    if imp.len() != axis.len() {
        return Err(Error::ColumnMismatch {
            expected: axis.len(),
            got: imp.len(),
        });
    }
    let scores = imp.as_slice();
    let positive: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut chosen = match policy {
        SelectionPolicy::Positive => positive,
        SelectionPolicy::TopK(k) => {
            if k == 0 {
                return Err(Error::BadParameter("top-k count must be at least 1".into()));
            }
            let mut ranked = positive;
            ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            ranked.truncate(k);
            ranked
        }
        SelectionPolicy::AboveMeanPositive => {
            let mean = positive.iter().map(|&j| scores[j]).sum::<f64>() / positive.len() as f64;
            let above: Vec<usize> = positive.iter().copied().filter(|&j| scores[j] > mean).collect();
            if above.is_empty() {
                // all positive importances equal: nothing exceeds the mean
                positive
            } else {
                above
            }
        }
    };
    chosen.sort_unstable();
    FeatureSubset::new(chosen, axis)
}
