//! Least-squares gradient boosting (LSBoost).

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::tree::{fit_with_sorted, SortedColumns, TreeNode, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_cycles: usize,
    pub learn_rate: f64,
    pub tree: TreeParams,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_cycles: 100,
            learn_rate: 0.1,
            tree: TreeParams::default(),
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_cycles == 0 {
            return Err(Error::BadParameter("n_cycles must be at least 1".into()));
        }
        if !(self.learn_rate > 0.0 && self.learn_rate <= 1.0) {
            return Err(Error::BadParameter(format!(
                "learn_rate {} is not in (0, 1]",
                self.learn_rate
            )));
        }
        self.tree.validate()
    }
}

/// Additive tree ensemble: `initial + learn_rate * sum(tree_m(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostEnsemble {
    pub initial_prediction: f64,
    pub trees: Vec<TreeNode>,
    pub learn_rate: f64,
    pub n_cycles: usize,
    pub n_features: usize,
    /// Training RMSE after each stage; entry 0 is the constant model.
    pub loss_trace: Vec<f64>,
}

impl BoostEnsemble {
    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.initial_prediction + self.learn_rate * sum
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::ColumnMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok(x.rows().into_iter().map(|r| self.predict_row(r)).collect())
    }
}

fn rmse(residuals: &Array1<f64>) -> f64 {
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

/// Fits `params.n_cycles` trees, each to the residuals left by the previous
/// stages, shrinking every tree's contribution by `learn_rate`.
pub fn lsboost_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, params: BoostParams) -> Result<BoostEnsemble> {
    params.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows vs {} responses", x.nrows(), y.len())));
    }
    let need = (2 * params.tree.min_leaf).max(2);
    if x.nrows() < need {
        return Err(Error::InsufficientSamples { got: x.nrows(), need });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::BadParameter("response contains non-finite values".into()));
    }

    let initial_prediction = y.sum() / y.len() as f64;
    let mut residuals: Array1<f64> = y.mapv(|v| v - initial_prediction);
    let sorted = SortedColumns::new(x);
    let mut trees = Vec::with_capacity(params.n_cycles);
    let mut loss_trace = Vec::with_capacity(params.n_cycles + 1);
    loss_trace.push(rmse(&residuals));

    for _ in 0..params.n_cycles {
        let tree = fit_with_sorted(x, residuals.view(), &sorted, params.tree);
        for (i, r) in residuals.iter_mut().enumerate() {
            *r -= params.learn_rate * tree.predict(x.row(i));
        }
        loss_trace.push(rmse(&residuals));
        trees.push(tree);
    }

    Ok(BoostEnsemble {
        initial_prediction,
        trees,
        learn_rate: params.learn_rate,
        n_cycles: params.n_cycles,
        n_features: x.ncols(),
        loss_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    #[test]
    fn constant_response() {
        let x = Array2::from_shape_fn((20, 3), |(i, j)| (i + j) as f64);
        let y = Array1::from_elem(20, 4.2);
        let ens = lsboost_fit(x.view(), y.view(), BoostParams::default()).unwrap();
        assert_eq!(ens.trees.len(), 100);
        for t in &ens.trees {
            let TreeNode::Leaf { value } = t else {
                panic!("constant response should not split");
            };
            assert!(value.abs() < 1e-12);
        }
        for p in ens.predict(x.view()).unwrap() {
            assert!((p - 4.2).abs() < 1e-12);
        }
    }

    #[test]
    fn single_unshrunk_deep_tree_memorizes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((15, 2), |_| rng.random::<f64>());
        let y = Array1::from_shape_fn(15, |_| rng.random_range(0.0..10.0));
        let params = BoostParams {
            n_cycles: 1,
            learn_rate: 1.0,
            tree: TreeParams {
                max_depth: None,
                min_leaf: 1,
            },
        };
        let ens = lsboost_fit(x.view(), y.view(), params).unwrap();
        // residual table: y_i - mean(y) must be reproduced by the single tree
        let mean = y.sum() / 15.0;
        for i in 0..15 {
            assert!((ens.trees[0].predict(x.row(i)) - (y[i] - mean)).abs() < 1e-9);
            assert!((ens.predict_row(x.row(i)) - y[i]).abs() < 1e-9);
        }
        assert!(ens.loss_trace[1] < 1e-9);
    }

    #[test]
    fn loss_trace_shrinks_on_smooth_target() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Array2<f64> = Array2::from_shape_fn((120, 4), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(120, |i| {
            (3.0 * x[[i, 0]]).sin() + x[[i, 1]] * x[[i, 1]] + 0.1 * rng.sample::<f64, _>(StandardNormal)
        });
        let ens = lsboost_fit(x.view(), y.view(), BoostParams::default()).unwrap();
        assert_eq!(ens.loss_trace.len(), 101);
        assert!(ens.loss_trace[100] <= ens.loss_trace[1]);
        for w in ens.loss_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn prediction_decomposes_over_trees() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((40, 3), |_| rng.random::<f64>());
        let y = Array1::from_shape_fn(40, |i| x[[i, 0]] * 5.0 + x[[i, 2]]);
        let ens = lsboost_fit(x.view(), y.view(), BoostParams { n_cycles: 20, ..Default::default() }).unwrap();
        for i in 0..40 {
            let sum: f64 = ens.trees.iter().map(|t| t.predict(x.row(i))).sum();
            let lhs = ens.predict_row(x.row(i)) - ens.initial_prediction;
            assert!((lhs - ens.learn_rate * sum).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = Array2::zeros((1, 3));
        let y = Array1::zeros(1);
        assert!(matches!(
            lsboost_fit(x.view(), y.view(), BoostParams::default()).unwrap_err(),
            Error::InsufficientSamples { got: 1, .. }
        ));
        let x = Array2::zeros((20, 3));
        let y = Array1::zeros(20);
        let bad = BoostParams {
            learn_rate: 0.0,
            ..Default::default()
        };
        assert!(matches!(lsboost_fit(x.view(), y.view(), bad).unwrap_err(), Error::BadParameter(_)));
    }
}
