//! Monte-Carlo repartitioned k-fold cross-validation.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::pls_fit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvSpec {
    pub folds: usize,
    pub repartitions: usize,
    pub seed: u64,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            folds: 10,
            repartitions: 10,
            seed: 0,
        }
    }
}

impl CvSpec {
    pub fn validate(&self, rows: usize) -> Result<()> {
        if self.folds < 2 || self.folds > rows {
            return Err(Error::BadFoldCount { folds: self.folds, rows });
        }
        if self.repartitions == 0 {
            return Err(Error::BadCvSpec("at least one repartition is required".into()));
        }
        Ok(())
    }

    /// Smallest training-side row count any fold leaves.
    pub fn min_train_rows(&self, rows: usize) -> usize {
        rows - rows.div_ceil(self.folds)
    }
}

/// Fold id of each sample for one repartition.
///
/// The sample order is shuffled with a ChaCha8 stream keyed by
/// `(seed, repartition)`, then cut into `folds` contiguous blocks whose sizes
/// differ by at most one.
pub fn fold_assignment(rows: usize, cv: &CvSpec, repartition: usize) -> Result<Vec<usize>> {
    cv.validate(rows)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cv.seed);
    rng.set_stream(repartition as u64);
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut rng);

    let base = rows / cv.folds;
    let extra = rows % cv.folds;
    let mut fold_of = vec![0; rows];
    let mut pos = 0;
    for fold in 0..cv.folds {
        let size = base + usize::from(fold < extra);
        for &sample in &order[pos..pos + size] {
            fold_of[sample] = fold;
        }
        pos += size;
    }
    Ok(fold_of)
}

/// Fold assignments for every repartition, in repartition order.
pub fn fold_assignments(rows: usize, cv: &CvSpec) -> Result<Vec<Vec<usize>>> {
    (0..cv.repartitions).map(|r| fold_assignment(rows, cv, r)).collect()
}

/// Out-of-fold predictions for component counts `1..=max_k`.
///
/// Returns one `rows x max_k` matrix per repartition; entry `(i, k-1)` is the
/// prediction for sample `i` from a `k`-component model fitted without the
/// fold containing `i`. Each fold model re-centres on its own training rows.
pub fn out_of_fold_predictions(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    cv: &CvSpec,
    max_k: usize,
) -> Result<Vec<Array2<f64>>> {
    let rows = x.nrows();
    if rows != y.len() {
        return Err(Error::ShapeMismatch(format!("{rows} rows vs {} responses", y.len())));
    }
    let assignments = fold_assignments(rows, cv)?;
    let tasks: Vec<(usize, usize)> = (0..cv.repartitions)
        .flat_map(|r| (0..cv.folds).map(move |f| (r, f)))
        .collect();

    let fold_results: Vec<Result<(usize, Vec<usize>, Array2<f64>)>> = tasks
        .par_iter()
        .map(|&(r, f)| {
            let fold_of = &assignments[r];
            let (test, train): (Vec<usize>, Vec<usize>) = (0..rows).partition(|&i| fold_of[i] == f);
            let xt = x.select(Axis(0), &train);
            let yt = y.select(Axis(0), &train);
            let model = pls_fit(xt.view(), yt.view(), max_k)?;
            let preds = model.predict_prefixes(x.select(Axis(0), &test).view())?;
            Ok((r, test, preds))
        })
        .collect();

    let mut out = vec![Array2::zeros((rows, max_k)); cv.repartitions];
    for res in fold_results {
        let (r, test, preds) = res?;
        for (row, &i) in test.iter().enumerate() {
            out[r].row_mut(i).assign(&preds.row(row));
        }
    }
    Ok(out)
}

/// Calibration statistics over repartitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvStats {
    /// Pooled out-of-fold RMSE of each repartition.
    pub per_repartition_rmse: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across repartitions (0 for a single one).
    pub sd: f64,
}

/// Root mean square of `pred - y`, accumulated in sample order so the result
/// does not depend on how folds were visited.
pub(crate) fn pooled_rmse(pred: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let press: f64 = pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum();
    (press / y.len() as f64).sqrt()
}

/// Cross-validated RMSE of a `k`-component model.
pub fn monte_carlo_cv(x: ArrayView2<f64>, y: ArrayView1<f64>, cv: &CvSpec, k: usize) -> Result<CvStats> {
    let preds = out_of_fold_predictions(x, y, cv, k)?;
    let per_repartition_rmse: Vec<f64> = preds.iter().map(|p| pooled_rmse(p.column(k - 1), y)).collect();
    let n = per_repartition_rmse.len() as f64;
    let mean = per_repartition_rmse.iter().sum::<f64>() / n;
    let sd = if per_repartition_rmse.len() > 1 {
        (per_repartition_rmse.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(CvStats {
        per_repartition_rmse,
        mean,
        sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use rand::Rng;

    fn data(n: usize, p: usize, seed: u64, noise: f64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0));
        let beta = Array1::from_shape_fn(p, |j| (j as f64 + 1.0).recip());
        let y = x.dot(&beta) + Array1::from_shape_fn(n, |_| noise * rng.random_range(-1.0..1.0));
        (x, y)
    }

    #[test]
    fn fold_sizes_balanced() {
        let cv = CvSpec {
            folds: 10,
            repartitions: 3,
            seed: 42,
        };
        for fold_of in fold_assignments(57, &cv).unwrap() {
            let mut counts = vec![0usize; 10];
            for f in fold_of {
                counts[f] += 1;
            }
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{counts:?}");
        }
        assert_eq!(cv.min_train_rows(57), 51);
    }

    #[test]
    fn repartitions_differ_but_repeat() {
        let cv = CvSpec {
            folds: 5,
            repartitions: 2,
            seed: 1,
        };
        let a = fold_assignments(40, &cv).unwrap();
        assert_ne!(a[0], a[1]);
        assert_eq!(a, fold_assignments(40, &cv).unwrap());
    }

    #[test]
    fn bad_specs() {
        let x = Array2::<f64>::zeros((5, 2));
        let y = Array1::<f64>::zeros(5);
        let cv = CvSpec {
            folds: 6,
            repartitions: 1,
            seed: 0,
        };
        assert!(matches!(
            monte_carlo_cv(x.view(), y.view(), &cv, 1).unwrap_err(),
            Error::BadFoldCount { folds: 6, rows: 5 }
        ));
        let cv = CvSpec {
            folds: 1,
            repartitions: 1,
            seed: 0,
        };
        assert!(matches!(cv.validate(5).unwrap_err(), Error::BadFoldCount { .. }));
    }

    #[test]
    fn leave_one_out_ignores_seed() {
        let (x, y) = data(12, 3, 3, 0.3);
        let run = |seed| {
            let cv = CvSpec {
                folds: 12,
                repartitions: 1,
                seed,
            };
            monte_carlo_cv(x.view(), y.view(), &cv, 2).unwrap()
        };
        assert_eq!(run(0), run(987654321));
    }

    #[test]
    fn same_seed_same_stats() {
        let (x, y) = data(40, 4, 4, 0.2);
        let cv = CvSpec {
            folds: 10,
            repartitions: 10,
            seed: 77,
        };
        let a = monte_carlo_cv(x.view(), y.view(), &cv, 3).unwrap();
        let b = monte_carlo_cv(x.view(), y.view(), &cv, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_repartition_rmse.len(), 10);
        assert!(a.sd >= 0.0);
    }

    #[test]
    fn noiseless_linear_is_recovered() {
        let (x, y) = data(30, 3, 5, 0.0);
        let stats = monte_carlo_cv(x.view(), y.view(), &CvSpec::default(), 3).unwrap();
        assert!(stats.mean <= 1e-6, "{stats:?}");
    }

    #[test]
    fn pooled_rmse_small_case() {
        let p = array![1.0, 2.0, 3.0];
        let y = array![1.0, 2.0, 5.0];
        assert!((pooled_rmse(p.view(), y.view()) - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
