//! Explained-variance curves over the number of PLS components, their
//! optional spline smoothing, and the two-line knee-point rule used to pick
//! the component count.

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::cv::{out_of_fold_predictions, CvSpec};
use super::model::{max_components, pls_fit};
use crate::error::{Error, Result};

/// Which quantity the curve's `explained` value holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// Cross-validated Q² = 1 − PRESS/TSS, averaged over repartitions.
    #[default]
    CvY,
    /// Training R² of the response.
    TrainY,
    /// Fraction of centred X variance captured on the training data.
    TrainX,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveKind::CvY => "cv_y",
            CurveKind::TrainY => "train_y",
            CurveKind::TrainX => "train_x",
        })
    }
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cv_y" | "cv" => Ok(CurveKind::CvY),
            "train_y" => Ok(CurveKind::TrainY),
            "train_x" => Ok(CurveKind::TrainX),
            other => Err(Error::Config(format!("unknown curve kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub n_components: usize,
    /// The value the knee is located on (see [`CurveKind`]).
    pub explained: f64,
    pub cv_explained: f64,
    pub train_explained: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceCurve {
    pub kind: CurveKind,
    pub points: Vec<VariancePoint>,
    pub smoothed: Option<Vec<f64>>,
}

impl VarianceCurve {
    /// Curve values the knee search runs on: smoothed if available.
    pub fn values(&self) -> Vec<f64> {
        self.smoothed
            .clone()
            .unwrap_or_else(|| self.points.iter().map(|p| p.explained).collect())
    }

    pub fn abscissae(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.n_components as f64).collect()
    }
}

/// Explained variance for `1..=max_components` components.
///
/// Every point carries both the cross-validated Q² of y and the training R²
/// of y; `kind` decides which one (or the training X variance) becomes the
/// curve's `explained` value.
pub fn variance_curve(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    max_comps: usize,
    cv: &CvSpec,
    kind: CurveKind,
) -> Result<VarianceCurve> {
    let (rows, cols) = x.dim();
    let max = max_components(rows, cols);
    if max_comps == 0 || max_comps > max {
        return Err(Error::BadK { k: max_comps, max });
    }
    let full = pls_fit(x, y, max_comps)?;
    let mean = y.sum() / rows as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if tss == 0.0 {
        return Err(Error::ZeroVariance);
    }

    let oof = out_of_fold_predictions(x, y, cv, max_comps)?;
    let mut cv_explained = vec![0.0; max_comps];
    for preds in &oof {
        for (k, acc) in cv_explained.iter_mut().enumerate() {
            let press: f64 = preds.column(k).iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum();
            *acc += 1.0 - press / tss;
        }
    }
    for v in &mut cv_explained {
        *v /= oof.len() as f64;
    }

    let points = (0..max_comps)
        .map(|k| {
            let train_explained = full.train_explained_y()[k];
            let explained = match kind {
                CurveKind::CvY => cv_explained[k],
                CurveKind::TrainY => train_explained,
                CurveKind::TrainX => full.train_explained_x()[k],
            };
            VariancePoint {
                n_components: k + 1,
                explained,
                cv_explained: cv_explained[k],
                train_explained,
            }
        })
        .collect();
    Ok(VarianceCurve {
        kind,
        points,
        smoothed: None,
    })
}

/// Solves a symmetric positive definite system by Cholesky factorization.
fn cholesky_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if d <= 0.0 {
            return None;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    Some(b)
}

/// Cubic smoothing spline evaluated at the data abscissae.
///
/// Minimizes `Σ (y_i − f(x_i))² + weight · ∫ f''(t)² dt` (Reinsch form).
/// `weight == 0` interpolates, so the output equals the input; large weights
/// approach the least-squares line.
pub fn smooth_curve(xs: &[f64], ys: &[f64], weight: f64) -> Result<Vec<f64>> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::LengthMismatch { left: n, right: ys.len() });
    }
    if n < 4 {
        return Err(Error::TooFewPoints { got: n, need: 4 });
    }
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(Error::BadParameter(format!("smoothing weight {weight} must be finite and >= 0")));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadParameter("abscissae must be strictly increasing".into()));
    }
    if weight == 0.0 {
        return Ok(ys.to_vec());
    }

    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let m = n - 2;
    // Q is n x m (three non-zeros per column), R is m x m tridiagonal.
    let q = |i: usize, j: usize| -> f64 {
        // column j corresponds to interior knot j + 1
        if i == j {
            1.0 / h[j]
        } else if i == j + 1 {
            -1.0 / h[j] - 1.0 / h[j + 1]
        } else if i == j + 2 {
            1.0 / h[j + 1]
        } else {
            0.0
        }
    };
    let mut a = vec![vec![0.0; m]; m];
    for j in 0..m {
        a[j][j] += (h[j] + h[j + 1]) / 3.0;
        if j + 1 < m {
            a[j][j + 1] += h[j + 1] / 6.0;
            a[j + 1][j] += h[j + 1] / 6.0;
        }
    }
    for (j, row) in a.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            if j.abs_diff(k) > 2 {
                continue;
            }
            let lo = j.max(k);
            let hi = (j + 2).min(k + 2);
            let mut s = 0.0;
            for i in lo..=hi {
                s += q(i, j) * q(i, k);
            }
            *cell += weight * s;
        }
    }
    let rhs: Vec<f64> = (0..m).map(|j| (j..j + 3).map(|i| q(i, j) * ys[i]).sum()).collect();
    let gamma = cholesky_solve(a, rhs).ok_or_else(|| Error::BadParameter("smoothing system is singular".into()))?;
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = i.min(m - 1);
            let qg: f64 = (lo..=hi).map(|j| q(i, j) * gamma[j]).sum();
            ys[i] - weight * qg
        })
        .collect())
}

/// Root mean squared residual of the least-squares line through the points.
fn line_rmse(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    (sse / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneeResult {
    /// Abscissa of the chosen bisection point (the component count).
    pub k: usize,
    /// Index of the chosen bisection point within the curve.
    pub index: usize,
    /// `(bisection abscissa, RMSE_left + RMSE_right)` for every admissible point.
    pub objective: Vec<(f64, f64)>,
}

/// Knee of a curve given as `(xs, ys)`: for each interior bisection point
/// `b`, one line is fitted to the points up to and including `b` and one to
/// the points from `b` on; the knee minimizes the sum of the two fit RMSEs.
/// Ties (within `1e-10` of the curve's range) go to the leftmost point.
pub fn knee_point_xy(xs: &[f64], ys: &[f64]) -> Result<(usize, Vec<f64>)> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::LengthMismatch { left: n, right: ys.len() });
    }
    if n < 5 {
        return Err(Error::TooFewPoints { got: n, need: 5 });
    }
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let tol = 1e-10 * (hi - lo);
    let objective: Vec<f64> = (1..n - 1)
        .map(|b| line_rmse(&xs[..=b], &ys[..=b]) + line_rmse(&xs[b..], &ys[b..]))
        .collect();
    let mut best = 0;
    for (i, &v) in objective.iter().enumerate().skip(1) {
        if v < objective[best] - tol {
            best = i;
        }
    }
    Ok((best + 1, objective))
}

/// Component count at the knee of the (smoothed, if present) curve.
pub fn knee_point(curve: &VarianceCurve) -> Result<KneeResult> {
    let xs = curve.abscissae();
    let (index, objective) = knee_point_xy(&xs, &curve.values())?;
    Ok(KneeResult {
        k: curve.points[index].n_components,
        index,
        objective: xs[1..xs.len() - 1].iter().copied().zip(objective).collect(),
    })
}
