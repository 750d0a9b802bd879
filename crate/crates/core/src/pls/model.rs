//! Single-response partial least squares (PLS1) by NIPALS deflation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::feature_select::FeatureSubset;

/// Residual X norms below this fraction of the centred X norm mean the
/// remaining columns carry no further rank.
const RANK_RTOL: f64 = 1e-12;

/// Fitted PLS1 model.
///
/// `weights`, `x_loadings` and `y_loadings` hold one entry per latent
/// component. `rotations` map centred inputs straight to scores, and
/// `coefficients` is their `y_loadings`-weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    subset: Option<FeatureSubset>,
    x_mean: Array1<f64>,
    y_mean: f64,
    weights: Vec<Array1<f64>>,
    x_loadings: Vec<Array1<f64>>,
    y_loadings: Vec<f64>,
    rotations: Vec<Array1<f64>>,
    coefficients: Array1<f64>,
    train_explained_y: Vec<f64>,
    train_explained_x: Vec<f64>,
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Leading right singular direction of `x` by power iteration, used when
/// the response is already fully explained but more components are asked for.
fn dominant_direction(x: &Array2<f64>) -> Array1<f64> {
    let start = (0..x.ncols())
        .max_by(|&a, &b| norm(x.column(a)).total_cmp(&norm(x.column(b))).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut v = Array1::zeros(x.ncols());
    v[start] = 1.0;
    for _ in 0..200 {
        let next = x.t().dot(&x.dot(&v));
        let n = norm(next.view());
        if n == 0.0 {
            break;
        }
        let next = next / n;
        let delta = norm((&next - &v).view());
        v = next;
        if delta < 1e-14 {
            break;
        }
    }
    v
}

/// Largest admissible component count for an `rows x cols` problem.
pub fn max_components(rows: usize, cols: usize) -> usize {
    rows.saturating_sub(1).min(cols)
}

/// Fits `k` PLS components of `y` on `x` (columns already restricted to the
/// feature subset). Both are centred internally.
pub fn pls_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, k: usize) -> Result<PlsModel> {
    let (n, p) = x.dim();
    if n != y.len() {
        return Err(Error::ShapeMismatch(format!("{n} rows vs {} responses", y.len())));
    }
    let max = max_components(n, p);
    if k == 0 || k > max {
        return Err(Error::BadK { k, max });
    }

    let x_mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let y_mean = y.sum() / n as f64;
    let mut xr: Array2<f64> = &x - &x_mean;
    let mut yr: Array1<f64> = y.mapv(|v| v - y_mean);
    let x_norm0 = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
    let y_ss0 = yr.dot(&yr);
    let y_norm0 = y_ss0.sqrt();

    let mut weights = Vec::with_capacity(k);
    let mut x_loadings = Vec::with_capacity(k);
    let mut y_loadings = Vec::with_capacity(k);
    let mut train_explained_y = Vec::with_capacity(k);
    let mut train_explained_x = Vec::with_capacity(k);

    for a in 0..k {
        let x_norm = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
        if x_norm0 == 0.0 || x_norm < RANK_RTOL * x_norm0 {
            return Err(Error::RankDeficient {
                component: a + 1,
                requested: k,
            });
        }
        let mut w = xr.t().dot(&yr);
        let w_norm = norm(w.view());
        if w_norm <= RANK_RTOL * x_norm * y_norm0.max(f64::MIN_POSITIVE) {
            w = dominant_direction(&xr);
        } else {
            w /= w_norm;
        }
        let t = xr.dot(&w);
        let tt = t.dot(&t);
        if tt <= 0.0 {
            return Err(Error::RankDeficient {
                component: a + 1,
                requested: k,
            });
        }
        let p_load = xr.t().dot(&t) / tt;
        let q = yr.dot(&t) / tt;

        for (i, mut row) in xr.axis_iter_mut(Axis(0)).enumerate() {
            row.scaled_add(-t[i], &p_load);
        }
        yr.scaled_add(-q, &t);

        train_explained_y.push(if y_ss0 > 0.0 { 1.0 - yr.dot(&yr) / y_ss0 } else { 0.0 });
        let x_res = xr.iter().map(|v| v * v).sum::<f64>();
        train_explained_x.push(1.0 - x_res / (x_norm0 * x_norm0));

        weights.push(w);
        x_loadings.push(p_load);
        y_loadings.push(q);
    }

    let mut model = PlsModel {
        subset: None,
        x_mean,
        y_mean,
        weights,
        x_loadings,
        y_loadings,
        rotations: Vec::new(),
        coefficients: Array1::zeros(p),
        train_explained_y,
        train_explained_x,
    };
    model.derive_coefficients();
    Ok(model)
}

impl PlsModel {
    /// Rebuilds a model from stored components (e.g. a model file) and
    /// recomputes the derived rotations and coefficients.
    pub fn from_components(
        x_mean: Vec<f64>,
        y_mean: f64,
        weights: Vec<Vec<f64>>,
        x_loadings: Vec<Vec<f64>>,
        y_loadings: Vec<f64>,
    ) -> Result<Self> {
        let p = x_mean.len();
        let k = y_loadings.len();
        if k == 0 || weights.len() != k || x_loadings.len() != k {
            return Err(Error::ShapeMismatch("component arrays disagree on k".into()));
        }
        if weights.iter().chain(&x_loadings).any(|v| v.len() != p) {
            return Err(Error::ShapeMismatch("component vectors disagree with x_mean length".into()));
        }
        let mut model = PlsModel {
            subset: None,
            x_mean: Array1::from(x_mean),
            y_mean,
            weights: weights.into_iter().map(Array1::from).collect(),
            x_loadings: x_loadings.into_iter().map(Array1::from).collect(),
            y_loadings,
            rotations: Vec::new(),
            coefficients: Array1::zeros(p),
            train_explained_y: Vec::new(),
            train_explained_x: Vec::new(),
        };
        model.derive_coefficients();
        Ok(model)
    }

    // t_a = X_a w_a with X_a = X_0 (I - w_1 p_1') ... (I - w_{a-1} p_{a-1}'),
    // so r_a = (I - w_1 p_1') ... (I - w_{a-1} p_{a-1}') w_a.
    fn derive_coefficients(&mut self) {
        let k = self.weights.len();
        let mut rotations: Vec<Array1<f64>> = Vec::with_capacity(k);
        for a in 0..k {
            let mut r = self.weights[a].clone();
            for b in (0..a).rev() {
                let c = self.x_loadings[b].dot(&r);
                r.scaled_add(-c, &self.weights[b]);
            }
            rotations.push(r);
        }
        let mut coef = Array1::zeros(self.x_mean.len());
        for (r, q) in rotations.iter().zip(&self.y_loadings) {
            coef.scaled_add(*q, r);
        }
        self.rotations = rotations;
        self.coefficients = coef;
    }

    /// Attaches the wavelength subset the model's columns correspond to.
    pub fn with_subset(mut self, subset: FeatureSubset) -> Result<Self> {
        if subset.len() != self.n_features() {
            return Err(Error::ShapeMismatch(format!(
                "subset of {} for a model over {} columns",
                subset.len(),
                self.n_features()
            )));
        }
        self.subset = Some(subset);
        Ok(self)
    }

    pub fn subset(&self) -> Option<&FeatureSubset> {
        self.subset.as_ref()
    }

    pub fn n_components(&self) -> usize {
        self.y_loadings.len()
    }

    pub fn n_features(&self) -> usize {
        self.x_mean.len()
    }

    pub fn x_mean(&self) -> &Array1<f64> {
        &self.x_mean
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn weights(&self) -> &[Array1<f64>] {
        &self.weights
    }

    pub fn x_loadings(&self) -> &[Array1<f64>] {
        &self.x_loadings
    }

    pub fn y_loadings(&self) -> &[f64] {
        &self.y_loadings
    }

    pub fn coefficients(&self) -> &Array1<f64> {
        &self.coefficients
    }

    /// Training R² of y after 1..=k components.
    pub fn train_explained_y(&self) -> &[f64] {
        &self.train_explained_y
    }

    /// Fraction of centred X variance captured after 1..=k components.
    pub fn train_explained_x(&self) -> &[f64] {
        &self.train_explained_x
    }

    /// Restricts full-width spectra to the model's columns when needed.
    fn model_columns(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() == self.n_features() {
            return Ok(x.to_owned());
        }
        match &self.subset {
            Some(s) if x.ncols() == s.source_len() => Ok(x.select(Axis(1), s.indices())),
            _ => Err(Error::ShapeMismatch(format!(
                "model expects {} columns{}, got {}",
                self.n_features(),
                self.subset
                    .as_ref()
                    .map(|s| format!(" (or {} full-width)", s.source_len()))
                    .unwrap_or_default(),
                x.ncols()
            ))),
        }
    }

    /// Latent scores (`n x k`) of the given rows.
    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let xs = self.model_columns(x)?;
        let centred = xs - &self.x_mean;
        let mut out = Array2::zeros((centred.nrows(), self.n_components()));
        for (a, r) in self.rotations.iter().enumerate() {
            out.column_mut(a).assign(&centred.dot(r));
        }
        Ok(out)
    }

    /// Predictions using only the first `1..=k` components, one column per
    /// component count.
    pub fn predict_prefixes(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let scores = self.scores(x)?;
        let mut out = Array2::zeros(scores.dim());
        for i in 0..scores.nrows() {
            let mut acc = self.y_mean;
            for a in 0..self.n_components() {
                acc += self.y_loadings[a] * scores[[i, a]];
                out[[i, a]] = acc;
            }
        }
        Ok(out)
    }

    /// Prediction by replaying the deflation on each row; used to cross-check
    /// the closed-form coefficients.
    pub fn predict_componentwise(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let xs = self.model_columns(x)?;
        Ok(xs
            .rows()
            .into_iter()
            .map(|row| {
                let mut res = &row - &self.x_mean;
                let mut y = self.y_mean;
                for a in 0..self.n_components() {
                    let t = res.dot(&self.weights[a]);
                    y += self.y_loadings[a] * t;
                    res.scaled_add(-t, &self.x_loadings[a]);
                }
                y
            })
            .collect())
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> Result<f64> {
        if row.len() != self.n_features() {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} columns, got {}",
                self.n_features(),
                row.len()
            )));
        }
        Ok(self.y_mean + (&row - &self.x_mean).dot(&self.coefficients))
    }
}

/// `y_mean + (x - x_mean) . coefficients` for every row. `x` may be either
/// subset-width or, when the model carries a subset, full spectra width.
pub fn pls_predict(model: &PlsModel, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    let xs = model.model_columns(x)?;
    let centred = xs - &model.x_mean;
    Ok(centred.dot(&model.coefficients) + model.y_mean)
}
