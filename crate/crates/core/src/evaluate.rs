//! Predicted-versus-measured evaluation on an external test set.
//!
//! Measured values sit on the x axis and predictions on the y axis, so the
//! slope `a` and bias `b` describe `predicted ≈ a · measured + b`.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, SpectraMatrix, Target};
use crate::pls::{pls_predict, PlsModel};
use crate::preprocess::normalize_array;

pub const DEFAULT_HISTOGRAM_BINS: usize = 10;

/// Ordinary least squares line of predicted on measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub r_square: f64,
    /// Root mean squared residual of the fitted line (divides by n).
    pub rmse_fit: f64,
    pub n: usize,
    pub x_mean: f64,
    pub sxx: f64,
    /// Residual standard error, `sqrt(SSE / (n - 2))`.
    pub residual_se: f64,
}

fn check_lengths(predicted: ArrayView1<f64>, measured: ArrayView1<f64>) -> Result<()> {
    if predicted.len() != measured.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: measured.len(),
        });
    }
    Ok(())
}

pub fn linear_fit(predicted: ArrayView1<f64>, measured: ArrayView1<f64>) -> Result<LinearFit> {
    check_lengths(predicted, measured)?;
    let n = measured.len();
    if n < 3 {
        return Err(Error::InsufficientSamples { got: n, need: 3 });
    }
    let nf = n as f64;
    let x_mean = measured.sum() / nf;
    let y_mean = predicted.sum() / nf;
    let sxx: f64 = measured.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sxy: f64 = measured
        .iter()
        .zip(predicted)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let syy: f64 = predicted.iter().map(|y| (y - y_mean).powi(2)).sum();
    let a = sxy / sxx;
    let b = y_mean - a * x_mean;
    let sse: f64 = measured
        .iter()
        .zip(predicted)
        .map(|(x, y)| (y - a * x - b).powi(2))
        .sum::<f64>()
        .max(0.0);
    // constant predictions: the flat line fits exactly but explains nothing
    let r_square = if syy > 0.0 { 1.0 - sse / syy } else { 0.0 };
    Ok(LinearFit {
        a,
        b,
        r_square,
        rmse_fit: (sse / nf).sqrt(),
        n,
        x_mean,
        sxx,
        residual_se: (sse / (nf - 2.0)).sqrt(),
    })
}

/// Equal-width histogram over the residual range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::BadParameter("histogram needs at least one bin".into()));
        }
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let (mut lo, mut hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if hi == lo {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Ok(Histogram { edges, counts })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
    pub histogram: Histogram,
}

/// Statistics of `predicted − measured`.
pub fn residual_stats(predicted: ArrayView1<f64>, measured: ArrayView1<f64>, bins: usize) -> Result<ResidualStats> {
    check_lengths(predicted, measured)?;
    let n = predicted.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { got: n, need: 2 });
    }
    let residuals: Vec<f64> = predicted.iter().zip(measured).map(|(p, m)| p - m).collect();
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let sd = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    Ok(ResidualStats {
        mean,
        sd,
        histogram: Histogram::new(&residuals, bins)?,
    })
}

/// Prediction interval for a new observation around the fitted line:
/// `t(1 − α/2, n − 2) · s · sqrt(1 + 1/n + (x − x̄)² / Sxx)`.
pub fn prediction_bounds(fit: &LinearFit, at: &[f64], level: f64) -> Result<Vec<(f64, f64)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::BadLevel(level));
    }
    if fit.n < 3 {
        return Err(Error::InsufficientSamples { got: fit.n, need: 3 });
    }
    let dist = StudentsT::new(0.0, 1.0, (fit.n - 2) as f64)
        .map_err(|e| Error::BadParameter(format!("t distribution: {e}")))?;
    let t = dist.inverse_cdf(0.5 + level / 2.0);
    let nf = fit.n as f64;
    Ok(at
        .iter()
        .map(|&x| {
            let centre = fit.a * x + fit.b;
            let half = t * fit.residual_se * (1.0 + 1.0 / nf + (x - fit.x_mean).powi(2) / fit.sxx).sqrt();
            (centre - half, centre + half)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub measured: f64,
    pub predicted: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub a: f64,
    pub b: f64,
    pub r_square: f64,
    pub rmse_fit: f64,
    /// Root mean square of `predicted − measured`.
    pub rmse_pred: f64,
    pub residual_mean: f64,
    pub residual_sd: f64,
    /// 95% prediction band evaluated at every test sample.
    pub bounds: Vec<BoundPoint>,
    pub n: usize,
    pub units: String,
}

impl EvaluationReport {
    /// `(metric, value)` rows for the flat CSV export.
    pub fn metric_rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("a", self.a.to_string()),
            ("b", self.b.to_string()),
            ("r_square", self.r_square.to_string()),
            ("rmse_fit", self.rmse_fit.to_string()),
            ("rmse_pred", self.rmse_pred.to_string()),
            ("residual_mean", self.residual_mean.to_string()),
            ("residual_sd", self.residual_sd.to_string()),
            ("n", self.n.to_string()),
            ("units", self.units.clone()),
        ]
    }
}

/// Builds a report from paired prediction and measurement vectors.
pub fn evaluate_predictions(predicted: ArrayView1<f64>, measured: ArrayView1<f64>, units: &str) -> Result<EvaluationReport> {
    let fit = linear_fit(predicted, measured)?;
    let stats = residual_stats(predicted, measured, DEFAULT_HISTOGRAM_BINS)?;
    let rmse_pred = (predicted
        .iter()
        .zip(measured)
        .map(|(p, m)| (p - m).powi(2))
        .sum::<f64>()
        / measured.len() as f64)
        .sqrt();
    let band = prediction_bounds(&fit, measured.as_slice().unwrap_or(&measured.to_vec()), 0.95)?;
    let bounds = measured
        .iter()
        .zip(predicted)
        .zip(band)
        .map(|((&m, &p), (lower, upper))| BoundPoint {
            measured: m,
            predicted: p,
            lower,
            upper,
        })
        .collect();
    Ok(EvaluationReport {
        a: fit.a,
        b: fit.b,
        r_square: fit.r_square,
        rmse_fit: fit.rmse_fit,
        rmse_pred,
        residual_mean: stats.mean,
        residual_sd: stats.sd,
        bounds,
        n: fit.n,
        units: units.to_string(),
    })
}

/// Applies the model to raw spectra: row-wise RNV over the full axis, then
/// the model's wavelength subset. The spectra axis must agree with the axis
/// positions the model was trained on.
pub fn predict_spectra(model: &PlsModel, spectra: &SpectraMatrix) -> Result<Array1<f64>> {
    if let Some(subset) = model.subset() {
        let values = spectra.axis().values();
        if values.len() != subset.source_len() {
            return Err(Error::AxisMismatch(format!(
                "model trained on {} wavelengths, spectra have {}",
                subset.source_len(),
                values.len()
            )));
        }
        for (&i, &expected) in subset.indices().iter().zip(subset.axis_values()) {
            if (values[i] - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                return Err(Error::AxisMismatch(format!(
                    "column {i} is at {} but the model expects {expected}",
                    values[i]
                )));
            }
        }
    }
    let normalized = normalize_array(spectra.intensities())?;
    pls_predict(model, normalized.view())
}

/// Predicts every sample of `test` and evaluates against its `target` values.
pub fn evaluate_model(model: &PlsModel, test: &Dataset, target: Target) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::MissingTarget("empty test set".into()));
    }
    let measured = test.response(target)?;
    let predicted = predict_spectra(model, test.spectra())?;
    evaluate_predictions(predicted.view(), measured.view(), target.units())
}
