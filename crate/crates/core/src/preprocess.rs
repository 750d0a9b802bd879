//! Robust normal variate (RNV) normalization.
//!
//! Each spectrum is centred on its own median and divided by its own median
//! absolute deviation. No consistency factor is applied to the MAD.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SpectraMatrix;

/// A spectrum is rejected when `mad < ZERO_SCALE_RTOL * max(max|s|, 1)`.
pub const ZERO_SCALE_RTOL: f64 = 1e-12;

/// Median; for even lengths the mean of the two central order statistics.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut buf = values.to_vec();
    Ok(median_in_place(&mut buf))
}

fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    let mid = n / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lower.iter().copied().max_by(f64::total_cmp).expect("even n >= 2");
        (lower + upper) / 2.0
    }
}

fn median_and_mad(values: &[f64]) -> (f64, f64) {
    let mut buf = values.to_vec();
    let med = median_in_place(&mut buf);
    for v in buf.iter_mut() {
        *v = (*v - med).abs();
    }
    (med, median_in_place(&mut buf))
}

/// Median absolute deviation from the median.
pub fn mad(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(median_and_mad(values).1)
}

/// Location and scale removed from one spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    pub location: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub rows: Vec<RowStats>,
}

/// `(s - median(s)) / mad(s)` for a single spectrum.
pub fn rnv_normalize(spectrum: &[f64]) -> Result<(Vec<f64>, RowStats)> {
    if spectrum.is_empty() {
        return Err(Error::EmptyInput);
    }
    if spectrum.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite value in spectrum".into()));
    }
    let (location, scale) = median_and_mad(spectrum);
    let peak = spectrum.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if scale < ZERO_SCALE_RTOL * peak {
        return Err(Error::ZeroScale { row: None, mad: scale });
    }
    let out = spectrum.iter().map(|v| (v - location) / scale).collect();
    Ok((out, RowStats { location, scale }))
}

fn normalize_rows(rows: &Array2<f64>) -> Result<(Array2<f64>, NormalizationReport)> {
    let results: Vec<Result<(Vec<f64>, RowStats)>> = (0..rows.nrows())
        .into_par_iter()
        .map(|i| {
            let owned = rows.row(i).to_vec();
            rnv_normalize(&owned).map_err(|e| match e {
                Error::ZeroScale { mad, .. } => Error::ZeroScale { row: Some(i), mad },
                other => other,
            })
        })
        .collect();
    let mut out = Array2::zeros(rows.raw_dim());
    let mut report = NormalizationReport::default();
    for (i, r) in results.into_iter().enumerate() {
        let (values, stats) = r?;
        out.row_mut(i).iter_mut().zip(values).for_each(|(o, v)| *o = v);
        report.rows.push(stats);
    }
    Ok((out, report))
}

/// Row-wise RNV over a whole matrix.
pub fn normalize_matrix(spectra: &SpectraMatrix) -> Result<(SpectraMatrix, NormalizationReport)> {
    let (out, report) = normalize_rows(spectra.intensities())?;
    Ok((SpectraMatrix::new(spectra.axis().clone(), out)?, report))
}

/// Row-wise RNV on a bare intensity array.
pub fn normalize_array(rows: &Array2<f64>) -> Result<Array2<f64>> {
    normalize_rows(rows).map(|(m, _)| m)
}
