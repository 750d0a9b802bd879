//! End-to-end training: normalize, boost, select, calibrate, fit.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::curve::{knee_point, smooth_curve, variance_curve, CurveKind, KneeResult, VarianceCurve};
use super::cv::CvSpec;
use super::model::{pls_fit, PlsModel};
use crate::error::{Error, Result};
use crate::feature_select::{
    feature_importance, lsboost_fit, select_features, BoostEnsemble, BoostParams, FeatureSubset, ImportanceVector,
    SelectionPolicy,
};
use crate::ingest::{AxisUnit, Dataset, Target};
use crate::preprocess::{normalize_matrix, NormalizationReport};

/// Component-count ceiling applied when none is configured.
pub const DEFAULT_MAX_COMPONENTS: usize = 20;
pub const DEFAULT_SMOOTHING_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub boost: BoostParams,
    pub selection: SelectionPolicy,
    /// `false` feeds every wavelength to PLS (the no-selection baseline).
    pub feature_selection: bool,
    pub cv: CvSpec,
    pub max_components: Option<usize>,
    /// Spline smoothing weight for the variance curve; `None` disables it.
    pub smoothing: Option<f64>,
    pub curve_kind: CurveKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            boost: BoostParams::default(),
            selection: SelectionPolicy::Positive,
            feature_selection: true,
            cv: CvSpec::default(),
            max_components: None,
            smoothing: Some(DEFAULT_SMOOTHING_WEIGHT),
            curve_kind: CurveKind::CvY,
        }
    }
}

/// How the final component count was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum ComponentChoice {
    Knee(KneeResult),
    /// Curves with fewer than five points have no admissible bisection; the
    /// count with the highest curve value is used instead.
    MaxExplained { k: usize },
}

impl ComponentChoice {
    pub fn k(&self) -> usize {
        match self {
            ComponentChoice::Knee(knee) => knee.k,
            ComponentChoice::MaxExplained { k } => *k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub target: Target,
    pub axis_unit: AxisUnit,
    pub model: PlsModel,
    pub curve: VarianceCurve,
    pub choice: ComponentChoice,
    pub boost: Option<BoostEnsemble>,
    pub importances: Option<ImportanceVector>,
    pub normalization: NormalizationReport,
}

impl TrainedPipeline {
    pub fn k(&self) -> usize {
        self.choice.k()
    }

    pub fn subset(&self) -> &FeatureSubset {
        self.model.subset().expect("pipeline models always carry a subset")
    }
}

/// Boosting plus selection on already-normalized spectra.
pub fn select_on_normalized(
    x: &Array2<f64>,
    y: &ndarray::Array1<f64>,
    axis: &crate::ingest::WavelengthAxis,
    boost: BoostParams,
    policy: SelectionPolicy,
) -> Result<(BoostEnsemble, ImportanceVector, FeatureSubset)> {
    let ens = lsboost_fit(x.view(), y.view(), boost).map_err(|e| e.at_stage("boost"))?;
    let imp = feature_importance(&ens, x.view(), y.view()).map_err(|e| e.at_stage("boost"))?;
    let subset = select_features(&imp, policy, axis).map_err(|e| e.at_stage("select"))?;
    Ok((ens, imp, subset))
}

/// Trains the full workflow on `train` for `target`.
///
/// Stages: row-wise RNV → LSBoost → wavelength selection → explained
/// variance curve (Monte-Carlo CV) → optional spline smoothing → knee-point
/// → final PLS fit on the selected wavelengths. Errors are wrapped with the
/// stage that raised them.
pub fn train_pipeline(train: &Dataset, target: Target, config: &PipelineConfig) -> Result<TrainedPipeline> {
    let y = train.response(target).map_err(|e| e.at_stage("input"))?;
    let (normalized, normalization) = normalize_matrix(train.spectra()).map_err(|e| e.at_stage("normalize"))?;
    let axis = normalized.axis().clone();
    let x = normalized.intensities();

    let (boost, importances, subset) = if config.feature_selection {
        let (ens, imp, subset) = select_on_normalized(x, &y, &axis, config.boost, config.selection)?;
        (Some(ens), Some(imp), subset)
    } else {
        (None, None, FeatureSubset::all(&axis))
    };

    let xs = x.select(Axis(1), subset.indices());
    let rows = xs.nrows();
    config.cv.validate(rows).map_err(|e| e.at_stage("curve"))?;
    let ceiling = config.max_components.unwrap_or(DEFAULT_MAX_COMPONENTS);
    let max_k = ceiling
        .min(config.cv.min_train_rows(rows).saturating_sub(1))
        .min(subset.len());
    if max_k == 0 {
        return Err(Error::InsufficientSamples { got: rows, need: config.cv.folds + 1 }.at_stage("curve"));
    }
    let mut curve =
        variance_curve(xs.view(), y.view(), max_k, &config.cv, config.curve_kind).map_err(|e| e.at_stage("curve"))?;

    if let Some(weight) = config.smoothing {
        if curve.points.len() >= 4 {
            let smoothed = smooth_curve(&curve.abscissae(), &curve.values(), weight).map_err(|e| e.at_stage("smooth"))?;
            curve.smoothed = Some(smoothed);
        }
    }

    let choice = if curve.points.len() >= 5 {
        ComponentChoice::Knee(knee_point(&curve).map_err(|e| e.at_stage("knee"))?)
    } else {
        let values = curve.values();
        let best = (0..values.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
        ComponentChoice::MaxExplained {
            k: curve.points[best].n_components,
        }
    };

    let model = pls_fit(xs.view(), y.view(), choice.k())
        .and_then(|m| m.with_subset(subset))
        .map_err(|e| e.at_stage("fit"))?;

    Ok(TrainedPipeline {
        target,
        axis_unit: axis.unit(),
        model,
        curve,
        choice,
        boost,
        importances,
        normalization,
    })
}
