//! JSON model documents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::PlsModel;
use crate::error::{Error, Result};
use crate::feature_select::FeatureSubset;
use crate::ingest::{AxisUnit, Target};

pub const MODEL_SCHEMA: &str = "spectraflow.pls-model/1";

/// Serialized form of a trained model. Field order is fixed so identical
/// models produce byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: String,
    pub target: Target,
    pub axis_unit: AxisUnit,
    pub source_width: usize,
    pub subset_indices: Vec<usize>,
    pub subset_axis_values: Vec<f64>,
    pub n_components: usize,
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
    pub weights: Vec<Vec<f64>>,
    pub x_loadings: Vec<Vec<f64>>,
    pub y_loadings: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
}

impl ModelDocument {
    pub fn from_model(
        model: &PlsModel,
        target: Target,
        axis_unit: AxisUnit,
        config: BTreeMap<String, String>,
        seed: u64,
    ) -> Result<Self> {
        let subset = model
            .subset()
            .ok_or_else(|| Error::BadParameter("model has no wavelength subset attached".into()))?;
        Ok(ModelDocument {
            schema: MODEL_SCHEMA.to_string(),
            target,
            axis_unit,
            source_width: subset.source_len(),
            subset_indices: subset.indices().to_vec(),
            subset_axis_values: subset.axis_values().to_vec(),
            n_components: model.n_components(),
            x_mean: model.x_mean().to_vec(),
            y_mean: model.y_mean(),
            weights: model.weights().iter().map(|v| v.to_vec()).collect(),
            x_loadings: model.x_loadings().iter().map(|v| v.to_vec()).collect(),
            y_loadings: model.y_loadings().to_vec(),
            coefficients: model.coefficients().to_vec(),
            config,
            seed,
        })
    }

    /// Rebuilds the model, checking the schema tag and that the stored
    /// coefficients agree with the ones implied by the components.
    pub fn to_model(&self) -> Result<PlsModel> {
        if self.schema != MODEL_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported model schema {:?} (expected {MODEL_SCHEMA:?})",
                self.schema
            )));
        }
        if self.n_components != self.y_loadings.len() {
            return Err(Error::ShapeMismatch("n_components disagrees with stored components".into()));
        }
        let subset = FeatureSubset::from_parts(
            self.subset_indices.clone(),
            self.subset_axis_values.clone(),
            self.source_width,
        )?;
        let model = PlsModel::from_components(
            self.x_mean.clone(),
            self.y_mean,
            self.weights.clone(),
            self.x_loadings.clone(),
            self.y_loadings.clone(),
        )?
        .with_subset(subset)?;
        let scale = self.coefficients.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let consistent = self.coefficients.len() == model.n_features()
            && self
                .coefficients
                .iter()
                .zip(model.coefficients())
                .all(|(a, b)| (a - b).abs() <= 1e-9 * scale);
        if !consistent {
            return Err(Error::ShapeMismatch("stored coefficients do not match the components".into()));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
