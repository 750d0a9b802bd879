//! Partial least squares regression with knee-point component selection.

mod curve;
mod cv;
mod model;
mod persist;
mod pipeline;

pub use curve::{
    knee_point, knee_point_xy, smooth_curve, variance_curve, CurveKind, KneeResult, VarianceCurve, VariancePoint,
};
pub use cv::{fold_assignment, fold_assignments, monte_carlo_cv, out_of_fold_predictions, CvSpec, CvStats};
pub use model::{max_components, pls_fit, pls_predict, PlsModel};
pub use persist::{ModelDocument, MODEL_SCHEMA};
pub use pipeline::{
    select_on_normalized, train_pipeline, ComponentChoice, PipelineConfig, TrainedPipeline, DEFAULT_MAX_COMPONENTS,
    DEFAULT_SMOOTHING_WEIGHT,
};
