//! Spectra-based regression for monitoring food quality.
//!
//! The workflow turns raw spectra into a calibrated predictor of microbial
//! load (TVC, log CFU/g) or time on shelf:
//!
//! 1. [`ingest`] reads spectra and sample metadata and splits isothermal
//!    training samples from dynamic-storage test samples;
//! 2. [`preprocess`] applies robust per-spectrum normalization (median/MAD);
//! 3. [`feature_select`] fits least-squares boosted trees and keeps the
//!    wavelengths they use;
//! 4. [`pls`] fits PLS1 and picks the component count at the knee of the
//!    cross-validated explained-variance curve;
//! 5. [`evaluate`] compares predictions with measurements.
//!
//! [`synth`] generates seeded datasets with known informative wavelengths
//! and [`cli`] wires everything into the `spectraflow` binary.
//!
//! ```no_run
//! use spectraflow::ingest::{join, load_metadata, load_spectra, partition_by_condition, AxisUnit, Target};
//! use spectraflow::pls::{train_pipeline, PipelineConfig};
//! use spectraflow::evaluate::evaluate_model;
//!
//! # fn main() -> spectraflow::Result<()> {
//! let data = join(load_spectra("spectra.csv", AxisUnit::Nm)?, load_metadata("metadata.csv")?)?;
//! let parts = partition_by_condition(&data)?;
//! let trained = train_pipeline(parts.train.as_ref().unwrap(), Target::Tvc, &PipelineConfig::default())?;
//! let report = evaluate_model(&trained.model, parts.test.as_ref().unwrap(), Target::Tvc)?;
//! println!("RMSE {:.3} {}", report.rmse_pred, report.units);
//! # Ok(())
//! # }
//! ```

pub mod cli;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod feature_select;
pub mod ingest;
pub mod pls;
pub mod preprocess;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
