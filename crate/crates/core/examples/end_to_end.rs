//! Full workflow on a synthetic dataset: train on the isothermal samples,
//! evaluate on the dynamic-storage ones, and compare with a model that skips
//! wavelength selection.
//!
//! cargo run --release --example end_to_end -- [seed]

use std::time::Instant;

use spectraflow::evaluate::evaluate_model;
use spectraflow::ingest::{partition_by_condition, Target};
use spectraflow::pls::{train_pipeline, PipelineConfig};
use spectraflow::synth::{generate, planted_hits, SynthSpec};

fn main() -> spectraflow::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = SynthSpec {
        seed,
        ..SynthSpec::default()
    };
    let data = generate(&spec)?;
    let parts = partition_by_condition(&data)?;
    let (train, test) = (parts.train.unwrap(), parts.test.unwrap());
    println!("train {} samples, test {} samples, {} wavelengths", train.len(), test.len(), spec.n_wavelengths);

    let started = Instant::now();
    let config = PipelineConfig {
        cv: spectraflow::pls::CvSpec {
            seed,
            ..Default::default()
        },
        ..Default::default()
    };
    let trained = train_pipeline(&train, Target::Tvc, &config)?;
    let report = evaluate_model(&trained.model, &test, Target::Tvc)?;
    println!(
        "with selection: {} wavelengths, {}/{} planted peaks hit, k = {}",
        trained.subset().len(),
        planted_hits(&spec, trained.subset().indices()),
        spec.planted_indices.len(),
        trained.k()
    );
    println!(
        "  a = {:.3}  b = {:.3}  R2 = {:.3}  RMSE = {:.3} {}  ({:.1?})",
        report.a,
        report.b,
        report.r_square,
        report.rmse_pred,
        report.units,
        started.elapsed()
    );

    let baseline = train_pipeline(
        &train,
        Target::Tvc,
        &PipelineConfig {
            feature_selection: false,
            ..config
        },
    )?;
    let base_report = evaluate_model(&baseline.model, &test, Target::Tvc)?;
    println!(
        "all wavelengths: k = {}, a = {:.3}, R2 = {:.3}, RMSE = {:.3}",
        baseline.k(),
        base_report.a,
        base_report.r_square,
        base_report.rmse_pred
    );
    Ok(())
}
