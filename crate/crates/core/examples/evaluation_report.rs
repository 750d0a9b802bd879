//! Goodness-of-fit for a set of predictions: the predicted-vs-measured line,
//! residual statistics and 95% prediction bounds, written as CSV and JSON.
//!
//! cargo run --example evaluation_report -- [output dir]

use spectraflow::cli::write_evaluation;
use ndarray::arr1;
use spectraflow::evaluate::{evaluate_predictions, linear_fit, prediction_bounds, residual_stats};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let measured = arr1(&[3.1, 3.6, 4.2, 4.8, 5.5, 6.1, 6.6, 7.3, 7.9, 8.4, 8.8]);
    let predicted = arr1(&[3.4, 3.5, 4.5, 4.6, 5.9, 5.8, 6.9, 7.0, 8.1, 8.0, 8.9]);

    let report = evaluate_predictions(predicted.view(), measured.view(), "log CFU/g")?;
    for (name, value) in report.metric_rows() {
        println!("{name:<14} {value}");
    }

    let stats = residual_stats(predicted.view(), measured.view(), 5)?;
    println!("residual histogram: {:?}", stats.histogram.counts);

    let fit = linear_fit(predicted.view(), measured.view())?;
    for (x, (lo, hi)) in [4.0, 6.0, 10.0].iter().zip(prediction_bounds(&fit, &[4.0, 6.0, 10.0], 0.95)?) {
        println!("at {x}: 95% of new predictions within [{lo:.2}, {hi:.2}]");
    }

    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir)?;
        write_evaluation(dir.as_ref(), &report)?;
        println!("wrote report.json, metrics.csv, points.csv, residual_histogram.csv to {dir}");
    }
    Ok(())
}
