//! Gradient-boosted regression trees as a wavelength filter: fit the
//! ensemble, score each wavelength by the error reduction of its splits and
//! keep the ones selected by each policy.

use spectraflow::feature_select::{feature_importance, lsboost_fit, select_features, BoostParams, SelectionPolicy};
use spectraflow::ingest::{partition_by_condition, Target};
use spectraflow::preprocess::normalize_matrix;
use spectraflow::synth::{generate, planted_hits, SynthSpec};

fn main() -> spectraflow::Result<()> {
    let spec = SynthSpec::default();
    let data = generate(&spec)?;
    let train = partition_by_condition(&data)?.train.expect("isothermal samples");
    let (normalized, _) = normalize_matrix(train.spectra())?;
    let x = normalized.intensities();
    let y = train.response(Target::Tvc)?;

    let ens = lsboost_fit(x.view(), y.view(), BoostParams::default())?;
    let trace = &ens.loss_trace;
    println!("training RMSE by stage:");
    for m in [0, 1, 5, 10, 25, 50, 100] {
        println!("  {m:>3}  {:.4}", trace[m]);
    }

    let imp = feature_importance(&ens, x.view(), y.view())?;
    println!("{} of {} wavelengths have positive importance", imp.positive_count(), imp.len());
    for policy in [SelectionPolicy::Positive, SelectionPolicy::AboveMeanPositive, SelectionPolicy::TopK(20)] {
        let subset = select_features(&imp, policy, normalized.axis())?;
        println!(
            "{policy:<11} keeps {:>3}, hits {}/{} planted peaks",
            subset.len(),
            planted_hits(&spec, subset.indices()),
            spec.planted_indices.len()
        );
    }
    Ok(())
}
