//! Reading spectra and sample metadata from CSV, joining them and splitting
//! isothermal (training) from dynamic-storage (test) samples.
//!
//! cargo run --example load_csv -- spectra.csv metadata.csv

use spectraflow::ingest::{join, load_metadata, load_spectra, partition_by_condition, AxisUnit, Target};

fn main() -> spectraflow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let data = if let [spectra, metadata] = args.as_slice() {
        join(load_spectra(spectra, AxisUnit::Nm)?, load_metadata(metadata)?)?
    } else {
        println!("no files given, using a generated dataset");
        spectraflow::synth::generate(&spectraflow::synth::SynthSpec::default())?
    };

    let axis = data.spectra().axis().values();
    println!(
        "{} samples, {} wavelengths ({} .. {} {})",
        data.len(),
        axis.len(),
        axis[0],
        axis[axis.len() - 1],
        data.spectra().axis().unit()
    );
    for r in data.records().iter().take(3) {
        println!("  {} {} {}h tvc={:?}", r.sample_id, r.condition, r.storage_time_h, r.tvc_log_cfu_g);
    }

    let parts = partition_by_condition(&data)?;
    for w in parts.warnings() {
        println!("warning: {w:?}");
    }
    if let Some(train) = &parts.train {
        let y = train.response(Target::Tvc)?;
        println!("training: {} samples, TVC {:.2} .. {:.2}", train.len(), y.fold(f64::INFINITY, |a, &b| a.min(b)), y.fold(f64::NEG_INFINITY, |a, &b| a.max(b)));
    }
    println!("test: {} samples", parts.test.as_ref().map_or(0, |t| t.len()));
    Ok(())
}
