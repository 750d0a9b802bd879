//! The `spectraflow` command line.
//!
//! Exit status: 0 on success, 2 for bad input, 3 when a numerical stage
//! fails, 4 for filesystem errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, ErrorClass, Result};
use crate::evaluate::{evaluate_model, predict_spectra, EvaluationReport, Histogram, DEFAULT_HISTOGRAM_BINS};
use crate::ingest::{
    average_replicate_groups, join, load_metadata, load_spectra, partition_by_condition, write_spectra, Dataset,
    PartitionSide, SpectraMatrix,
};
use crate::pls::{select_on_normalized, train_pipeline, ComponentChoice, ModelDocument, TrainedPipeline};
use crate::preprocess::normalize_matrix;
use crate::synth::{generate, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "spectraflow", version, about = "Spectra-based regression for food-quality monitoring")]
pub struct Cli {
    /// key = value configuration file; flags given here override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Response variable: tvc or shelf
    #[arg(long, global = true)]
    pub target: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Extra key=value overrides (same keys as the config file)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct DataArgs {
    #[arg(long)]
    pub spectra: Option<PathBuf>,
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Unit of the spectra axis: nm or wavenumber
    #[arg(long)]
    pub axis_unit: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic spectra.csv and metadata.csv
    Synth {
        #[arg(long)]
        samples_per_condition: Option<usize>,
        #[arg(long)]
        wavelengths: Option<usize>,
        #[arg(long)]
        planted: Option<usize>,
    },
    /// Row-wise robust normalization of a spectra file
    Normalize {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Boosted-tree importances and the selected wavelengths
    Select {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train on the isothermal samples and write the model
    Train {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Apply a model to spectra
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compare predictions with measured values
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Evaluate every sample instead of only the dynamic-storage ones
        #[arg(long)]
        all_samples: bool,
    },
    /// Print a saved evaluation report and rewrite its CSV tables
    Report {
        /// report.json written by `evaluate`
        #[arg(long)]
        input: PathBuf,
    },
    /// Average replicate spectra that share a sample id
    Average {
        #[arg(long)]
        spectra: PathBuf,
        /// One sample id per spectra row
        #[arg(long)]
        ids: PathBuf,
        #[arg(long)]
        axis_unit: Option<String>,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Input => 2,
        ErrorClass::Pipeline => 3,
        ErrorClass::Io => 4,
    }
}

fn progress(stage: &str, msg: impl AsRef<str>) {
    eprintln!("[{stage}] {}", msg.as_ref());
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(header)?;
        for row in rows {
            wtr.write_record(row)?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))
    })
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(t) = &cli.target {
        config.set("target", t)?;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn apply_data(config: &mut RunConfig, data: &DataArgs) -> Result<()> {
    if let Some(p) = &data.spectra {
        config.spectra = Some(p.clone());
    }
    if let Some(p) = &data.metadata {
        config.metadata = Some(p.clone());
    }
    if let Some(u) = &data.axis_unit {
        config.set("axis_unit", u)?;
    }
    Ok(())
}

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    value
        .as_ref()
        .ok_or_else(|| Error::Config(format!("no {what} path given (flag --{what} or config key {what})")))
}

fn read_spectra_file(config: &RunConfig) -> Result<SpectraMatrix> {
    let path = required(&config.spectra, "spectra")?;
    let spectra = load_spectra(path, config.axis_unit)?;
    progress(
        "ingest",
        format!(
            "{}: {} spectra x {} wavelengths",
            path.display(),
            spectra.n_samples(),
            spectra.n_wavelengths()
        ),
    );
    Ok(spectra)
}

fn read_dataset(config: &RunConfig) -> Result<Dataset> {
    let spectra = read_spectra_file(config)?;
    let records = load_metadata(required(&config.metadata, "metadata")?)?;
    join(spectra, records)
}

fn training_set(data: &Dataset) -> Result<Dataset> {
    let partition = partition_by_condition(data)?;
    for w in partition.warnings() {
        if w.0 == PartitionSide::Test {
            progress("partition", "warning: no dynamic-storage samples; nothing held out for testing");
        }
    }
    let train = partition.train.ok_or(Error::EmptyPartition("training"))?;
    progress(
        "partition",
        format!("{} isothermal training samples, {} held out", train.len(), partition.test_rows.len()),
    );
    Ok(train)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = resolve(&cli)?;
    match &cli.command {
        Command::Synth {
            samples_per_condition,
            wavelengths,
            planted,
        } => {
            let defaults = SynthSpec::default();
            let mut spec = SynthSpec::with_width(
                wavelengths.unwrap_or(defaults.n_wavelengths),
                planted.unwrap_or(defaults.planted_indices.len()),
                config.seed,
            );
            if let Some(n) = samples_per_condition {
                spec.samples_per_condition = *n;
            }
            let data = generate(&spec)?;
            write_atomic(&config.out_dir.join("spectra.csv"), |w| write_spectra(w, data.spectra()))?;
            write_atomic(&config.out_dir.join("metadata.csv"), |w| {
                crate::ingest::write_metadata(w, data.records())
            })?;
            write_csv(
                &config.out_dir.join("planted.csv"),
                &["index", "axis_value"],
                spec.planted_indices.iter().map(|&i| {
                    vec![i.to_string(), data.spectra().axis().values()[i].to_string()]
                }),
            )?;
            progress(
                "synth",
                format!("{} samples x {} wavelengths -> {}", data.len(), spec.n_wavelengths, config.out_dir.display()),
            );
        }
        Command::Normalize { data } => {
            apply_data(&mut config, data)?;
            let spectra = read_spectra_file(&config)?;
            let ids = sample_ids(&config, &spectra)?;
            let (normalized, report) = normalize_matrix(&spectra).map_err(|e| e.at_stage("normalize"))?;
            write_atomic(&config.out_dir.join("normalized.csv"), |w| write_spectra(w, &normalized))?;
            write_csv(
                &config.out_dir.join("normalization.csv"),
                &["sample_id", "location", "scale"],
                ids.into_iter()
                    .zip(&report.rows)
                    .map(|(id, s)| vec![id, s.location.to_string(), s.scale.to_string()]),
            )?;
            progress("normalize", format!("{} rows normalized", report.rows.len()));
        }
        Command::Select { data } => {
            apply_data(&mut config, data)?;
            let train = training_set(&read_dataset(&config)?)?;
            let y = train.response(config.target)?;
            let (normalized, _) = normalize_matrix(train.spectra()).map_err(|e| e.at_stage("normalize"))?;
            progress("normalize", "done");
            let (ens, imp, subset) = select_on_normalized(normalized.intensities(), &y, normalized.axis(), config.boost, config.selection)?;
            progress(
                "boost",
                format!(
                    "{} cycles, training RMSE {:.4} -> {:.4}",
                    ens.n_cycles,
                    ens.loss_trace[0],
                    ens.loss_trace[ens.loss_trace.len() - 1]
                ),
            );
            progress("select", format!("{} of {} wavelengths kept", subset.len(), imp.len()));
            write_csv(
                &config.out_dir.join("loss_trace.csv"),
                &["stage", "training_rmse"],
                ens.loss_trace.iter().enumerate().map(|(m, r)| vec![m.to_string(), r.to_string()]),
            )?;
            let axis = normalized.axis().values();
            let chosen: std::collections::HashSet<usize> = subset.indices().iter().copied().collect();
            write_csv(
                &config.out_dir.join("importances.csv"),
                &["index", "axis_value", "importance", "selected"],
                imp.as_slice().iter().enumerate().map(|(i, v)| {
                    vec![
                        i.to_string(),
                        axis[i].to_string(),
                        v.to_string(),
                        chosen.contains(&i).to_string(),
                    ]
                }),
            )?;
            write_csv(
                &config.out_dir.join("selected.csv"),
                &["index", "axis_value"],
                subset
                    .indices()
                    .iter()
                    .zip(subset.axis_values())
                    .map(|(i, v)| vec![i.to_string(), v.to_string()]),
            )?;
        }
        Command::Train { data } => {
            apply_data(&mut config, data)?;
            let train = training_set(&read_dataset(&config)?)?;
            progress("train", format!("target {} ({})", config.target, config.target.units()));
            let trained = train_pipeline(&train, config.target, &config.pipeline())?;
            report_training(&trained);
            write_training_outputs(&config, &trained)?;
        }
        Command::Predict { data, model } => {
            apply_data(&mut config, data)?;
            if let Some(m) = model {
                config.model = Some(m.clone());
            }
            let doc = load_model(&config)?;
            let spectra = read_spectra_file(&config)?;
            check_unit(&doc, &spectra)?;
            let ids = sample_ids(&config, &spectra)?;
            let predicted = predict_spectra(&doc.to_model()?, &spectra)?;
            write_csv(
                &config.out_dir.join("predictions.csv"),
                &["sample_id", "predicted"],
                ids.into_iter().zip(predicted).map(|(id, p)| vec![id, p.to_string()]),
            )?;
            progress("predict", format!("{} predictions written", spectra.n_samples()));
        }
        Command::Evaluate {
            data,
            model,
            all_samples,
        } => {
            apply_data(&mut config, data)?;
            if let Some(m) = model {
                config.model = Some(m.clone());
            }
            let doc = load_model(&config)?;
            let dataset = read_dataset(&config)?;
            check_unit(&doc, dataset.spectra())?;
            let test = if *all_samples {
                dataset
            } else {
                partition_by_condition(&dataset)?
                    .test
                    .ok_or_else(|| Error::MissingTarget("no dynamic-storage samples to evaluate (use --all-samples)".into()))?
            };
            progress("evaluate", format!("{} samples, target {}", test.len(), doc.target));
            let report = evaluate_model(&doc.to_model()?, &test, doc.target)?;
            progress(
                "evaluate",
                format!(
                    "a = {:.3}, b = {:.3}, R2 = {:.3}, RMSE = {:.3} {}",
                    report.a, report.b, report.r_square, report.rmse_pred, report.units
                ),
            );
            write_evaluation(&config.out_dir, &report)?;
        }
        Command::Report { input } => {
            let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
            let report: EvaluationReport = serde_json::from_str(&text)?;
            let mut stdout = std::io::stdout().lock();
            for (name, value) in report.metric_rows() {
                writeln!(stdout, "{name:<14} {value}").map_err(|e| Error::io("<stdout>", e))?;
            }
            write_evaluation(&config.out_dir, &report)?;
        }
        Command::Average { spectra, ids, axis_unit } => {
            if let Some(u) = axis_unit {
                config.set("axis_unit", u)?;
            }
            let matrix = load_spectra(spectra, config.axis_unit)?;
            let text = std::fs::read_to_string(ids).map_err(|e| Error::io(ids, e))?;
            let ids: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
            let (averaged, order) = average_replicate_groups(&matrix, &ids)?;
            write_atomic(&config.out_dir.join("averaged.csv"), |w| write_spectra(w, &averaged))?;
            write_atomic(&config.out_dir.join("averaged_ids.txt"), |w| {
                for id in &order {
                    writeln!(w, "{id}").map_err(|e| Error::io("averaged_ids.txt", e))?;
                }
                Ok(())
            })?;
            progress("average", format!("{} spectra -> {} samples", matrix.n_samples(), order.len()));
        }
    }
    Ok(())
}

/// Sample ids from the metadata file when one is given, else 1-based row numbers.
fn sample_ids(config: &RunConfig, spectra: &SpectraMatrix) -> Result<Vec<String>> {
    Ok(match &config.metadata {
        Some(path) => {
            let data = join(spectra.clone(), load_metadata(path)?)?;
            data.sample_ids().map(String::from).collect()
        }
        None => (1..=spectra.n_samples()).map(|i| i.to_string()).collect(),
    })
}

fn load_model(config: &RunConfig) -> Result<ModelDocument> {
    let path = required(&config.model, "model")?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelDocument::from_json(&text)
}

fn check_unit(doc: &ModelDocument, spectra: &SpectraMatrix) -> Result<()> {
    if doc.axis_unit != spectra.axis().unit() {
        return Err(Error::UnitMismatch {
            model: doc.axis_unit.to_string(),
            data: spectra.axis().unit().to_string(),
        });
    }
    Ok(())
}

fn report_training(t: &TrainedPipeline) {
    progress("normalize", format!("{} spectra normalized", t.normalization.rows.len()));
    if let Some(ens) = &t.boost {
        progress(
            "boost",
            format!(
                "{} cycles, training RMSE {:.4} -> {:.4}",
                ens.n_cycles,
                ens.loss_trace[0],
                ens.loss_trace[ens.loss_trace.len() - 1]
            ),
        );
    }
    progress(
        "select",
        format!("{} of {} wavelengths kept", t.subset().len(), t.subset().source_len()),
    );
    progress("curve", format!("{} points ({})", t.curve.points.len(), t.curve.kind));
    match &t.choice {
        ComponentChoice::Knee(knee) => progress("knee", format!("k = {}", knee.k)),
        ComponentChoice::MaxExplained { k } => progress("knee", format!("curve too short for a knee; k = {k} (max explained)")),
    }
    progress("fit", format!("PLS with {} components", t.model.n_components()));
}

fn write_training_outputs(config: &RunConfig, t: &TrainedPipeline) -> Result<()> {
    let out = &config.out_dir;
    let doc = ModelDocument::from_model(&t.model, t.target, t.axis_unit, config.echo(), config.seed)?;
    let json = doc.to_json()?;
    write_atomic(&out.join("model.json"), |w| {
        w.write_all(json.as_bytes()).map_err(|e| Error::io("model.json", e))?;
        w.write_all(b"\n").map_err(|e| Error::io("model.json", e))
    })?;
    let smoothed = t.curve.smoothed.clone();
    write_csv(
        &out.join("variance_curve.csv"),
        &["n_components", "explained", "smoothed", "cv_explained", "train_explained"],
        t.curve.points.iter().enumerate().map(|(i, p)| {
            vec![
                p.n_components.to_string(),
                p.explained.to_string(),
                smoothed.as_ref().map_or(String::new(), |s| s[i].to_string()),
                p.cv_explained.to_string(),
                p.train_explained.to_string(),
            ]
        }),
    )?;
    let (rule, objective) = match &t.choice {
        ComponentChoice::Knee(knee) => ("knee", knee.objective.clone()),
        ComponentChoice::MaxExplained { .. } => ("max_explained", Vec::new()),
    };
    let k = t.k();
    write_csv(
        &out.join("knee_report.csv"),
        &["bisection", "objective", "chosen", "rule"],
        objective.iter().map(|(b, obj)| {
            vec![
                b.to_string(),
                obj.to_string(),
                ((*b as usize) == k).to_string(),
                rule.to_string(),
            ]
        })
        .chain((objective.is_empty()).then(|| vec![k.to_string(), String::new(), "true".into(), rule.to_string()])),
    )?;
    progress("write", format!("model.json, variance_curve.csv, knee_report.csv -> {}", out.display()));
    Ok(())
}

/// Writes `report.json`, `metrics.csv`, `points.csv` and
/// `residual_histogram.csv` into `dir`.
pub fn write_evaluation(dir: &Path, report: &EvaluationReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    write_atomic(&dir.join("report.json"), |w| {
        w.write_all(json.as_bytes()).map_err(|e| Error::io("report.json", e))?;
        w.write_all(b"\n").map_err(|e| Error::io("report.json", e))
    })?;
    write_csv(
        &dir.join("metrics.csv"),
        &["metric", "value"],
        report.metric_rows().into_iter().map(|(k, v)| vec![k.to_string(), v]),
    )?;
    write_csv(
        &dir.join("points.csv"),
        &["measured", "predicted", "lower_bound", "upper_bound"],
        report.bounds.iter().map(|p| {
            vec![
                p.measured.to_string(),
                p.predicted.to_string(),
                p.lower.to_string(),
                p.upper.to_string(),
            ]
        }),
    )?;
    let residuals: Vec<f64> = report.bounds.iter().map(|p| p.predicted - p.measured).collect();
    let hist = Histogram::new(&residuals, DEFAULT_HISTOGRAM_BINS)?;
    write_csv(
        &dir.join("residual_histogram.csv"),
        &["bin_lower", "bin_upper", "count"],
        hist.counts
            .iter()
            .enumerate()
            .map(|(i, c)| vec![hist.edges[i].to_string(), hist.edges[i + 1].to_string(), c.to_string()]),
    )
}
