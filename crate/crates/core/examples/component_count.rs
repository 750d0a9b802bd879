//! Choosing the number of PLS components: cross-validated explained variance
//! for 1..=20 components, spline smoothing, then the two-line knee.

use spectraflow::ingest::{partition_by_condition, Target};
use spectraflow::pls::{knee_point, smooth_curve, variance_curve, CurveKind, CvSpec};
use spectraflow::preprocess::normalize_matrix;
use spectraflow::synth::{generate, SynthSpec};

fn main() -> spectraflow::Result<()> {
    let data = generate(&SynthSpec::default())?;
    let train = partition_by_condition(&data)?.train.expect("isothermal samples");
    let (normalized, _) = normalize_matrix(train.spectra())?;
    let y = train.response(Target::Tvc)?;

    let cv = CvSpec::default();
    let mut curve = variance_curve(normalized.intensities().view(), y.view(), 20, &cv, CurveKind::CvY)?;
    curve.smoothed = Some(smooth_curve(&curve.abscissae(), &curve.values(), 1.0)?);
    let knee = knee_point(&curve)?;

    println!(" k   train R2   CV Q2   smoothed");
    let smoothed = curve.smoothed.as_ref().unwrap();
    for (p, s) in curve.points.iter().zip(smoothed) {
        let mark = if p.n_components == knee.k { "  <- knee" } else { "" };
        println!("{:>2}   {:.4}    {:.4}  {:.4}{mark}", p.n_components, p.train_explained, p.cv_explained, s);
    }
    Ok(())
}
