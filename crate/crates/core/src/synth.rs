//! Seeded synthetic spectra with planted informative wavelengths.
//!
//! Each sample gets a latent contamination level from a saturating growth
//! curve over storage time (faster at higher temperature). Every planted
//! peak's height tracks a jittered copy of that level and the recorded TVC is
//! their mean plus measurement noise, so the response is an exact linear
//! function of the planted peak heights. On top of that come a shared smooth
//! baseline, per-sample baseline wobble, nuisance peaks unrelated to the
//! response, a multiplicative scatter factor, an additive offset and white
//! noise.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    join, write_metadata, write_spectra, AxisUnit, Condition, Dataset, SampleRecord, SpectraMatrix, WavelengthAxis,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub samples_per_condition: usize,
    pub n_wavelengths: usize,
    pub axis_start: f64,
    pub axis_step: f64,
    pub axis_unit: AxisUnit,
    /// Column indices of the planted peak centres.
    pub planted_indices: Vec<usize>,
    /// Gaussian peak standard deviation, in columns.
    pub peak_width: f64,
    /// Peak height per log unit of contamination.
    pub peak_gain: f64,
    /// Per-peak jitter of the contamination level (log units).
    pub peak_jitter: f64,
    /// Number of response-independent peaks placed between planted ones.
    pub nuisance_peaks: usize,
    pub nuisance_height: f64,
    /// Additive white noise on every intensity.
    pub noise_sd: f64,
    /// Measurement noise on the recorded TVC (log units).
    pub response_noise_sd: f64,
    /// Amplitude of the per-sample smooth baseline wobble.
    pub baseline_variation: f64,
    /// Constant per-spectrum offset drawn from `[-drift, drift]`.
    pub drift: f64,
    /// Multiplicative scatter factor drawn from this closed range.
    pub scatter: (f64, f64),
    pub initial_log_cfu: f64,
    pub max_log_cfu: f64,
    pub max_time_h: f64,
    /// Growth rate (1/h) at 4 °C; it doubles every 4 °C.
    pub growth_rate_4c: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec::with_width(500, 8, 0)
    }
}

impl SynthSpec {
    /// Default settings with `planted` peaks spread evenly over `n_wavelengths`.
    pub fn with_width(n_wavelengths: usize, planted: usize, seed: u64) -> Self {
        SynthSpec {
            samples_per_condition: 50,
            n_wavelengths,
            axis_start: 900.0,
            axis_step: 2.0,
            axis_unit: AxisUnit::Nm,
            planted_indices: even_centres(n_wavelengths, planted),
            peak_width: 3.0,
            peak_gain: 0.05,
            peak_jitter: 0.5,
            nuisance_peaks: planted.saturating_sub(1),
            nuisance_height: 2.0,
            noise_sd: 1e-4,
            response_noise_sd: 0.2,
            baseline_variation: 0.05,
            drift: 0.5,
            scatter: (0.8, 1.25),
            initial_log_cfu: 3.0,
            max_log_cfu: 9.0,
            max_time_h: 254.0,
            growth_rate_4c: 0.006,
            seed,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.samples_per_condition * Condition::ALL.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadSpec(msg));
        if self.samples_per_condition == 0 {
            return bad("samples_per_condition must be positive".into());
        }
        if self.n_wavelengths < 2 {
            return bad("need at least 2 wavelengths".into());
        }
        if !(self.axis_step.is_finite() && self.axis_step != 0.0 && self.axis_start.is_finite()) {
            return bad("axis start and step must be finite, step non-zero".into());
        }
        if self.planted_indices.is_empty() {
            return bad("no planted peaks".into());
        }
        if let Some(&i) = self.planted_indices.iter().find(|&&i| i >= self.n_wavelengths) {
            return bad(format!("planted index {i} outside 0..{}", self.n_wavelengths));
        }
        let (lo, hi) = self.scatter;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("scatter range ({lo}, {hi}) must be positive and ordered"));
        }
        let non_negative = [
            ("noise_sd", self.noise_sd),
            ("response_noise_sd", self.response_noise_sd),
            ("baseline_variation", self.baseline_variation),
            ("drift", self.drift),
            ("peak_jitter", self.peak_jitter),
            ("nuisance_height", self.nuisance_height),
            ("growth_rate_4c", self.growth_rate_4c),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if !(self.peak_width > 0.0 && self.peak_gain > 0.0) {
            return bad("peak_width and peak_gain must be positive".into());
        }
        if !(self.max_time_h > 0.0 && self.max_log_cfu > self.initial_log_cfu) {
            return bad("max_time_h must be positive and max_log_cfu above initial_log_cfu".into());
        }
        Ok(())
    }

    /// Mean contamination at `time_h` for the given storage condition.
    pub fn growth(&self, condition: Condition, time_h: f64) -> f64 {
        let rate = |celsius: f64| self.growth_rate_4c * 2f64.powf((celsius - 4.0) / 4.0);
        let mu = match condition {
            Condition::Iso4 => rate(4.0),
            Condition::Iso8 => rate(8.0),
            Condition::Iso12 => rate(12.0),
            Condition::Dynamic => (rate(4.0) + rate(8.0) + rate(12.0)) / 3.0,
        };
        self.initial_log_cfu + (self.max_log_cfu - self.initial_log_cfu) * (1.0 - (-mu * time_h).exp())
    }

    /// Centres of the nuisance peaks: midpoints of the widest gaps between
    /// planted centres.
    pub fn nuisance_centres(&self) -> Vec<usize> {
        let mut planted = self.planted_indices.clone();
        planted.sort_unstable();
        planted.dedup();
        let mut gaps: Vec<(usize, usize)> = planted.windows(2).map(|w| (w[1] - w[0], (w[0] + w[1]) / 2)).collect();
        gaps.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut centres: Vec<usize> = gaps.into_iter().take(self.nuisance_peaks).map(|g| g.1).collect();
        centres.sort_unstable();
        centres
    }
}

fn even_centres(n: usize, count: usize) -> Vec<usize> {
    (0..count)
        .map(|j| (((j as f64 + 0.5) * n as f64 / count as f64) as usize).min(n.saturating_sub(1)))
        .collect()
}

fn gaussian(col: f64, centre: f64, width: f64) -> f64 {
    (-0.5 * ((col - centre) / width).powi(2)).exp()
}

/// Generates the dataset described by `spec`. Samples are ordered by
/// condition (Iso4, Iso8, Iso12, Dynamic); every sample draws from its own
/// stream of the seeded generator, so results depend only on the `SynthSpec`.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_wavelengths;
    let cols: Vec<f64> = (0..n).map(|c| c as f64).collect();

    // shared smooth baseline: a few low-frequency cosines on a positive level
    let mut global = ChaCha8Rng::seed_from_u64(spec.seed);
    let terms: Vec<(f64, f64, f64)> = (1..=4)
        .map(|f| {
            (
                global.random_range(0.05..0.3) / f as f64,
                f as f64,
                global.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let baseline: Vec<f64> = cols
        .iter()
        .map(|&c| {
            let u = c / (n - 1) as f64;
            1.0 + terms
                .iter()
                .map(|(a, f, p)| a * (std::f64::consts::PI * f * u + p).cos())
                .sum::<f64>()
        })
        .collect();

    let planted_shape: Vec<Vec<f64>> = spec
        .planted_indices
        .iter()
        .map(|&c| cols.iter().map(|&x| gaussian(x, c as f64, spec.peak_width)).collect())
        .collect();
    let nuisance_shape: Vec<Vec<f64>> = spec
        .nuisance_centres()
        .iter()
        .map(|&c| cols.iter().map(|&x| gaussian(x, c as f64, spec.peak_width)).collect())
        .collect();

    let total = spec.n_samples();
    let mut data = Array2::<f64>::zeros((total, n));
    let mut records = Vec::with_capacity(total);
    let jitter = Normal::new(0.0, spec.peak_jitter).map_err(|e| Error::BadSpec(e.to_string()))?;
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::BadSpec(e.to_string()))?;
    let response_noise = Normal::new(0.0, spec.response_noise_sd).map_err(|e| Error::BadSpec(e.to_string()))?;

    for (ci, &condition) in Condition::ALL.iter().enumerate() {
        for k in 0..spec.samples_per_condition {
            let i = ci * spec.samples_per_condition + k;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64 + 1);

            // stratified storage times cover the whole shelf life
            let u: f64 = rng.random();
            let time = spec.max_time_h * (k as f64 + u) / spec.samples_per_condition as f64;
            let level = spec.growth(condition, time);
            let levels: Vec<f64> = (0..planted_shape.len()).map(|_| level + jitter.sample(&mut rng)).collect();
            let latent = levels.iter().sum::<f64>() / levels.len() as f64;
            let tvc = latent + response_noise.sample(&mut rng);

            let slope = rng.random_range(-1.0..=1.0) * spec.baseline_variation;
            let curve = rng.random_range(-1.0..=1.0) * spec.baseline_variation;
            let nuisance: Vec<f64> = (0..nuisance_shape.len())
                .map(|_| rng.random::<f64>() * spec.nuisance_height)
                .collect();
            // fixed draw count per sample keeps the noise sequence independent
            // of the scatter and drift settings
            let (us, ud): (f64, f64) = (rng.random(), rng.random());
            let scatter = spec.scatter.0 + us * (spec.scatter.1 - spec.scatter.0);
            let offset = spec.drift * (2.0 * ud - 1.0);

            let mut row = data.row_mut(i);
            for c in 0..n {
                let v = 2.0 * cols[c] / (n - 1) as f64 - 1.0;
                let mut s = baseline[c] + slope * v + curve * (v * v - 1.0 / 3.0);
                for (shape, h) in planted_shape.iter().zip(&levels) {
                    s += spec.peak_gain * h * shape[c];
                }
                for (shape, h) in nuisance_shape.iter().zip(&nuisance) {
                    s += h * shape[c];
                }
                if spec.noise_sd > 0.0 {
                    s += noise.sample(&mut rng);
                }
                row[c] = scatter * s + offset;
            }

            records.push(SampleRecord {
                sample_id: format!("S{:04}", i + 1),
                batch: format!("B{}", 1 + k * 2 / spec.samples_per_condition),
                condition,
                storage_time_h: time,
                tvc_log_cfu_g: Some(tvc),
            });
        }
    }

    let axis_values = (0..n).map(|c| spec.axis_start + spec.axis_step * c as f64).collect();
    let axis = WavelengthAxis::new(axis_values, spec.axis_unit)?;
    join(SpectraMatrix::new(axis, data)?, records)
}

/// Number of planted centres with at least one selected column within one
/// peak width.
pub fn planted_hits(spec: &SynthSpec, selected: &[usize]) -> usize {
    spec.planted_indices
        .iter()
        .filter(|&&c| selected.iter().any(|&s| (s as f64 - c as f64).abs() <= spec.peak_width))
        .count()
}

/// Writes `spectra.csv` and `metadata.csv` into `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let emit = |name: &str, f: &dyn Fn(&mut std::fs::File) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f(&mut file)?;
        file.flush().map_err(|e| Error::io(&path, e))
    };
    emit("spectra.csv", &|f| write_spectra(f, dataset.spectra()))?;
    emit("metadata.csv", &|f| write_metadata(f, dataset.records()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Target;
    use crate::preprocess::normalize_matrix;
    use ndarray::{Array1, Axis};

    fn small() -> SynthSpec {
        let mut spec = SynthSpec::with_width(120, 4, 3);
        spec.samples_per_condition = 10;
        spec
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.spectra().intensities(), b.spectra().intensities());
        assert_eq!(a.records(), b.records());
        let mut other = small();
        other.seed = 4;
        assert_ne!(generate(&other).unwrap().spectra().intensities(), a.spectra().intensities());
    }

    #[test]
    fn shape_and_conditions() {
        let ds = generate(&small()).unwrap();
        assert_eq!(ds.len(), 40);
        assert_eq!(ds.spectra().n_wavelengths(), 120);
        for (i, r) in ds.records().iter().enumerate() {
            assert_eq!(r.condition, Condition::ALL[i / 10]);
            assert!((0.0..=254.0).contains(&r.storage_time_h));
        }
    }

    #[test]
    fn noiseless_response_is_linear_in_planted_columns() {
        let mut spec = small();
        spec.noise_sd = 0.0;
        spec.response_noise_sd = 0.0;
        spec.baseline_variation = 0.0;
        spec.nuisance_height = 0.0;
        spec.drift = 0.0;
        spec.scatter = (1.0, 1.0);
        let ds = generate(&spec).unwrap();
        let x = ds.spectra().intensities().select(Axis(1), &spec.planted_indices);
        let y = ds.response(Target::Tvc).unwrap();
        // design with intercept, solved through the normal equations
        let rows = x.nrows();
        let p = x.ncols() + 1;
        let design = Array2::from_shape_fn((rows, p), |(i, j)| if j == 0 { 1.0 } else { x[[i, j - 1]] });
        let a = nalgebra::DMatrix::from_fn(rows, p, |i, j| design[[i, j]]);
        let b = nalgebra::DVector::from_iterator(rows, y.iter().copied());
        let beta = (a.transpose() * &a).lu().solve(&(a.transpose() * b)).unwrap();
        let fitted = Array1::from_shape_fn(rows, |i| (0..p).map(|j| design[[i, j]] * beta[j]).sum::<f64>());
        let worst = fitted.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn scatter_and_offset_vanish_after_normalization() {
        let mut plain = small();
        plain.scatter = (1.0, 1.0);
        plain.drift = 0.0;
        let mut scattered = plain.clone();
        scattered.scatter = (0.5, 2.0);
        scattered.drift = 3.0;
        let (a, _) = normalize_matrix(generate(&plain).unwrap().spectra()).unwrap();
        let (b, _) = normalize_matrix(generate(&scattered).unwrap().spectra()).unwrap();
        let worst = (a.intensities() - b.intensities()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn growth_is_monotone_and_faster_when_warmer() {
        let spec = SynthSpec::default();
        for c in Condition::ALL {
            let mut prev = f64::NEG_INFINITY;
            for t in 0..=254 {
                let g = spec.growth(c, t as f64);
                assert!(g > prev);
                prev = g;
            }
        }
        assert!(spec.growth(Condition::Iso12, 50.0) > spec.growth(Condition::Iso8, 50.0));
        assert!(spec.growth(Condition::Iso8, 50.0) > spec.growth(Condition::Iso4, 50.0));
    }

    #[test]
    fn bad_specs() {
        let mut s = SynthSpec::default();
        s.planted_indices.push(500);
        assert!(matches!(generate(&s).unwrap_err(), Error::BadSpec(_)));
        let mut s = SynthSpec::default();
        s.noise_sd = -1.0;
        assert!(matches!(generate(&s).unwrap_err(), Error::BadSpec(_)));
        let mut s = SynthSpec::default();
        s.scatter = (0.0, 1.0);
        assert!(matches!(generate(&s).unwrap_err(), Error::BadSpec(_)));
    }

    #[test]
    fn hit_counting_uses_peak_width() {
        let spec = SynthSpec::default();
        let c = spec.planted_indices[0];
        assert_eq!(planted_hits(&spec, &[c + 3]), 1);
        assert_eq!(planted_hits(&spec, &[c + 4]), 0);
        assert_eq!(planted_hits(&spec, &spec.planted_indices), 8);
    }
}
