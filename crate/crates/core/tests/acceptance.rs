//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.
//!
//! cargo test --release --test acceptance

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use spectraflow::evaluate::{evaluate_model, linear_fit, prediction_bounds};
use spectraflow::feature_select::{fit_regression_tree, lsboost_fit, BoostParams, SelectionPolicy, TreeNode, TreeParams};
use spectraflow::ingest::{partition_by_condition, Target};
use spectraflow::pls::{fold_assignments, knee_point_xy, monte_carlo_cv, pls_fit, select_on_normalized, train_pipeline, CvSpec, PipelineConfig};
use spectraflow::preprocess::{mad, normalize_matrix, rnv_normalize};
use spectraflow::synth::{generate, planted_hits, SynthSpec};

type Outcome = Result<String, String>;

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn sort_median(v: &[f64]) -> f64 {
    let s = sorted(v);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn sort_mad(v: &[f64]) -> f64 {
    let m = sort_median(v);
    let dev: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    sort_median(&dev)
}

fn random_spectrum(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(20..400);
    let level = rng.random_range(-5.0..5.0);
    let spread = rng.random_range(0.01..100.0);
    let freq = rng.random_range(1.0..8.0);
    (0..n)
        .map(|i| {
            let u = i as f64 / n as f64;
            level + spread * ((freq * u * 6.28).sin() + 0.3 * rng.sample::<f64, _>(StandardNormal))
        })
        .collect()
}

fn normalization_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_med, mut worst_mad, mut worst_affine) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let s = random_spectrum(&mut rng);
        let (z, _) = rnv_normalize(&s).map_err(|e| e.to_string())?;
        let scale = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        worst_med = worst_med.max(sort_median(&z).abs() / scale);
        worst_mad = worst_mad.max((sort_mad(&z) - 1.0).abs());

        let a = rng.random_range(0.01..100.0);
        let b = rng.random_range(-1e3..1e3);
        let t: Vec<f64> = s.iter().map(|v| a * v + b).collect();
        let (zt, _) = rnv_normalize(&t).map_err(|e| e.to_string())?;
        for (u, v) in z.iter().zip(&zt) {
            worst_affine = worst_affine.max((u - v).abs());
        }
    }
    let detail = format!("max |median|/scale {worst_med:.1e}, max |MAD-1| {worst_mad:.1e}, max affine diff {worst_affine:.1e}");
    if worst_med <= 1e-12 && worst_mad <= 1e-12 && worst_affine <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mad_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..10_000 {
        let n = rng.random_range(1..60);
        let v: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    rng.random_range(0..5) as f64
                } else {
                    rng.random_range(-1e3..1e3)
                }
            })
            .collect();
        let got = mad(&v).map_err(|e| e.to_string())?;
        let want = sort_mad(&v);
        if got.to_bits() != want.to_bits() {
            return Err(format!("vector {case} (n = {n}): mad {got} vs full sort {want}"));
        }
    }
    Ok("10000 vectors, bit-identical".into())
}

fn exhaustive_root_gain(x: &Array2<f64>, r: &Array1<f64>, min_leaf: usize) -> f64 {
    let sse = |idx: &[usize]| {
        let m = idx.iter().map(|&i| r[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (r[i] - m).powi(2)).sum::<f64>()
    };
    let all: Vec<usize> = (0..x.nrows()).collect();
    let parent = sse(&all);
    let mut best = 0.0f64;
    for j in 0..x.ncols() {
        let mut vals = sorted(&x.column(j).to_vec());
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (l, rr): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[[i, j]] <= thr);
            if l.len() >= min_leaf && rr.len() >= min_leaf {
                best = best.max(parent - sse(&l) - sse(&rr));
            }
        }
    }
    best
}

fn tree_split_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let x: Array2<f64> = Array2::from_shape_fn((20, 3), |_| rng.random_range(-1.0..1.0));
        let r = Array1::from_shape_fn(20, |_| rng.random_range(-2.0..2.0));
        let tree = fit_regression_tree(
            x.view(),
            r.view(),
            TreeParams {
                max_depth: Some(2),
                min_leaf: 1,
            },
        )
        .map_err(|e| e.to_string())?;
        let TreeNode::Split { gain, .. } = tree else {
            return Err(format!("case {case}: no root split"));
        };
        let oracle = exhaustive_root_gain(&x, &r, 1);
        let rel = (gain - oracle).abs() / oracle.max(1e-300);
        worst = worst.max(rel);
        if rel > 1e-9 {
            return Err(format!("case {case}: gain {gain} vs exhaustive {oracle}"));
        }
    }
    Ok(format!("100 datasets, max relative gain difference {worst:.1e}"))
}

fn boosting_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut runs = 0;
    for case in 0..50 {
        let rows = rng.random_range(30..120);
        let cols = rng.random_range(2..12);
        let x: Array2<f64> = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(rows, |i| -> f64 {
            (2.0 * x[[i, 0]]).sin() + x[[i, 1]].powi(2) + 0.3 * rng.sample::<f64, _>(StandardNormal)
        });
        for lr in [0.05, 0.1, 1.0] {
            let ens = lsboost_fit(
                x.view(),
                y.view(),
                BoostParams {
                    learn_rate: lr,
                    ..BoostParams::default()
                },
            )
            .map_err(|e| e.to_string())?;
            if ens.loss_trace.len() != 101 {
                return Err(format!("case {case}: trace has {} entries", ens.loss_trace.len()));
            }
            for (m, w) in ens.loss_trace.windows(2).enumerate() {
                if w[1] > w[0] * (1.0 + 1e-12) {
                    return Err(format!("case {case}, lr {lr}: RMSE rose at stage {}: {} -> {}", m + 1, w[0], w[1]));
                }
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs of 100 cycles, traces non-increasing"))
}

fn pls_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut worst_coef, mut worst_orth) = (0.0f64, 0.0f64);
    for case in 0..50 {
        let x = Array2::from_shape_fn((30, 5), |_| rng.sample::<f64, _>(StandardNormal));
        let beta: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y = Array1::from_shape_fn(30, |i| {
            1.5 + (0..5).map(|j| beta[j] * x[[i, j]]).sum::<f64>() + 0.1 * rng.sample::<f64, _>(StandardNormal)
        });
        let model = pls_fit(x.view(), y.view(), 5).map_err(|e| e.to_string())?;

        // least squares with intercept through the normal equations
        let xm = x.mean_axis(Axis(0)).unwrap();
        let ym = y.mean().unwrap();
        let xc = nalgebra::DMatrix::from_fn(30, 5, |i, j| x[[i, j]] - xm[j]);
        let yc = nalgebra::DVector::from_fn(30, |i, _| y[i] - ym);
        let ls = (xc.transpose() * &xc)
            .cholesky()
            .ok_or("normal equations not positive definite")?
            .solve(&(xc.transpose() * yc));
        for j in 0..5 {
            worst_coef = worst_coef.max((model.coefficients()[j] - ls[j]).abs());
        }

        let t = model.scores(x.view()).map_err(|e| e.to_string())?;
        for a in 0..5 {
            for b in 0..a {
                let (ta, tb) = (t.column(a), t.column(b));
                let cos = ta.dot(&tb) / (ta.dot(&ta).sqrt() * tb.dot(&tb).sqrt());
                worst_orth = worst_orth.max(cos.abs());
            }
        }
        if worst_coef > 1e-6 || worst_orth > 1e-8 {
            return Err(format!(
                "case {case}: coefficient diff {worst_coef:.1e}, score cosine {worst_orth:.1e}"
            ));
        }
    }
    Ok(format!(
        "50 systems, max coefficient diff {worst_coef:.1e}, max score cosine {worst_orth:.1e}"
    ))
}

fn knee_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut within = 0;
    let mut worst_noiseless = 0.0f64;
    for case in 0..200 {
        let n = rng.random_range(10..31);
        let brk = rng.random_range(3..n - 3);
        let s1 = rng.random_range(0.5..3.0);
        let ratio = rng.random_range(5.0..30.0);
        let s2 = s1 / ratio * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let xs: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let clean: Vec<f64> = (0..n)
            .map(|i| {
                if i <= brk {
                    s1 * i as f64
                } else {
                    s1 * brk as f64 + s2 * (i - brk) as f64
                }
            })
            .collect();
        let range = clean.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - clean.iter().cloned().fold(f64::INFINITY, f64::min);

        let (idx, objective) = knee_point_xy(&xs, &clean).map_err(|e| e.to_string())?;
        if idx != brk {
            return Err(format!("noiseless case {case}: knee {idx}, true break {brk}"));
        }
        worst_noiseless = worst_noiseless.max(objective[idx - 1] / range);

        let noise = Normal::new(0.0, 0.02 * range).unwrap();
        let noisy: Vec<f64> = clean.iter().map(|v| v + rng.sample(noise)).collect();
        let (idx, _) = knee_point_xy(&xs, &noisy).map_err(|e| e.to_string())?;
        if idx.abs_diff(brk) <= 1 {
            within += 1;
        }
    }
    let detail = format!(
        "noisy: {within}/200 within one of the true break; noiseless: all exact, max objective/range {worst_noiseless:.1e}"
    );
    if within >= 190 && worst_noiseless < 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cv_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for case in 0..20 {
        let rows = rng.random_range(12..80);
        let folds = rng.random_range(2..=rows.min(12));
        let cv = CvSpec {
            folds,
            repartitions: 5,
            seed: rng.random(),
        };
        let a = fold_assignments(rows, &cv).map_err(|e| e.to_string())?;
        let b = fold_assignments(rows, &cv).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("case {case}: fold assignments differ for identical seeds"));
        }
        for rep in &a {
            let mut sizes = vec![0usize; folds];
            for &f in rep {
                sizes[f] += 1;
            }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            if hi - lo > 1 {
                return Err(format!("case {case}: fold sizes {sizes:?}"));
            }
        }
    }

    let x = Array2::from_shape_fn((25, 6), |_| rng.sample::<f64, _>(StandardNormal));
    let y = Array1::from_shape_fn(25, |i| x[[i, 0]] - 0.5 * x[[i, 3]] + 0.1 * rng.sample::<f64, _>(StandardNormal));
    let cv = CvSpec {
        folds: 5,
        repartitions: 4,
        seed: 9,
    };
    let s1 = monte_carlo_cv(x.view(), y.view(), &cv, 3).map_err(|e| e.to_string())?;
    let s2 = monte_carlo_cv(x.view(), y.view(), &cv, 3).map_err(|e| e.to_string())?;
    if s1 != s2 {
        return Err("monte-carlo statistics differ for identical seeds".into());
    }
    let loo = |seed| {
        monte_carlo_cv(
            x.view(),
            y.view(),
            &CvSpec {
                folds: 25,
                repartitions: 3,
                seed,
            },
            3,
        )
    };
    let (l1, l2) = (loo(1).map_err(|e| e.to_string())?, loo(12345).map_err(|e| e.to_string())?);
    if l1.mean.to_bits() != l2.mean.to_bits() || l1.sd != 0.0 {
        return Err(format!("leave-one-out depends on seed: {} vs {}", l1.mean, l2.mean));
    }
    Ok("20 specs: identical folds and stats, fold sizes within 1; leave-one-out seed-independent".into())
}

fn train_and_evaluate(spec: &SynthSpec, feature_selection: bool) -> Result<(spectraflow::pls::TrainedPipeline, spectraflow::evaluate::EvaluationReport), String> {
    let data = generate(spec).map_err(|e| e.to_string())?;
    let parts = partition_by_condition(&data).map_err(|e| e.to_string())?;
    let (train, test) = (parts.train.ok_or("no training samples")?, parts.test.ok_or("no test samples")?);
    let config = PipelineConfig {
        feature_selection,
        cv: CvSpec {
            seed: spec.seed,
            ..CvSpec::default()
        },
        ..PipelineConfig::default()
    };
    let trained = train_pipeline(&train, Target::Tvc, &config).map_err(|e| e.to_string())?;
    let report = evaluate_model(&trained.model, &test, Target::Tvc).map_err(|e| e.to_string())?;
    Ok((trained, report))
}

fn planted_recovery() -> Outcome {
    let started = Instant::now();
    let spec = SynthSpec::default();
    let (trained, report) = train_and_evaluate(&spec, true)?;
    let elapsed = started.elapsed();
    let hits = planted_hits(&spec, trained.subset().indices());
    let detail = format!(
        "{hits}/8 planted peaks hit ({} wavelengths kept, k = {}), a = {:.3}, RMSE = {:.3} {}, {:.1?}",
        trained.subset().len(),
        trained.k(),
        report.a,
        report.rmse_pred,
        report.units,
        elapsed
    );
    if hits >= 6 && (0.7..=1.1).contains(&report.a) && report.rmse_pred < 1.0 && elapsed.as_secs_f64() < 120.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn feature_count() -> Outcome {
    let spec = SynthSpec::with_width(2075, 8, 0);
    let data = generate(&spec).map_err(|e| e.to_string())?;
    let train = partition_by_condition(&data).map_err(|e| e.to_string())?.train.ok_or("no training samples")?;
    let y = train.response(Target::Tvc).map_err(|e| e.to_string())?;
    let (normalized, _) = normalize_matrix(train.spectra()).map_err(|e| e.to_string())?;
    let (_, _, subset) = select_on_normalized(
        normalized.intensities(),
        &y,
        normalized.axis(),
        BoostParams::default(),
        SelectionPolicy::Positive,
    )
    .map_err(|e| e.to_string())?;
    let detail = format!("{} of 2075 wavelengths selected", subset.len());
    if (30..=300).contains(&subset.len()) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ablation() -> Outcome {
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..10 {
        let spec = SynthSpec {
            seed,
            ..SynthSpec::default()
        };
        let (_, with) = train_and_evaluate(&spec, true)?;
        let (_, without) = train_and_evaluate(&spec, false)?;
        if with.rmse_pred <= without.rmse_pred {
            wins += 1;
        }
        pairs.push(format!("{:.2}/{:.2}", with.rmse_pred, without.rmse_pred));
    }
    let detail = format!("selection at least as good in {wins}/10 seeds (RMSE with/without: {})", pairs.join(" "));
    if wins >= 8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn interval_coverage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let reps = 10_000;
    let mut covered = 0;
    for _ in 0..reps {
        let n = rng.random_range(8..40);
        let sigma = rng.random_range(0.05..2.0);
        let (a, b) = (rng.random_range(0.3..1.5), rng.random_range(-2.0..2.0));
        let noise = Normal::new(0.0, sigma).unwrap();
        let measured = Array1::from_shape_fn(n, |_| rng.random_range(0.0..10.0));
        let predicted = measured.mapv(|m| a * m + b) + Array1::from_shape_fn(n, |_| rng.sample(noise));
        let fit = linear_fit(predicted.view(), measured.view()).map_err(|e| e.to_string())?;
        let x0 = rng.random_range(0.0..10.0);
        let y0 = a * x0 + b + rng.sample(noise);
        let (lo, hi) = prediction_bounds(&fit, &[x0], 0.95).map_err(|e| e.to_string())?[0];
        if (lo..=hi).contains(&y0) {
            covered += 1;
        }
    }
    let rate = covered as f64 / reps as f64;
    let detail = format!("empirical coverage {:.2}% over {reps} fits", 100.0 * rate);
    if (0.92..=0.98).contains(&rate) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("normalization suite", normalization_suite),
        ("MAD oracle", mad_oracle),
        ("tree-split oracle", tree_split_oracle),
        ("boosting monotonicity", boosting_monotonicity),
        ("PLS correctness", pls_correctness),
        ("knee-point oracle", knee_oracle),
        ("Monte-Carlo CV determinism", cv_determinism),
        ("end-to-end planted recovery", planted_recovery),
        ("feature-count plausibility", feature_count),
        ("ablation direction", ablation),
        ("prediction-interval coverage", interval_coverage),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2}. {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2}. {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{}/{} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
