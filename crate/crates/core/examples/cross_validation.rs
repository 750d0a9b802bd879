//! Repeated k-fold cross-validation. Fold assignments depend only on the
//! seed and the repartition number, so results are reproducible and
//! independent of thread scheduling.

use ndarray::{Array1, Array2};
use spectraflow::pls::{fold_assignment, monte_carlo_cv, CvSpec};

fn main() -> spectraflow::Result<()> {
    let x = Array2::from_shape_fn((40, 6), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0 + (i as f64 * 0.1 * j as f64).sin());
    let y = Array1::from_shape_fn(40, |i| 2.0 * x[[i, 0]] - x[[i, 2]] + 0.05 * ((i * 13) % 7) as f64);

    let cv = CvSpec { folds: 5, repartitions: 10, seed: 7 };
    println!("repartition 0 folds: {:?}", fold_assignment(40, &cv, 0)?);
    println!("repartition 1 folds: {:?}", fold_assignment(40, &cv, 1)?);

    for k in 1..=4 {
        let stats = monte_carlo_cv(x.view(), y.view(), &cv, k)?;
        println!("k = {k}: RMSECV {:.4} +/- {:.4}", stats.mean, stats.sd);
    }

    // leave-one-out has a single possible partition, so the seed is irrelevant
    let loo = |seed| monte_carlo_cv(x.view(), y.view(), &CvSpec { folds: 40, repartitions: 2, seed }, 2);
    println!("leave-one-out, seeds 1 and 99: {:.6} {:.6}", loo(1)?.mean, loo(99)?.mean);
    Ok(())
}
