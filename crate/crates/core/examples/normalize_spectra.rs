//! Robust row normalization. Scatter and offset differences between two
//! readings of the same sample disappear after centering on the median and
//! scaling by the MAD.

use spectraflow::preprocess::{mad, median, rnv_normalize};

fn main() -> spectraflow::Result<()> {
    let clean: Vec<f64> = (0..40).map(|i| ((i as f64) / 6.0).sin() + 0.02 * i as f64).collect();
    let scattered: Vec<f64> = clean.iter().map(|v| 1.7 * v + 0.4).collect();

    let (a, stats_a) = rnv_normalize(&clean)?;
    let (b, stats_b) = rnv_normalize(&scattered)?;
    println!("raw:        median {:.4} / {:.4}, MAD {:.4} / {:.4}", stats_a.location, stats_b.location, stats_a.scale, stats_b.scale);
    println!("normalized: median {:.1e}, MAD {:.6}", median(&a)?, mad(&a)?);

    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("largest difference between the two normalized readings: {worst:.1e}");

    // a flat spectrum has no robust scale
    match rnv_normalize(&[1.0; 10]) {
        Err(e) => println!("flat spectrum: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
