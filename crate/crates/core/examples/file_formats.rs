//! Writes and reads back the three binary formats: SYMW matrices, SYMA
//! statistics and SYMM masks.

use symprune::verification::stripe_fixture;
use symprune::{build_nm_mask, ActivationStats, DenseMatrix, NmAxis, ScoreMatrix, SparsityMask};

fn main() -> symprune::Result<()> {
    let dir = std::env::temp_dir().join(format!("symprune-formats-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let layer = stripe_fixture(9, 16, 40);

    let w_path = dir.join("w.symw");
    layer.w.save(&w_path)?;
    let w = DenseMatrix::load(&w_path)?;
    let max_err = w
        .values()
        .iter()
        .zip(layer.w.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!(
        "SYMW {:?} bytes={} f32 rounding={max_err:.2e}",
        w.shape(),
        std::fs::metadata(&w_path)?.len()
    );

    let stats_path = dir.join("x.syma");
    ActivationStats::compute(&layer.x).save(&stats_path)?;
    let stats = ActivationStats::load(&stats_path)?;
    println!(
        "SYMA features={} tokens={}",
        stats.feature_count(),
        stats.token_count()
    );

    let mask_path = dir.join("m.symm");
    let scores = ScoreMatrix::new(w.map(f64::abs))?;
    let mask = build_nm_mask(&scores, 2, 4, NmAxis::InputDim)?;
    mask.save(&mask_path)?;
    let back = SparsityMask::load(&mask_path)?;
    println!(
        "SYMM {} kept={} bytes={} identical={}",
        back.pattern(),
        back.count_ones(),
        std::fs::metadata(&mask_path)?.len(),
        back == mask
    );

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
