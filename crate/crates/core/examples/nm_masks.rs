//! 2:4 masks along both axes, printed as keep maps.

use symprune::verification::stripe_fixture;
use symprune::{
    build_nm_mask, compute_scores, mask_density, ActivationStats, NmAxis, ScoreConfig, ScoreInputs,
    SparsityMask,
};

fn show(mask: &SparsityMask) {
    for r in 0..mask.rows() {
        let line: String = (0..mask.cols())
            .map(|c| if mask.get(r, c) { '#' } else { '.' })
            .collect();
        println!("  {line}");
    }
}

fn main() -> symprune::Result<()> {
    let layer = stripe_fixture(3, 8, 32);
    let stats = ActivationStats::compute(&layer.x);
    let scores = compute_scores(
        &layer.w,
        ScoreInputs {
            stats: Some(&stats),
            output_norms: None,
        },
        &ScoreConfig::default(),
    )?;

    for axis in [NmAxis::InputDim, NmAxis::OutputDim] {
        let mask = build_nm_mask(&scores, 2, 4, axis)?;
        println!(
            "{} density={:.3} (groups of 4 run {})",
            mask.pattern(),
            mask_density(&mask),
            match axis {
                NmAxis::InputDim => "down each column",
                NmAxis::OutputDim => "along each row",
            }
        );
        show(&mask);
    }
    Ok(())
}
