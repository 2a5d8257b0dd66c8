//! StochRIA at several sampling ratios: how much of the RIA mask survives
//! when the row/column norms are estimated from a random subset.

use symprune::scores::{score_ria, score_stochria_mean};
use symprune::verification::stripe_fixture;
use symprune::{build_unstructured_mask, ActivationStats, ComparisonGroup, NormOrder};

fn main() -> symprune::Result<()> {
    let layer = stripe_fixture(5, 128, 64);
    let stats = ActivationStats::compute(&layer.x);
    let ria = score_ria(&layer.w, &stats, 0.5, NormOrder::One)?;
    let reference = build_unstructured_mask(&ria, 0.5, ComparisonGroup::PerLayer)?;
    let total = reference.rows() * reference.cols();

    for beta in [0.05, 0.1, 0.25, 0.5, 1.0] {
        for trials in [1, 4] {
            let s = score_stochria_mean(&layer.w, Some(&stats), 0.5, beta, 0, trials)?;
            let mask = build_unstructured_mask(&s, 0.5, ComparisonGroup::PerLayer)?;
            let agree = (0..total)
                .filter(|&i| mask.get_linear(i) == reference.get_linear(i))
                .count();
            println!(
                "beta={beta:<5} trials={trials} agreement={:.4}",
                agree as f64 / total as f64
            );
        }
    }
    Ok(())
}
