//! Ranks every scoring method by the symmetric reconstruction error of the
//! 50% mask it produces on a synthetic layer.

use symprune::verification::stripe_fixture;
use symprune::{
    apply_mask, build_unstructured_mask, compute_scores, sym_objective, ActivationStats,
    ComparisonGroup, ScoreConfig, ScoreInputs, ScoreMethod,
};

fn main() -> symprune::Result<()> {
    let layer = stripe_fixture(7, 64, 128);
    let stats = ActivationStats::compute(&layer.x);
    let out = layer.y.row_pnorm(symprune::NormOrder::Two);
    let inputs = ScoreInputs {
        stats: Some(&stats),
        output_norms: Some(&out),
    };

    let mut rows = Vec::new();
    for method in ScoreMethod::ALL {
        let config = ScoreConfig {
            method,
            ..ScoreConfig::default()
        };
        let scores = compute_scores(&layer.w, inputs, &config)?;
        let mask = build_unstructured_mask(&scores, 0.5, ComparisonGroup::PerLayer)?;
        let pruned = apply_mask(&layer.w, &mask)?;
        let g = sym_objective(&layer.x, &layer.y, &layer.w, &pruned)?;
        rows.push((method, g.value, g.input_term, g.output_term));
    }
    rows.sort_by(|a, b| a.1.total_cmp(&b.1));

    println!(
        "{:<12} {:>12} {:>12} {:>12}",
        "method", "g", "input", "output"
    );
    for (method, g, inp, out) in rows {
        println!("{:<12} {g:>12.4} {inp:>12.4} {out:>12.4}", method.name());
    }
    Ok(())
}
