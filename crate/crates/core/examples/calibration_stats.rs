//! Activation statistics accumulated batch by batch and merged, compared
//! with a single pass over all tokens.

use symprune::verification::stripe_fixture;
use symprune::{ActivationStats, DenseMatrix};

fn main() -> symprune::Result<()> {
    let x = stripe_fixture(2, 6, 300).x;
    let mut merged = ActivationStats::empty(x.cols());
    for start in (0..x.rows()).step_by(64) {
        let end = (start + 64).min(x.rows());
        let batch = DenseMatrix::from_fn(end - start, x.cols(), |i, j| x.get(start + i, j));
        merged = merged.merge(&ActivationStats::compute(&batch))?;
    }
    let whole = ActivationStats::compute(&x);

    println!(
        "tokens={} features={}",
        merged.token_count(),
        merged.feature_count()
    );
    println!(
        "{:>4} {:>10} {:>10} {:>10} {:>10}",
        "j", "l2", "mean", "var", "|diff|"
    );
    for j in 0..x.cols() {
        let diff = (merged.col_l2()[j] - whole.col_l2()[j]).abs()
            + (merged.mean()[j] - whole.mean()[j]).abs()
            + (merged.variance()[j] - whole.variance()[j]).abs();
        println!(
            "{j:>4} {:>10.4} {:>10.4} {:>10.4} {diff:>10.2e}",
            merged.col_l2()[j],
            merged.mean()[j],
            merged.variance()[j]
        );
    }
    Ok(())
}
