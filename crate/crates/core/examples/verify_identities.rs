//! Runs the numeric identity checks and the brute-force comparison, as
//! `symprune verify` does.

use symprune::verification::{greedy_gap, run_suite, Suite};

fn main() -> symprune::Result<()> {
    let outcomes = run_suite(Suite::All, 100, 1)?;
    for o in &outcomes {
        println!("{o}");
    }
    let gap = greedy_gap(100, 1)?;
    println!(
        "greedy vs optimal: hits={}/{} mean_gap={:.4} max_gap={:.4}",
        gap.optimal_hits, gap.trials, gap.mean_relative_gap, gap.max_relative_gap
    );
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} checks, {failed} failed", outcomes.len());
    Ok(())
}
