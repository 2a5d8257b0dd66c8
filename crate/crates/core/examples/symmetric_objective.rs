//! The three reconstruction objectives on a 2x2 example, and the identity
//! that makes a single-entry prune cost exactly `|W_jk| (‖X_:j‖ + ‖Y_k:‖)`.

use symprune::verification::g_matrix;
use symprune::{evaluate, DenseMatrix, NormOrder, Objective};

fn main() -> symprune::Result<()> {
    let w = DenseMatrix::from_rows(&[[1.0, -2.0], [3.0, 0.5]]);
    let x = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]]);
    let y = DenseMatrix::from_rows(&[[2.0, 0.0, 1.0], [0.0, 1.0, 1.0]]);

    let xn = x.col_pnorm(NormOrder::Two);
    let yn = y.row_pnorm(NormOrder::Two);
    for (j, xj) in xn.iter().enumerate() {
        for (k, yk) in yn.iter().enumerate() {
            let mut pruned = w.clone();
            pruned.set(j, k, 0.0);
            let g = evaluate(Objective::Sym, Some(&x), Some(&y), &w, &pruned)?;
            let predicted = w.get(j, k).abs() * (xj + yk);
            println!(
                "prune ({j},{k}): sym={:.6} predicted={predicted:.6}",
                g.value
            );
        }
    }

    let mut pruned = w.clone();
    pruned.set(0, 1, 0.0);
    pruned.set(1, 1, 0.0);
    for objective in [Objective::Inprecon, Objective::Sym, Objective::SymSquared] {
        let r = evaluate(objective, Some(&x), Some(&y), &w, &pruned)?;
        println!("{}", r.to_text().replace('\n', " "));
    }

    let g = g_matrix(&w);
    println!("‖G‖_F={:.6} ‖W‖_F={:.6}", g.frobenius(), w.frobenius());
    Ok(())
}
