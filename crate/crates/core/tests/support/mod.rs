#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use symprune::verification::{random_mask, random_matrix};
use symprune::{ActivationStats, DenseMatrix, SparsityMask};

/// Random refinement instance: `b x c` weights, a random mask at `density`,
/// and statistics from `tokens` shifted activations so that feature means
/// are far from zero.
pub struct RefineInstance {
    pub w: DenseMatrix,
    pub mask: SparsityMask,
    pub stats: ActivationStats,
}

pub fn refine_instance(rng: &mut ChaCha8Rng, b: usize, c: usize, tokens: usize) -> RefineInstance {
    let w = random_matrix(rng, b, c);
    let shift: Vec<f64> = (0..b).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let scale: Vec<f64> = (0..b).map(|_| rng.gen_range(0.2..2.0)).collect();
    let z = random_matrix(rng, tokens, b);
    let x = DenseMatrix::from_fn(tokens, b, |t, j| z.get(t, j) * scale[j] + shift[j]);
    let mask = random_mask(rng, b, c, b * c / 2).unwrap();
    RefineInstance {
        w,
        mask,
        stats: ActivationStats::compute(&x),
    }
}

/// Swap log of one output neuron.
pub type Swaps = Vec<(usize, usize)>;

/// Straight-from-the-definition vanilla prune-and-grow, working directly on
/// the `b x c` layout and recomputing the expected error from scratch at
/// every step.
#[allow(clippy::too_many_arguments)]
pub fn reference_vanilla(
    w: &DenseMatrix,
    mask: &SparsityMask,
    stats: &ActivationStats,
    alpha: f64,
    max_cycles: usize,
    threshold: f64,
    floor: f64,
) -> (Vec<bool>, Vec<Swaps>) {
    let (b, c) = w.shape();
    let mut keep = mask.to_bools();
    let mean = stats.mean();
    let var = stats.variance();
    let act = stats.col_l2();
    let mut logs = Vec::new();
    for q in 0..c {
        let mut log = Vec::new();
        for _ in 0..max_cycles {
            let e: f64 = (0..b)
                .filter(|&r| !keep[r * c + q])
                .map(|r| w.get(r, q) * mean[r])
                .sum();
            if e.abs() < threshold {
                break;
            }
            let s = if e > 0.0 {
                1.0
            } else if e < 0.0 {
                -1.0
            } else {
                0.0
            };
            let grow = (0..b)
                .filter(|&r| !keep[r * c + q])
                .map(|r| (r, s * w.get(r, q) * mean[r] / var[r].max(floor)))
                .fold(None::<(usize, f64)>, |best, (r, v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((r, v)),
                });
            let Some((g, _)) = grow else { break };
            keep[g * c + q] = true;
            let prune = (0..b)
                .filter(|&r| r != g && keep[r * c + q])
                .filter(|&r| s * (w.get(r, q) * mean[r]) < 0.0)
                .map(|r| (r, w.get(r, q).abs() * act[r].powf(alpha)))
                .fold(None::<(usize, f64)>, |best, (r, v)| match best {
                    Some((_, bv)) if bv <= v => best,
                    _ => Some((r, v)),
                });
            let Some((p, _)) = prune else {
                keep[g * c + q] = false;
                break;
            };
            keep[p * c + q] = false;
            log.push((g, p));
        }
        logs.push(log);
    }
    (keep, logs)
}
