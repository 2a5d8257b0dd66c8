//! Post-training pruning of dense weight matrices.
//!
//! Weights are `b x c` matrices (input features by outputs). The crate
//! provides
//!
//! * importance scores from weight norms and calibration statistics
//!   ([`scores`]),
//! * unstructured and N:M keep masks ([`masking`]),
//! * input-side, symmetric and squared reconstruction objectives
//!   ([`reconstruction`]),
//! * training-free prune-and-grow mask refinement ([`dsnot`]),
//! * numeric checks of the score identities plus a brute-force oracle
//!   ([`verification`]),
//! * the binary SYMW / SYMA / SYMM file formats and the `symprune` command
//!   line ([`cli`]).
//!
//! All arithmetic is `f64`; files store `f32`.

pub mod calibration;
pub mod cli;
pub mod dsnot;
pub mod error;
pub mod masking;
pub mod matrix;
pub mod reconstruction;
pub mod rng;
pub mod scores;
pub mod verification;

pub use calibration::ActivationStats;
pub use dsnot::{finetune, DsnotConfig, DsnotVariant, FinetuneOutcome, FinetuneReport};
pub use error::{Error, Result};
pub use masking::{
    apply_mask, build_nm_mask, build_unstructured_mask, mask_density, ComparisonGroup, MaskPattern,
    NmAxis, SparsityMask,
};
pub use matrix::{DenseMatrix, NormOrder, WeightMatrix};
pub use reconstruction::{
    evaluate, inprecon, sym_objective, sym_objective_squared, Objective, ObjectiveReport,
};
pub use scores::{
    compute_scores, ScoreConfig, ScoreInputs, ScoreMatrix, ScoreMethod, Strategy, SymmetricVariant,
};
pub use verification::VerificationOutcome;

/// Crate version as recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
