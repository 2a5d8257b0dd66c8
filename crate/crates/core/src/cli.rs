//! The `symprune` command line.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 an input file
//! could not be read or parsed, 3 invalid flags or inconsistent inputs.
//! `SYMPRUNE_THREADS` caps the worker pool.
//!
//! Every command that writes a file also writes `<file>.manifest.json`
//! recording the resolved configuration and SHA-256 digests of all inputs.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::builder::BoolishValueParser;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use itertools::iproduct;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::calibration::ActivationStats;
use crate::dsnot::{finetune, DsnotConfig, DsnotVariant};
use crate::error::{Error, Result};
use crate::masking::{
    apply_mask, build_nm_mask, build_unstructured_mask, mask_density, ComparisonGroup, NmAxis,
    SparsityMask,
};
use crate::matrix::{DenseMatrix, NormOrder, WeightMatrix};
use crate::reconstruction::{evaluate, Objective};
use crate::scores::{
    compute_scores, score_stochria_mean, ScoreConfig, ScoreInputs, ScoreMatrix, ScoreMethod,
    Strategy, SymmetricVariant,
};
use crate::verification::{greedy_gap, run_suite, Suite};
use crate::VERSION;

pub const THREADS_ENV: &str = "SYMPRUNE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "symprune",
    version,
    about = "Score, mask, evaluate and refine sparse weight matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a weight matrix and write a keep mask.
    Prune(PruneArgs),
    /// Evaluate a reconstruction objective for a mask or pruned matrix.
    Eval(EvalArgs),
    /// Refine a mask with prune-and-grow swaps.
    Finetune(FinetuneArgs),
    /// Run the numeric identity checks.
    Verify(VerifyArgs),
    /// Evaluate a grid of scoring configurations.
    Sweep(SweepArgs),
    /// Compute activation statistics from a token matrix.
    Stats(StatsArgs),
}

/// `n:m` structured sparsity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NmSpec {
    pub n: usize,
    pub m: usize,
}

impl FromStr for NmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("expected a pattern like 2:4, got `{s}`"));
        let (n, m) = s.trim().split_once(':').ok_or_else(bad)?;
        let n = n.parse().map_err(|_| bad())?;
        let m = m.parse().map_err(|_| bad())?;
        if n == 0 || n > m {
            return Err(bad());
        }
        Ok(NmSpec { n, m })
    }
}

impl fmt::Display for NmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.n, self.m)
    }
}

/// Sparsity target: an unstructured ratio or an N:M pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsitySpec {
    Ratio(f64),
    Nm(NmSpec),
}

impl FromStr for SparsitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.contains(':') {
            return s.parse().map(SparsitySpec::Nm);
        }
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("invalid sparsity `{s}`")))?;
        if !(0.0..1.0).contains(&v) {
            return Err(Error::config(format!("sparsity ratio {v} outside [0, 1)")));
        }
        Ok(SparsitySpec::Ratio(v))
    }
}

impl fmt::Display for SparsitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SparsitySpec::Ratio(v) => write!(f, "{v}"),
            SparsitySpec::Nm(nm) => write!(f, "{nm}"),
        }
    }
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Input activation statistics (SYMA), one feature per weight row.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Output-side statistics (SYMA), one feature per weight column; their
    /// column norms feed `owanda` and `general_sym`.
    #[arg(long)]
    pub output_stats: Option<PathBuf>,
    #[arg(long, default_value = "ria")]
    pub method: ScoreMethod,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value = "1")]
    pub p: NormOrder,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "S1")]
    pub strategy: Strategy,
    /// Norm combination used by `symmetric`.
    #[arg(long, default_value = "root_sum_square")]
    pub variant: SymmetricVariant,
    /// Unstructured sparsity ratio (default 0.5 when no pattern is given).
    #[arg(long, conflicts_with = "pattern")]
    pub sparsity: Option<f64>,
    /// N:M pattern such as `2:4`.
    #[arg(long)]
    pub pattern: Option<NmSpec>,
    #[arg(long, default_value = "per_layer")]
    pub group: ComparisonGroup,
    #[arg(long, default_value = "input_dim")]
    pub axis: NmAxis,
    /// StochRIA: average scores over this many consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the score matrix (SYMW).
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long, conflicts_with = "pruned", required_unless_present = "pruned")]
    pub mask: Option<PathBuf>,
    /// Pruned weights (SYMW) instead of a mask.
    #[arg(long)]
    pub pruned: Option<PathBuf>,
    /// Input calibration, tokens x input features (SYMW).
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Output calibration, outputs x tokens (SYMW).
    #[arg(long)]
    pub y: Option<PathBuf>,
    #[arg(long, default_value = "sym")]
    pub objective: Objective,
    /// Write the JSON report here as well.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub stats: PathBuf,
    #[arg(long, default_value = "r2")]
    pub variant: DsnotVariant,
    #[arg(long, default_value_t = 50)]
    pub max_cycles: usize,
    #[arg(long, default_value_t = 0.1)]
    pub update_threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma1: f64,
    #[arg(long, default_value_t = 0.001)]
    pub gamma2: f64,
    #[arg(long, default_value = "2")]
    pub reg_p: NormOrder,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set, value_parser = BoolishValueParser::new())]
    pub relative_grow: bool,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set, value_parser = BoolishValueParser::new())]
    pub relative_prune: bool,
    #[arg(long, default_value_t = 1e-12)]
    pub variance_floor: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// lemmas, oracle or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Input calibration, tokens x input features (SYMW).
    #[arg(long)]
    pub x: PathBuf,
    /// Precomputed statistics; computed from `--x` when absent.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Output calibration, outputs x tokens (SYMW).
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// e.g. `method=ria,wanda;alpha=0.5,1;p=1;beta=0.1;sparsity=0.5,2:4`
    #[arg(long)]
    pub grid: String,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0")]
    pub seeds: String,
    #[arg(long, default_value = "per_layer")]
    pub group: ComparisonGroup,
    #[arg(long, default_value = "input_dim")]
    pub axis: NmAxis,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Token activations, tokens x features (SYMW).
    #[arg(long)]
    pub tokens: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::config(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    // a pool may already exist when running in-process more than once
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Prune(a) => cmd_prune(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Stats(a) => cmd_stats(a),
    }
}

// ---------------------------------------------------------------------------
// manifests

/// Provenance record written next to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: String,
    pub config: Value,
    /// Input role -> path and SHA-256.
    pub inputs: BTreeMap<String, InputDigest>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

struct Inputs(BTreeMap<String, InputDigest>);

impl Inputs {
    fn new() -> Self {
        Inputs(BTreeMap::new())
    }

    /// Reads a file and records its digest.
    fn read(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        self.0.insert(
            role.to_owned(),
            InputDigest {
                path: path.display().to_string(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            },
        );
        Ok(bytes)
    }

    fn matrix(&mut self, role: &str, path: &Path) -> Result<DenseMatrix> {
        DenseMatrix::from_symw_bytes(&self.read(role, path)?).map_err(|e| context(e, path))
    }

    fn stats(&mut self, role: &str, path: &Path) -> Result<ActivationStats> {
        ActivationStats::from_bytes(&self.read(role, path)?).map_err(|e| context(e, path))
    }

    fn mask(&mut self, role: &str, path: &Path) -> Result<SparsityMask> {
        SparsityMask::from_bytes(&self.read(role, path)?).map_err(|e| context(e, path))
    }
}

fn context(e: Error, path: &Path) -> Error {
    match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_manifest(
    command: &str,
    config: Value,
    inputs: Inputs,
    outputs: &[&Path],
    seed: Option<u64>,
    started: Instant,
) -> Result<()> {
    let primary = outputs.first().expect("at least one output");
    let manifest = RunManifest {
        schema: 1,
        command: command.to_owned(),
        config,
        inputs: inputs.0,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        seed,
        version: VERSION.to_owned(),
        duration_ms: started.elapsed().as_millis() as u64,
    };
    write_json(&manifest_path(primary), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn check_features(what: &str, stats: &ActivationStats, expected: usize) -> Result<()> {
    if stats.feature_count() != expected {
        return Err(Error::dim(format!(
            "{what} cover {} features, expected {expected}",
            stats.feature_count()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// prune

fn score_with(
    w: &WeightMatrix,
    stats: Option<&ActivationStats>,
    output_norms: Option<&[f64]>,
    config: &ScoreConfig,
    trials: usize,
) -> Result<ScoreMatrix> {
    config.validate()?;
    if config.method.needs_stats(config.alpha) && stats.is_none() {
        return Err(Error::config(format!(
            "method `{}` with alpha {} requires activation statistics",
            config.method, config.alpha
        )));
    }
    if config.method == ScoreMethod::Stochria && trials > 1 {
        let stats = if config.alpha > 0.0 { stats } else { None };
        return score_stochria_mean(w, stats, config.alpha, config.beta, config.seed, trials);
    }
    compute_scores(
        w,
        ScoreInputs {
            stats,
            output_norms,
        },
        config,
    )
}

fn build_mask(
    scores: &ScoreMatrix,
    sparsity: SparsitySpec,
    group: ComparisonGroup,
    axis: NmAxis,
) -> Result<SparsityMask> {
    match sparsity {
        SparsitySpec::Ratio(eps) => build_unstructured_mask(scores, eps, group),
        SparsitySpec::Nm(nm) => build_nm_mask(scores, nm.n, nm.m, axis),
    }
}

fn cmd_prune(a: PruneArgs) -> Result<i32> {
    let started = Instant::now();
    let mut inputs = Inputs::new();
    let w = inputs.matrix("weights", &a.weights)?;
    let stats = a
        .stats
        .as_deref()
        .map(|p| inputs.stats("stats", p))
        .transpose()?;
    if let Some(s) = &stats {
        check_features("activation statistics", s, w.rows())?;
    }
    let out_stats = a
        .output_stats
        .as_deref()
        .map(|p| inputs.stats("output_stats", p))
        .transpose()?;
    if let Some(s) = &out_stats {
        check_features("output statistics", s, w.cols())?;
    }
    if a.method.needs_output_norms() && out_stats.is_none() {
        return Err(Error::config(format!(
            "method `{}` requires --output-stats",
            a.method
        )));
    }
    if a.trials == 0 {
        return Err(Error::config("--trials must be at least 1"));
    }
    let sparsity = match (a.sparsity, a.pattern) {
        (_, Some(nm)) => SparsitySpec::Nm(nm),
        (Some(eps), None) => SparsitySpec::Ratio(eps),
        (None, None) => SparsitySpec::Ratio(0.5),
    };
    let config = ScoreConfig {
        method: a.method,
        alpha: a.alpha,
        p: a.p,
        beta: a.beta,
        seed: a.seed,
        strategy: a.strategy,
        symmetric_variant: a.variant,
    };
    let scores = score_with(
        &w,
        stats.as_ref(),
        out_stats.as_ref().map(|s| s.col_l2()),
        &config,
        a.trials,
    )?;
    let mask = build_mask(&scores, sparsity, a.group, a.axis)?;
    mask.save(&a.out)?;
    let mut outputs = vec![a.out.as_path()];
    if let Some(path) = &a.scores {
        scores.save(path)?;
        outputs.push(path);
    }

    let values = scores.values();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mean = if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    };
    println!("method={}", config.method);
    println!("shape={}x{}", w.rows(), w.cols());
    println!("pattern={}", mask.pattern());
    println!("kept={}", mask.count_ones());
    println!("density={}", mask_density(&mask));
    if !values.is_empty() {
        println!("score_min={lo}");
        println!("score_max={hi}");
        println!("score_mean={mean}");
    }

    let resolved = json!({
        "score": config,
        "sparsity": sparsity.to_string(),
        "group": a.group,
        "axis": a.axis,
        "trials": a.trials,
    });
    write_manifest("prune", resolved, inputs, &outputs, Some(a.seed), started)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// eval

fn cmd_eval(a: EvalArgs) -> Result<i32> {
    let started = Instant::now();
    let mut inputs = Inputs::new();
    let w = inputs.matrix("weights", &a.weights)?;
    let (pruned, density) = match (&a.mask, &a.pruned) {
        (Some(path), _) => {
            let mask = inputs.mask("mask", path)?;
            (apply_mask(&w, &mask)?, Some(mask_density(&mask)))
        }
        (None, Some(path)) => (inputs.matrix("pruned", path)?, None),
        (None, None) => return Err(Error::config("either --mask or --pruned is required")),
    };
    let x = a.x.as_deref().map(|p| inputs.matrix("x", p)).transpose()?;
    let y = a.y.as_deref().map(|p| inputs.matrix("y", p)).transpose()?;
    if x.is_none() {
        eprintln!("warning: no --x given; the input-side term is 0");
    }
    if y.is_none() && a.objective != Objective::Inprecon {
        eprintln!("warning: no --y given; the output-side term is 0");
    }
    let report = evaluate(a.objective, x.as_ref(), y.as_ref(), &w, &pruned)?;
    let doc = json!({
        "schema": 1,
        "objective": report.objective,
        "value": report.value,
        "input_term": report.input_term,
        "output_term": report.output_term,
        "density": density,
    });
    print!("{}", report.to_text());
    println!("{doc}");
    if let Some(path) = &a.report {
        write_json(path, &doc)?;
        let resolved = json!({ "objective": a.objective });
        write_manifest("eval", resolved, inputs, &[path.as_path()], None, started)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// finetune

fn cmd_finetune(a: FinetuneArgs) -> Result<i32> {
    let started = Instant::now();
    let mut inputs = Inputs::new();
    let w = inputs.matrix("weights", &a.weights)?;
    let mask = inputs.mask("mask", &a.mask)?;
    let stats = inputs.stats("stats", &a.stats)?;
    check_features("activation statistics", &stats, w.rows())?;
    let config = DsnotConfig {
        variant: a.variant,
        max_cycles: a.max_cycles,
        update_threshold: a.update_threshold,
        gamma1: a.gamma1,
        gamma2: a.gamma2,
        reg_p: a.reg_p,
        alpha: a.alpha,
        relative_grow: a.relative_grow,
        relative_prune: a.relative_prune,
        variance_floor: a.variance_floor,
    };
    config.validate()?;
    for warning in config.warnings() {
        eprintln!("warning: {warning}");
    }
    let outcome = finetune(&w, &mask, &stats, &config)?;
    outcome.mask.save(&a.out)?;
    let r = &outcome.report;
    println!("rows={}", r.rows);
    println!("total_swaps={}", r.total_swaps);
    println!(
        "sum_abs_expected_error_before={}",
        r.sum_abs_expected_error_before
    );
    println!(
        "sum_abs_expected_error_after={}",
        r.sum_abs_expected_error_after
    );
    println!("density_before={}", mask_density(&mask));
    println!("density_after={}", r.density);
    let mut outputs = vec![a.out.as_path()];
    if let Some(path) = &a.report {
        write_json(path, r)?;
        outputs.push(path);
    }
    let resolved = serde_json::to_value(&config).map_err(|e| Error::config(e.to_string()))?;
    write_manifest("finetune", resolved, inputs, &outputs, None, started)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify

fn cmd_verify(a: VerifyArgs) -> Result<i32> {
    let suite: Suite = a.suite.parse()?;
    if a.trials == 0 {
        return Err(Error::config("--trials must be at least 1"));
    }
    let outcomes = run_suite(suite, a.trials, a.seed)?;
    for o in &outcomes {
        println!("{o}");
    }
    if suite != Suite::Lemmas {
        let gap = greedy_gap(a.trials.min(50), a.seed)?;
        println!(
            "info greedy_vs_optimal trials={} optimal={} mean_rel_gap={:.4e} max_rel_gap={:.4e}",
            gap.trials, gap.optimal_hits, gap.mean_relative_gap, gap.max_relative_gap
        );
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("summary checks={} failed={failed}", outcomes.len());
    Ok(if failed == 0 { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// sweep

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub method: ScoreMethod,
    pub alpha: f64,
    pub p: NormOrder,
    pub beta: f64,
    pub sparsity: SparsitySpec,
}

fn parse_list<T: FromStr<Err = Error>>(key: &str, raw: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = raw.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(Error::config(format!("empty value in grid entry `{key}`")));
    }
    items.into_iter().map(str::parse).collect()
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::config(format!("invalid number `{s}` in grid")))
}

struct F64(f64);

impl FromStr for F64 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_f64(s).map(F64)
    }
}

/// Parses `key=v1,v2;key=...` into cells in nested key order
/// method, alpha, p, beta, sparsity. Absent keys take a single default.
pub fn parse_grid(spec: &str) -> Result<Vec<SweepCell>> {
    let mut methods = vec![ScoreMethod::Ria];
    let mut alphas = vec![0.5];
    let mut ps = vec![NormOrder::One];
    let mut betas = vec![0.1];
    let mut sparsities = vec![SparsitySpec::Ratio(0.5)];
    let mut seen = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| Error::config(format!("grid entry `{part}` is not key=values")))?;
        let key = key.trim();
        if seen.contains(&key) {
            return Err(Error::config(format!("grid key `{key}` given twice")));
        }
        seen.push(key);
        match key {
            "method" => methods = parse_list(key, values)?,
            "alpha" => {
                alphas = parse_list::<F64>(key, values)?
                    .into_iter()
                    .map(|v| v.0)
                    .collect()
            }
            "p" => ps = parse_list(key, values)?,
            "beta" => {
                betas = parse_list::<F64>(key, values)?
                    .into_iter()
                    .map(|v| v.0)
                    .collect()
            }
            "sparsity" => sparsities = parse_list(key, values)?,
            other => return Err(Error::config(format!("unknown grid key `{other}`"))),
        }
    }
    if seen.is_empty() {
        return Err(Error::config("empty grid"));
    }
    Ok(iproduct!(methods, alphas, ps, betas, sparsities)
        .map(|(method, alpha, p, beta, sparsity)| SweepCell {
            method,
            alpha,
            p,
            beta,
            sparsity,
        })
        .collect())
}

fn parse_seeds(raw: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::config(format!("invalid seed `{s}`")))
        })
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        return Err(Error::config("no seeds given"));
    }
    Ok(seeds)
}

pub const SWEEP_HEADER: &str =
    "row,cell,seed,method,alpha,p,beta,sparsity,g,g_prime,inprecon,density";

fn cmd_sweep(a: SweepArgs) -> Result<i32> {
    let started = Instant::now();
    let cells = parse_grid(&a.grid)?;
    let seeds = parse_seeds(&a.seeds)?;
    let mut inputs = Inputs::new();
    let w = inputs.matrix("weights", &a.weights)?;
    let x = inputs.matrix("x", &a.x)?;
    let stats = match &a.stats {
        Some(p) => inputs.stats("stats", p)?,
        None => ActivationStats::compute(&x),
    };
    check_features("activation statistics", &stats, w.rows())?;
    let y = a.y.as_deref().map(|p| inputs.matrix("y", p)).transpose()?;
    let y_norms = y.as_ref().map(|y| y.row_pnorm(NormOrder::Two));
    if let Some(n) = &y_norms {
        if n.len() != w.cols() {
            return Err(Error::dim(format!(
                "Y has {} rows for {} weight columns",
                n.len(),
                w.cols()
            )));
        }
    } else {
        eprintln!("warning: no --y given; output-side terms are 0");
    }
    if cells.iter().any(|c| c.method.needs_output_norms()) && y_norms.is_none() {
        return Err(Error::config("owanda in the grid requires --y"));
    }

    let jobs: Vec<(usize, &SweepCell, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| seeds.iter().map(move |&s| (i, c, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .enumerate()
        .map(|(row, &(i, cell, seed))| {
            let config = ScoreConfig {
                method: cell.method,
                alpha: cell.alpha,
                p: cell.p,
                beta: cell.beta,
                seed,
                ..ScoreConfig::default()
            };
            let scores = score_with(&w, Some(&stats), y_norms.as_deref(), &config, 1)?;
            let mask = build_mask(&scores, cell.sparsity, a.group, a.axis)?;
            let pruned = apply_mask(&w, &mask)?;
            let g = evaluate(Objective::Sym, Some(&x), y.as_ref(), &w, &pruned)?.value;
            let g2 = evaluate(Objective::SymSquared, Some(&x), y.as_ref(), &w, &pruned)?.value;
            let inp = evaluate(Objective::Inprecon, Some(&x), None, &w, &pruned)?.value;
            Ok(format!(
                "{row},{i},{seed},{},{},{},{},{},{g},{g2},{inp},{}",
                cell.method,
                cell.alpha,
                cell.p,
                cell.beta,
                cell.sparsity,
                mask_density(&mask)
            ))
        })
        .collect::<Result<Vec<String>>>()?;

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(r);
        csv.push('\n');
    }
    fs::write(&a.out, csv)?;
    println!("rows={}", rows.len());
    println!("out={}", a.out.display());
    let resolved = json!({
        "grid": a.grid,
        "cells": cells.len(),
        "seeds": seeds,
        "group": a.group,
        "axis": a.axis,
        "stats_source": if a.stats.is_some() { "file" } else { "x" },
    });
    write_manifest("sweep", resolved, inputs, &[a.out.as_path()], None, started)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// stats

fn cmd_stats(a: StatsArgs) -> Result<i32> {
    let started = Instant::now();
    let mut inputs = Inputs::new();
    let x = inputs.matrix("tokens", &a.tokens)?;
    let stats = ActivationStats::compute(&x);
    stats.save(&a.out)?;
    println!("features={}", stats.feature_count());
    println!("tokens={}", stats.token_count());
    write_manifest(
        "stats",
        json!({}),
        inputs,
        &[a.out.as_path()],
        None,
        started,
    )?;
    Ok(0)
}
