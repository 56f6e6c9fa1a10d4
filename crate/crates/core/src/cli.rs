//! Command-line front end. Every command accepts `--config <json>`; flags
//! given on the command line override keys of the same name in the file.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::{run_bench, BenchConfig, Method};
use crate::data::{
    load_csv, sample_synthetic, unstandardize_with_intercept, Dataset, GroundTruth, SyntheticSpec, Task,
};
use crate::error::{Error, Result};
use crate::modelsel::{
    cross_validate_with_lambdas, cv_lambda_grid, SimilaritySpec, DEFAULT_ALPHA_GRID, DEFAULT_N_LAMBDAS,
};
use crate::report::{to_json_string, Schema};
use crate::similarity::{GroupPartition, PenaltySpec, SimilarityVariant, DEFAULT_CLAMP};
use crate::solver::linear::log_grid;
use crate::solver::{
    fit, fit_logistic, fit_logistic_path, fit_path, lambda_max, logistic_lambda_max, InitStrategy, SolverConfig,
};
use crate::theory::{draw_noise, sign_recovery_check, standardized_truth};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_CONDITION_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "iilasso", version, about = "Correlation-aware sparse regression")]
pub struct Cli {
    /// Increase log verbosity (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit at a single (lambda, alpha).
    Fit(FitArgs),
    /// Fit a descending lambda path at fixed alpha.
    Path(PathArgs),
    /// k-fold cross-validation over the (lambda, alpha) grid.
    Cv(CvArgs),
    /// Draw a block-correlated synthetic dataset.
    Simulate(SimulateArgs),
    /// Evaluate the sign-recovery conditions for a known true model.
    CheckSign(CheckSignArgs),
    /// Replicated train/validation/test benchmark.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverFlags {
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long, value_enum)]
    pub init: Option<InitStrategy>,
    #[arg(long)]
    pub active_set: Option<bool>,
    #[arg(long)]
    pub max_outer_iters: Option<usize>,
}

impl SolverFlags {
    fn build(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            tol: self.tol.unwrap_or(d.tol),
            max_sweeps: self.max_sweeps.unwrap_or(d.max_sweeps),
            init: self.init.unwrap_or(d.init),
            active_set: self.active_set.or(d.active_set),
            max_outer_iters: self.max_outer_iters.unwrap_or(d.max_outer_iters),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub similarity: Option<SimilarityVariant>,
    #[arg(long)]
    pub clamp: Option<f64>,
    /// Group label per column, comma separated (group similarity only).
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<usize>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub similarity: Option<SimilarityVariant>,
    #[arg(long)]
    pub clamp: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<usize>>,
    /// Explicit descending lambda values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub n_lambdas: Option<usize>,
    /// Smallest lambda as a fraction of lambda_max.
    #[arg(long)]
    pub min_ratio: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Coefficient table (one row per lambda).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub n_lambdas: Option<usize>,
    #[arg(long, value_enum)]
    pub similarity: Option<SimilarityVariant>,
    #[arg(long)]
    pub clamp: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grid scores in long format.
    #[arg(long)]
    pub scores_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecFlags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub coef: Option<Vec<f64>>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
}

impl SpecFlags {
    fn build(&self, seed: u64) -> Result<SyntheticSpec> {
        let d = SyntheticSpec::default();
        let b = self.b.unwrap_or(d.b);
        let q = self.q.unwrap_or(d.q);
        let coef = match &self.coef {
            Some(c) => c.clone(),
            None if b == d.b => d.coef,
            None => (0..b)
                .map(|l| (b - l) as f64 * if l % 2 == 0 { 1.0 } else { -1.0 })
                .collect(),
        };
        let spec = SyntheticSpec {
            n: self.n.unwrap_or(d.n),
            p: self.p.unwrap_or(b * q),
            b,
            q,
            rho: self.rho.unwrap_or(d.rho),
            coef,
            noise_sd: self.noise_sd.unwrap_or(d.noise_sd),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecFlags,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the raw draw instead of the standardized data.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub raw: Option<bool>,
    /// Response column name in the CSV.
    #[arg(long)]
    pub target: Option<String>,
    /// CSV destination for the design and response.
    #[arg(long)]
    pub out_data: Option<PathBuf>,
    /// JSON destination for the ground truth (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSignArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Ground-truth JSON with `beta_star` (and optionally `noise`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Noise vector: CSV with one value per row, or a JSON array.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub similarity: Option<SimilarityVariant>,
    #[arg(long)]
    pub clamp: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<usize>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// lambda2/lambda1 grid for the exclusive group lasso.
    #[arg(long, value_delimiter = ',')]
    pub eglasso_ratios: Option<Vec<f64>>,
    #[arg(long)]
    pub n_lambdas: Option<usize>,
    /// Smallest lambda as a fraction of lambda_max.
    #[arg(long)]
    pub min_ratio: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Fills flags missing on the command line from the JSON config file.
pub fn merge_config<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut base: Value = serde_json::from_str(&text)?;
    let Value::Object(base_map) = &mut base else {
        return Err(Error::invalid(format!(
            "config {} must hold a JSON object",
            path.display()
        )));
    };
    if let Value::Object(over) = serde_json::to_value(flags)? {
        for (k, v) in over {
            if !v.is_null() {
                base_map.insert(k, v);
            }
        }
    }
    Ok(serde_json::from_value(base)?)
}

fn require<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::invalid(format!("missing required flag --{flag}")))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn similarity_spec(
    variant: Option<SimilarityVariant>,
    clamp: Option<f64>,
    groups: &Option<Vec<usize>>,
    p: usize,
) -> Result<SimilaritySpec> {
    let variant = variant.unwrap_or(SimilarityVariant::Ratio);
    let partition = match (variant, groups) {
        (SimilarityVariant::GroupIndicator, Some(labels)) => {
            if labels.len() != p {
                return Err(Error::dim("group labels", p, labels.len()));
            }
            Some(GroupPartition::from_labels(labels)?)
        }
        (SimilarityVariant::GroupIndicator, None) => {
            return Err(Error::invalid("--similarity group requires --groups"));
        }
        (_, Some(_)) => return Err(Error::invalid("--groups is only valid with --similarity group")),
        (_, None) => None,
    };
    Ok(SimilaritySpec {
        variant,
        clamp: clamp.unwrap_or(DEFAULT_CLAMP),
        partition,
    })
}

fn load(data: &Option<PathBuf>, target: &Option<String>, task: Option<Task>) -> Result<Dataset> {
    let path = require(data, "data")?;
    let target = require(target, "target")?;
    load_csv(&path, &target, task.unwrap_or(Task::Regression), true)
}

#[derive(Serialize)]
struct FitOutput<'a, F: Serialize> {
    #[serde(flatten)]
    fit: &'a F,
    columns: &'a [String],
    beta_raw: Vec<f64>,
    intercept_raw: f64,
    standardization: &'a crate::data::Standardization,
}

fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let a = merge_config(args, args.config.as_deref())?;
    let ds = load(&a.data, &a.target, a.task)?;
    let lambda = require(&a.lambda, "lambda")?;
    let alpha = a.alpha.unwrap_or(0.0);
    let cfg = a.solver.build()?;
    let sim = similarity_spec(a.similarity, a.clamp, &a.groups, ds.p())?.build(&ds)?;
    let pen = PenaltySpec::new(lambda, alpha, Arc::new(sim))?;
    let (text, converged) = match ds.task() {
        Task::Regression => {
            let f = fit(&ds, &pen, &cfg, None)?;
            let (beta_raw, intercept_raw) = unstandardize_with_intercept(&f.beta, 0.0, &ds)?;
            let out = FitOutput {
                fit: &f,
                columns: ds.column_names(),
                beta_raw,
                intercept_raw,
                standardization: ds.standardization(),
            };
            (to_json_string(Schema::Fit, &out)?, f.converged)
        }
        Task::Classification => {
            let f = fit_logistic(&ds, &pen, &cfg)?;
            let (beta_raw, intercept_raw) = unstandardize_with_intercept(&f.beta, f.intercept, &ds)?;
            let out = FitOutput {
                fit: &f,
                columns: ds.column_names(),
                beta_raw,
                intercept_raw,
                standardization: ds.standardization(),
            };
            (to_json_string(Schema::LogisticFit, &out)?, f.converged)
        }
    };
    write_output(a.out.as_deref(), &text)?;
    Ok(if converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn path_lambdas(ds: &Dataset, lambdas: &Option<Vec<f64>>, count: Option<usize>, min_ratio: Option<f64>) -> Vec<f64> {
    if let Some(l) = lambdas {
        return l.clone();
    }
    let lmax = match ds.task() {
        Task::Regression => lambda_max(ds),
        Task::Classification => logistic_lambda_max(ds),
    };
    let ratio = min_ratio.unwrap_or(if ds.p() > ds.n() { 1e-2 } else { 1e-3 });
    log_grid(lmax, ratio, count.unwrap_or(DEFAULT_N_LAMBDAS))
}

fn cmd_path(args: &PathArgs) -> Result<i32> {
    let a = merge_config(args, args.config.as_deref())?;
    let ds = load(&a.data, &a.target, a.task)?;
    let cfg = a.solver.build()?;
    let sim = Arc::new(similarity_spec(a.similarity, a.clamp, &a.groups, ds.p())?.build(&ds)?);
    if let Some(r) = a.min_ratio {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::invalid(format!("min_ratio = {r} must lie in (0, 1)")));
        }
    }
    let lambdas = path_lambdas(&ds, &a.lambdas, a.n_lambdas, a.min_ratio);
    let alpha = a.alpha.unwrap_or(0.0);
    let (text, all_converged) = match ds.task() {
        Task::Regression => {
            let path = fit_path(&ds, alpha, sim, Some(&lambdas), &cfg)?;
            if let Some(csv) = &a.csv {
                path.write_csv(create(csv)?)?;
            }
            (
                to_json_string(Schema::Path, &path)?,
                path.fits.iter().all(|f| f.converged),
            )
        }
        Task::Classification => {
            let path = fit_logistic_path(&ds, alpha, sim, Some(&lambdas), &cfg)?;
            if let Some(csv) = &a.csv {
                path.write_csv(create(csv)?)?;
            }
            (
                to_json_string(Schema::LogisticPath, &path)?,
                path.fits.iter().all(|f| f.converged),
            )
        }
    };
    write_output(a.out.as_deref(), &text)?;
    Ok(if all_converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_cv(args: &CvArgs) -> Result<i32> {
    let a = merge_config(args, args.config.as_deref())?;
    let ds = load(&a.data, &a.target, a.task)?;
    let cfg = a.solver.build()?;
    let sim = similarity_spec(a.similarity, a.clamp, &a.groups, ds.p())?;
    let alphas = a.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHA_GRID.to_vec());
    let k = a.k.unwrap_or(10);
    let lambdas = match (&a.lambdas, a.n_lambdas) {
        (None, Some(count)) => Some(cv_lambda_grid(&ds, k, count)),
        (l, _) => l.clone(),
    };
    let sel = cross_validate_with_lambdas(&ds, k, &alphas, lambdas.as_deref(), &sim, &cfg, a.seed.unwrap_or(0))?;
    if let Some(csv) = &a.scores_csv {
        sel.write_scores_csv(create(csv)?)?;
    }
    write_output(a.out.as_deref(), &to_json_string(Schema::Selection, &sel)?)?;
    Ok(if sel.refit.converged() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Serialize, Deserialize)]
struct TruthOutput {
    spec: SyntheticSpec,
    /// Scale of `beta_star` and `noise`: matches the written CSV.
    scale: String,
    beta_star: Vec<f64>,
    support: Vec<usize>,
    s: usize,
    noise: Vec<f64>,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let a = merge_config(args, args.config.as_deref())?;
    let spec = a.spec.build(a.seed.unwrap_or(0))?;
    let out_data = require(&a.out_data, "out-data")?;
    let target = a.target.clone().unwrap_or_else(|| "y".into());
    let sample = sample_synthetic(&spec)?;
    let raw = a.raw.unwrap_or(false);
    let (ds, truth, noise) = if raw {
        let ds = Dataset::from_raw(sample.x, sample.y, Task::Regression, None)?;
        (ds, sample.truth, sample.noise)
    } else {
        let ds = Dataset::standardized(sample.x, sample.y, Task::Regression, None)?;
        let (truth, noise) = standardized_truth(&sample.truth, &sample.noise, &ds)?;
        (ds, truth, noise)
    };
    ds.write_csv(&out_data, &target)?;
    let out = TruthOutput {
        spec,
        scale: if raw { "raw" } else { "standardized" }.into(),
        beta_star: truth.beta_star,
        support: truth.support,
        s: truth.s,
        noise,
    };
    write_output(a.out.as_deref(), &to_json_string(Schema::Truth, &out)?)?;
    Ok(EXIT_OK)
}

#[derive(Deserialize)]
struct TruthInput {
    beta_star: Vec<f64>,
    #[serde(default)]
    noise: Option<Vec<f64>>,
}

fn read_noise(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(0).unwrap_or("");
        match cell.parse::<f64>() {
            Ok(v) => out.push(v),
            // tolerate a single header line
            Err(_) if row == 0 => {}
            Err(_) => {
                return Err(Error::NonNumeric {
                    row: row + 1,
                    column: "noise".into(),
                    value: cell.into(),
                })
            }
        }
    }
    Ok(out)
}

fn cmd_check_sign(args: &CheckSignArgs) -> Result<i32> {
    let a = merge_config(args, args.config.as_deref())?;
    let ds = load(&a.data, &a.target, Some(Task::Regression))?;
    let truth_path = require(&a.truth, "truth")?;
    let text = std::fs::read_to_string(&truth_path).map_err(|source| Error::Io {
        path: truth_path.clone(),
        source,
    })?;
    let truth_in: TruthInput = serde_json::from_str(&text)?;
    let noise = match (&a.noise, truth_in.noise, a.noise_seed) {
        (Some(path), _, _) => read_noise(path)?,
        (None, _, Some(seed)) => draw_noise(ds.n(), a.noise_sd.unwrap_or(1.0), seed),
        (None, Some(n), None) => n,
        (None, None, None) => {
            return Err(Error::invalid(
                "no noise given: use --noise, --noise-seed, or a truth file with 'noise'",
            ))
        }
    };
    let (truth, noise) = standardized_truth(&GroundTruth::new(truth_in.beta_star), &noise, &ds)?;
    let lambda = require(&a.lambda, "lambda")?;
    let sim = similarity_spec(a.similarity, a.clamp, &a.groups, ds.p())?.build(&ds)?;
    let pen = PenaltySpec::new(lambda, a.alpha.unwrap_or(0.0), Arc::new(sim))?;
    let report = sign_recovery_check(&ds, &truth, &noise, &pen)?;
    write_output(a.out.as_deref(), &to_json_string(Schema::SignRecovery, &report)?)?;
    Ok(if report.holds { EXIT_OK } else { EXIT_CONDITION_FAILED })
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let a = merge_config(args, args.config.as_deref())?;
    let d = BenchConfig::default();
    let seed = a.seed.unwrap_or(d.seed);
    let config = BenchConfig {
        spec: a.spec.build(0)?,
        reps: a.reps.unwrap_or(d.reps),
        seed,
        methods: a.methods.clone().unwrap_or(d.methods),
        alpha_grid: a.alphas.clone().unwrap_or(d.alpha_grid),
        eglasso_ratio_grid: a.eglasso_ratios.clone().unwrap_or(d.eglasso_ratio_grid),
        n_lambdas: a.n_lambdas.unwrap_or(d.n_lambdas),
        lambda_min_ratio: a.min_ratio.or(d.lambda_min_ratio),
        solver: a.solver.build()?,
    };
    let report = run_bench(&config)?;
    if let Some(csv) = &a.csv {
        report.write_summary_csv(create(csv)?)?;
    }
    write_output(a.out.as_deref(), &to_json_string(Schema::Bench, &report)?)?;
    Ok(EXIT_OK)
}

/// Runs a parsed command and maps the outcome to an exit code. Errors are
/// logged to stderr.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Path(a) => cmd_path(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::CheckSign(a) => cmd_check_sign(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => {
            if code == EXIT_NOT_CONVERGED {
                log::warn!("solver did not converge; result written anyway");
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_fills_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"lambda": 0.5, "alpha": 2.0, "target": "t", "tol": 1e-9}"#).unwrap();
        let flags = FitArgs {
            alpha: Some(3.0),
            ..Default::default()
        };
        let m = merge_config(&flags, Some(&cfg)).unwrap();
        assert_eq!(m.lambda, Some(0.5));
        assert_eq!(m.alpha, Some(3.0));
        assert_eq!(m.target.as_deref(), Some("t"));
        assert_eq!(m.solver.tol, Some(1e-9));
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"lamda": 0.5}"#).unwrap();
        assert!(merge_config(&FitArgs::default(), Some(&cfg)).is_err());
    }

    #[test]
    fn groups_require_group_similarity() {
        assert!(similarity_spec(Some(SimilarityVariant::Ratio), None, &Some(vec![0, 1]), 2).is_err());
        assert!(similarity_spec(Some(SimilarityVariant::GroupIndicator), None, &None, 2).is_err());
        let s = similarity_spec(Some(SimilarityVariant::GroupIndicator), None, &Some(vec![0, 0, 1]), 3).unwrap();
        assert!(s.partition.is_some());
    }

    #[test]
    fn default_coefficients_alternate() {
        let s = SpecFlags {
            b: Some(3),
            q: Some(2),
            ..Default::default()
        }
        .build(1)
        .unwrap();
        assert_eq!(s.coef, vec![3.0, -2.0, 1.0]);
        assert_eq!(s.p, 6);
        assert_eq!(SpecFlags::default().build(0).unwrap(), SyntheticSpec::default());
    }
}
