//! Replicated train/validation/test benchmark on the block-correlated
//! synthetic design.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sample_synthetic, Dataset, GroundTruth, SyntheticSpec, Task};
use crate::error::{Error, Result};
use crate::modelsel::{evaluate, select_validation, SimilaritySpec, DEFAULT_ALPHA_GRID};
use crate::similarity::{GroupPartition, SimilarityVariant};
use crate::solver::SolverConfig;

pub const DEFAULT_REPS: usize = 50;
/// Smallest λ of the tuning grid, relative to λ_max.
pub const DEFAULT_BENCH_MIN_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Iilasso,
    Lasso,
    Eglasso,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Iilasso, Method::Lasso, Method::Eglasso];

    pub fn name(self) -> &'static str {
        match self {
            Method::Iilasso => "iilasso",
            Method::Lasso => "lasso",
            Method::Eglasso => "eglasso",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub spec: SyntheticSpec,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// `α` grid for the ratio-similarity method.
    pub alpha_grid: Vec<f64>,
    /// `λ₂/λ₁` grid for the exclusive group lasso; mapped to `α = 2·ratio`.
    pub eglasso_ratio_grid: Vec<f64>,
    pub n_lambdas: usize,
    /// Smallest λ as a fraction of λ_max; `None` uses the path default
    /// (which stops at 1e-2 when p > n).
    pub lambda_min_ratio: Option<f64>,
    pub solver: SolverConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            spec: SyntheticSpec::default(),
            reps: DEFAULT_REPS,
            seed: 0,
            methods: Method::ALL.to_vec(),
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            eglasso_ratio_grid: DEFAULT_ALPHA_GRID.to_vec(),
            n_lambdas: crate::modelsel::DEFAULT_N_LAMBDAS,
            lambda_min_ratio: Some(DEFAULT_BENCH_MIN_RATIO),
            solver: SolverConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.solver.validate()?;
        if self.reps == 0 {
            return Err(Error::invalid("reps must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("method list is empty"));
        }
        if self.n_lambdas < 2 {
            return Err(Error::invalid("n_lambdas must be >= 2"));
        }
        if let Some(r) = self.lambda_min_ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::invalid(format!("lambda_min_ratio = {r} must lie in (0, 1)")));
            }
        }
        for &a in self.alpha_grid.iter().chain(&self.eglasso_ratio_grid) {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::invalid(format!("grid value {a} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for split `stream` (0 train, 1 validation, 2 test) of replicate `rep`.
pub fn replicate_seed(seed: u64, rep: usize, stream: u64) -> u64 {
    mix(mix(mix(seed) ^ rep as u64) ^ stream)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub method: Method,
    pub best_lambda: f64,
    pub best_alpha: f64,
    pub prediction_error: f64,
    pub estimation_error: f64,
    pub model_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// `None` for a single replicate.
    pub se: Option<f64>,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = (values.len() > 1).then(|| {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub prediction_error: MeanSe,
    pub estimation_error: MeanSe,
    pub model_size: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub summary: Vec<MethodSummary>,
    pub replicates: Vec<ReplicateRecord>,
}

impl BenchReport {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// One row per method: means and standard errors of the three metrics.
    pub fn write_summary_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "method",
            "prediction_error",
            "prediction_error_se",
            "estimation_error",
            "estimation_error_se",
            "model_size",
            "model_size_se",
        ])?;
        let se = |m: &MeanSe| m.se.map_or_else(String::new, |s| s.to_string());
        for s in &self.summary {
            w.write_record([
                s.method.name().to_string(),
                s.prediction_error.mean.to_string(),
                se(&s.prediction_error),
                s.estimation_error.mean.to_string(),
                se(&s.estimation_error),
                s.model_size.mean.to_string(),
                se(&s.model_size),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<summary csv>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Train, validation and test sets of one replicate. Validation and test
/// carry the training transform.
pub struct Replicate {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    pub truth: GroundTruth,
}

pub fn draw_replicate(spec: &SyntheticSpec, seed: u64, rep: usize) -> Result<Replicate> {
    let draw = |stream| {
        let s = SyntheticSpec {
            seed: replicate_seed(seed, rep, stream),
            ..spec.clone()
        };
        sample_synthetic(&s)
    };
    let tr = draw(0)?;
    let va = draw(1)?;
    let te = draw(2)?;
    let train = Dataset::standardized(tr.x, tr.y, Task::Regression, None)?;
    let st = train.standardization().clone();
    let valid = Dataset::with_standardization(va.x, va.y, Task::Regression, None, &st)?;
    let test = Dataset::with_standardization(te.x, te.y, Task::Regression, None, &st)?;
    Ok(Replicate {
        train,
        valid,
        test,
        truth: tr.truth,
    })
}

fn method_grid(config: &BenchConfig, method: Method) -> Result<(Vec<f64>, SimilaritySpec)> {
    Ok(match method {
        Method::Iilasso => (config.alpha_grid.clone(), SimilaritySpec::new(SimilarityVariant::Ratio)),
        Method::Lasso => (vec![0.0], SimilaritySpec::new(SimilarityVariant::Ratio)),
        Method::Eglasso => {
            let partition = GroupPartition::from_labels(&config.spec.block_labels())?;
            (
                config.eglasso_ratio_grid.iter().map(|r| 2.0 * r).collect(),
                SimilaritySpec::group(partition),
            )
        }
    })
}

fn run_replicate(config: &BenchConfig, rep: usize) -> Result<Vec<ReplicateRecord>> {
    let data = draw_replicate(&config.spec, config.seed, rep)?;
    let lambdas = crate::solver::lambda_grid(&data.train, config.n_lambdas, config.lambda_min_ratio);
    config
        .methods
        .iter()
        .map(|&method| {
            let (alphas, sim) = method_grid(config, method)?;
            let sel = select_validation(&data.train, &data.valid, &alphas, Some(&lambdas), &sim, &config.solver)?;
            let m = evaluate(&sel.refit, &data.test, Some(&data.truth))?;
            Ok(ReplicateRecord {
                rep,
                method,
                best_lambda: sel.best_lambda,
                best_alpha: sel.best_alpha,
                prediction_error: m.prediction_error,
                estimation_error: m.estimation_error.unwrap_or(f64::NAN),
                model_size: m.model_size,
            })
        })
        .collect()
}

/// Runs all replicates in parallel. Results depend only on the config, not
/// on the number of worker threads.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let per_rep: Vec<Vec<ReplicateRecord>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_replicate(config, rep))
        .collect::<Result<_>>()?;
    let replicates: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    let summary = config
        .methods
        .iter()
        .map(|&method| {
            let rows: Vec<&ReplicateRecord> = replicates.iter().filter(|r| r.method == method).collect();
            let col = |f: fn(&ReplicateRecord) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
            MethodSummary {
                method,
                prediction_error: MeanSe::of(&col(|r| r.prediction_error)),
                estimation_error: MeanSe::of(&col(|r| r.estimation_error)),
                model_size: MeanSe::of(&col(|r| r.model_size as f64)),
            }
        })
        .collect();
    Ok(BenchReport {
        config: config.clone(),
        summary,
        replicates,
    })
}
