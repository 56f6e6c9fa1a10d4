//! Held-out metrics, validation-set tuning and k-fold cross-validation over
//! `(λ, α)` grids.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{unstandardize_coefficients, Dataset, GroundTruth, Standardization, Task};
use crate::error::{Error, Result};
use crate::similarity::{build_similarity, GroupPartition, SimilarityMatrix, SimilarityVariant, DEFAULT_CLAMP};
use crate::solver::linear::{l2_distance, log_grid};
use crate::solver::logistic::logistic_lambda_max;
use crate::solver::{fit_logistic_path, fit_path, lambda_max, FitResult, LogisticFitResult, SolverConfig};

/// The paper grid for `α`.
pub const DEFAULT_ALPHA_GRID: [f64; 6] = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
pub const DEFAULT_N_LAMBDAS: usize = 100;

/// Coefficients of either model family.
pub trait LinearModel {
    fn coefficients(&self) -> &[f64];
    fn intercept(&self) -> f64;
}

impl LinearModel for FitResult {
    fn coefficients(&self) -> &[f64] {
        &self.beta
    }
    fn intercept(&self) -> f64 {
        0.0
    }
}

impl LinearModel for LogisticFitResult {
    fn coefficients(&self) -> &[f64] {
        &self.beta
    }
    fn intercept(&self) -> f64 {
        self.intercept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean squared error (Brier score for classification).
    pub prediction_error: f64,
    /// `‖β̂_raw − β*‖₂`, raw-scale coefficients; only with ground truth.
    pub estimation_error: Option<f64>,
    pub model_size: usize,
    /// Mean per-sample log-likelihood (classification).
    pub loglik: Option<f64>,
    pub misclassification: Option<f64>,
}

/// Scores a fit on a dataset carrying the training transform.
///
/// The estimation error maps `β̂` back to the raw scale through the
/// dataset's stored standardization before comparing with `β*`.
pub fn evaluate(model: &impl LinearModel, dataset: &Dataset, truth: Option<&GroundTruth>) -> Result<Metrics> {
    let beta = model.coefficients();
    let eta = dataset.linear_predictor(beta, model.intercept())?;
    let n = dataset.n() as f64;
    let y = dataset.y();
    let model_size = beta.iter().filter(|b| **b != 0.0).count();
    let estimation_error = match truth {
        Some(t) => {
            if t.beta_star.len() != beta.len() {
                return Err(Error::dim("true coefficient vector", beta.len(), t.beta_star.len()));
            }
            let (raw, _) = unstandardize_coefficients(beta, dataset)?;
            Some(l2_distance(&raw, &t.beta_star))
        }
        None => None,
    };
    match dataset.task() {
        Task::Regression => {
            let mse = y.iter().zip(&eta).map(|(y, f)| (y - f) * (y - f)).sum::<f64>() / n;
            Ok(Metrics {
                prediction_error: mse,
                estimation_error,
                model_size,
                loglik: None,
                misclassification: None,
            })
        }
        Task::Classification => {
            let mut brier = 0.0;
            let mut ll = 0.0;
            let mut wrong = 0usize;
            for (&yi, &e) in y.iter().zip(&eta) {
                let p = 1.0 / (1.0 + (-e).exp());
                brier += (yi - p) * (yi - p);
                ll += yi * e - (e.max(0.0) + (-e.abs()).exp().ln_1p());
                let predicted = if p > 0.5 { 1.0 } else { 0.0 };
                if predicted != yi {
                    wrong += 1;
                }
            }
            Ok(Metrics {
                prediction_error: brier / n,
                estimation_error,
                model_size,
                loglik: Some(ll / n),
                misclassification: Some(wrong as f64 / n),
            })
        }
    }
}

/// How to build `R` from (training) data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySpec {
    pub variant: SimilarityVariant,
    pub clamp: f64,
    pub partition: Option<GroupPartition>,
}

impl SimilaritySpec {
    pub fn new(variant: SimilarityVariant) -> Self {
        Self {
            variant,
            clamp: DEFAULT_CLAMP,
            partition: None,
        }
    }

    pub fn group(partition: GroupPartition) -> Self {
        Self {
            variant: SimilarityVariant::GroupIndicator,
            clamp: DEFAULT_CLAMP,
            partition: Some(partition),
        }
    }

    pub fn build(&self, dataset: &Dataset) -> Result<SimilarityMatrix> {
        build_similarity(dataset, self.variant, self.clamp, self.partition.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    /// Held-out mean squared error.
    Mse,
    /// Negative mean held-out log-likelihood.
    NegLoglik,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub alpha: f64,
    pub lambda: f64,
    pub mean: f64,
    /// Standard error over folds; absent for a single validation split.
    pub se: Option<f64>,
    pub model_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Refit {
    Linear(FitResult),
    Logistic(LogisticFitResult),
}

impl Refit {
    pub fn beta(&self) -> &[f64] {
        match self {
            Refit::Linear(f) => &f.beta,
            Refit::Logistic(f) => &f.beta,
        }
    }

    pub fn intercept(&self) -> f64 {
        match self {
            Refit::Linear(_) => 0.0,
            Refit::Logistic(f) => f.intercept,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            Refit::Linear(f) => f.converged,
            Refit::Logistic(f) => f.converged,
        }
    }
}

impl LinearModel for Refit {
    fn coefficients(&self) -> &[f64] {
        self.beta()
    }
    fn intercept(&self) -> f64 {
        Refit::intercept(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub metric: SelectionMetric,
    pub best_lambda: f64,
    pub best_alpha: f64,
    /// Mean score of the selected point.
    pub best_score: f64,
    pub grid_scores: Vec<GridScore>,
    pub refit: Refit,
    /// Transform the refit coefficients live in.
    pub standardization: Standardization,
}

impl SelectionResult {
    /// Long-format table: `alpha,lambda,mean,se,model_size`.
    pub fn write_scores_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "lambda", "mean", "se", "model_size"])?;
        for g in &self.grid_scores {
            w.write_record([
                format!("{:e}", g.alpha),
                format!("{:e}", g.lambda),
                format!("{:e}", g.mean),
                g.se.map_or_else(String::new, |s| format!("{s:e}")),
                format!("{}", g.model_size),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<scores csv>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Lowest mean wins; exact ties go to the larger λ, then the larger α.
pub fn pick_best(scores: &[GridScore]) -> Option<&GridScore> {
    scores.iter().filter(|g| g.mean.is_finite()).min_by(|a, b| {
        a.mean
            .total_cmp(&b.mean)
            .then(b.lambda.total_cmp(&a.lambda))
            .then(b.alpha.total_cmp(&a.alpha))
    })
}

fn metric_for(task: Task) -> SelectionMetric {
    match task {
        Task::Regression => SelectionMetric::Mse,
        Task::Classification => SelectionMetric::NegLoglik,
    }
}

fn score(metrics: &Metrics, metric: SelectionMetric) -> f64 {
    match metric {
        SelectionMetric::Mse => metrics.prediction_error,
        SelectionMetric::NegLoglik => -metrics.loglik.unwrap_or(f64::NAN),
    }
}

/// λ_max of `dataset` down to 1e-3·λ_max, or 1e-2·λ_max when the fits
/// run on fewer than `p` rows.
fn default_lambdas(dataset: &Dataset, count: usize, fit_rows: usize) -> Vec<f64> {
    let lmax = match dataset.task() {
        Task::Regression => lambda_max(dataset),
        Task::Classification => logistic_lambda_max(dataset),
    };
    let ratio = if dataset.p() > fit_rows { 1e-2 } else { 1e-3 };
    log_grid(lmax, ratio, count)
}

/// A fitted path of either family, scored point by point.
enum AnyPath {
    Linear(Vec<FitResult>),
    Logistic(Vec<LogisticFitResult>),
}

impl AnyPath {
    fn fit(
        train: &Dataset,
        alpha: f64,
        sim: Arc<SimilarityMatrix>,
        lambdas: &[f64],
        config: &SolverConfig,
    ) -> Result<Self> {
        Ok(match train.task() {
            Task::Regression => AnyPath::Linear(fit_path(train, alpha, sim, Some(lambdas), config)?.fits),
            Task::Classification => {
                AnyPath::Logistic(fit_logistic_path(train, alpha, sim, Some(lambdas), config)?.fits)
            }
        })
    }

    fn evaluate(&self, idx: usize, data: &Dataset) -> Result<Metrics> {
        match self {
            AnyPath::Linear(f) => evaluate(&f[idx], data, None),
            AnyPath::Logistic(f) => evaluate(&f[idx], data, None),
        }
    }

    fn take(self, idx: usize) -> Refit {
        match self {
            AnyPath::Linear(mut f) => Refit::Linear(f.swap_remove(idx)),
            AnyPath::Logistic(mut f) => Refit::Logistic(f.swap_remove(idx)),
        }
    }
}

/// Tunes `(λ, α)` on a validation split. `R` is built on `train`; `valid`
/// must carry the training transform. Paths for different `α` run in
/// parallel.
pub fn select_validation(
    train: &Dataset,
    valid: &Dataset,
    alpha_grid: &[f64],
    lambda_grid: Option<&[f64]>,
    similarity: &SimilaritySpec,
    config: &SolverConfig,
) -> Result<SelectionResult> {
    if train.p() != valid.p() {
        return Err(Error::dim("validation columns", train.p(), valid.p()));
    }
    if train.task() != valid.task() {
        return Err(Error::invalid("train and validation tasks differ"));
    }
    if alpha_grid.is_empty() {
        return Err(Error::invalid("alpha grid is empty"));
    }
    let lambdas = lambda_grid.map_or_else(|| default_lambdas(train, DEFAULT_N_LAMBDAS, train.n()), <[f64]>::to_vec);
    let sim = Arc::new(similarity.build(train)?);
    let metric = metric_for(train.task());

    let per_alpha: Vec<(AnyPath, Vec<GridScore>)> = alpha_grid
        .par_iter()
        .map(|&alpha| {
            let path = AnyPath::fit(train, alpha, sim.clone(), &lambdas, config)?;
            let scores = lambdas
                .iter()
                .enumerate()
                .map(|(i, &lambda)| {
                    let m = path.evaluate(i, valid)?;
                    Ok(GridScore {
                        alpha,
                        lambda,
                        mean: score(&m, metric),
                        se: None,
                        model_size: m.model_size as f64,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((path, scores))
        })
        .collect::<Result<_>>()?;

    let grid_scores: Vec<GridScore> = per_alpha.iter().flat_map(|(_, s)| s.iter().cloned()).collect();
    let best = pick_best(&grid_scores)
        .ok_or_else(|| Error::invalid("no finite validation score"))?
        .clone();
    let a_idx = alpha_grid.iter().position(|&a| a == best.alpha).unwrap_or(0);
    let l_idx = lambdas.iter().position(|&l| l == best.lambda).unwrap_or(0);
    let path = per_alpha
        .into_iter()
        .nth(a_idx)
        .map(|(p, _)| p)
        .expect("alpha index in range");
    Ok(SelectionResult {
        metric,
        best_lambda: best.lambda,
        best_alpha: best.alpha,
        best_score: best.mean,
        grid_scores,
        refit: path.take(l_idx),
        standardization: train.standardization().clone(),
    })
}

/// Seeded fold labels in `0..k`. For classification, each class is
/// shuffled separately and dealt round-robin so folds are stratified.
pub fn fold_assignment(n: usize, k: usize, seed: u64, labels: Option<&[f64]>) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = match labels {
        Some(y) => {
            let mut zeros: Vec<usize> = (0..n).filter(|&i| y[i] == 0.0).collect();
            let mut ones: Vec<usize> = (0..n).filter(|&i| y[i] != 0.0).collect();
            zeros.shuffle(&mut rng);
            ones.shuffle(&mut rng);
            zeros.extend(ones);
            zeros
        }
        None => {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            all
        }
    };
    let mut folds = vec![0; n];
    for (pos, i) in order.drain(..).enumerate() {
        folds[i] = pos % k;
    }
    folds
}

/// Training/held-out pair for one fold. The training part is standardized
/// on its own rows; the held-out part reuses that transform.
pub fn split_fold(dataset: &Dataset, assignment: &[usize], fold: usize) -> Result<(Dataset, Dataset)> {
    let train_rows: Vec<usize> = (0..dataset.n()).filter(|&i| assignment[i] != fold).collect();
    let test_rows: Vec<usize> = (0..dataset.n()).filter(|&i| assignment[i] == fold).collect();
    if test_rows.is_empty() {
        return Err(Error::invalid(format!("fold {fold} is empty")));
    }
    let (xt, yt) = dataset.raw_rows(&train_rows);
    if dataset.task() == Task::Classification {
        for class in [0u8, 1] {
            if !yt.iter().any(|&v| v == f64::from(class)) {
                return Err(Error::ClassAbsent { fold, class });
            }
        }
    }
    let names = Some(dataset.column_names().to_vec());
    let train = Dataset::standardized(xt, yt, dataset.task(), names.clone())?;
    let (xh, yh) = dataset.raw_rows(&test_rows);
    let held = Dataset::with_standardization(xh, yh, dataset.task(), names, train.standardization())?;
    Ok((train, held))
}

/// Default k-fold grid on standardized data: the floor follows the size of
/// the smallest training fold rather than the full sample.
pub fn cv_lambda_grid(dataset: &Dataset, k: usize, count: usize) -> Vec<f64> {
    let n = dataset.n();
    default_lambdas(dataset, count, n - n.div_ceil(k.max(1)))
}

/// k-fold cross-validation with the default λ grid (computed once on the
/// full standardized data and shared by all folds).
pub fn cross_validate(
    dataset: &Dataset,
    k: usize,
    alpha_grid: &[f64],
    similarity: &SimilaritySpec,
    config: &SolverConfig,
    seed: u64,
) -> Result<SelectionResult> {
    cross_validate_with_lambdas(dataset, k, alpha_grid, None, similarity, config, seed)
}

pub fn cross_validate_with_lambdas(
    dataset: &Dataset,
    k: usize,
    alpha_grid: &[f64],
    lambda_grid: Option<&[f64]>,
    similarity: &SimilaritySpec,
    config: &SolverConfig,
    seed: u64,
) -> Result<SelectionResult> {
    let n = dataset.n();
    if k < 2 || k > n {
        return Err(Error::invalid(format!(
            "fold count k = {k} must satisfy 2 <= k <= n = {n}"
        )));
    }
    if alpha_grid.is_empty() {
        return Err(Error::invalid("alpha grid is empty"));
    }
    let full = Dataset::standardized(
        dataset.raw_x(),
        dataset.raw_y(),
        dataset.task(),
        Some(dataset.column_names().to_vec()),
    )?;
    let lambdas = lambda_grid.map_or_else(|| cv_lambda_grid(&full, k, DEFAULT_N_LAMBDAS), <[f64]>::to_vec);
    let metric = metric_for(dataset.task());
    let labels = (dataset.task() == Task::Classification).then(|| dataset.y());
    let assignment = fold_assignment(n, k, seed, labels);

    let splits: Vec<(Dataset, Dataset, Arc<SimilarityMatrix>)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train, held) = split_fold(dataset, &assignment, f)?;
            let sim = Arc::new(similarity.build(&train)?);
            Ok((train, held, sim))
        })
        .collect::<Result<_>>()?;

    // (fold, alpha) jobs; each yields (score, size) per lambda
    let jobs: Vec<(usize, usize)> = (0..k)
        .flat_map(|f| (0..alpha_grid.len()).map(move |a| (f, a)))
        .collect();
    let results: Vec<Vec<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(f, a)| {
            let (train, held, sim) = &splits[f];
            let path = AnyPath::fit(train, alpha_grid[a], sim.clone(), &lambdas, config)?;
            (0..lambdas.len())
                .map(|i| {
                    let m = path.evaluate(i, held)?;
                    Ok((score(&m, metric), m.model_size as f64))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let kf = k as f64;
    let mut grid_scores = Vec::with_capacity(alpha_grid.len() * lambdas.len());
    for (a, &alpha) in alpha_grid.iter().enumerate() {
        for (i, &lambda) in lambdas.iter().enumerate() {
            let vals: Vec<(f64, f64)> = (0..k).map(|f| results[f * alpha_grid.len() + a][i]).collect();
            let mean = vals.iter().map(|v| v.0).sum::<f64>() / kf;
            let var = vals.iter().map(|v| (v.0 - mean) * (v.0 - mean)).sum::<f64>() / (kf - 1.0);
            grid_scores.push(GridScore {
                alpha,
                lambda,
                mean,
                se: Some((var / kf).sqrt()),
                model_size: vals.iter().map(|v| v.1).sum::<f64>() / kf,
            });
        }
    }
    let best = pick_best(&grid_scores)
        .ok_or_else(|| Error::invalid("no finite cross-validation score"))?
        .clone();

    let l_idx = lambdas.iter().position(|&l| l == best.lambda).unwrap_or(0);
    let sim = Arc::new(similarity.build(&full)?);
    let refit = AnyPath::fit(&full, best.alpha, sim, &lambdas[..=l_idx], config)?.take(l_idx);
    Ok(SelectionResult {
        metric,
        best_lambda: best.lambda,
        best_alpha: best.alpha,
        best_score: best.mean,
        grid_scores,
        refit,
        standardization: full.standardization().clone(),
    })
}
