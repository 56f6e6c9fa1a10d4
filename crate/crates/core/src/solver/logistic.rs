//! Penalized logistic regression by iteratively reweighted least squares.
//!
//! The outer loop forms the quadratic approximation of the negative
//! log-likelihood at the current `(β₀, β)`; the inner loop minimizes the
//! penalized weighted least-squares surrogate with the shared coordinate
//! descent kernel. A step that raises the penalized objective is halved, at
//! most ten times.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::linear::{kkt_from_residual, log_grid, validate_lambdas};
use super::{support_of, SolverConfig, Workspace};
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::similarity::{penalty_value, PenaltySpec, SimilarityMatrix};

pub const PROB_CLAMP: f64 = 1e-5;
const MAX_HALVINGS: usize = 10;
const INNER_MAX_SWEEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFitResult {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub support: Vec<usize>,
    pub model_size: usize,
    pub objective: f64,
    /// Penalized objective at the start and after every accepted outer step.
    pub neg_loglik_trace: Vec<f64>,
    pub outer_iters: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticPathResult {
    pub alpha: f64,
    pub lambdas: Vec<f64>,
    pub fits: Vec<LogisticFitResult>,
}

impl LogisticPathResult {
    /// Coefficient table: `lambda`, `intercept`, then `beta_1..beta_p`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let p = self.fits.first().map_or(0, |f| f.beta.len());
        let mut header = vec!["lambda".to_owned(), "intercept".to_owned()];
        header.extend((1..=p).map(|j| format!("beta_{j}")));
        w.write_record(&header)?;
        for fit in &self.fits {
            let mut row = vec![format!("{:e}", fit.lambda), format!("{:e}", fit.intercept)];
            row.extend(fit.beta.iter().map(|b| format!("{b:e}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<path csv>".into(),
            source,
        })?;
        Ok(())
    }
}

fn require_classification(ds: &Dataset) -> Result<()> {
    if ds.task() != Task::Classification {
        return Err(Error::TaskMismatch {
            expected: "classification",
        });
    }
    Ok(())
}

#[inline]
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn mean_nll(eta: &[f64], y: &[f64]) -> f64 {
    eta.iter().zip(y).map(|(e, y)| softplus(*e) - y * e).sum::<f64>() / y.len() as f64
}

/// `−(1/n) Σ (yᵢ ηᵢ − log(1 + e^{ηᵢ})) + penalty(β)` with `η = β₀ + Xβ`.
pub fn logistic_objective(beta: &[f64], intercept: f64, dataset: &Dataset, penalty: &PenaltySpec) -> Result<f64> {
    require_classification(dataset)?;
    let eta = dataset.linear_predictor(beta, intercept)?;
    Ok(mean_nll(&eta, dataset.y()) + penalty_value(beta, penalty)?)
}

/// Working response and weights of the quadratic approximation at
/// `(β₀, β)`, with fitted probabilities clamped to `[1e-5, 1 − 1e-5]`.
pub fn quadratic_working_response(beta: &[f64], intercept: f64, dataset: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    require_classification(dataset)?;
    let eta = dataset.linear_predictor(beta, intercept)?;
    let mut z = Vec::with_capacity(eta.len());
    let mut w = Vec::with_capacity(eta.len());
    for (e, y) in eta.iter().zip(dataset.y()) {
        let p = sigmoid(*e).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let wi = p * (1.0 - p);
        z.push(e + (y - p) / wi);
        w.push(wi);
    }
    Ok((z, w))
}

/// Gradient of the penalized quadratic surrogate at its own expansion
/// point: `(∂/∂β₀, ∂/∂β)`. The penalty part uses `sgn(0) = 0`.
pub fn working_gradient(
    beta: &[f64],
    intercept: f64,
    dataset: &Dataset,
    penalty: &PenaltySpec,
) -> Result<(f64, Vec<f64>)> {
    let (z, w) = quadratic_working_response(beta, intercept, dataset)?;
    let eta = dataset.linear_predictor(beta, intercept)?;
    let n = dataset.n() as f64;
    let wr: Vec<f64> = z.iter().zip(&eta).zip(&w).map(|((z, e), w)| w * (z - e)).collect();
    let g0 = -wr.iter().sum::<f64>() / n;
    let rabs = penalty.similarity.mul_abs(beta);
    let g = (0..dataset.p())
        .map(|j| {
            let smooth = -dataset.col(j).iter().zip(&wr).map(|(x, r)| x * r).sum::<f64>() / n;
            smooth + penalty.lambda * (1.0 + penalty.alpha * rabs[j]) * sign0(beta[j])
        })
        .collect();
    Ok((g0, g))
}

fn sign0(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum()
    }
}

/// Stationarity violation of the penalized logistic objective, including the
/// unpenalized intercept.
pub fn logistic_kkt(beta: &[f64], intercept: f64, dataset: &Dataset, penalty: &PenaltySpec) -> Result<f64> {
    require_classification(dataset)?;
    let eta = dataset.linear_predictor(beta, intercept)?;
    let resid: Vec<f64> = eta.iter().zip(dataset.y()).map(|(e, y)| y - sigmoid(*e)).collect();
    let g0 = (resid.iter().sum::<f64>() / dataset.n() as f64).abs();
    Ok(kkt_from_residual(beta, dataset, penalty, &resid).max(g0))
}

fn null_intercept(dataset: &Dataset) -> f64 {
    let ybar = dataset.y().iter().sum::<f64>() / dataset.n() as f64;
    let p = ybar.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (p / (1.0 - p)).ln()
}

/// Fits from `β = 0` and the null-model intercept `logit(ȳ)`.
pub fn fit_logistic(dataset: &Dataset, penalty: &PenaltySpec, config: &SolverConfig) -> Result<LogisticFitResult> {
    fit_logistic_from(dataset, penalty, config, None)
}

pub fn fit_logistic_from(
    dataset: &Dataset,
    penalty: &PenaltySpec,
    config: &SolverConfig,
    start: Option<(&[f64], f64)>,
) -> Result<LogisticFitResult> {
    require_classification(dataset)?;
    penalty.validate()?;
    config.validate()?;
    let p = dataset.p();
    if penalty.p() != p {
        return Err(Error::dim("similarity matrix", p, penalty.p()));
    }
    let (mut beta, mut b0) = match start {
        Some((b, c)) => {
            if b.len() != p {
                return Err(Error::dim("initial coefficients", p, b.len()));
            }
            (b.to_vec(), c)
        }
        None => (vec![0.0; p], null_intercept(dataset)),
    };

    let active = config.use_active_set(p);
    let inner_max = config.max_sweeps.min(INNER_MAX_SWEEPS);
    let mut obj = logistic_objective(&beta, b0, dataset, penalty)?;
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iters = 0;

    while iters < config.max_outer_iters {
        iters += 1;
        let (z, w) = quadratic_working_response(&beta, b0, dataset)?;
        let mut ws = Workspace::new(dataset, &z, Some(&w), penalty, beta.clone(), Some(b0));
        ws.run(config.tol, inner_max, active, |_, _| Ok(()))?;
        let cand_b0 = ws.intercept.unwrap_or(b0);
        let cand = ws.beta;

        let full_change = cand
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold((cand_b0 - b0).abs(), f64::max);
        if !full_change.is_finite() {
            return Err(Error::NonFinite { sweep: iters });
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = beta.iter().zip(&cand).map(|(b, c)| b + step * (c - b)).collect();
            let trial_b0 = b0 + step * (cand_b0 - b0);
            let trial_obj = logistic_objective(&trial, trial_b0, dataset, penalty)?;
            if trial_obj <= obj {
                accepted = Some((trial, trial_b0, trial_obj));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, trial_b0, trial_obj)) = accepted else {
            // no halving descends: accept the current point if it is stationary
            converged = full_change < config.tol || logistic_kkt(&beta, b0, dataset, penalty)? <= 10.0 * config.tol;
            break;
        };
        let change = step * full_change;
        beta = trial;
        b0 = trial_b0;
        obj = trial_obj;
        trace.push(obj);
        if change < config.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "logistic fit did not converge in {iters} outer iterations (lambda={}, alpha={}); data may be separable",
            penalty.lambda,
            penalty.alpha
        );
    }
    let kkt = logistic_kkt(&beta, b0, dataset, penalty)?;
    let support = support_of(&beta);
    Ok(LogisticFitResult {
        lambda: penalty.lambda,
        alpha: penalty.alpha,
        model_size: support.len(),
        support,
        beta,
        intercept: b0,
        objective: obj,
        neg_loglik_trace: trace,
        outer_iters: iters,
        converged,
        kkt_residual: kkt,
    })
}

/// `‖(1/n) Xᵀ(y − ȳ)‖_∞`.
pub fn logistic_lambda_max(dataset: &Dataset) -> f64 {
    let n = dataset.n() as f64;
    let ybar = dataset.y().iter().sum::<f64>() / n;
    (0..dataset.p())
        .map(|j| {
            (dataset.col(j).iter().zip(dataset.y()).map(|(x, y)| x * (y - ybar)).sum::<f64>() / n).abs()
        })
        .fold(0.0, f64::max)
        // keeps the first grid point null despite round-off in the working response
        * (1.0 + 1e-10)
}

pub fn logistic_lambda_grid(dataset: &Dataset, count: usize, min_ratio: Option<f64>) -> Vec<f64> {
    let ratio = min_ratio.unwrap_or(if dataset.p() > dataset.n() { 1e-2 } else { 1e-3 });
    log_grid(logistic_lambda_max(dataset), ratio, count)
}

/// Warm-started descending path.
pub fn fit_logistic_path(
    dataset: &Dataset,
    alpha: f64,
    similarity: Arc<SimilarityMatrix>,
    lambdas: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<LogisticPathResult> {
    let lambdas = match lambdas {
        Some(l) => l.to_vec(),
        None => logistic_lambda_grid(dataset, 100, None),
    };
    validate_lambdas(&lambdas)?;
    let base = PenaltySpec::new(lambdas[0], alpha, similarity)?;
    let mut fits: Vec<LogisticFitResult> = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let penalty = base.with_lambda(lambda);
        let start = match (config.init, fits.last()) {
            (super::InitStrategy::Warm, Some(prev)) => Some((prev.beta.as_slice(), prev.intercept)),
            _ => None,
        };
        let fit = fit_logistic_from(dataset, &penalty, config, start)?;
        fits.push(fit);
    }
    Ok(LogisticPathResult { alpha, lambdas, fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::{build_similarity, SimilarityVariant, DEFAULT_CLAMP};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_classification(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y = (0..n)
            .map(|i| {
                let eta = 1.5 * x[(i, 0)] - x[(i, 1 % p)];
                f64::from(u8::from(rng.random::<f64>() < sigmoid(eta)))
            })
            .collect();
        Dataset::standardized(x, y, Task::Classification, None).unwrap()
    }

    fn zero_penalty(p: usize, lambda: f64) -> PenaltySpec {
        PenaltySpec::new(lambda, 0.0, Arc::new(SimilarityMatrix::zeros(p))).unwrap()
    }

    #[test]
    fn balanced_null_objective_is_log2() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let ds = Dataset::standardized(x, vec![0.0, 1.0, 1.0, 0.0], Task::Classification, None).unwrap();
        let v = logistic_objective(&[0.0], 0.0, &ds, &zero_penalty(1, 0.5)).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn objective_matches_naive_sum() {
        let ds = random_classification(30, 5, 1);
        let r = Arc::new(build_similarity(&ds, SimilarityVariant::Absolute, DEFAULT_CLAMP, None).unwrap());
        let pen = PenaltySpec::new(0.1, 2.0, r).unwrap();
        let beta = [0.3, -0.5, 0.0, 0.2, 1.0];
        let b0 = -0.4;
        let mut nll = 0.0;
        for i in 0..30 {
            let mut eta = b0;
            for j in 0..5 {
                eta += ds.x()[(i, j)] * beta[j];
            }
            nll -= ds.y()[i] * eta - (1.0 + eta.exp()).ln();
        }
        nll /= 30.0;
        let expected = nll + penalty_value(&beta, &pen).unwrap();
        assert!((logistic_objective(&beta, b0, &ds, &pen).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn working_response_at_zero_and_clamp() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let ds = Dataset::standardized(x, vec![0.0, 1.0, 1.0, 0.0], Task::Classification, None).unwrap();
        let (z, w) = quadratic_working_response(&[0.0], 0.0, &ds).unwrap();
        for (zi, yi) in z.iter().zip(ds.y()) {
            assert_eq!(*zi, 4.0 * (yi - 0.5));
        }
        assert!(w.iter().all(|&wi| wi == 0.25));

        let (_, w) = quadratic_working_response(&[0.0], 20.0, &ds).unwrap();
        let expected = (1.0 - PROB_CLAMP) * PROB_CLAMP;
        assert!(w.iter().all(|&wi| (wi - expected).abs() < 1e-10 * expected));
    }

    #[test]
    fn null_model_for_huge_lambda() {
        let ds = random_classification(40, 4, 2);
        let pen = zero_penalty(4, 1e3);
        let fit = fit_logistic(&ds, &pen, &SolverConfig::default()).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        let ybar = ds.y().iter().sum::<f64>() / 40.0;
        assert!((fit.intercept - (ybar / (1.0 - ybar)).ln()).abs() < 1e-6);
        assert!(fit.converged);
    }

    #[test]
    fn trace_never_increases() {
        for seed in 0..5 {
            let ds = random_classification(60, 8, 10 + seed);
            let r = Arc::new(build_similarity(&ds, SimilarityVariant::Ratio, DEFAULT_CLAMP, None).unwrap());
            let pen = PenaltySpec::new(0.02, 3.0, r).unwrap();
            let fit = fit_logistic(&ds, &pen, &SolverConfig::default()).unwrap();
            for w in fit.neg_loglik_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-8);
            }
            let eta = ds.linear_predictor(&fit.beta, fit.intercept).unwrap();
            assert!(eta.iter().map(|e| sigmoid(*e)).all(|p| p > 0.0 && p < 1.0));
            assert!(fit.converged);
        }
    }

    #[test]
    fn separated_data_hits_iteration_cap() {
        let x = DMatrix::from_column_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let ds = Dataset::standardized(x, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0], Task::Classification, None).unwrap();
        let pen = zero_penalty(1, 0.0);
        let fit = fit_logistic(
            &ds,
            &pen,
            &SolverConfig {
                max_outer_iters: 20,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.outer_iters, 20);
        for w in fit.neg_loglik_trace.windows(2) {
            assert!(w[1] < w[0]);
        }
        // loss keeps falling as |β| grows
        let at = |b: f64| logistic_objective(&[b], 0.0, &ds, &pen).unwrap();
        assert!(at(10.0) < at(5.0) && at(5.0) < at(1.0));
    }

    #[test]
    fn label_flip_symmetry() {
        let ds = random_classification(50, 5, 3);
        let flipped_y: Vec<f64> = ds.y().iter().map(|y| 1.0 - y).collect();
        let flipped = Dataset::with_standardization(
            ds.x().clone(),
            flipped_y,
            Task::Classification,
            None,
            &crate::data::Standardization::identity(5),
        )
        .unwrap();
        let r = Arc::new(build_similarity(&ds, SimilarityVariant::Squared, DEFAULT_CLAMP, None).unwrap());
        let pen = PenaltySpec::new(0.01, 1.0, r).unwrap();
        let cfg = SolverConfig {
            tol: 1e-10,
            ..Default::default()
        };
        let a = fit_logistic(&ds, &pen, &cfg).unwrap();
        let b = fit_logistic(&flipped, &pen, &cfg).unwrap();
        assert!((a.intercept + b.intercept).abs() < 1e-6);
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert!((x + y).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_regression_data() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let ds = Dataset::standardized(x, vec![0.5, 1.0, 2.0], Task::Regression, None).unwrap();
        assert!(matches!(
            fit_logistic(&ds, &zero_penalty(1, 0.1), &SolverConfig::default()),
            Err(Error::TaskMismatch { .. })
        ));
    }

    #[test]
    fn path_starts_at_null_model() {
        let ds = random_classification(50, 6, 4);
        let r = Arc::new(build_similarity(&ds, SimilarityVariant::Ratio, DEFAULT_CLAMP, None).unwrap());
        let grid = logistic_lambda_grid(&ds, 10, None);
        let path = fit_logistic_path(&ds, 1.0, r, Some(&grid), &SolverConfig::default()).unwrap();
        assert_eq!(path.fits[0].model_size, 0);
        assert!(path.fits.last().unwrap().model_size > 0);
    }
}
