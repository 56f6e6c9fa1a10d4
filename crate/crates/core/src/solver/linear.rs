//! Least-squares objective `(1/2n)‖y − Xβ‖² + λ(‖β‖₁ + α/2 |β|ᵀR|β|)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{coordinate_minimizer, InitStrategy, SolverConfig, Workspace};
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::similarity::{penalty_value, PenaltySpec, SimilarityMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub support: Vec<usize>,
    pub model_size: usize,
    /// Final objective value.
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    #[serde(rename = "sweeps")]
    pub sweeps_used: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub alpha: f64,
    pub lambdas: Vec<f64>,
    pub fits: Vec<FitResult>,
}

impl PathResult {
    /// Coefficient table: one row per λ, `lambda` then `beta_1..beta_p`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let p = self.fits.first().map_or(0, |f| f.beta.len());
        let mut header = vec!["lambda".to_owned()];
        header.extend((1..=p).map(|j| format!("beta_{j}")));
        w.write_record(&header)?;
        for fit in &self.fits {
            let mut row = vec![format!("{:e}", fit.lambda)];
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

fn check_dims(beta: &[f64], dataset: &Dataset, penalty: &PenaltySpec) -> Result<()> {
    if beta.len() != dataset.p() {
        return Err(Error::dim("coefficient vector", dataset.p(), beta.len()));
    }
    if penalty.p() != dataset.p() {
        return Err(Error::dim("similarity matrix", dataset.p(), penalty.p()));
    }
    Ok(())
}

fn residual(beta: &[f64], dataset: &Dataset) -> Vec<f64> {
    let mut r = dataset.y().to_vec();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (ri, x) in r.iter_mut().zip(dataset.col(j)) {
                *ri -= b * x;
            }
        }
    }
    r
}

/// `(1/2n)‖y − Xβ‖² + penalty_value(β)`.
pub fn objective(beta: &[f64], dataset: &Dataset, penalty: &PenaltySpec) -> Result<f64> {
    check_dims(beta, dataset, penalty)?;
    let r = residual(beta, dataset);
    let loss = r.iter().map(|v| v * v).sum::<f64>() / (2.0 * dataset.n() as f64);
    Ok(loss + penalty_value(beta, penalty)?)
}

/// One exact coordinate step on `βⱼ` against a caller-maintained residual
/// `y − Xβ`, which is updated in place. Returns the new `βⱼ`.
///
/// This recomputes `Σ_{k≠j} R_jk|β_k|` directly; the fitting loop keeps it
/// cached instead.
pub fn coordinate_update(
    j: usize,
    beta: &mut [f64],
    dataset: &Dataset,
    penalty: &PenaltySpec,
    residual_cache: &mut [f64],
) -> Result<f64> {
    let p = dataset.p();
    if j >= p {
        return Err(Error::IndexOutOfRange { index: j, p });
    }
    check_dims(beta, dataset, penalty)?;
    if residual_cache.len() != dataset.n() {
        return Err(Error::dim("residual cache", dataset.n(), residual_cache.len()));
    }
    debug_assert!(
        residual(beta, dataset)
            .iter()
            .zip(residual_cache.iter())
            .all(|(a, b)| (a - b).abs() <= 1e-8 * (1.0 + a.abs())),
        "stale residual cache"
    );
    let n = dataset.n() as f64;
    let col = dataset.col(j);
    let curvature = col.iter().map(|x| x * x).sum::<f64>() / n;
    let old = beta[j];
    let partial = col.iter().zip(residual_cache.iter()).map(|(x, r)| x * r).sum::<f64>() / n + curvature * old;
    let sim = &penalty.similarity;
    let cross: f64 = if penalty.alpha > 0.0 {
        sim.row(j)
            .iter()
            .zip(beta.iter())
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, (r, b))| r * b.abs())
            .sum()
    } else {
        0.0
    };
    let threshold = penalty.lambda * (1.0 + penalty.alpha * cross);
    let ridge = penalty.lambda * penalty.alpha * sim.diag(j);
    let new = coordinate_minimizer(partial, threshold, curvature, ridge);
    let delta = new - old;
    if delta != 0.0 {
        for (r, x) in residual_cache.iter_mut().zip(col) {
            *r -= delta * x;
        }
    }
    beta[j] = new;
    Ok(new)
}

/// Largest stationarity violation over coordinates.
///
/// With `gⱼ = −(1/n) Xⱼᵀ(y − Xβ)` and `tⱼ = λ(1 + α (R|β|)ⱼ)`: nonzero
/// coordinates contribute `|gⱼ + tⱼ sgn βⱼ|`, zero ones `max(|gⱼ| − tⱼ, 0)`.
pub fn check_kkt(beta: &[f64], dataset: &Dataset, penalty: &PenaltySpec) -> Result<f64> {
    check_dims(beta, dataset, penalty)?;
    let r = residual(beta, dataset);
    Ok(kkt_from_residual(beta, dataset, penalty, &r))
}

/// Shared by the linear and logistic checks: `resid` is `y − fitted`.
pub(crate) fn kkt_from_residual(beta: &[f64], dataset: &Dataset, penalty: &PenaltySpec, resid: &[f64]) -> f64 {
    let n = dataset.n() as f64;
    let rabs = if penalty.alpha > 0.0 {
        penalty.similarity.mul_abs(beta)
    } else {
        vec![0.0; beta.len()]
    };
    (0..beta.len())
        .map(|j| {
            let g = -dataset.col(j).iter().zip(resid).map(|(x, r)| x * r).sum::<f64>() / n;
            let t = penalty.lambda * (1.0 + penalty.alpha * rabs[j]);
            if beta[j] != 0.0 {
                (g + t * beta[j].signum()).abs()
            } else {
                (g.abs() - t).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn validate_inputs(dataset: &Dataset, penalty: &PenaltySpec, config: &SolverConfig) -> Result<()> {
    if dataset.task() != Task::Regression {
        return Err(Error::TaskMismatch { expected: "regression" });
    }
    penalty.validate()?;
    config.validate()?;
    if penalty.p() != dataset.p() {
        return Err(Error::dim("similarity matrix", dataset.p(), penalty.p()));
    }
    Ok(())
}

/// Cyclic coordinate descent from `init_beta` (zeros when absent, or a plain
/// lasso start when `config.init` is [`InitStrategy::Lasso`]).
///
/// Stops once a full sweep moves no coefficient by `tol` and the KKT residual
/// is within `10·tol`, or after `max_sweeps` sweeps. For the absolute and ratio
/// variants the objective is nonconvex and the result is a stationary point.
pub fn fit(
    dataset: &Dataset,
    penalty: &PenaltySpec,
    config: &SolverConfig,
    init_beta: Option<&[f64]>,
) -> Result<FitResult> {
    validate_inputs(dataset, penalty, config)?;
    let p = dataset.p();
    let start = match (init_beta, config.init) {
        (Some(b), _) => {
            if b.len() != p {
                return Err(Error::dim("initial coefficients", p, b.len()));
            }
            b.to_vec()
        }
        (None, InitStrategy::Lasso) if penalty.alpha > 0.0 => {
            let lasso = PenaltySpec {
                alpha: 0.0,
                ..penalty.clone()
            };
            fit_from(dataset, &lasso, config, vec![0.0; p])?.beta
        }
        (None, _) => vec![0.0; p],
    };
    fit_from(dataset, penalty, config, start)
}

fn fit_from(dataset: &Dataset, penalty: &PenaltySpec, config: &SolverConfig, start: Vec<f64>) -> Result<FitResult> {
    let y = dataset.y();
    let mut ws = Workspace::new(dataset, y, None, penalty, start, None);
    let active = config.use_active_set(dataset.p());
    let kkt_tol = 10.0 * config.tol;
    let mut trace = Vec::new();
    let mut used = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    while used < config.max_sweeps {
        let (sweeps, settled) = ws.run(config.tol, config.max_sweeps - used, active, |w, s| {
            let obj = w.objective();
            if !obj.is_finite() {
                return Err(Error::NonFinite { sweep: used + s });
            }
            trace.push(obj);
            Ok(())
        })?;
        used += sweeps;
        ws.refresh();
        kkt = kkt_from_residual(&ws.beta, dataset, penalty, &ws.resid);
        if settled && kkt <= kkt_tol {
            converged = true;
            break;
        }
        if !settled {
            break;
        }
    }
    if !converged {
        log::debug!(
            "coordinate descent stopped after {used} sweeps without converging (lambda={}, alpha={}, kkt={kkt:e})",
            penalty.lambda,
            penalty.alpha
        );
    }
    let objective = ws.objective();
    let support = ws.support();
    Ok(FitResult {
        lambda: penalty.lambda,
        alpha: penalty.alpha,
        model_size: support.len(),
        support,
        beta: ws.beta,
        objective,
        objective_trace: trace,
        sweeps_used: used,
        converged,
        kkt_residual: kkt,
    })
}

/// `‖(1/n) Xᵀy‖_∞`: the smallest λ whose solution is all zero. The cross term
/// has zero subgradient at `β = 0`, so this holds for every `α`.
pub fn lambda_max(dataset: &Dataset) -> f64 {
    let n = dataset.n() as f64;
    (0..dataset.p())
        .map(|j| (dataset.col(j).iter().zip(dataset.y()).map(|(x, y)| x * y).sum::<f64>() / n).abs())
        .fold(0.0, f64::max)
}

/// `count` log-spaced values from `max` down to `max · min_ratio`.
pub fn log_grid(max: f64, min_ratio: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![max];
    }
    let (hi, lo) = (max.ln(), (max * min_ratio).ln());
    (0..count)
        .map(|i| (hi + (lo - hi) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Default grid: 100 log-spaced values from `λ_max` to `1e-3·λ_max`
/// (`1e-2·λ_max` when `p > n`).
pub fn lambda_grid(dataset: &Dataset, count: usize, min_ratio: Option<f64>) -> Vec<f64> {
    let ratio = min_ratio.unwrap_or(if dataset.p() > dataset.n() { 1e-2 } else { 1e-3 });
    log_grid(lambda_max(dataset), ratio, count)
}

pub(crate) fn validate_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("lambda values must be finite and >= 0"));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("lambda grid must be strictly decreasing"));
    }
    Ok(())
}

/// Fits a descending λ sequence, initializing each fit per `config.init`.
pub fn fit_path(
    dataset: &Dataset,
    alpha: f64,
    similarity: Arc<SimilarityMatrix>,
    lambdas: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<PathResult> {
    let lambdas = match lambdas {
        Some(l) => l.to_vec(),
        None => lambda_grid(dataset, 100, None),
    };
    validate_lambdas(&lambdas)?;
    let p = dataset.p();
    let base = PenaltySpec::new(lambdas[0], alpha, similarity)?;
    validate_inputs(dataset, &base, config)?;
    let mut fits: Vec<FitResult> = Vec::with_capacity(lambdas.len());
    let mut lasso_beta = vec![0.0; p];
    for &lambda in &lambdas {
        let penalty = base.with_lambda(lambda);
        let start = match config.init {
            InitStrategy::Zeros => vec![0.0; p],
            InitStrategy::Warm => fits.last().map_or_else(|| vec![0.0; p], |f| f.beta.clone()),
            InitStrategy::Lasso => {
                let lasso = PenaltySpec {
                    alpha: 0.0,
                    ..penalty.clone()
                };
                lasso_beta = fit_from(dataset, &lasso, config, lasso_beta)?.beta;
                lasso_beta.clone()
            }
        };
        fits.push(fit_from(dataset, &penalty, config, start)?);
    }
    Ok(PathResult { alpha, lambdas, fits })
}

/// `‖β̂ − β*‖₂` helper used across metrics and probes.
pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
