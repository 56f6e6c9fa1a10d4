//! Coordinate descent for the correlation-weighted lasso.
//!
//! Both the least-squares solver and the inner loop of the logistic solver
//! run the same cyclic update on a (possibly weighted) quadratic loss:
//!
//! ```text
//! βⱼ ← S( (1/n) Σᵢ wᵢ xᵢⱼ (rᵢ + xᵢⱼ βⱼ), λ (1 + α Σ_{k≠j} R_jk |β_k|) ) / ( (1/n) Σᵢ wᵢ xᵢⱼ² + λ α R_jj )
//! ```
//!
//! where `r` is the cached working residual. `R|β|` is cached as well and
//! patched in O(p) whenever a coefficient moves.

pub mod linear;
pub mod logistic;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::similarity::PenaltySpec;

pub use linear::{
    check_kkt, coordinate_update, fit, fit_path, lambda_grid, lambda_max, objective, FitResult, PathResult,
};
pub use logistic::{
    fit_logistic, fit_logistic_from, fit_logistic_path, logistic_kkt, logistic_lambda_max, logistic_objective,
    quadratic_working_response, working_gradient, LogisticFitResult, LogisticPathResult,
};

/// How each λ of a path is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    /// All coefficients zero.
    Zeros,
    /// Previous λ's solution.
    Warm,
    /// Plain lasso (`α = 0`) solution at the same λ.
    Lasso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Convergence threshold on the largest coefficient change in a full sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    pub init: InitStrategy,
    /// `None` turns the active-set strategy on for `p > 1000`.
    pub active_set: Option<bool>,
    /// Outer (reweighting) iterations for the logistic solver.
    pub max_outer_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 10_000,
            init: InitStrategy::Warm,
            active_set: None,
            max_outer_iters: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::invalid(format!("tol = {} must be > 0", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps must be >= 1"));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters must be >= 1"));
        }
        Ok(())
    }

    pub(crate) fn use_active_set(&self, p: usize) -> bool {
        self.active_set.unwrap_or(p > 1000)
    }
}

/// `sgn(z) · max(|z| − γ, 0)`; returns 0 when `|z| = γ`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0, "negative threshold {gamma}");
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Closed-form minimizer of the one-dimensional subproblem
/// `½ (curvature + ridge) b² − partial·b + threshold·|b|`.
#[inline]
pub(crate) fn coordinate_minimizer(partial: f64, threshold: f64, curvature: f64, ridge: f64) -> f64 {
    soft_threshold(partial, threshold) / (curvature + ridge)
}

/// Mutable coordinate-descent state over a borrowed dataset.
pub(crate) struct Workspace<'a> {
    data: &'a Dataset,
    penalty: &'a PenaltySpec,
    weights: Option<&'a [f64]>,
    /// `(1/n) Σ wᵢ xᵢⱼ²`.
    curvature: Vec<f64>,
    pub beta: Vec<f64>,
    /// Fitted only in the weighted (logistic) problem.
    pub intercept: Option<f64>,
    /// `target − intercept − Xβ`.
    pub resid: Vec<f64>,
    /// `R|β|`, maintained only when `α > 0`.
    rabs: Vec<f64>,
    target: &'a [f64],
    inv_n: f64,
}

impl<'a> Workspace<'a> {
    pub fn new(
        data: &'a Dataset,
        target: &'a [f64],
        weights: Option<&'a [f64]>,
        penalty: &'a PenaltySpec,
        beta: Vec<f64>,
        intercept: Option<f64>,
    ) -> Self {
        let n = data.n();
        let inv_n = 1.0 / n as f64;
        let curvature = (0..data.p())
            .map(|j| {
                let col = data.col(j);
                match weights {
                    Some(w) => col.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>() * inv_n,
                    None => col.iter().map(|x| x * x).sum::<f64>() * inv_n,
                }
            })
            .collect();
        let mut ws = Self {
            data,
            penalty,
            weights,
            curvature,
            beta,
            intercept,
            resid: Vec::new(),
            rabs: Vec::new(),
            target,
            inv_n,
        };
        ws.refresh();
        ws
    }

    /// Recomputes the residual and `R|β|` caches from scratch.
    pub fn refresh(&mut self) {
        let b0 = self.intercept.unwrap_or(0.0);
        let mut resid: Vec<f64> = self.target.iter().map(|t| t - b0).collect();
        for (j, &b) in self.beta.iter().enumerate() {
            if b != 0.0 {
                for (r, x) in resid.iter_mut().zip(self.data.col(j)) {
                    *r -= b * x;
                }
            }
        }
        self.resid = resid;
        self.rabs = if self.penalty.alpha > 0.0 {
            self.penalty.similarity.mul_abs(&self.beta)
        } else {
            Vec::new()
        };
    }

    #[inline]
    fn weighted_dot(&self, j: usize) -> f64 {
        let col = self.data.col(j);
        let s: f64 = match self.weights {
            Some(w) => col.iter().zip(&self.resid).zip(w).map(|((x, r), w)| w * x * r).sum(),
            None => col.iter().zip(&self.resid).map(|(x, r)| x * r).sum(),
        };
        s * self.inv_n
    }

    /// Penalty-weighted threshold `λ(1 + α Σ_{k≠j} R_jk |β_k|)` at the
    /// current state.
    #[inline]
    pub fn threshold(&self, j: usize) -> f64 {
        let pen = self.penalty;
        if pen.alpha > 0.0 {
            let cross = (self.rabs[j] - pen.similarity.diag(j) * self.beta[j].abs()).max(0.0);
            pen.lambda * (1.0 + pen.alpha * cross)
        } else {
            pen.lambda
        }
    }

    /// Exact minimization over coordinate `j`; returns `|Δβⱼ|`.
    pub fn update(&mut self, j: usize) -> f64 {
        let old = self.beta[j];
        let curv = self.curvature[j];
        if curv <= 0.0 {
            return 0.0;
        }
        let pen = self.penalty;
        let partial = self.weighted_dot(j) + curv * old;
        let ridge = pen.lambda * pen.alpha * pen.similarity.diag(j);
        let new = coordinate_minimizer(partial, self.threshold(j), curv, ridge);
        if new == old {
            return 0.0;
        }
        let delta = new - old;
        for (r, x) in self.resid.iter_mut().zip(self.data.col(j)) {
            *r -= delta * x;
        }
        if pen.alpha > 0.0 {
            let dabs = new.abs() - old.abs();
            if dabs != 0.0 {
                pen.similarity.add_scaled_row(j, dabs, &mut self.rabs);
            }
        }
        self.beta[j] = new;
        delta.abs()
    }

    /// Weighted-mean update of the unpenalized intercept.
    pub fn update_intercept(&mut self) -> f64 {
        let Some(b0) = self.intercept else { return 0.0 };
        let (num, den) = match self.weights {
            Some(w) => self
                .resid
                .iter()
                .zip(w)
                .fold((0.0, 0.0), |(a, b), (r, w)| (a + w * r, b + w)),
            None => (self.resid.iter().sum(), self.resid.len() as f64),
        };
        if den <= 0.0 {
            return 0.0;
        }
        let shift = num / den;
        self.resid.iter_mut().for_each(|r| *r -= shift);
        self.intercept = Some(b0 + shift);
        shift.abs()
    }

    pub fn sweep_all(&mut self) -> f64 {
        let mut change = self.update_intercept();
        for j in 0..self.beta.len() {
            change = change.max(self.update(j));
        }
        change
    }

    pub fn sweep_subset(&mut self, coords: &[usize]) -> f64 {
        let mut change = self.update_intercept();
        for &j in coords {
            change = change.max(self.update(j));
        }
        change
    }

    pub fn support(&self) -> Vec<usize> {
        support_of(&self.beta)
    }

    /// `½ (1/n) Σ wᵢ rᵢ² + penalty(β)`.
    pub fn objective(&self) -> f64 {
        let loss: f64 = match self.weights {
            Some(w) => self.resid.iter().zip(w).map(|(r, w)| w * r * r).sum(),
            None => self.resid.iter().map(|r| r * r).sum(),
        };
        let pen = self.penalty;
        let l1: f64 = self.beta.iter().map(|b| b.abs()).sum();
        let quad = if pen.alpha > 0.0 {
            self.rabs.iter().zip(&self.beta).map(|(r, b)| r * b.abs()).sum::<f64>()
        } else {
            0.0
        };
        0.5 * loss * self.inv_n + pen.lambda * (l1 + 0.5 * pen.alpha * quad)
    }

    /// Runs cyclic sweeps (optionally with the active-set strategy) until a
    /// full sweep moves no coefficient by `tol` or more. Returns the number of
    /// sweeps and whether that happened.
    pub fn run(
        &mut self,
        tol: f64,
        max_sweeps: usize,
        active_set: bool,
        mut on_sweep: impl FnMut(&Self, usize) -> Result<()>,
    ) -> Result<(usize, bool)> {
        let mut sweeps = 0;
        while sweeps < max_sweeps {
            let change = self.sweep_all();
            sweeps += 1;
            if !change.is_finite() {
                return Err(Error::NonFinite { sweep: sweeps });
            }
            on_sweep(self, sweeps)?;
            if change < tol {
                return Ok((sweeps, true));
            }
            if sweeps % 16 == 0 {
                self.refresh();
            }
            if active_set {
                let active = self.support();
                while sweeps < max_sweeps {
                    let change = self.sweep_subset(&active);
                    sweeps += 1;
                    if !change.is_finite() {
                        return Err(Error::NonFinite { sweep: sweeps });
                    }
                    on_sweep(self, sweeps)?;
                    if change < tol {
                        break;
                    }
                }
            }
        }
        Ok((sweeps, false))
    }
}

pub(crate) fn support_of(beta: &[f64]) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(j, _)| j)
        .collect()
}
