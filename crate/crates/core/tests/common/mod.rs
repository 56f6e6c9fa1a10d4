//! Reference implementations written without the library's solver
//! internals: textbook coordinate descent recomputing the full residual,
//! a specialized exclusive-group-lasso solver, a plain lasso sign checker
//! and small dense linear algebra.
#![allow(dead_code)]

pub mod schema;

use iilasso::data::{Dataset, Task};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn soft(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Column `j` of a dataset as a Vec (row order).
pub fn column(ds: &Dataset, j: usize) -> Vec<f64> {
    (0..ds.n()).map(|i| ds.x()[(i, j)]).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian design with a few correlated pairs, standardized.
pub fn random_regression(n: usize, p: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut x = DMatrix::from_fn(n, p, |_, _| r.sample::<f64, _>(StandardNormal));
    for j in (1..p).step_by(3) {
        for i in 0..n {
            x[(i, j)] = 0.7 * x[(i, j - 1)] + 0.5 * x[(i, j)];
        }
    }
    let y = (0..n)
        .map(|i| {
            let signal: f64 = (0..p.min(5))
                .map(|j| (j as f64 + 1.0) * if j % 2 == 0 { 1.0 } else { -1.0 } * x[(i, j * 3 % p)])
                .sum();
            signal + r.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Dataset::standardized(x, y, Task::Regression, None).unwrap()
}

/// Textbook cyclic lasso descent on `(1/2n)‖y − Xβ‖² + λ‖β‖₁`. Every update
/// recomputes the partial residual from scratch.
pub fn lasso_oracle(ds: &Dataset, lambda: f64, tol: f64) -> Vec<f64> {
    let (n, p) = (ds.n(), ds.p());
    let cols: Vec<Vec<f64>> = (0..p).map(|j| column(ds, j)).collect();
    let y = ds.y();
    let mut beta = vec![0.0; p];
    for _ in 0..100_000 {
        let mut change: f64 = 0.0;
        for j in 0..p {
            let partial: Vec<f64> = (0..n)
                .map(|i| y[i] - (0..p).filter(|&k| k != j).map(|k| cols[k][i] * beta[k]).sum::<f64>())
                .collect();
            let z = dot(&cols[j], &partial) / n as f64;
            let a = dot(&cols[j], &cols[j]) / n as f64;
            let new = soft(z, lambda) / a;
            change = change.max((new - beta[j]).abs());
            beta[j] = new;
        }
        if change < tol {
            break;
        }
    }
    beta
}

/// `(1/2n)‖y − Xβ‖² + λ₁‖β‖₁ + λ₂ Σ_g ‖β_g‖₁²`.
pub fn eglasso_objective(ds: &Dataset, beta: &[f64], groups: &[Vec<usize>], l1: f64, l2: f64) -> f64 {
    let n = ds.n();
    let mut rss = 0.0;
    for i in 0..n {
        let f: f64 = (0..ds.p()).map(|j| ds.x()[(i, j)] * beta[j]).sum();
        rss += (ds.y()[i] - f).powi(2);
    }
    let lasso: f64 = beta.iter().map(|b| b.abs()).sum();
    let excl: f64 = groups
        .iter()
        .map(|g| g.iter().map(|&j| beta[j].abs()).sum::<f64>().powi(2))
        .sum();
    rss / (2.0 * n as f64) + l1 * lasso + l2 * excl
}

/// Coordinate descent for the exclusive group lasso. Minimizing over `βⱼ`
/// with the rest fixed gives
/// `βⱼ = S(zⱼ, λ₁ + 2λ₂ Σ_{k∈g(j), k≠j} |β_k|) / (aⱼ + 2λ₂)`.
pub fn eglasso_oracle(ds: &Dataset, groups: &[Vec<usize>], l1: f64, l2: f64, tol: f64) -> Vec<f64> {
    let (n, p) = (ds.n(), ds.p());
    let cols: Vec<Vec<f64>> = (0..p).map(|j| column(ds, j)).collect();
    let mut group_of = vec![0; p];
    for (g, members) in groups.iter().enumerate() {
        for &j in members {
            group_of[j] = g;
        }
    }
    let y = ds.y();
    let mut beta = vec![0.0; p];
    for _ in 0..100_000 {
        let mut change: f64 = 0.0;
        for j in 0..p {
            let partial: Vec<f64> = (0..n)
                .map(|i| y[i] - (0..p).filter(|&k| k != j).map(|k| cols[k][i] * beta[k]).sum::<f64>())
                .collect();
            let z = dot(&cols[j], &partial) / n as f64;
            let a = dot(&cols[j], &cols[j]) / n as f64;
            let others: f64 = groups[group_of[j]]
                .iter()
                .filter(|&&k| k != j)
                .map(|&k| beta[k].abs())
                .sum();
            let new = soft(z, l1 + 2.0 * l2 * others) / (a + 2.0 * l2);
            change = change.max((new - beta[j]).abs());
            beta[j] = new;
        }
        if change < tol {
            break;
        }
    }
    beta
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let m = b.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for c in 0..m {
        let piv = (c..m).max_by(|&i, &k| aug[i][c].abs().total_cmp(&aug[k][c].abs()))?;
        if aug[piv][c].abs() < 1e-14 {
            return None;
        }
        aug.swap(c, piv);
        for r in 0..m {
            if r != c {
                let f = aug[r][c] / aug[c][c];
                for k in c..=m {
                    aug[r][k] -= f * aug[c][k];
                }
            }
        }
    }
    Some((0..m).map(|i| aug[i][m] / aug[i][i]).collect())
}

/// Plain lasso sign-recovery check for `y = Xβ* + ε`, written in terms of
/// the candidate solution: `β̂_S = G⁻¹((1/n)X_Sᵀy − λ sgn β*_S)` with
/// `G = (1/n)X_SᵀX_S`; recovery needs `sgn β̂_S = sgn β*_S` and
/// `|(1/n)X_jᵀ(y − X_S β̂_S)| ≤ λ` for every inactive `j`.
/// Returns `None` when `G` is singular.
pub fn lasso_sign_oracle(ds: &Dataset, beta_star: &[f64], noise: &[f64], lambda: f64) -> Option<bool> {
    let (n, p) = (ds.n(), ds.p());
    let nf = n as f64;
    let support: Vec<usize> = (0..p).filter(|&j| beta_star[j] != 0.0).collect();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| column(ds, j)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| support.iter().map(|&j| cols[j][i] * beta_star[j]).sum::<f64>() + noise[i])
        .collect();
    let g: Vec<Vec<f64>> = support
        .iter()
        .map(|&a| support.iter().map(|&b| dot(&cols[a], &cols[b]) / nf).collect())
        .collect();
    let rhs: Vec<f64> = support
        .iter()
        .map(|&j| dot(&cols[j], &y) / nf - lambda * beta_star[j].signum())
        .collect();
    let bhat = solve(&g, &rhs)?;
    let signs_ok = support
        .iter()
        .zip(&bhat)
        .all(|(&j, b)| b.signum() == beta_star[j].signum() && *b != 0.0);
    let resid: Vec<f64> = (0..n)
        .map(|i| y[i] - support.iter().zip(&bhat).map(|(&j, b)| cols[j][i] * b).sum::<f64>())
        .collect();
    let inactive_ok = (0..p)
        .filter(|j| !support.contains(j))
        .all(|j| (dot(&cols[j], &resid) / nf).abs() <= lambda);
    Some(signs_ok && inactive_ok)
}

/// Exact penalized logistic objective, computed naively.
pub fn logistic_loss(ds: &Dataset, beta: &[f64], b0: f64, lambda: f64, alpha: f64, r: &[Vec<f64>]) -> f64 {
    let n = ds.n();
    let mut nll = 0.0;
    for i in 0..n {
        let eta = b0 + (0..ds.p()).map(|j| ds.x()[(i, j)] * beta[j]).sum::<f64>();
        nll += (1.0 + eta.exp()).ln() - ds.y()[i] * eta;
    }
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let mut quad = 0.0;
    for j in 0..beta.len() {
        for k in 0..beta.len() {
            quad += beta[j].abs() * r[j][k] * beta[k].abs();
        }
    }
    nll / n as f64 + lambda * (l1 + 0.5 * alpha * quad)
}

/// Proximal gradient descent for the logistic lasso with an unpenalized
/// intercept. Step `1/L` with `L = (1 + Σⱼ‖xⱼ‖²/n)/4`, which bounds the
/// curvature of the mean negative log-likelihood.
pub fn logistic_lasso_oracle(ds: &Dataset, lambda: f64, tol: f64) -> (Vec<f64>, f64) {
    let (n, p) = (ds.n(), ds.p());
    let nf = n as f64;
    let cols: Vec<Vec<f64>> = (0..p).map(|j| column(ds, j)).collect();
    let lip = 0.25 * (1.0 + cols.iter().map(|c| dot(c, c) / nf).sum::<f64>());
    let step = 1.0 / lip;
    let mut beta = vec![0.0; p];
    let mut b0 = 0.0;
    for _ in 0..2_000_000 {
        let resid: Vec<f64> = (0..n)
            .map(|i| {
                let eta = b0 + (0..p).map(|j| cols[j][i] * beta[j]).sum::<f64>();
                1.0 / (1.0 + (-eta).exp()) - ds.y()[i]
            })
            .collect();
        let g0 = resid.iter().sum::<f64>() / nf;
        let new_b0 = b0 - step * g0;
        let mut change = (new_b0 - b0).abs();
        b0 = new_b0;
        for j in 0..p {
            let g = dot(&cols[j], &resid) / nf;
            let new = soft(beta[j] - step * g, step * lambda);
            change = change.max((new - beta[j]).abs());
            beta[j] = new;
        }
        if change < tol {
            break;
        }
    }
    (beta, b0)
}

/// Random standardized classification data with labels drawn from a sparse
/// logistic model.
pub fn random_classification(n: usize, p: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let x = DMatrix::from_fn(n, p, |_, _| r.sample::<f64, _>(StandardNormal));
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta = 1.2 * x[(i, 0)] - 0.8 * x[(i, 1 % p)] + 0.3;
            (r.random::<f64>() < 1.0 / (1.0 + (-eta).exp())) as u8 as f64
        })
        .collect();
    Dataset::standardized(x, y, Task::Classification, None).unwrap()
}
