//! Sign-recovery conditions for critical points and a multi-start probe of
//! local optima.
//!
//! For true support `S`, signs `D = Diag(sgn β*_S)` and noise `ε`:
//!
//! ```text
//! U = (1/n) X_Sᵀ X_S + λα D R_SS D
//! V = λ sgn β*_S + λα D R_SS D β*_S − (1/n) X_Sᵀ ε
//! ```
//!
//! A critical point with `sgn β̂ = sgn β*` exists iff
//! `sgn(β*_S − U⁻¹V) = sgn β*_S` and, for every inactive `j`,
//! `|(1/n) X_jᵀ X_S U⁻¹V + (1/n) X_jᵀ ε| ≤ λ (1 + α R_{jS} |β*_S − U⁻¹V|)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{seq::index::sample, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, unstandardize_coefficients, Dataset, GroundTruth, SyntheticSpec};
use crate::error::{Error, Result};
use crate::similarity::{PenaltySpec, SimilarityMatrix};
use crate::solver::linear::l2_distance;
use crate::solver::{fit, SolverConfig};

/// `U` is treated as singular above this condition number.
pub const MAX_CONDITION: f64 = 1e12;

pub const REPORT_SCOPE: &str =
    "conditions characterize existence of a sign-correct critical point, not a global minimizer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignRecoveryReport {
    pub lambda: f64,
    pub alpha: f64,
    /// 0-based true support, in increasing order.
    pub support: Vec<usize>,
    /// Row-major `s × s`.
    pub u: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub u_invertible: bool,
    pub u_condition_number: f64,
    /// `β*_S − U⁻¹V`; empty when `U` is singular.
    pub beta_s_implied: Vec<f64>,
    pub cond_31: Vec<bool>,
    pub cond_32: Vec<bool>,
    /// Left side of the inactive-set inequality, one entry per inactive column.
    pub inactive_lhs: Vec<f64>,
    /// Right side of the inactive-set inequality.
    pub inactive_rhs: Vec<f64>,
    pub holds: bool,
    pub scope: String,
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Evaluates both sign-recovery conditions for `y = X β* + ε`.
pub fn sign_recovery_check(
    dataset: &Dataset,
    truth: &GroundTruth,
    noise: &[f64],
    penalty: &PenaltySpec,
) -> Result<SignRecoveryReport> {
    let (n, p) = (dataset.n(), dataset.p());
    if truth.beta_star.len() != p {
        return Err(Error::dim("true coefficient vector", p, truth.beta_star.len()));
    }
    if noise.len() != n {
        return Err(Error::dim("noise vector", n, noise.len()));
    }
    if penalty.p() != p {
        return Err(Error::dim("similarity matrix", p, penalty.p()));
    }
    penalty.validate()?;
    if !(penalty.lambda > 0.0) {
        return Err(Error::invalid("sign-recovery check requires lambda > 0"));
    }
    let support: Vec<usize> = (0..p).filter(|&j| truth.beta_star[j] != 0.0).collect();
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let inactive: Vec<usize> = (0..p).filter(|&j| truth.beta_star[j] == 0.0).collect();
    let s = support.len();
    let inv_n = 1.0 / n as f64;
    let (lambda, alpha) = (penalty.lambda, penalty.alpha);
    let r = &penalty.similarity;

    let dot = |a: usize, b: &[f64]| dataset.col(a).iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * inv_n;
    let gram = |a: usize, b: usize| dot(a, dataset.col(b));

    let beta_s: Vec<f64> = support.iter().map(|&j| truth.beta_star[j]).collect();
    let signs: Vec<f64> = beta_s.iter().map(|&b| sgn(b)).collect();

    // λα D R_SS D
    let m = DMatrix::from_fn(s, s, |a, b| {
        lambda * alpha * signs[a] * r.get(support[a], support[b]) * signs[b]
    });
    let u = DMatrix::from_fn(s, s, |a, b| gram(support[a], support[b])) + &m;
    let m_beta = &m * DVector::from_column_slice(&beta_s);
    let v = DVector::from_fn(s, |a, _| lambda * signs[a] + m_beta[a] - dot(support[a], noise));

    let eig = u.clone().symmetric_eigenvalues();
    let max_abs = eig.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    let min_abs = eig.iter().fold(f64::INFINITY, |acc, e| acc.min(e.abs()));
    let cond = if min_abs > 0.0 {
        max_abs / min_abs
    } else {
        f64::INFINITY
    };
    let u_rows: Vec<Vec<f64>> = (0..s).map(|a| (0..s).map(|b| u[(a, b)]).collect()).collect();
    let v_vec: Vec<f64> = v.iter().copied().collect();

    let solved = if cond.is_finite() && cond <= MAX_CONDITION {
        u.clone().lu().solve(&v)
    } else {
        None
    };
    let Some(u_inv_v) = solved else {
        return Ok(SignRecoveryReport {
            lambda,
            alpha,
            support,
            u: u_rows,
            v: v_vec,
            u_invertible: false,
            u_condition_number: cond,
            beta_s_implied: Vec::new(),
            cond_31: Vec::new(),
            cond_32: Vec::new(),
            inactive_lhs: Vec::new(),
            inactive_rhs: Vec::new(),
            holds: false,
            scope: REPORT_SCOPE.to_owned(),
        });
    };

    let implied: Vec<f64> = (0..s).map(|a| beta_s[a] - u_inv_v[a]).collect();
    let cond_31: Vec<bool> = implied.iter().zip(&signs).map(|(b, sg)| sgn(*b) == *sg).collect();

    // X_S U⁻¹V as an n-vector, reused for every inactive column
    let mut xs_w = vec![0.0; n];
    for (a, &j) in support.iter().enumerate() {
        for (acc, x) in xs_w.iter_mut().zip(dataset.col(j)) {
            *acc += x * u_inv_v[a];
        }
    }
    let abs_implied: Vec<f64> = implied.iter().map(|b| b.abs()).collect();
    let mut lhs = Vec::with_capacity(inactive.len());
    let mut rhs = Vec::with_capacity(inactive.len());
    for &j in &inactive {
        lhs.push((dot(j, &xs_w) + dot(j, noise)).abs());
        let cross: f64 = support.iter().zip(&abs_implied).map(|(&k, b)| r.get(j, k) * b).sum();
        rhs.push(lambda * (1.0 + alpha * cross));
    }
    let cond_32: Vec<bool> = lhs.iter().zip(&rhs).map(|(l, r)| l <= r).collect();
    let holds = cond_31.iter().chain(&cond_32).all(|&c| c);

    Ok(SignRecoveryReport {
        lambda,
        alpha,
        support,
        u: u_rows,
        v: v_vec,
        u_invertible: true,
        u_condition_number: cond,
        beta_s_implied: implied,
        cond_31,
        cond_32,
        inactive_lhs: lhs,
        inactive_rhs: rhs,
        holds,
        scope: REPORT_SCOPE.to_owned(),
    })
}

/// `ε ~ N(0, σ²)`, deterministic in `seed`.
pub fn draw_noise(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            sigma * e
        })
        .collect()
}

/// Re-expresses a raw-scale model `y = X β* + ε` on the dataset's
/// standardized scale: `β*ⱼ·scaleⱼ` and the centered noise, so that the
/// centered response equals `X_std β*_std + ε_c` exactly.
pub fn standardized_truth(truth: &GroundTruth, noise: &[f64], dataset: &Dataset) -> Result<(GroundTruth, Vec<f64>)> {
    let p = dataset.p();
    if truth.beta_star.len() != p {
        return Err(Error::dim("true coefficient vector", p, truth.beta_star.len()));
    }
    if noise.len() != dataset.n() {
        return Err(Error::dim("noise vector", dataset.n(), noise.len()));
    }
    let beta = truth
        .beta_star
        .iter()
        .zip(dataset.col_scales())
        .map(|(b, s)| b * s)
        .collect();
    let mean = noise.iter().sum::<f64>() / noise.len() as f64;
    Ok((GroundTruth::new(beta), noise.iter().map(|e| e - mean).collect()))
}

/// Starting point with `β*_S` on the support and zeros elsewhere.
pub fn support_start(truth: &GroundTruth) -> Vec<f64> {
    truth.beta_star.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPoint {
    pub lambda: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub lambda: f64,
    pub alpha: f64,
    /// `‖β̂ − β*‖₂` per start; the zero start comes first.
    pub errors: Vec<f64>,
    pub objectives: Vec<f64>,
    pub min_error: f64,
    pub max_error: f64,
    pub spread: f64,
}

impl ProbeRow {
    /// Worst-to-best error ratio (1 when every start lands at the truth).
    pub fn error_ratio(&self) -> f64 {
        if self.min_error > 0.0 {
            self.max_error / self.min_error
        } else if self.max_error == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    }
}

/// Runs the solver from zeros and from `n_starts` random sparse starts for
/// each penalty, on a fixed dataset. Random starts put uniform values in
/// `[-m, m]` (with `m = max|β*|`) on `s` randomly chosen coordinates.
/// Errors compare raw-scale coefficients with `β*`.
pub fn probe_local_optima(
    dataset: &Dataset,
    truth: &GroundTruth,
    similarity: Arc<SimilarityMatrix>,
    penalties: &[PenaltyPoint],
    n_starts: usize,
    seed: u64,
    config: &SolverConfig,
) -> Result<Vec<ProbeRow>> {
    if n_starts < 2 {
        return Err(Error::invalid("n_starts must be at least 2"));
    }
    let p = dataset.p();
    let scale = truth.beta_star.iter().fold(0.0f64, |m, b| m.max(b.abs())).max(1.0);
    let k = truth.s.clamp(1, p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![vec![0.0; p]];
    for _ in 0..n_starts {
        let mut b = vec![0.0; p];
        for j in sample(&mut rng, p, k) {
            b[j] = rng.random_range(-scale..scale);
        }
        starts.push(b);
    }

    penalties
        .iter()
        .map(|pt| {
            let penalty = PenaltySpec::new(pt.lambda, pt.alpha, similarity.clone())?;
            let mut errors = Vec::with_capacity(starts.len());
            let mut objectives = Vec::with_capacity(starts.len());
            for start in &starts {
                let f = fit(dataset, &penalty, config, Some(start))?;
                let (raw, _) = unstandardize_coefficients(&f.beta, dataset)?;
                errors.push(l2_distance(&raw, &truth.beta_star));
                objectives.push(f.objective);
            }
            let min_error = errors.iter().copied().fold(f64::INFINITY, f64::min);
            let max_error = errors.iter().copied().fold(0.0, f64::max);
            Ok(ProbeRow {
                lambda: pt.lambda,
                alpha: pt.alpha,
                errors,
                objectives,
                min_error,
                max_error,
                spread: max_error - min_error,
            })
        })
        .collect()
}

/// Draws a dataset from `spec`, builds `R` with `build` and probes it.
pub fn local_optimum_error_probe(
    spec: &SyntheticSpec,
    build: impl Fn(&Dataset) -> Result<SimilarityMatrix>,
    penalty_grid: &[PenaltyPoint],
    n_starts: usize,
    seed: u64,
    config: &SolverConfig,
) -> Result<Vec<ProbeRow>> {
    let (ds, truth) = generate_synthetic(spec)?;
    let sim = Arc::new(build(&ds)?);
    probe_local_optima(&ds, &truth, sim, penalty_grid, n_starts, seed, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;
    use crate::similarity::{build_similarity, SimilarityVariant, DEFAULT_CLAMP};
    use crate::solver::lambda_max;

    /// Four orthonormal columns (`XᵀX/n = I`) of length 8.
    fn orthonormal(y: Vec<f64>) -> Dataset {
        let cols = [
            [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0],
            [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0],
            [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
            [1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0],
        ];
        let flat: Vec<f64> = cols.iter().flatten().copied().collect();
        Dataset::from_raw(DMatrix::from_column_slice(8, 4, &flat), y, Task::Regression, None).unwrap()
    }

    fn truth() -> GroundTruth {
        GroundTruth::new(vec![2.0, -1.5, 0.0, 0.0])
    }

    #[test]
    fn orthonormal_closed_form() {
        let t = truth();
        let ds = orthonormal(vec![0.0; 8]);
        let zero = Arc::new(SimilarityMatrix::zeros(4));
        for (lambda, expect) in [(1.0, true), (1.49, true), (1.6, false), (3.0, false)] {
            let pen = PenaltySpec::new(lambda, 0.0, zero.clone()).unwrap();
            let rep = sign_recovery_check(&ds, &t, &[0.0; 8], &pen).unwrap();
            assert!(rep.u_invertible);
            for a in 0..2 {
                for b in 0..2 {
                    assert!((rep.u[a][b] - f64::from(u8::from(a == b))).abs() < 1e-15);
                }
            }
            assert_eq!(rep.v, vec![lambda, -lambda]);
            assert_eq!(rep.cond_31.iter().all(|c| *c), expect, "lambda = {lambda}");
        }
    }

    #[test]
    fn cross_similarity_relaxes_inactive_condition() {
        let t = truth();
        let ds = orthonormal(vec![0.0; 8]);
        let mut r = vec![0.0; 16];
        for j in 2..4 {
            for k in 0..2 {
                r[j * 4 + k] = 0.7;
                r[k * 4 + j] = 0.7;
            }
        }
        let r = Arc::new(SimilarityMatrix::from_dense(4, r).unwrap());
        let plain = sign_recovery_check(&ds, &t, &[0.0; 8], &PenaltySpec::new(0.5, 0.0, r.clone()).unwrap()).unwrap();
        let rich = sign_recovery_check(&ds, &t, &[0.0; 8], &PenaltySpec::new(0.5, 2.0, r).unwrap()).unwrap();
        assert_eq!(plain.cond_31, rich.cond_31);
        for (a, b) in plain.inactive_rhs.iter().zip(&rich.inactive_rhs) {
            assert!(b > a);
        }
    }

    #[test]
    fn singular_u_is_reported() {
        let col = [1.0, -1.0, 2.0, -2.0, 0.5, -0.5];
        let mut flat = col.to_vec();
        flat.extend(col);
        flat.extend([1.0, 1.0, -1.0, -1.0, 0.0, 0.0]);
        let ds = Dataset::standardized(
            DMatrix::from_column_slice(6, 3, &flat),
            vec![0.0; 6],
            Task::Regression,
            None,
        )
        .unwrap();
        let t = GroundTruth::new(vec![1.0, 1.0, 0.0]);
        let pen = PenaltySpec::new(0.1, 0.0, Arc::new(SimilarityMatrix::zeros(3))).unwrap();
        let rep = sign_recovery_check(&ds, &t, &[0.0; 6], &pen).unwrap();
        assert!(!rep.u_invertible);
        assert!(!rep.holds);
    }

    #[test]
    fn input_errors() {
        let ds = orthonormal(vec![0.0; 8]);
        let pen = PenaltySpec::new(0.5, 0.0, Arc::new(SimilarityMatrix::zeros(4))).unwrap();
        assert!(matches!(
            sign_recovery_check(&ds, &GroundTruth::new(vec![0.0; 4]), &[0.0; 8], &pen),
            Err(Error::EmptySupport)
        ));
        assert!(sign_recovery_check(&ds, &truth(), &[0.0; 7], &pen).is_err());
        let zero_lambda = PenaltySpec::new(0.0, 0.0, Arc::new(SimilarityMatrix::zeros(4))).unwrap();
        assert!(sign_recovery_check(&ds, &truth(), &[0.0; 8], &zero_lambda).is_err());
    }

    #[test]
    fn scaling_cross_similarity_never_tightens() {
        let spec = SyntheticSpec {
            n: 40,
            p: 12,
            b: 3,
            q: 4,
            rho: 0.6,
            coef: vec![3.0, -2.0, 1.5],
            noise_sd: 0.5,
            seed: 5,
        };
        let (ds, t) = generate_synthetic(&spec).unwrap();
        let base = build_similarity(&ds, SimilarityVariant::Ratio, DEFAULT_CLAMP, None).unwrap();
        let noise = draw_noise(40, 0.5, 1);
        let dense = base.to_dense();
        let mut prev: Option<Vec<f64>> = None;
        for c in [1.0, 1.5, 3.0, 10.0] {
            let mut scaled = dense.clone();
            for j in 0..12 {
                for k in 0..12 {
                    let jin = t.support.contains(&j);
                    let kin = t.support.contains(&k);
                    if jin != kin {
                        scaled[j * 12 + k] *= c;
                    }
                }
            }
            let r = Arc::new(SimilarityMatrix::from_dense(12, scaled).unwrap());
            let rep = sign_recovery_check(&ds, &t, &noise, &PenaltySpec::new(0.2, 0.5, r).unwrap()).unwrap();
            if let Some(prev) = prev {
                for (a, b) in prev.iter().zip(&rep.inactive_rhs) {
                    assert!(b >= a);
                }
            }
            prev = Some(rep.inactive_rhs);
        }
    }

    #[test]
    fn convex_probe_has_no_spread() {
        let spec = SyntheticSpec {
            n: 60,
            p: 20,
            b: 4,
            q: 5,
            rho: 0.5,
            coef: vec![3.0, -2.0, 1.0, 0.5],
            noise_sd: 0.5,
            seed: 2,
        };
        let cfg = SolverConfig {
            tol: 1e-10,
            ..Default::default()
        };
        let rows = local_optimum_error_probe(
            &spec,
            |ds| build_similarity(ds, SimilarityVariant::Squared, DEFAULT_CLAMP, None),
            &[PenaltyPoint {
                lambda: 0.05,
                alpha: 1.0,
            }],
            4,
            9,
            &cfg,
        )
        .unwrap();
        assert_eq!(rows[0].errors.len(), 5);
        assert!(rows[0].spread <= 1e-5, "spread {}", rows[0].spread);
    }

    #[test]
    fn probe_beyond_lambda_max_is_null() {
        let spec = SyntheticSpec {
            n: 50,
            p: 20,
            b: 4,
            q: 5,
            rho: 0.9,
            coef: vec![3.0, -2.0, 1.0, 0.5],
            noise_sd: 0.5,
            seed: 3,
        };
        let (ds, t) = generate_synthetic(&spec).unwrap();
        let r = Arc::new(build_similarity(&ds, SimilarityVariant::Ratio, DEFAULT_CLAMP, None).unwrap());
        let lam = 10.0 * lambda_max(&ds);
        let rows = probe_local_optima(
            &ds,
            &t,
            r,
            &[PenaltyPoint {
                lambda: lam,
                alpha: 1.0,
            }],
            5,
            4,
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(rows[0].spread, 0.0);
        let null = l2_distance(&[0.0; 20], &t.beta_star);
        assert!(rows[0].errors.iter().all(|e| (*e - null).abs() < 1e-12));
        assert!(probe_local_optima(
            &ds,
            &t,
            Arc::new(SimilarityMatrix::zeros(20)),
            &[],
            1,
            0,
            &SolverConfig::default()
        )
        .is_err());
    }
}
