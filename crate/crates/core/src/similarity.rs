//! Similarity matrices `R` and the correlation-weighted penalty
//! `λ (‖β‖₁ + α/2 · |β|ᵀ R |β|)`.

use std::borrow::Cow;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_CLAMP: f64 = 1e-4;

/// Above this many features `R` is not materialized; rows are recomputed
/// from the design on demand.
pub const DEFAULT_DENSE_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityVariant {
    /// `R_jk = r_jk²`, convex.
    Squared,
    /// `R_jk = |r_jk|`.
    Absolute,
    /// `R_jk = r/(1-r)` off the diagonal, zero on it.
    Ratio,
    /// 1 within a group, 0 across groups.
    #[value(name = "group")]
    GroupIndicator,
    /// User-supplied matrix.
    #[value(skip)]
    Custom,
}

impl fmt::Display for SimilarityVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SimilarityVariant::Squared => "squared",
            SimilarityVariant::Absolute => "absolute",
            SimilarityVariant::Ratio => "ratio",
            SimilarityVariant::GroupIndicator => "group_indicator",
            SimilarityVariant::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Disjoint, covering, nonempty groups of column indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    pub fn new(groups: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        let mut seen = vec![false; p];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::invalid(format!("group {g} is empty")));
            }
            for &j in members {
                if j >= p {
                    return Err(Error::IndexOutOfRange { index: j, p });
                }
                if seen[j] {
                    return Err(Error::invalid(format!("column {j} appears in more than one group")));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("column {j} is not covered by any group")));
        }
        Ok(Self { groups })
    }

    /// One group label per column. Labels need not be contiguous.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut order: Vec<usize> = labels.to_vec();
        order.sort_unstable();
        order.dedup();
        let groups = order
            .iter()
            .map(|&lab| (0..labels.len()).filter(|&j| labels[j] == lab).collect())
            .collect();
        Self::new(groups, labels.len())
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn labels(&self, p: usize) -> Vec<usize> {
        let mut labels = vec![0; p];
        for (g, members) in self.groups.iter().enumerate() {
            for &j in members {
                labels[j] = g;
            }
        }
        labels
    }
}

#[derive(Debug, Clone)]
enum Storage {
    /// Row-major `p × p`.
    Dense(Vec<f64>),
    Groups(Vec<usize>),
    /// Standardized design kept so rows can be recomputed.
    OnTheFly(Arc<DMatrix<f64>>),
}

/// Symmetric, nonnegative, finite `p × p` matrix.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    p: usize,
    variant: SimilarityVariant,
    clamp: f64,
    storage: Storage,
}

/// Maps an absolute correlation to a similarity entry.
pub fn similarity_entry(variant: SimilarityVariant, clamp: f64, abs_r: f64, diagonal: bool) -> f64 {
    match variant {
        SimilarityVariant::Squared => {
            if diagonal {
                1.0
            } else {
                abs_r * abs_r
            }
        }
        SimilarityVariant::Absolute => {
            if diagonal {
                1.0
            } else {
                abs_r
            }
        }
        SimilarityVariant::Ratio => {
            if diagonal {
                0.0
            } else {
                let r = abs_r.min(1.0 - clamp);
                r / (1.0 - r)
            }
        }
        SimilarityVariant::GroupIndicator | SimilarityVariant::Custom => {
            unreachable!("not a correlation-based variant")
        }
    }
}

fn abs_corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    (a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n).abs()
}

/// Builds `R` with the default dense-storage limit.
pub fn build_similarity(
    dataset: &Dataset,
    variant: SimilarityVariant,
    clamp: f64,
    partition: Option<&GroupPartition>,
) -> Result<SimilarityMatrix> {
    build_similarity_with_limit(dataset, variant, clamp, partition, DEFAULT_DENSE_LIMIT)
}

pub fn build_similarity_with_limit(
    dataset: &Dataset,
    variant: SimilarityVariant,
    clamp: f64,
    partition: Option<&GroupPartition>,
    dense_limit: usize,
) -> Result<SimilarityMatrix> {
    let p = dataset.p();
    match (variant, partition) {
        (SimilarityVariant::GroupIndicator, Some(part)) => {
            let part = GroupPartition::new(part.groups().to_vec(), p)?;
            return Ok(SimilarityMatrix {
                p,
                variant,
                clamp,
                storage: Storage::Groups(part.labels(p)),
            });
        }
        (SimilarityVariant::GroupIndicator, None) => {
            return Err(Error::invalid("group_indicator similarity requires a partition"));
        }
        (SimilarityVariant::Custom, _) => {
            return Err(Error::invalid("custom similarity must be built with from_dense"));
        }
        (_, Some(_)) => {
            return Err(Error::invalid(format!(
                "a partition is only valid for group_indicator, not {variant}"
            )));
        }
        _ => {}
    }
    if !(clamp > 0.0 && clamp < 1.0) {
        return Err(Error::invalid(format!("clamp = {clamp} must lie in (0, 1)")));
    }
    if let Some(j) = dataset.standardization_violation(1e-6) {
        return Err(Error::NotStandardized(dataset.column_names()[j].clone()));
    }

    if p > dense_limit {
        return Ok(SimilarityMatrix {
            p,
            variant,
            clamp,
            storage: Storage::OnTheFly(Arc::new(dataset.x().clone())),
        });
    }

    let upper: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let cj = dataset.col(j);
            ((j + 1)..p)
                .map(|k| similarity_entry(variant, clamp, abs_corr(cj, dataset.col(k)), false))
                .collect()
        })
        .collect();
    let mut dense = vec![0.0; p * p];
    for (j, row) in upper.iter().enumerate() {
        dense[j * p + j] = similarity_entry(variant, clamp, 1.0, true);
        for (off, &v) in row.iter().enumerate() {
            let k = j + 1 + off;
            dense[j * p + k] = v;
            dense[k * p + j] = v;
        }
    }
    Ok(SimilarityMatrix {
        p,
        variant,
        clamp,
        storage: Storage::Dense(dense),
    })
}

impl SimilarityMatrix {
    /// Wraps an explicit row-major matrix. It must be symmetric, finite and
    /// nonnegative.
    pub fn from_dense(p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != p * p {
            return Err(Error::dim("similarity entries", p * p, values.len()));
        }
        for j in 0..p {
            for k in 0..p {
                let v = values[j * p + k];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(format!("R[{j},{k}] = {v} must be finite and >= 0")));
                }
                if v != values[k * p + j] {
                    return Err(Error::invalid(format!("R is not symmetric at ({j},{k})")));
                }
            }
        }
        Ok(Self {
            p,
            variant: SimilarityVariant::Custom,
            clamp: DEFAULT_CLAMP,
            storage: Storage::Dense(values),
        })
    }

    /// All-zero matrix: the plain lasso penalty for any `α`.
    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            variant: SimilarityVariant::Custom,
            clamp: DEFAULT_CLAMP,
            storage: Storage::Dense(vec![0.0; p * p]),
        }
    }

    pub fn group_indicator(partition: &GroupPartition, p: usize) -> Result<Self> {
        let part = GroupPartition::new(partition.groups().to_vec(), p)?;
        Ok(Self {
            p,
            variant: SimilarityVariant::GroupIndicator,
            clamp: DEFAULT_CLAMP,
            storage: Storage::Groups(part.labels(p)),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn variant(&self) -> SimilarityVariant {
        self.variant
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    pub fn is_dense(&self) -> bool {
        !matches!(self.storage, Storage::OnTheFly(_))
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        match &self.storage {
            Storage::Dense(v) => v[j * self.p + k],
            Storage::Groups(labels) => f64::from(u8::from(labels[j] == labels[k])),
            Storage::OnTheFly(x) => {
                let n = x.nrows();
                let xs = x.as_slice();
                let r = abs_corr(&xs[j * n..(j + 1) * n], &xs[k * n..(k + 1) * n]);
                similarity_entry(self.variant, self.clamp, r, j == k)
            }
        }
    }

    #[inline]
    pub fn diag(&self, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(v) => v[j * self.p + j],
            Storage::Groups(_) => 1.0,
            Storage::OnTheFly(_) => similarity_entry(self.variant, self.clamp, 1.0, true),
        }
    }

    /// Row `j`; borrowed when stored densely.
    pub fn row(&self, j: usize) -> Cow<'_, [f64]> {
        match &self.storage {
            Storage::Dense(v) => Cow::Borrowed(&v[j * self.p..(j + 1) * self.p]),
            _ => Cow::Owned((0..self.p).map(|k| self.get(j, k)).collect()),
        }
    }

    /// `target += scale · R[j, :]`.
    pub fn add_scaled_row(&self, j: usize, scale: f64, target: &mut [f64]) {
        match &self.storage {
            Storage::Dense(v) => {
                for (t, r) in target.iter_mut().zip(&v[j * self.p..(j + 1) * self.p]) {
                    *t += scale * r;
                }
            }
            Storage::Groups(labels) => {
                let g = labels[j];
                for (t, &lab) in target.iter_mut().zip(labels) {
                    if lab == g {
                        *t += scale;
                    }
                }
            }
            Storage::OnTheFly(_) => {
                for (k, t) in target.iter_mut().enumerate() {
                    *t += scale * self.get(j, k);
                }
            }
        }
    }

    /// `R |β|`, skipping zero coefficients.
    pub fn mul_abs(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                self.add_scaled_row(j, b.abs(), &mut out);
            }
        }
        out
    }

    /// `|β|ᵀ R |β|`.
    pub fn quad_form_abs(&self, beta: &[f64]) -> f64 {
        self.mul_abs(beta).iter().zip(beta).map(|(r, b)| r * b.abs()).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(v) => v.clone(),
            _ => (0..self.p * self.p).map(|i| self.get(i / self.p, i % self.p)).collect(),
        }
    }

    /// Reorders rows and columns: entry `(a, b)` of the result is
    /// `R[perm[a], perm[b]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.p {
            return Err(Error::dim("permutation", self.p, perm.len()));
        }
        let p = self.p;
        let values = (0..p * p).map(|i| self.get(perm[i / p], perm[i % p])).collect();
        Ok(Self {
            p,
            variant: self.variant,
            clamp: self.clamp,
            storage: Storage::Dense(values),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for j in 0..self.p {
            w.write_record(self.row(j).iter().map(|v| format!("{v:e}")))?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }
}

/// `(λ, α, R)`.
#[derive(Debug, Clone)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub alpha: f64,
    pub similarity: Arc<SimilarityMatrix>,
}

impl PenaltySpec {
    pub fn new(lambda: f64, alpha: f64, similarity: Arc<SimilarityMatrix>) -> Result<Self> {
        let spec = Self {
            lambda,
            alpha,
            similarity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!(
                "lambda = {} must be finite and >= 0",
                self.lambda
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!(
                "alpha = {} must be finite and >= 0",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn p(&self) -> usize {
        self.similarity.p()
    }
}

/// `λ (‖β‖₁ + α/2 · Σⱼₖ R_jk |βⱼ||β_k|)`; exactly `λ‖β‖₁` when `α = 0`.
pub fn penalty_value(beta: &[f64], penalty: &PenaltySpec) -> Result<f64> {
    if beta.len() != penalty.p() {
        return Err(Error::dim("coefficient vector", penalty.p(), beta.len()));
    }
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    if penalty.alpha == 0.0 {
        return Ok(penalty.lambda * l1);
    }
    let quad = penalty.similarity.quad_form_abs(beta);
    Ok(penalty.lambda * (l1 + 0.5 * penalty.alpha * quad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;
    use proptest::prelude::*;

    fn ds_from_cols(cols: &[Vec<f64>]) -> Dataset {
        let n = cols[0].len();
        let flat: Vec<f64> = cols.iter().flatten().copied().collect();
        Dataset::standardized(
            DMatrix::from_column_slice(n, cols.len(), &flat),
            (0..n).map(|i| i as f64).collect(),
            Task::Regression,
            None,
        )
        .unwrap()
    }

    fn random_dataset(n: usize, p: usize, seed: u64) -> Dataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Dataset::standardized(x, y, Task::Regression, None).unwrap()
    }

    #[test]
    fn orthogonal_columns_give_zero_offdiagonal() {
        let ds = ds_from_cols(&[vec![1.0, -1.0, 1.0, -1.0], vec![1.0, 1.0, -1.0, -1.0]]);
        for v in [
            SimilarityVariant::Squared,
            SimilarityVariant::Absolute,
            SimilarityVariant::Ratio,
        ] {
            let r = build_similarity(&ds, v, DEFAULT_CLAMP, None).unwrap();
            assert_eq!(r.get(0, 1), 0.0, "{v}");
        }
    }

    #[test]
    fn ratio_entries() {
        assert!((similarity_entry(SimilarityVariant::Ratio, 1e-4, 0.5, false) - 1.0).abs() < 1e-15);
        let ds = ds_from_cols(&[vec![1.0, 2.0, 4.0, 3.0], vec![1.0, 2.0, 4.0, 3.0]]);
        let r = build_similarity(&ds, SimilarityVariant::Ratio, 1e-4, None).unwrap();
        assert!((r.get(0, 1) - 9999.0).abs() < 1e-6, "{}", r.get(0, 1));
        assert_eq!(r.diag(0), 0.0);
    }

    #[test]
    fn diagonal_conventions() {
        let ds = random_dataset(30, 4, 1);
        let sq = build_similarity(&ds, SimilarityVariant::Squared, DEFAULT_CLAMP, None).unwrap();
        let ab = build_similarity(&ds, SimilarityVariant::Absolute, DEFAULT_CLAMP, None).unwrap();
        for j in 0..4 {
            assert_eq!(sq.diag(j), 1.0);
            assert_eq!(ab.diag(j), 1.0);
            assert!((sq.get(0, j) - ab.get(0, j).powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn partition_rules() {
        let ds = random_dataset(10, 3, 2);
        assert!(build_similarity(&ds, SimilarityVariant::GroupIndicator, DEFAULT_CLAMP, None).is_err());
        let part = GroupPartition::from_labels(&[0, 0, 1]).unwrap();
        assert!(build_similarity(&ds, SimilarityVariant::Ratio, DEFAULT_CLAMP, Some(&part)).is_err());
        let r = build_similarity(&ds, SimilarityVariant::GroupIndicator, DEFAULT_CLAMP, Some(&part)).unwrap();
        assert_eq!(r.to_dense(), vec![1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(GroupPartition::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(GroupPartition::new(vec![vec![0, 1]], 3).is_err());
        assert!(GroupPartition::new(vec![vec![0, 1, 2], vec![]], 3).is_err());
    }

    #[test]
    fn rejects_unstandardized_and_bad_clamp() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 4.0]);
        let raw = Dataset::from_raw(x, vec![0.0, 1.0, 2.0], Task::Regression, None).unwrap();
        assert!(matches!(
            build_similarity(&raw, SimilarityVariant::Ratio, DEFAULT_CLAMP, None),
            Err(Error::NotStandardized(_))
        ));
        let ds = random_dataset(10, 2, 3);
        assert!(build_similarity(&ds, SimilarityVariant::Ratio, 0.0, None).is_err());
        assert!(build_similarity(&ds, SimilarityVariant::Ratio, 1.0, None).is_err());
    }

    #[test]
    fn on_the_fly_matches_dense() {
        let ds = random_dataset(25, 9, 4);
        for v in [
            SimilarityVariant::Squared,
            SimilarityVariant::Absolute,
            SimilarityVariant::Ratio,
        ] {
            let dense = build_similarity(&ds, v, DEFAULT_CLAMP, None).unwrap();
            let lazy = build_similarity_with_limit(&ds, v, DEFAULT_CLAMP, None, 3).unwrap();
            assert!(!lazy.is_dense());
            assert_eq!(dense.to_dense(), lazy.to_dense());
            let beta: Vec<f64> = (0..9).map(|j| (j as f64 - 4.0) * 0.3).collect();
            assert_eq!(dense.mul_abs(&beta), lazy.mul_abs(&beta));
        }
    }

    #[test]
    fn squared_variant_is_psd() {
        for seed in 0..5 {
            let ds = random_dataset(50, 20, 100 + seed);
            let r = build_similarity(&ds, SimilarityVariant::Squared, DEFAULT_CLAMP, None).unwrap();
            let m = DMatrix::from_row_slice(20, 20, &r.to_dense());
            let min = m.symmetric_eigenvalues().min();
            assert!(min >= -1e-8, "min eigenvalue {min}");
        }
    }

    #[test]
    fn monotone_in_correlation() {
        for v in [
            SimilarityVariant::Squared,
            SimilarityVariant::Absolute,
            SimilarityVariant::Ratio,
        ] {
            let mut prev = -1.0;
            for i in 0..=1000 {
                let r = i as f64 / 1000.0;
                let e = similarity_entry(v, DEFAULT_CLAMP, r, false);
                assert!(e >= prev, "{v} at r = {r}");
                assert!(e.is_finite());
                prev = e;
            }
        }
    }

    #[test]
    fn penalty_values() {
        let zero = Arc::new(SimilarityMatrix::zeros(3));
        let pen = PenaltySpec::new(0.7, 3.0, zero).unwrap();
        assert_eq!(penalty_value(&[0.0; 3], &pen).unwrap(), 0.0);
        assert!(penalty_value(&[0.0; 2], &pen).is_err());

        let r = Arc::new(SimilarityMatrix::from_dense(2, vec![0.0, 2.0, 2.0, 0.0]).unwrap());
        let pen = PenaltySpec::new(1.0, 1.0, r).unwrap();
        assert_eq!(penalty_value(&[1.0, 1.0], &pen).unwrap(), 4.0);
    }

    #[test]
    fn group_indicator_penalty_is_exclusive_group_form() {
        let part = GroupPartition::from_labels(&[0, 0, 1]).unwrap();
        let r = Arc::new(SimilarityMatrix::group_indicator(&part, 3).unwrap());
        let pen = PenaltySpec::new(1.0, 2.0, r).unwrap();
        let beta = [0.5, -1.5, 2.0];
        let l1 = 4.0;
        let expected = l1 + (0.5f64 + 1.5).powi(2) + 2.0f64.powi(2);
        assert!((penalty_value(&beta, &pen).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn from_dense_validation() {
        assert!(SimilarityMatrix::from_dense(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(SimilarityMatrix::from_dense(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(SimilarityMatrix::from_dense(2, vec![0.0, 1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_nonnegative(seed in 0u64..500, variant in 0usize..3) {
            let v = [SimilarityVariant::Squared, SimilarityVariant::Absolute, SimilarityVariant::Ratio][variant];
            let ds = random_dataset(12, 6, seed);
            let r = build_similarity(&ds, v, DEFAULT_CLAMP, None).unwrap();
            for j in 0..6 {
                for k in 0..6 {
                    prop_assert_eq!(r.get(j, k), r.get(k, j));
                    prop_assert!(r.get(j, k) >= 0.0 && r.get(j, k).is_finite());
                }
            }
        }

        #[test]
        fn penalty_reduces_to_l1_when_alpha_zero(beta in proptest::collection::vec(-5.0f64..5.0, 4)) {
            let r = Arc::new(SimilarityMatrix::from_dense(4, vec![1.0; 16]).unwrap());
            let pen = PenaltySpec::new(0.3, 0.0, r).unwrap();
            let l1: f64 = beta.iter().map(|b| b.abs()).sum();
            prop_assert_eq!(penalty_value(&beta, &pen).unwrap(), 0.3 * l1);
        }
    }
}
