//! Datasets, standardization and the block-correlated synthetic design.
//!
//! Columns are standardized to the population convention: mean zero and
//! `Σ x² / n = 1`. Regression responses are centered, classification labels
//! are left as raw `{0, 1}`. Every [`Dataset`] remembers the transform that
//! produced it so coefficients can be mapped back to the raw scale.

use std::fmt;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Regression => f.write_str("regression"),
            Task::Classification => f.write_str("classification"),
        }
    }
}

/// Affine transform mapping raw columns onto the standardized design.
///
/// `x_std = (x_raw - col_means) / col_scales`, `y_std = y_raw - y_mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub col_means: Vec<f64>,
    pub col_scales: Vec<f64>,
    pub y_mean: f64,
}

impl Standardization {
    pub fn identity(p: usize) -> Self {
        Self {
            col_means: vec![0.0; p],
            col_scales: vec![1.0; p],
            y_mean: 0.0,
        }
    }

    pub fn p(&self) -> usize {
        self.col_means.len()
    }
}

/// Design matrix and response, immutable once built.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    standardization: Standardization,
    task: Task,
    columns: Vec<String>,
}

fn default_columns(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn column_stats(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let ss = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / n).sqrt())
}

fn is_degenerate(mean: f64, scale: f64) -> bool {
    scale <= 1e-12 * (1.0 + mean.abs())
}

impl Dataset {
    /// Wraps raw data without transforming it. Zero-variance columns and
    /// invalid labels are rejected.
    pub fn from_raw(x: DMatrix<f64>, y: Vec<f64>, task: Task, columns: Option<Vec<String>>) -> Result<Self> {
        let (n, p) = x.shape();
        let columns = columns.unwrap_or_else(|| default_columns(p));
        validate_shape(&x, &y, &columns, task, 2)?;
        for j in 0..p {
            let (mean, scale) = column_stats(&x.as_slice()[j * n..(j + 1) * n]);
            if is_degenerate(mean, scale) {
                return Err(Error::ZeroVariance(columns[j].clone()));
            }
        }
        Ok(Self {
            x,
            y,
            standardization: Standardization::identity(p),
            task,
            columns,
        })
    }

    /// Builds a dataset from raw data and standardizes it.
    pub fn standardized(x: DMatrix<f64>, y: Vec<f64>, task: Task, columns: Option<Vec<String>>) -> Result<Self> {
        Self::from_raw(x, y, task, columns)?.standardize()
    }

    /// Applies an externally supplied transform (typically fitted on a
    /// training split) to raw data. No variance check is performed since the
    /// scales come from elsewhere, and a single row is accepted.
    pub fn with_standardization(
        x_raw: DMatrix<f64>,
        y_raw: Vec<f64>,
        task: Task,
        columns: Option<Vec<String>>,
        transform: &Standardization,
    ) -> Result<Self> {
        let (n, p) = x_raw.shape();
        let columns = columns.unwrap_or_else(|| default_columns(p));
        validate_shape(&x_raw, &y_raw, &columns, task, 1)?;
        if transform.p() != p || transform.col_scales.len() != p {
            return Err(Error::dim("standardization width", p, transform.p()));
        }
        let mut x = x_raw;
        for j in 0..p {
            let (m, s) = (transform.col_means[j], transform.col_scales[j]);
            for v in &mut x.as_mut_slice()[j * n..(j + 1) * n] {
                *v = (*v - m) / s;
            }
        }
        let mut y = y_raw;
        let y_mean = match task {
            Task::Regression => transform.y_mean,
            Task::Classification => 0.0,
        };
        y.iter_mut().for_each(|v| *v -= y_mean);
        Ok(Self {
            x,
            y,
            standardization: Standardization {
                col_means: transform.col_means.clone(),
                col_scales: transform.col_scales.clone(),
                y_mean,
            },
            task,
            columns,
        })
    }

    /// Standardizes the current design, composing the new transform with the
    /// one already stored so raw-scale back-transformation stays exact.
    pub fn standardize(&self) -> Result<Self> {
        let (n, p) = self.x.shape();
        let mut x = self.x.clone();
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        for j in 0..p {
            let col = &mut x.as_mut_slice()[j * n..(j + 1) * n];
            let (mean, scale) = column_stats(col);
            if is_degenerate(mean, scale) {
                return Err(Error::ZeroVariance(self.columns[j].clone()));
            }
            col.iter_mut().for_each(|v| *v = (*v - mean) / scale);
            let (m0, s0) = (self.standardization.col_means[j], self.standardization.col_scales[j]);
            means.push(m0 + s0 * mean);
            scales.push(s0 * scale);
        }
        let mut y = self.y.clone();
        let mut y_mean = self.standardization.y_mean;
        if self.task == Task::Regression {
            let shift = y.iter().sum::<f64>() / n as f64;
            y.iter_mut().for_each(|v| *v -= shift);
            y_mean += shift;
        }
        Ok(Self {
            x,
            y,
            standardization: Standardization {
                col_means: means,
                col_scales: scales,
                y_mean,
            },
            task: self.task,
            columns: self.columns.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Column `j` as a contiguous slice (storage is column-major).
    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    pub fn col_means(&self) -> &[f64] {
        &self.standardization.col_means
    }

    pub fn col_scales(&self) -> &[f64] {
        &self.standardization.col_scales
    }

    pub fn y_mean(&self) -> f64 {
        self.standardization.y_mean
    }

    /// Largest deviation from the standardized-column conditions, or `None`
    /// if every column is centered with unit population scale within `tol`.
    pub fn standardization_violation(&self, tol: f64) -> Option<usize> {
        let n = self.n() as f64;
        (0..self.p()).find(|&j| {
            let col = self.col(j);
            let mean = col.iter().sum::<f64>() / n;
            let ms = col.iter().map(|v| v * v).sum::<f64>() / n;
            mean.abs() > tol || (ms - 1.0).abs() > tol
        })
    }

    pub fn is_standardized(&self, tol: f64) -> bool {
        self.standardization_violation(tol).is_none()
    }

    /// Inverts the stored transform.
    pub fn raw_x(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut x = self.x.clone();
        for j in 0..self.p() {
            let (m, s) = (self.standardization.col_means[j], self.standardization.col_scales[j]);
            for v in &mut x.as_mut_slice()[j * n..(j + 1) * n] {
                *v = *v * s + m;
            }
        }
        x
    }

    pub fn raw_y(&self) -> Vec<f64> {
        self.y.iter().map(|v| v + self.standardization.y_mean).collect()
    }

    /// Raw rows selected by `rows`, in that order.
    pub fn raw_rows(&self, rows: &[usize]) -> (DMatrix<f64>, Vec<f64>) {
        let raw = self.raw_x();
        let ry = self.raw_y();
        let x = DMatrix::from_fn(rows.len(), self.p(), |i, j| raw[(rows[i], j)]);
        let y = rows.iter().map(|&i| ry[i]).collect();
        (x, y)
    }

    /// Linear predictor `intercept + X β` on the stored (standardized) scale.
    pub fn linear_predictor(&self, beta: &[f64], intercept: f64) -> Result<Vec<f64>> {
        if beta.len() != self.p() {
            return Err(Error::dim("coefficient vector", self.p(), beta.len()));
        }
        let mut eta = vec![intercept; self.n()];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (e, &xv) in eta.iter_mut().zip(self.col(j)) {
                    *e += b * xv;
                }
            }
        }
        Ok(eta)
    }

    /// Writes the stored design and response as CSV with the given target
    /// column name appended last.
    pub fn write_csv(&self, path: &Path, target: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        header.push(target);
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut row: Vec<String> = (0..self.p()).map(|j| format!("{:e}", self.x[(i, j)])).collect();
            row.push(format!("{:e}", self.y[i]));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(())
    }
}

fn validate_shape(x: &DMatrix<f64>, y: &[f64], columns: &[String], task: Task, min_rows: usize) -> Result<()> {
    let (n, p) = x.shape();
    if n < min_rows {
        return Err(Error::invalid(format!("need at least {min_rows} rows, got {n}")));
    }
    if p < 1 {
        return Err(Error::invalid("need at least one feature column"));
    }
    if y.len() != n {
        return Err(Error::dim("response length", n, y.len()));
    }
    if columns.len() != p {
        return Err(Error::dim("column names", p, columns.len()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in data"));
    }
    if task == Task::Classification {
        if let Some((row, &value)) = y.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidLabel { row: row + 1, value });
        }
    }
    Ok(())
}

/// Reads a comma-separated file with a header row. Rows are reported
/// 1-based, counting data rows only.
pub fn load_csv(path: &Path, target: &str, task: Task, standardize: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingTarget(target.to_owned()))?;
    let columns: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let p = columns.len();

    let mut values: Vec<f64> = Vec::new();
    let mut y = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::dim("fields per row", header.len(), record.len()));
        }
        for (k, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row: row + 1,
                column: header[k].clone(),
                value: cell.to_owned(),
            })?;
            if k == target_idx {
                y.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let n = y.len();
    let x = DMatrix::from_row_slice(n, p, &values);
    let ds = Dataset::from_raw(x, y, task, Some(columns))?;
    if standardize {
        ds.standardize()
    } else {
        Ok(ds)
    }
}

/// Maps standardized-scale coefficients back to the raw data scale.
///
/// Returns `(beta_raw, intercept_raw)` such that
/// `intercept_raw + x_raw · beta_raw` equals the standardized prediction
/// `y_mean + x_std · beta`.
pub fn unstandardize_coefficients(beta: &[f64], dataset: &Dataset) -> Result<(Vec<f64>, f64)> {
    unstandardize_with_intercept(beta, 0.0, dataset)
}

/// Same as [`unstandardize_coefficients`] for a model with its own
/// standardized-scale intercept.
pub fn unstandardize_with_intercept(beta: &[f64], intercept: f64, dataset: &Dataset) -> Result<(Vec<f64>, f64)> {
    let st = dataset.standardization();
    if beta.len() != st.p() {
        return Err(Error::dim("coefficient vector", st.p(), beta.len()));
    }
    let beta_raw: Vec<f64> = beta.iter().zip(&st.col_scales).map(|(b, s)| b / s).collect();
    let shift: f64 = beta_raw.iter().zip(&st.col_means).map(|(b, m)| b * m).sum();
    Ok((beta_raw, st.y_mean + intercept - shift))
}

/// Block-correlated Gaussian design with one active column per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub b: usize,
    pub q: usize,
    pub rho: f64,
    pub coef: Vec<f64>,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 50,
            p: 100,
            b: 10,
            q: 10,
            rho: 0.95,
            coef: vec![10.0, -9.0, 8.0, -7.0, 6.0, -5.0, 4.0, -3.0, 2.0, -1.0],
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.b == 0 || self.q == 0 || self.p != self.b * self.q {
            return Err(Error::invalid(format!(
                "p = {} must equal b·q = {}·{}",
                self.p, self.b, self.q
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("rho = {} must lie in [0, 1)", self.rho)));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::invalid(format!("noise_sd = {} must be >= 0", self.noise_sd)));
        }
        if self.coef.len() != self.b {
            return Err(Error::dim("coef length (one per block)", self.b, self.coef.len()));
        }
        if self.n < 2 {
            return Err(Error::invalid("n must be at least 2"));
        }
        Ok(())
    }

    /// True coefficient vector: `coef[l]` on the first column of block `l`.
    pub fn beta_star(&self) -> Vec<f64> {
        let mut beta = vec![0.0; self.p];
        for (l, &c) in self.coef.iter().enumerate() {
            beta[l * self.q] = c;
        }
        beta
    }

    /// Block partition `{0..q}, {q..2q}, …` as a group label per column.
    pub fn block_labels(&self) -> Vec<usize> {
        (0..self.p).map(|j| j / self.q).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta_star: Vec<f64>,
    /// 0-based indices of the nonzero entries of `beta_star`.
    pub support: Vec<usize>,
    pub s: usize,
}

impl GroundTruth {
    pub fn new(beta_star: Vec<f64>) -> Self {
        let support: Vec<usize> = beta_star
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(j, _)| j)
            .collect();
        let s = support.len();
        Self { beta_star, support, s }
    }
}

/// Raw draw from a [`SyntheticSpec`], before standardization.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub noise: Vec<f64>,
    pub truth: GroundTruth,
}

/// Draws `n` rows from `N(0, Σ)` with `Σ` block-diagonal (`q×q` blocks with
/// unit diagonal, `rho` elsewhere), then `y = X β* + ε`. Deterministic in
/// `spec.seed` (ChaCha8 stream; rows are filled block by block, noise last).
pub fn sample_synthetic(spec: &SyntheticSpec) -> Result<SyntheticSample> {
    spec.validate()?;
    let (n, q) = (spec.n, spec.q);
    let block = DMatrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { spec.rho });
    let chol = Cholesky::new(block).ok_or_else(|| Error::invalid("block covariance is not positive definite"))?;
    let l = chol.l();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = DMatrix::<f64>::zeros(n, spec.p);
    let mut z = vec![0.0; q];
    for i in 0..n {
        for blk in 0..spec.b {
            z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            for a in 0..q {
                let mut acc = 0.0;
                for c in 0..=a {
                    acc += l[(a, c)] * z[c];
                }
                x[(i, blk * q + a)] = acc;
            }
        }
    }
    let noise: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            spec.noise_sd * e
        })
        .collect();
    let beta_star = spec.beta_star();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let signal: f64 = spec.coef.iter().enumerate().map(|(blk, c)| c * x[(i, blk * q)]).sum();
            signal + noise[i]
        })
        .collect();
    Ok(SyntheticSample {
        x,
        y,
        noise,
        truth: GroundTruth::new(beta_star),
    })
}

/// Draws a synthetic regression dataset and standardizes it.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, GroundTruth)> {
    let sample = sample_synthetic(spec)?;
    let ds = Dataset::standardized(sample.x, sample.y, Task::Regression, None)?;
    Ok((ds, sample.truth))
}
