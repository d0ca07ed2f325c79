//! Linear readout trained in closed form by ridge regression.
//!
//! `W_out = Y Z^T (Z Z^T + gamma^2 I)^-1`, where the columns of `Z` are
//! extended states `[u; x1; ...; xl]` and the columns of `Y` are targets.
//! `Z Z^T` and `Y Z^T` are accumulated in batches so memory stays
//! `O(dim^2)` however many frames are seen.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 1e-4;

/// A regression design row `[u; x1; ...; xl]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState(pub Vec<f64>);

impl ExtendedState {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Concatenates the input and the layer states, in that order.
pub fn assemble_extended(u: &[f64], states: &[&[f64]]) -> ExtendedState {
    let mut z = Vec::with_capacity(u.len() + states.iter().map(|s| s.len()).sum::<usize>());
    z.extend_from_slice(u);
    for s in states {
        z.extend_from_slice(s);
    }
    ExtendedState(z)
}

/// Row-wise `[inputs | states]` for whole sequences (`T x (n_in + dim)`).
pub fn assemble_rows(inputs: &DMatrix<f64>, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if inputs.nrows() != states.nrows() {
        return Err(Error::shape(format!("{} input rows for {} state rows", inputs.nrows(), states.nrows())));
    }
    let (t, a, b) = (inputs.nrows(), inputs.ncols(), states.ncols());
    let mut z = DMatrix::zeros(t, a + b);
    z.columns_mut(0, a).copy_from(inputs);
    z.columns_mut(a, b).copy_from(states);
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeConfig {
    pub gamma: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self { gamma: DEFAULT_GAMMA }
    }
}

impl RidgeConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::config(format!("ridge gamma {gamma} must be finite and nonnegative")));
        }
        Ok(Self { gamma })
    }
}

/// `n_classes x dim` readout matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    w_out: DMatrix<f64>,
}

impl ReadoutWeights {
    pub fn new(w_out: DMatrix<f64>) -> Result<Self> {
        if w_out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical { step: 0, msg: "non-finite readout weight".into() });
        }
        Ok(Self { w_out })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w_out
    }

    pub fn n_outputs(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_out.ncols()
    }

    /// Number of trainable parameters: every entry of `W_out`.
    pub fn n_params(&self) -> usize {
        self.w_out.len()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { w_out: &self.w_out * factor }
    }

    /// Writes one CSV row per output unit.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        for row in self.w_out.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Streaming sums `Z Z^T` and `Y Z^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeAccumulator {
    zz: DMatrix<f64>,
    yz: DMatrix<f64>,
    count: usize,
}

impl RidgeAccumulator {
    pub fn new(dim: usize, n_outputs: usize) -> Self {
        Self { zz: DMatrix::zeros(dim, dim), yz: DMatrix::zeros(n_outputs, dim), count: 0 }
    }

    pub fn dim(&self) -> usize {
        self.zz.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.yz.nrows()
    }

    /// Samples seen so far.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds `M` samples given as rows: `z` is `M x dim`, `y` is `M x n_outputs`.
    pub fn add_rows(&mut self, z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
        if z.ncols() != self.dim() || y.ncols() != self.n_outputs() || z.nrows() != y.nrows() {
            return Err(Error::shape(format!(
                "batch z {}x{}, y {}x{} for accumulator dim {} outputs {}",
                z.nrows(),
                z.ncols(),
                y.nrows(),
                y.ncols(),
                self.dim(),
                self.n_outputs()
            )));
        }
        check_finite(z)?;
        check_finite(y)?;
        self.zz.gemm_tr(1.0, z, z, 1.0);
        self.yz.gemm_tr(1.0, y, z, 1.0);
        self.count += z.nrows();
        Ok(())
    }

    /// Adds rows with one-hot targets given as class indices.
    pub fn add_labeled(&mut self, z: &DMatrix<f64>, labels: &[u32]) -> Result<()> {
        if z.ncols() != self.dim() || z.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} rows of width {} with {} labels, accumulator dim {}",
                z.nrows(),
                z.ncols(),
                labels.len(),
                self.dim()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= self.n_outputs()) {
            return Err(Error::config(format!("label {bad} outside {} classes", self.n_outputs())));
        }
        check_finite(z)?;
        self.zz.gemm_tr(1.0, z, z, 1.0);
        for (r, &l) in labels.iter().enumerate() {
            let mut dst = self.yz.row_mut(l as usize);
            dst += z.row(r);
        }
        self.count += z.nrows();
        Ok(())
    }

    /// Adds another accumulator's sums. Merge in a fixed order for
    /// bit-reproducible results.
    pub fn merge(&mut self, other: &RidgeAccumulator) -> Result<()> {
        if other.zz.shape() != self.zz.shape() || other.yz.shape() != self.yz.shape() {
            return Err(Error::shape("cannot merge accumulators of different shapes"));
        }
        self.zz += &other.zz;
        self.yz += &other.yz;
        self.count += other.count;
        Ok(())
    }

    /// Solves for `W_out` with a Cholesky factorization of
    /// `Z Z^T + gamma^2 I`. A singular or numerically rank-deficient system
    /// falls back to the pseudoinverse, giving the minimum-norm solution.
    pub fn solve(&self, cfg: &RidgeConfig) -> Result<ReadoutWeights> {
        if self.count == 0 {
            return Err(Error::EmptyInput("ridge regression with no samples".into()));
        }
        let d = self.dim();
        let mut a = self.zz.clone();
        let g2 = cfg.gamma * cfg.gamma;
        for i in 0..d {
            a[(i, i)] += g2;
        }
        let bt = self.yz.transpose();
        if let Some(chol) = a.clone().cholesky() {
            let l = chol.l_dirty();
            let diag = (0..d).map(|i| l[(i, i)] * l[(i, i)]);
            let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo > 1e-13 * hi {
                return ReadoutWeights::new(chol.solve(&bt).transpose());
            }
        }
        log::debug!("ridge system is singular at gamma {}, using the pseudoinverse", cfg.gamma);
        let eps = f64::EPSILON * d as f64 * a.amax().max(f64::MIN_POSITIVE);
        let pinv = a
            .pseudo_inverse(eps)
            .map_err(|e| Error::Numerical { step: 0, msg: format!("pseudoinverse failed: {e}") })?;
        ReadoutWeights::new(&self.yz * pinv)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical { step: 0, msg: "non-finite regression input".into() });
    }
    Ok(())
}

/// `Z` is `dim x M` (one sample per column), `Y` is `n_outputs x M`.
pub fn fit_ridge(z: &DMatrix<f64>, y: &DMatrix<f64>, cfg: &RidgeConfig) -> Result<ReadoutWeights> {
    if z.ncols() == 0 {
        return Err(Error::EmptyInput("ridge regression with no samples".into()));
    }
    let mut acc = RidgeAccumulator::new(z.nrows(), y.nrows());
    acc.add_rows(&z.transpose(), &y.transpose())?;
    acc.solve(cfg)
}

/// `y = W_out z` with identity output activation.
pub fn predict(w: &ReadoutWeights, z: &ExtendedState) -> Result<Vec<f64>> {
    if z.dim() != w.input_dim() {
        return Err(Error::shape(format!("readout expects {} inputs, extended state has {}", w.input_dim(), z.dim())));
    }
    Ok(w.w_out.row_iter().map(|r| r.iter().zip(&z.0).map(|(a, b)| a * b).sum()).collect())
}

/// Scores for many rows at once: `rows` is `M x dim`, result `M x n_outputs`.
pub fn predict_rows(w: &ReadoutWeights, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rows.ncols() != w.input_dim() {
        return Err(Error::shape(format!("readout expects {} inputs, rows have {}", w.input_dim(), rows.ncols())));
    }
    Ok(rows * w.w_out.transpose())
}

/// Index of the largest score; ties go to the lowest index.
pub fn classify(y: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in y.iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ if v.is_nan() => {}
            _ => best = Some((i, v)),
        }
    }
    match (best, y.is_empty()) {
        (_, true) => Err(Error::EmptyInput("classify an empty score vector".into())),
        (Some((i, _)), _) => Ok(i),
        (None, _) => Ok(0),
    }
}
