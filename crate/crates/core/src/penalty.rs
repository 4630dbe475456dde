//! Adaptive lasso on constant effects and metric-weighted group lasso on
//! spline blocks.
//!
//! For `j = 1..=p` the penalty is
//! `lambda1 * w_j * |gamma_j| + lambda2 * w_j * sqrt(alpha_j^T K_j alpha_j)`.
//! The intercept function `g_0` is never penalized.

use nalgebra::Cholesky;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_na, sym_eig, to_na};
use crate::model::{Coefficients, Dataset};
use crate::spline::SplineBasis;

/// Weight assigned to a predictor whose initial estimate is exactly zero.
pub const MAX_WEIGHT: f64 = 1e8;

/// Ridge floor used when repairing a singular metric matrix.
pub const RIDGE_FLOOR: f64 = 1e-8;

/// How the group metrics `K_j` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KStrategy {
    /// `K_j = I`.
    Identity,
    /// `K_j` from the spline design at an initial estimate of `beta`
    /// obtained with `K_j = I`, then held fixed.
    FixedFromInitial,
    /// `K_j` rebuilt from the current `beta` after every index update.
    #[default]
    UpdateEachIteration,
}

/// Metric matrix `K` with an upper-triangular factor `R`, `K = R^T R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    k: Array2<f64>,
    r: Array2<f64>,
    r_inv: Array2<f64>,
}

impl Metric {
    /// Factorizes `k`, adding `eps * I` first when `k` is not safely positive
    /// definite (`eps = max(1e-8 * trace / d, 1e-8)`).
    pub fn new(k: Array2<f64>) -> Result<Self> {
        let d = k.nrows();
        if k.ncols() != d {
            return Err(Error::Dimension("metric matrix must be square".into()));
        }
        let k = repair(k);
        let chol = Cholesky::new(to_na(k.view()))
            .ok_or_else(|| Error::Solver("metric matrix is not positive definite".into()))?;
        let l = chol.l();
        let r = from_na(&l.transpose());
        let r_inv = from_na(
            &l.transpose()
                .try_inverse()
                .ok_or_else(|| Error::Solver("singular metric factor".into()))?,
        );
        Ok(Metric { k, r, r_inv })
    }

    pub fn identity(d: usize) -> Self {
        Metric {
            k: Array2::eye(d),
            r: Array2::eye(d),
            r_inv: Array2::eye(d),
        }
    }

    pub fn k(&self) -> ArrayView2<'_, f64> {
        self.k.view()
    }

    /// Upper-triangular `R` with `K = R^T R`.
    pub fn factor(&self) -> ArrayView2<'_, f64> {
        self.r.view()
    }

    pub fn factor_inverse(&self) -> ArrayView2<'_, f64> {
        self.r_inv.view()
    }

    /// `sqrt(a^T K a)`.
    pub fn norm(&self, a: ArrayView1<f64>) -> f64 {
        let ra = self.r.dot(&a);
        ra.dot(&ra).sqrt()
    }
}

fn repair(mut k: Array2<f64>) -> Array2<f64> {
    let d = k.nrows();
    if d == 0 {
        return k;
    }
    let trace: f64 = k.diag().sum();
    let eps = (RIDGE_FLOOR * trace / d as f64).max(RIDGE_FLOOR);
    let smallest = sym_eig(k.view()).values[0];
    if !(smallest > eps) {
        for i in 0..d {
            k[[i, i]] += eps;
        }
    }
    k
}

/// Tuning parameters, adaptive weights and group metrics for one fit.
#[derive(Debug, Clone)]
pub struct PenaltyConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `w_1..w_p`
    pub weights: Array1<f64>,
    /// `K_1..K_p`
    pub metrics: Vec<Metric>,
    pub strategy: KStrategy,
}

impl PenaltyConfig {
    /// Unit weights and identity metrics.
    pub fn new(lambda1: f64, lambda2: f64, p: usize, d: usize, strategy: KStrategy) -> Self {
        PenaltyConfig {
            lambda1,
            lambda2,
            weights: Array1::ones(p),
            metrics: vec![Metric::identity(d); p],
            strategy,
        }
    }

    pub fn with_weights(mut self, weights: Array1<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) {
            return Err(Error::Config(format!(
                "tuning parameters must be non-negative, got ({}, {})",
                self.lambda1, self.lambda2
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("penalty weights must be non-negative".into()));
        }
        if self.metrics.len() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "{} metrics for {} weights",
                self.metrics.len(),
                self.weights.len()
            )));
        }
        Ok(())
    }
}

/// Penalty subtracted from the log-likelihood.
pub fn penalty_value(coef: &Coefficients, cfg: &PenaltyConfig) -> Result<f64> {
    cfg.validate()?;
    let p = coef.p();
    if cfg.weights.len() != p {
        return Err(Error::Dimension(format!(
            "{} weights for {} predictors",
            cfg.weights.len(),
            p
        )));
    }
    let mut total = 0.0;
    for j in 1..=p {
        let w = cfg.weights[j - 1];
        if w == 0.0 {
            continue;
        }
        let g = coef.gamma[j].abs();
        if g > 0.0 {
            total += cfg.lambda1 * w * g;
        }
        let a = cfg.metrics[j - 1].norm(coef.alpha.row(j));
        if a > 0.0 {
            total += cfg.lambda2 * w * a;
        }
    }
    Ok(total)
}

/// `w_j = (gamma_j^2 + |alpha_j|^2)^(-1/2)`, capped at [`MAX_WEIGHT`].
pub fn compute_adaptive_weights(initial: &Coefficients) -> Array1<f64> {
    (1..=initial.p())
        .map(|j| {
            let a = initial.alpha.row(j);
            let s = initial.gamma[j].powi(2) + a.dot(&a);
            if s > 0.0 {
                (1.0 / s.sqrt()).min(MAX_WEIGHT)
            } else {
                MAX_WEIGHT
            }
        })
        .collect()
}

/// Spline design block `W_j` (rows `B_k(U_i^T beta) X_ij`) for every
/// `j = 0..=p`, given the basis matrix at the current index.
pub(crate) fn spline_blocks(x: ArrayView2<f64>, bmat: ArrayView2<f64>, j: usize) -> Array2<f64> {
    &bmat * &x.column(j).insert_axis(Axis(1))
}

/// Group metrics for `j = 1..=p`.
pub fn build_k(
    data: &Dataset,
    beta: ArrayView1<f64>,
    basis: &SplineBasis,
    strategy: KStrategy,
) -> Result<Vec<Metric>> {
    let d = basis.len();
    let p = data.p();
    if strategy == KStrategy::Identity {
        return Ok(vec![Metric::identity(d); p]);
    }
    if beta.len() != data.q_u() {
        return Err(Error::Dimension("beta length differs from q_u".into()));
    }
    let v = data.u().dot(&beta);
    let bmat = basis.design_matrix(v.view());
    build_k_from_design(data.x(), bmat.view())
}

pub(crate) fn build_k_from_design(x: ArrayView2<f64>, bmat: ArrayView2<f64>) -> Result<Vec<Metric>> {
    let n = x.nrows() as f64;
    (1..x.ncols())
        .map(|j| {
            let w = spline_blocks(x, bmat, j);
            Metric::new(w.t().dot(&w) / n)
        })
        .collect()
}

/// Group soft-threshold in the coordinates `R a`: returns
/// `R^{-1} S(R z, lam)` where `S(v, lam) = max(0, 1 - lam / |v|) v`.
pub fn group_threshold(z: ArrayView1<f64>, lam: f64, metric: &Metric) -> Array1<f64> {
    let t = metric.factor().dot(&z);
    let norm = t.dot(&t).sqrt();
    if norm <= lam {
        return Array1::zeros(z.len());
    }
    let shrunk = t * (1.0 - lam / norm);
    metric.factor_inverse().dot(&shrunk)
}
