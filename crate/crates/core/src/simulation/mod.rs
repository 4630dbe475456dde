//! Synthetic data with known index, coefficient functions and active sets,
//! baseline estimators, and accuracy metrics.

mod experiment;
mod library;
mod metrics;

pub use experiment::{
    lasso_features, run_experiment, CurveRow, ExperimentConfig, ExperimentOutput, Failure, Method, ReplicateRow, SummaryRow,
};
pub use library::{true_g_library, Shape, TrueFn, LIBRARY_VERSION};
pub use metrics::{c_index, eval_metrics, Estimate, Metrics};

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Outcome, OutcomeKind, Survival};

/// Number of signal predictors.
pub const N_SIGNALS: usize = 20;
/// Subjects used for censoring calibration.
pub const CALIBRATION_SIZE: usize = 10_000;
/// Accepted distance between realized and target censoring in calibration.
pub const CALIBRATION_TOL: f64 = 0.01;

pub const DEFAULT_BETA0: [f64; 4] = [0.4, -0.4, 0.2, -0.8];
pub const DEFAULT_PSI0: [f64; 4] = [0.2, -0.2, 0.5, -0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub n: usize,
    pub p: usize,
    pub beta0: Vec<f64>,
    pub psi0: Vec<f64>,
    pub outcome: OutcomeKind,
    pub target_censoring: f64,
    /// Mean of the exponential censoring time; calibrated when `None`.
    pub censoring_mean: Option<f64>,
}

impl SimDesign {
    pub fn new(n: usize, p: usize, outcome: OutcomeKind) -> Self {
        SimDesign {
            n,
            p,
            beta0: DEFAULT_BETA0.to_vec(),
            psi0: DEFAULT_PSI0.to_vec(),
            outcome,
            target_censoring: 0.3,
            censoring_mean: None,
        }
    }

    pub fn q_u(&self) -> usize {
        self.beta0.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.p < N_SIGNALS {
            return Err(Error::Config(format!("p must be at least {N_SIGNALS}, got {}", self.p)));
        }
        if self.beta0.is_empty() || self.psi0.len() != self.beta0.len() {
            return Err(Error::Config("beta0 and psi0 must have the same positive length".into()));
        }
        let norm: f64 = self.beta0.iter().map(|b| b * b).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("beta0 must have unit norm, got {norm}")));
        }
        if *self.beta0.last().unwrap() == 0.0 {
            return Err(Error::Config("last component of beta0 must be nonzero".into()));
        }
        Ok(())
    }

    /// `g_j` for `j = 1..=p` (zero beyond the signal set).
    pub fn g_value(&self, j: usize, v: f64) -> f64 {
        if (1..=N_SIGNALS).contains(&j) {
            true_g_library()[j - 1].eval(v)
        } else {
            0.0
        }
    }

    /// Slope of `g_0` after moving the last linear coefficient into the
    /// index function, so that the last entry of `psi` is zero.
    pub fn g0_slope(&self) -> f64 {
        self.psi0.last().unwrap() / self.beta0.last().unwrap()
    }

    /// `psi` with the last entry moved into `g_0`.
    pub fn identified_psi(&self) -> Array1<f64> {
        let q = self.psi0.len();
        let r = self.psi0[q - 1] / self.beta0[q - 1];
        (0..q)
            .map(|k| if k + 1 == q { 0.0 } else { self.psi0[k] - r * self.beta0[k] })
            .collect()
    }

    /// `g_j(v)` in the identified parameterization, `j = 0..=p`.
    pub fn g_identified(&self, j: usize, v: f64) -> f64 {
        if j == 0 {
            self.g0_slope() * v
        } else {
            self.g_value(j, v)
        }
    }

    pub fn active(&self) -> BTreeSet<usize> {
        (1..=N_SIGNALS).collect()
    }

    pub fn varying(&self) -> BTreeSet<usize> {
        (1..=N_SIGNALS)
            .filter(|&j| true_g_library()[j - 1].is_varying())
            .collect()
    }
}

/// Generated data together with the true linear predictor.
#[derive(Debug, Clone)]
pub struct SimData {
    pub data: Dataset,
    pub eta0: Array1<f64>,
}

impl SimData {
    /// Fraction of censored subjects (0 for Gaussian outcomes).
    pub fn censoring_rate(&self) -> f64 {
        match self.data.outcome() {
            Outcome::Cox(s) => 1.0 - s.n_events() as f64 / s.len() as f64,
            Outcome::Gaussian(_) => 0.0,
        }
    }
}

fn normal_matrix<R: Rng>(rng: &mut R, n: usize, k: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, k), || StandardNormal.sample(rng))
}

/// Predictors and true linear predictor for `n` subjects.
fn draw_predictors<R: Rng>(design: &SimDesign, n: usize, rng: &mut R) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let q = design.q_u();
    let x = normal_matrix(rng, n, design.p);
    let u = normal_matrix(rng, n, q);
    let beta0 = Array1::from(design.beta0.clone());
    let psi0 = Array1::from(design.psi0.clone());
    let v = u.dot(&beta0);
    let mut eta = u.dot(&psi0);
    for i in 0..n {
        for j in 1..=N_SIGNALS {
            eta[i] += design.g_value(j, v[i]) * x[[i, j - 1]];
        }
    }
    (x, u, eta)
}

/// Event time with hazard `t e^mu`: `T = sqrt(2 E e^(-mu))`, `E ~ Exp(1)`.
pub fn event_time(e: f64, mu: f64) -> f64 {
    (2.0 * e * (-mu).exp()).sqrt()
}

/// Draws `n` subjects from `design`. Cox designs need a censoring mean.
pub fn generate<R: Rng>(design: &SimDesign, n: usize, rng: &mut R) -> Result<SimData> {
    design.validate()?;
    let (x, u, eta0) = draw_predictors(design, n, rng);
    let outcome = match design.outcome {
        OutcomeKind::Gaussian => {
            let eps: Array1<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            Outcome::Gaussian(&eta0 + &eps)
        }
        OutcomeKind::Cox => {
            let theta = design
                .censoring_mean
                .ok_or_else(|| Error::Config("Cox design needs a calibrated censoring mean".into()))?;
            let mut time = Array1::zeros(n);
            let mut event = vec![false; n];
            for i in 0..n {
                let e: f64 = Exp1.sample(rng);
                let c0: f64 = Exp1.sample(rng);
                let c = theta * c0;
                let t = event_time(e, eta0[i]);
                time[i] = t.min(c);
                event[i] = t <= c;
            }
            Outcome::Cox(Survival::new(time, event)?)
        }
    };
    let z = u.clone();
    let map = (0..design.q_u()).collect();
    let data = Dataset::from_predictors(x.view(), u, z, outcome)?.with_u_in_z(map)?;
    Ok(SimData { data, eta0 })
}

/// Censoring mean `theta` such that `P(T > theta C0)` is within
/// [`CALIBRATION_TOL`] of `target` for the given linear predictors, using one
/// set of draws for every trial `theta`.
pub fn calibrate_censoring_for(mu: &[f64], target: f64, seed: u64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Calibration(format!("target censoring {target} must lie in (0, 1)")));
    }
    if mu.is_empty() {
        return Err(Error::Calibration("no subjects".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // censored iff theta < T / C0
    let ratios: Vec<f64> = mu
        .iter()
        .map(|&m| {
            let e: f64 = Exp1.sample(&mut rng);
            let c0: f64 = Exp1.sample(&mut rng);
            event_time(e, m) / c0
        })
        .collect();
    let rate = |log_theta: f64| {
        let theta = log_theta.exp();
        ratios.iter().filter(|&&r| r > theta).count() as f64 / ratios.len() as f64
    };
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    let (r_lo, r_hi) = (rate(lo), rate(hi));
    if !(r_lo >= target && r_hi <= target) {
        return Err(Error::Calibration(format!(
            "bracket [e^{lo}, e^{hi}] gives censoring [{r_hi}, {r_lo}], target {target}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid);
        if (r - target).abs() <= CALIBRATION_TOL {
            return Ok(mid.exp());
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!("bisection did not reach censoring {target}")))
}

/// Calibrates the censoring mean for `design` on a sample of
/// [`CALIBRATION_SIZE`] subjects.
pub fn calibrate_censoring(design: &SimDesign, seed: u64) -> Result<f64> {
    design.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, _, mu) = draw_predictors(design, CALIBRATION_SIZE, &mut rng);
    calibrate_censoring_for(mu.as_slice().expect("contiguous"), design.target_censoring, rng.random())
}
