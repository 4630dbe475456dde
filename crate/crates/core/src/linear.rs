//! Lasso and adaptive lasso for linear and Cox regression, with an
//! unpenalized block of covariates. Tuned by the same modified BIC as the
//! index model.

use std::collections::BTreeSet;

use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Outcome, OutcomeKind};
use crate::penalty::MAX_WEIGHT;
use crate::selection::{df_ratio, log_spaced, one_dim_step};
use crate::solver::blockcd::{solve_penalized, CdSettings, Design, DesignCoef, SolveSettings};
use crate::solver::SolverConfig;

/// Default number of lambda values on the lasso path.
pub const DEFAULT_PATH_LEN: usize = 20;
/// Default ratio of the smallest to the largest lambda on the lasso path.
pub const DEFAULT_PATH_RATIO: f64 = 0.01;

/// Penalized features, unpenalized covariates and an outcome.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub penalized: Array2<f64>,
    pub unpenalized: Array2<f64>,
    pub outcome: Outcome,
}

impl LinearProblem {
    pub fn new(penalized: Array2<f64>, unpenalized: Array2<f64>, outcome: Outcome) -> Result<Self> {
        let n = outcome.len();
        if penalized.nrows() != n || unpenalized.nrows() != n {
            return Err(Error::Dimension(format!(
                "design rows ({}, {}) differ from outcome length {n}",
                penalized.nrows(),
                unpenalized.nrows()
            )));
        }
        if penalized.iter().chain(unpenalized.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite design entry".into()));
        }
        Ok(LinearProblem {
            penalized,
            unpenalized,
            outcome,
        })
    }

    fn has_intercept(&self) -> bool {
        self.outcome.kind() == OutcomeKind::Gaussian
    }

    /// `[1 | unpenalized | penalized]`, without the ones column for Cox.
    fn design(&self, lambda: f64, weights: &Array1<f64>) -> Design {
        let n = self.outcome.len();
        let u = self.unpenalized.ncols() + usize::from(self.has_intercept());
        let mut x = Array2::ones((n, u + self.penalized.ncols()));
        x.slice_mut(s![.., u - self.unpenalized.ncols()..u]).assign(&self.unpenalized);
        x.slice_mut(s![.., u..]).assign(&self.penalized);
        let mut design = Design::new(x, u, weights.iter().map(|_| (1, 0.0)));
        set_lambda(&mut design, lambda, weights);
        design
    }
}

fn set_lambda(design: &mut Design, lambda: f64, weights: &Array1<f64>) {
    for (b, &w) in design.blocks.iter_mut().zip(weights.iter()) {
        b.pen = if lambda.is_infinite() { f64::INFINITY } else { lambda * w };
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFit {
    pub lambda: f64,
    pub intercept: f64,
    pub unpenalized: Array1<f64>,
    pub penalized: Array1<f64>,
    pub loglik: f64,
    pub df: f64,
    pub bic: f64,
    pub converged: bool,
}

impl LinearFit {
    pub fn selected(&self) -> BTreeSet<usize> {
        self.penalized
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Linear predictor for new rows.
    pub fn predict(&self, penalized: ArrayView2<f64>, unpenalized: ArrayView2<f64>) -> Array1<f64> {
        penalized.dot(&self.penalized) + unpenalized.dot(&self.unpenalized) + self.intercept
    }
}

fn to_fit(problem: &LinearProblem, design: &Design, dc: &DesignCoef, lambda: f64, converged: bool) -> Result<LinearFit> {
    let extra = usize::from(problem.has_intercept());
    let penalized = dc.slice(s![design.n_unpen..]).to_owned();
    let eta = design.eta(dc);
    let loglik = problem.outcome.loglik(eta.view());
    let mut df = 0.0;
    for (k, &b) in penalized.iter().enumerate() {
        if b != 0.0 {
            let t = one_dim_step(&problem.outcome, eta.view(), problem.penalized.column(k));
            df += df_ratio(b, t.map(|t| b + t));
        }
    }
    let n_star = problem.outcome.effective_n();
    if n_star == 0 {
        return Err(Error::NoEvents);
    }
    Ok(LinearFit {
        lambda,
        intercept: if extra == 1 { dc[0] } else { 0.0 },
        unpenalized: dc.slice(s![extra..design.n_unpen]).to_owned(),
        penalized,
        loglik,
        df,
        bic: -2.0 * loglik + df * (n_star as f64).ln(),
        converged,
    })
}

fn settings(scfg: &SolverConfig) -> SolveSettings {
    SolveSettings {
        cd: CdSettings {
            max_passes: scfg.max_inner_iters.max(1),
            tol: scfg.tol_inner,
            trace_updates: false,
        },
        max_irls: scfg.max_irls_iters,
    }
}

/// Fit at a single `lambda`.
pub fn fit_lasso(problem: &LinearProblem, lambda: f64, weights: &Array1<f64>, scfg: &SolverConfig) -> Result<LinearFit> {
    check_weights(problem, weights, lambda)?;
    let design = problem.design(lambda, weights);
    let mut dc = design.zero_coef();
    let stats = solve_penalized(&problem.outcome, &design, &mut dc, settings(scfg))?;
    to_fit(problem, &design, &dc, lambda, stats.converged)
}

fn check_weights(problem: &LinearProblem, weights: &Array1<f64>, lambda: f64) -> Result<()> {
    if weights.len() != problem.penalized.ncols() {
        return Err(Error::Dimension("one weight per penalized feature required".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || !(lambda >= 0.0) {
        return Err(Error::Config("lambda and weights must be non-negative".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoPath {
    pub lambda_max: f64,
    pub fits: Vec<LinearFit>,
    pub chosen: usize,
}

impl LassoPath {
    pub fn best(&self) -> &LinearFit {
        &self.fits[self.chosen]
    }
}

/// Warm-started path over `n_lambda` log-spaced values in
/// `[ratio * lambda_max, lambda_max]`; the smallest BIC wins, the larger
/// lambda on ties.
pub fn lasso_path(
    problem: &LinearProblem,
    weights: &Array1<f64>,
    n_lambda: usize,
    ratio: f64,
    scfg: &SolverConfig,
) -> Result<LassoPath> {
    check_weights(problem, weights, 0.0)?;
    if n_lambda == 0 || !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config("lasso path needs n_lambda > 0 and ratio in (0, 1]".into()));
    }
    let mut design = problem.design(f64::INFINITY, weights);
    let mut dc = design.zero_coef();
    solve_penalized(&problem.outcome, &design, &mut dc, settings(scfg))?;
    let eta = design.eta(&dc);
    let (_, g) = problem.outcome.score(eta.view());
    let scores = problem.penalized.t().dot(&g);
    let lambda_max = scores
        .iter()
        .zip(weights.iter())
        .filter(|(_, w)| **w > 0.0)
        .map(|(s, w)| s.abs() / w)
        .fold(0.0, f64::max);
    // the null fit already satisfies the optimality conditions at lambda_max
    let mut fits = vec![to_fit(problem, &design, &dc, lambda_max, true)?];
    for lambda in log_spaced(lambda_max, n_lambda, ratio).into_iter().skip(1) {
        set_lambda(&mut design, lambda, weights);
        let stats = solve_penalized(&problem.outcome, &design, &mut dc, settings(scfg))?;
        fits.push(to_fit(problem, &design, &dc, lambda, stats.converged)?);
    }
    let mut chosen = 0;
    for (i, f) in fits.iter().enumerate() {
        if f.bic < fits[chosen].bic {
            chosen = i;
        }
    }
    Ok(LassoPath {
        lambda_max,
        fits,
        chosen,
    })
}

/// `1 / |b|` capped at [`MAX_WEIGHT`].
pub fn adaptive_lasso_weights(fit: &LinearFit) -> Array1<f64> {
    fit.penalized
        .mapv(|b| if b != 0.0 { (1.0 / b.abs()).min(MAX_WEIGHT) } else { MAX_WEIGHT })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn unpenalized_only_is_least_squares() {
        let y = array![1.0, 2.0, 4.0, 3.0];
        let z = array![[0.0], [1.0], [2.0], [3.0]];
        let problem = LinearProblem::new(Array2::zeros((4, 0)), z, Outcome::Gaussian(y)).unwrap();
        let fit = fit_lasso(&problem, 0.0, &Array1::zeros(0), &SolverConfig::default()).unwrap();
        // slope 0.8, intercept 1.3
        assert!((fit.unpenalized[0] - 0.8).abs() < 1e-10);
        assert!((fit.intercept - 1.3).abs() < 1e-10);
        assert_eq!(fit.df, 0.0);
    }

    #[test]
    fn adaptive_weights_cap() {
        let fit = LinearFit {
            lambda: 0.0,
            intercept: 0.0,
            unpenalized: Array1::zeros(0),
            penalized: array![0.0, -0.5],
            loglik: 0.0,
            df: 0.0,
            bic: 0.0,
            converged: true,
        };
        assert_eq!(adaptive_lasso_weights(&fit), array![MAX_WEIGHT, 2.0]);
    }
}
