//! Modified BIC, effective degrees of freedom and the two-stage
//! `(lambda1, lambda2)` search.

use std::fmt::Write as _;
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{linear_predictor, Coefficients, Dataset, Outcome};
use crate::penalty::{compute_adaptive_weights, KStrategy, Metric, PenaltyConfig};
use crate::solver::{choose_start, finalize, fit_from, FitResult, SolverConfig};
use crate::spline::SplineBasis;

/// Default lower end of each lambda axis relative to its maximum.
pub const DEFAULT_MIN_RATIO: f64 = 1e-3;

/// Ratio of a penalized coordinate to its one-dimensional unpenalized
/// maximizer, clamped to `[0, 1]`. Zero numerators give 0; a non-finite
/// maximizer gives 1.
pub fn df_ratio(estimate: f64, maximizer: Option<f64>) -> f64 {
    if estimate == 0.0 {
        return 0.0;
    }
    match maximizer {
        Some(m) if m.is_finite() && m != 0.0 => (estimate / m).clamp(0.0, 1.0),
        _ => {
            log::warn!("unbounded one-dimensional maximizer; ratio set to 1");
            1.0
        }
    }
}

/// Maximizer of `t -> l(eta + t c)`, returned as the displacement `t`.
pub(crate) fn one_dim_step(outcome: &Outcome, eta: ArrayView1<f64>, c: ArrayView1<f64>) -> Option<f64> {
    match outcome {
        Outcome::Gaussian(y) => {
            let cc = c.dot(&c);
            if cc <= 0.0 {
                return None;
            }
            let r = y - &eta;
            Some(c.dot(&r) / cc)
        }
        Outcome::Cox(_) => {
            let cm = c.insert_axis(ndarray::Axis(1));
            let mut t = 0.0f64;
            let mut cur = eta.to_owned();
            let mut ll = outcome.loglik(cur.view());
            for _ in 0..100 {
                let (_, g) = outcome.score(cur.view());
                let d1 = c.dot(&g);
                let d2 = outcome.neg_hessian_quad(cur.view(), cm)[[0, 0]];
                if !(d2 > 0.0) {
                    return None;
                }
                let mut step = d1 / d2;
                if step.abs() < 1e-12 * (1.0 + t.abs()) {
                    return Some(t + step);
                }
                let mut accepted = false;
                for _ in 0..40 {
                    let cand = &cur + &(&c * step);
                    let cand_ll = outcome.loglik(cand.view());
                    if cand_ll.is_finite() && cand_ll >= ll - 1e-14 * ll.abs() {
                        cur = cand;
                        ll = cand_ll;
                        t += step;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted || !t.is_finite() || t.abs() > 1e12 {
                    return None;
                }
            }
            None
        }
    }
}

/// Per-coordinate ratios `(gamma ratios (p), alpha ratios (p x d))`.
pub fn df_ratios(data: &Dataset, coef: &Coefficients, basis: &SplineBasis) -> Result<(Array1<f64>, Array2<f64>)> {
    coef.check_dims(data, basis)?;
    let p = data.p();
    let d = basis.len();
    let eta = linear_predictor(data, coef, basis)?;
    let v = data.u().dot(&coef.beta);
    let bmat = basis.design_matrix(v.view());
    let mut g = Array1::zeros(p);
    let mut a = Array2::zeros((p, d));
    let x = data.x();
    for j in 1..=p {
        let xj = x.column(j);
        if coef.gamma[j] != 0.0 {
            let t = one_dim_step(data.outcome(), eta.view(), xj);
            g[j - 1] = df_ratio(coef.gamma[j], t.map(|t| coef.gamma[j] + t));
        }
        for k in 0..d {
            let est = coef.alpha[[j, k]];
            if est != 0.0 {
                let col = &bmat.column(k) * &xj;
                let t = one_dim_step(data.outcome(), eta.view(), col.view());
                a[[j - 1, k]] = df_ratio(est, t.map(|t| est + t));
            }
        }
    }
    Ok((g, a))
}

/// `q = sum_j (gamma_j / gamma*_j + sum_k alpha_jk / alpha*_jk)` over
/// `j = 1..=p`, each ratio clamped to `[0, 1]`.
pub fn effective_df(data: &Dataset, coef: &Coefficients, basis: &SplineBasis) -> Result<f64> {
    let (g, a) = df_ratios(data, coef, basis)?;
    Ok(g.sum() + a.sum())
}

/// `-2 l + q log(n*)` where `n*` counts events for censored outcomes.
pub fn bic_value(data: &Dataset, loglik: f64, df: f64) -> Result<f64> {
    let n_star = data.outcome().effective_n();
    if n_star == 0 {
        return Err(Error::NoEvents);
    }
    Ok(-2.0 * loglik + df * (n_star as f64).ln())
}

pub fn modified_bic(data: &Dataset, fit: &FitResult, basis: &SplineBasis) -> Result<f64> {
    let eta = linear_predictor(data, &fit.coef, basis)?;
    let ll = data.outcome().loglik(eta.view());
    bic_value(data, ll, effective_df(data, &fit.coef, basis)?)
}

fn null_config(p: usize, d: usize, weights: &Array1<f64>, strategy: KStrategy) -> PenaltyConfig {
    let mut cfg = PenaltyConfig::new(f64::INFINITY, f64::INFINITY, p, d, strategy);
    cfg.weights = weights.clone();
    cfg
}

/// Null-model fit from each start, with every penalized block held at zero.
struct NullPaths {
    lambda_max: (f64, f64),
    fits: Vec<Coefficients>,
}

fn null_paths(
    data: &Dataset,
    basis: &SplineBasis,
    weights: &Array1<f64>,
    strategy: KStrategy,
    scfg: &SolverConfig,
) -> Result<NullPaths> {
    let cfg = null_config(data.p(), basis.len(), weights, strategy);
    let starts = scfg.starts(data.q_u())?;
    let outs: Vec<_> = starts
        .par_iter()
        .map(|b| {
            let init = Coefficients::zeros(b.clone(), data.p(), basis.len(), data.q_z());
            fit_from(data, basis, &cfg, scfg, init, true)
        })
        .collect::<Result<_>>()?;
    let mut lm = (0.0f64, 0.0f64);
    for o in &outs {
        lm.0 = lm.0.max(o.null_scores.0);
        lm.1 = lm.1.max(o.null_scores.1);
    }
    Ok(NullPaths {
        lambda_max: lm,
        fits: outs.into_iter().map(|o| o.coef).collect(),
    })
}

/// Smallest `(lambda1, lambda2)` at which every penalized block is zero:
/// the largest weighted null-model scores over all starts.
pub fn compute_lambda_max(
    data: &Dataset,
    basis: &SplineBasis,
    weights: &Array1<f64>,
    strategy: KStrategy,
    scfg: &SolverConfig,
) -> Result<(f64, f64)> {
    if weights.len() != data.p() {
        return Err(Error::Dimension("one weight per predictor required".into()));
    }
    Ok(null_paths(data, basis, weights, strategy, scfg)?.lambda_max)
}

/// Size and span of each lambda axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub min_ratio: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n1: 10,
            n2: 10,
            min_ratio: DEFAULT_MIN_RATIO,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("grid sizes must be positive".into()));
        }
        if !(self.min_ratio > 0.0 && self.min_ratio <= 1.0) {
            return Err(Error::Config("min_ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Decreasing log-spaced values from `max` to `min_ratio * max`.
pub fn log_spaced(max: f64, n: usize, min_ratio: f64) -> Vec<f64> {
    if !(max > 0.0) || n == 0 {
        return vec![0.0];
    }
    if n == 1 {
        return vec![max];
    }
    let lo = min_ratio.ln();
    (0..n)
        .map(|i| {
            if i == 0 {
                max
            } else {
                max * (lo * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
}

impl LambdaGrid {
    pub fn from_max(max: (f64, f64), spec: &GridSpec) -> Self {
        LambdaGrid {
            lambda1: log_spaced(max.0, spec.n1, spec.min_ratio),
            lambda2: log_spaced(max.1, spec.n2, spec.min_ratio),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Unweighted,
    Weighted,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Unweighted => "unweighted",
            Stage::Weighted => "weighted",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `None` when every start failed.
    pub bic: Option<f64>,
    pub df: f64,
    pub n_selected: usize,
    pub n_varying: usize,
    pub converged: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub stage: Stage,
    pub lambda_max: (f64, f64),
    pub grid: LambdaGrid,
    /// Row-major over `(lambda1, lambda2)`.
    pub cells: Vec<GridCell>,
    pub chosen: usize,
    pub best: FitResult,
}

impl SelectionReport {
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "stage\tlambda1\tlambda2\tbic\tdf\tn_selected\tn_varying\tconverged\tchosen")?;
        for (i, c) in self.cells.iter().enumerate() {
            let bic = c.bic.map(|b| format!("{b}")).unwrap_or_else(|| "failed".into());
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                self.stage.as_str(),
                c.lambda1,
                c.lambda2,
                bic,
                c.df,
                c.n_selected,
                c.n_varying,
                c.converged,
                u8::from(i == self.chosen)
            )?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Both stages of the search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathResult {
    pub unweighted: SelectionReport,
    pub weighted: Option<SelectionReport>,
}

impl PathResult {
    /// The fit of the final stage.
    pub fn best(&self) -> &FitResult {
        &self.final_report().best
    }

    pub fn final_report(&self) -> &SelectionReport {
        self.weighted.as_ref().unwrap_or(&self.unweighted)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in std::iter::once(&self.unweighted).chain(self.weighted.as_ref()) {
            let _ = writeln!(
                s,
                "{}: lambda=({:.4e}, {:.4e}) bic={:.4} df={:.3} selected={}",
                r.stage.as_str(),
                r.best.lambda1,
                r.best.lambda2,
                r.best.bic,
                r.best.df,
                r.best.selected().len()
            );
        }
        s
    }
}

/// Index of the smallest BIC; the first (sparsest) cell wins ties.
pub fn argmin_bic(cells: &[GridCell]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in cells.iter().enumerate() {
        if let Some(b) = c.bic {
            if best.map_or(true, |(_, v)| b < v) {
                best = Some((i, b));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Fits every cell of a grid with the given weights. Within each start and
/// each `lambda1` row, fits are warm-started along decreasing `lambda2`.
pub fn fit_grid(
    data: &Dataset,
    basis: &SplineBasis,
    weights: &Array1<f64>,
    strategy: KStrategy,
    spec: &GridSpec,
    scfg: &SolverConfig,
    stage: Stage,
) -> Result<SelectionReport> {
    spec.validate()?;
    scfg.validate()?;
    if weights.len() != data.p() {
        return Err(Error::Dimension("one weight per predictor required".into()));
    }
    let nulls = null_paths(data, basis, weights, strategy, scfg)?;
    let grid = LambdaGrid::from_max(nulls.lambda_max, spec);
    let n1 = grid.lambda1.len();
    let n2 = grid.lambda2.len();
    let p = data.p();
    let d = basis.len();
    let base = PenaltyConfig {
        lambda1: 0.0,
        lambda2: 0.0,
        weights: weights.clone(),
        metrics: vec![Metric::identity(d); p],
        strategy,
    };

    // one task per (start, row)
    let tasks: Vec<(usize, usize)> = (0..nulls.fits.len())
        .flat_map(|s| (0..n1).map(move |r| (s, r)))
        .collect();
    let rows: Vec<Vec<Result<FitResult>>> = tasks
        .par_iter()
        .map(|&(s, r)| {
            let mut warm = nulls.fits[s].clone();
            let mut out = Vec::with_capacity(n2);
            for c in 0..n2 {
                let mut cfg = base.clone();
                cfg.lambda1 = grid.lambda1[r];
                cfg.lambda2 = grid.lambda2[c];
                let res = fit_from(data, basis, &cfg, scfg, warm.clone(), false)
                    .and_then(|o| finalize(data, basis, &cfg, o, s));
                if let Ok(f) = &res {
                    warm = f.coef.clone();
                }
                out.push(res);
            }
            out
        })
        .collect();

    let mut per_cell: Vec<Vec<FitResult>> = vec![Vec::new(); n1 * n2];
    for (&(_, r), row) in tasks.iter().zip(rows) {
        for (c, res) in row.into_iter().enumerate() {
            match res {
                Ok(f) => per_cell[r * n2 + c].push(f),
                Err(e) => log::warn!("grid cell ({r}, {c}) failed: {e}"),
            }
        }
    }
    let mut cells = Vec::with_capacity(n1 * n2);
    let mut fits = Vec::with_capacity(n1 * n2);
    for (i, starts) in per_cell.into_iter().enumerate() {
        let (r, c) = (i / n2, i % n2);
        let best = choose_start(starts);
        cells.push(match &best {
            Some(f) => GridCell {
                lambda1: grid.lambda1[r],
                lambda2: grid.lambda2[c],
                bic: Some(f.bic),
                df: f.df,
                n_selected: f.selected().len(),
                n_varying: f.selected_varying.len(),
                converged: f.converged,
                objective: f.objective,
            },
            None => GridCell {
                lambda1: grid.lambda1[r],
                lambda2: grid.lambda2[c],
                bic: None,
                df: f64::NAN,
                n_selected: 0,
                n_varying: 0,
                converged: false,
                objective: f64::NAN,
            },
        });
        fits.push(best);
    }
    let chosen = argmin_bic(&cells).ok_or_else(|| Error::Solver("every grid cell failed".into()))?;
    let best = fits[chosen].take().expect("chosen cell has a fit");
    Ok(SelectionReport {
        stage,
        lambda_max: nulls.lambda_max,
        grid,
        cells,
        chosen,
        best,
    })
}

/// Unit-weight search, followed (when `weighted`) by a second search with
/// adaptive weights from the first stage's chosen fit.
pub fn fit_path(
    data: &Dataset,
    basis: &SplineBasis,
    spec: &GridSpec,
    strategy: KStrategy,
    scfg: &SolverConfig,
    weighted: bool,
) -> Result<PathResult> {
    let ones = Array1::ones(data.p());
    let unweighted = fit_grid(data, basis, &ones, strategy, spec, scfg, Stage::Unweighted)?;
    let weighted = if weighted {
        let w = compute_adaptive_weights(&unweighted.best.coef);
        Some(fit_grid(data, basis, &w, strategy, spec, scfg, Stage::Weighted)?)
    } else {
        None
    };
    Ok(PathResult { unweighted, weighted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_rules() {
        assert_eq!(df_ratio(0.0, None), 0.0);
        assert_eq!(df_ratio(0.5, Some(1.0)), 0.5);
        assert_eq!(df_ratio(2.0, Some(1.0)), 1.0);
        assert_eq!(df_ratio(-1.0, Some(1.0)), 0.0);
        assert_eq!(df_ratio(1.0, None), 1.0);
    }

    #[test]
    fn grid_values() {
        let v = log_spaced(2.0, 10, 0.05);
        assert_eq!(v.len(), 10);
        assert_eq!(v[0], 2.0);
        assert!((v[9] - 0.1).abs() < 1e-12);
        assert!(v.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(log_spaced(0.0, 10, 0.05), vec![0.0]);
    }

    #[test]
    fn ties_pick_first() {
        let cell = |b| GridCell {
            lambda1: 1.0,
            lambda2: 1.0,
            bic: b,
            df: 0.0,
            n_selected: 0,
            n_varying: 0,
            converged: true,
            objective: 0.0,
        };
        let cells = vec![cell(None), cell(Some(3.0)), cell(Some(2.0)), cell(Some(2.0))];
        assert_eq!(argmin_bic(&cells), Some(2));
        assert_eq!(argmin_bic(&[cell(None)]), None);
    }
}
