//! Alternating estimation of `(gamma, alpha, psi)` and `beta`.
//!
//! For fixed `beta` the model is a penalized regression on a fixed design and
//! is solved by block coordinate descent ([`fit_inner`]). For fixed
//! `(gamma, alpha, psi)` the index is updated on the unit sphere by Newton's
//! method on the Lagrange system `dl/dbeta + c beta = 0, |beta|^2 = 1`
//! ([`update_beta`]). [`fit`] runs the alternation from several initial
//! indices and keeps the start with the smallest modified BIC.

pub(crate) mod blockcd;

use std::collections::BTreeSet;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve;
use crate::model::{beta_derivatives, loglik_at_beta, linear_predictor, Coefficients, Dataset, OutcomeKind};
use crate::penalty::{build_k_from_design, spline_blocks, KStrategy, Metric, PenaltyConfig};
use crate::selection::{effective_df, bic_value};
use crate::spline::SplineBasis;

use blockcd::{solve_penalized, CdSettings, Design, DesignCoef, SolveSettings, SolveStats};

/// Stationarity tolerance for the index update.
pub const BETA_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    /// Maximum coordinate-descent passes per inner solve.
    pub max_inner_iters: usize,
    /// Relative change of the penalized objective between outer iterations.
    pub tol_outer: f64,
    /// Largest coefficient change in a coordinate-descent pass.
    pub tol_inner: f64,
    pub n_starts: usize,
    pub newton_max_iters: usize,
    pub newton_step_halvings: usize,
    /// IRLS iterations per inner solve for the Cox model.
    pub max_irls_iters: usize,
    /// Hold `beta` at its initial value.
    pub fix_beta: bool,
    pub seed: u64,
    /// Single user-supplied start replacing the seeded starts.
    pub initial_beta: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outer_iters: 100,
            max_inner_iters: 1000,
            tol_outer: 1e-5,
            tol_inner: 1e-7,
            n_starts: 5,
            newton_max_iters: 50,
            newton_step_halvings: 20,
            max_irls_iters: 50,
            fix_beta: false,
            seed: 0,
            initial_beta: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_outer > 0.0) || !(self.tol_inner > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::Config("need at least one start".into()));
        }
        if let Some(b) = &self.initial_beta {
            let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Config("initial beta must be finite and nonzero".into()));
            }
        }
        Ok(())
    }

    /// Starting indices: `initial_beta` if given, else [`initial_betas`].
    pub fn starts(&self, q_u: usize) -> Result<Vec<Array1<f64>>> {
        match &self.initial_beta {
            Some(b) if b.len() != q_u => Err(Error::Dimension(format!(
                "initial beta has {} entries for {q_u} index covariates",
                b.len()
            ))),
            Some(b) => Ok(vec![normalize(Array1::from(b.clone()))]),
            None => Ok(initial_betas(q_u, self.n_starts, self.seed)),
        }
    }

    fn solve_settings(&self) -> SolveSettings {
        SolveSettings {
            cd: CdSettings {
                max_passes: self.max_inner_iters.max(1),
                tol: self.tol_inner,
                trace_updates: false,
            },
            max_irls: self.max_irls_iters,
        }
    }
}

/// Converged estimate for one `(lambda1, lambda2)` pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub coef: Coefficients,
    pub lambda1: f64,
    pub lambda2: f64,
    pub weights: Array1<f64>,
    /// Penalized objective `-l + penalty` after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// `j >= 1` with `gamma_j != 0`.
    pub selected_constant: BTreeSet<usize>,
    /// `j >= 1` with `alpha_j != 0`.
    pub selected_varying: BTreeSet<usize>,
    pub loglik: f64,
    pub df: f64,
    pub bic: f64,
    pub objective: f64,
    /// Index of the initial value of `beta` that produced this fit.
    pub start: usize,
    pub outer_iterations: usize,
}

impl FitResult {
    /// Predictors with a constant or a varying effect.
    pub fn selected(&self) -> BTreeSet<usize> {
        self.selected_constant
            .union(&self.selected_varying)
            .cloned()
            .collect()
    }
}

/// Fixed-`beta` design with the mapping back to model coefficients.
pub(crate) struct ModelDesign {
    pub design: Design,
    psi_free: Vec<usize>,
    intercept: bool,
    d: usize,
    q_z: usize,
    p: usize,
    r: Vec<Array2<f64>>,
    r_inv: Vec<Array2<f64>>,
}

fn scaled_pen(lambda: f64, w: f64) -> f64 {
    if lambda.is_infinite() {
        f64::INFINITY
    } else {
        lambda * w
    }
}

impl ModelDesign {
    pub fn build(
        data: &Dataset,
        basis: &SplineBasis,
        beta: ArrayView1<f64>,
        bmat: Option<&Array2<f64>>,
        cfg: &PenaltyConfig,
    ) -> Self {
        let n = data.n();
        let p = data.p();
        let d = basis.len();
        let owned;
        let bmat = match bmat {
            Some(b) => b,
            None => {
                owned = basis.design_matrix(data.u().dot(&beta).view());
                &owned
            }
        };
        let fixed = data.fixed_psi();
        let psi_free: Vec<usize> = (0..data.q_z()).filter(|k| Some(*k) != fixed).collect();
        let intercept = data.kind() == OutcomeKind::Gaussian;
        let m0 = psi_free.len() + usize::from(intercept) + d;
        let m = m0 + p * (1 + d);
        let mut x = Array2::zeros((n, m));
        for (c, &k) in psi_free.iter().enumerate() {
            x.column_mut(c).assign(&data.z().column(k));
        }
        let mut c = psi_free.len();
        if intercept {
            x.column_mut(c).fill(1.0);
            c += 1;
        }
        x.slice_mut(s![.., c..m0]).assign(&spline_blocks(data.x(), bmat.view(), 0));

        let mut specs = Vec::with_capacity(2 * p);
        let mut r = Vec::with_capacity(p);
        let mut r_inv = Vec::with_capacity(p);
        let mut c = m0;
        for j in 1..=p {
            let w = cfg.weights[j - 1];
            x.column_mut(c).assign(&data.x().column(j));
            specs.push((1, scaled_pen(cfg.lambda1, w)));
            let metric: &Metric = &cfg.metrics[j - 1];
            let wj = spline_blocks(data.x(), bmat.view(), j);
            x.slice_mut(s![.., c + 1..c + 1 + d]).assign(&wj.dot(&metric.factor_inverse()));
            specs.push((d, scaled_pen(cfg.lambda2, w)));
            r.push(metric.factor().to_owned());
            r_inv.push(metric.factor_inverse().to_owned());
            c += 1 + d;
        }
        ModelDesign {
            design: Design::new(x, m0, specs),
            psi_free,
            intercept,
            d,
            q_z: data.q_z(),
            p,
            r,
            r_inv,
        }
    }

    pub fn to_design(&self, coef: &Coefficients) -> DesignCoef {
        let mut out = Vec::with_capacity(self.design.x.ncols());
        out.extend(self.psi_free.iter().map(|&k| coef.psi[k]));
        if self.intercept {
            out.push(coef.gamma[0]);
        }
        out.extend(coef.alpha.row(0).iter().cloned());
        for j in 1..=self.p {
            out.push(coef.gamma[j]);
            out.extend(self.r[j - 1].dot(&coef.alpha.row(j)));
        }
        Array1::from(out)
    }

    pub fn to_model(&self, dc: &DesignCoef, beta: Array1<f64>) -> Coefficients {
        let mut coef = Coefficients::zeros(beta, self.p, self.d, self.q_z);
        for (c, &k) in self.psi_free.iter().enumerate() {
            coef.psi[k] = dc[c];
        }
        let mut c = self.psi_free.len();
        if self.intercept {
            coef.gamma[0] = dc[c];
            c += 1;
        }
        coef.alpha.row_mut(0).assign(&dc.slice(s![c..c + self.d]));
        for j in 1..=self.p {
            let gb = &self.design.blocks[2 * j - 2];
            coef.gamma[j] = dc[gb.start];
            let ab = &self.design.blocks[2 * j - 1];
            let a = dc.slice(s![ab.start..ab.start + ab.len]);
            if a.iter().any(|v| *v != 0.0) {
                coef.alpha.row_mut(j).assign(&self.r_inv[j - 1].dot(&a));
            }
        }
        coef
    }
}

/// Solves for `(gamma, alpha, psi)` at the `beta` stored in `coef`, using the
/// metrics in `cfg`.
pub fn fit_inner(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
    cfg: &PenaltyConfig,
    scfg: &SolverConfig,
) -> Result<Coefficients> {
    Ok(fit_inner_stats(data, coef, basis, cfg, scfg, false)?.0)
}

/// Like [`fit_inner`], also returning the surrogate objective recorded after
/// every coordinate-descent pass (or every block update when
/// `trace_updates` is set), one trace per IRLS step.
pub fn fit_inner_traced(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
    cfg: &PenaltyConfig,
    scfg: &SolverConfig,
    trace_updates: bool,
) -> Result<(Coefficients, Vec<Vec<f64>>)> {
    let (c, stats) = fit_inner_stats(data, coef, basis, cfg, scfg, trace_updates)?;
    Ok((c, stats.pass_traces))
}

fn fit_inner_stats(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
    cfg: &PenaltyConfig,
    scfg: &SolverConfig,
    trace_updates: bool,
) -> Result<(Coefficients, SolveStats)> {
    coef.check_dims(data, basis)?;
    cfg.validate()?;
    if cfg.weights.len() != data.p() {
        return Err(Error::Dimension("one penalty weight per predictor required".into()));
    }
    let md = ModelDesign::build(data, basis, coef.beta.view(), None, cfg);
    let mut dc = md.to_design(coef);
    let mut settings = scfg.solve_settings();
    settings.cd.trace_updates = trace_updates;
    let stats = solve_penalized(data.outcome(), &md.design, &mut dc, settings)?;
    Ok((md.to_model(&dc, coef.beta.clone()), stats))
}

/// Largest violation of the optimality conditions for `(gamma, alpha, psi)`
/// at fixed `beta`, measured on the scale of the log-likelihood score.
pub fn kkt_violation(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
    cfg: &PenaltyConfig,
) -> Result<f64> {
    coef.check_dims(data, basis)?;
    let md = ModelDesign::build(data, basis, coef.beta.view(), None, cfg);
    let dc = md.to_design(coef);
    Ok(blockcd::kkt_violation(data.outcome(), &md.design, &dc))
}

/// Penalized objective `-l + penalty` at `coef`.
pub fn penalized_objective(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
    cfg: &PenaltyConfig,
) -> Result<f64> {
    let eta = linear_predictor(data, coef, basis)?;
    Ok(-data.outcome().loglik(eta.view()) + crate::penalty::penalty_value(coef, cfg)?)
}

/// Scales `v` to unit length; vectors already of unit length within
/// rounding are returned unchanged.
fn normalize(mut v: Array1<f64>) -> Array1<f64> {
    let n = v.dot(&v).sqrt();
    if (n - 1.0).abs() > 2.0 * f64::EPSILON {
        v /= n;
    }
    v
}

/// Stationary point of the log-likelihood in `beta` on the unit sphere with
/// `(gamma, alpha, psi)` held fixed. Returns `(beta, c)` with
/// `dl/dbeta + c beta ~ 0`.
pub fn update_beta(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
    scfg: &SolverConfig,
) -> Result<(Array1<f64>, f64)> {
    coef.check_dims(data, basis)?;
    let q = data.q_u();
    if coef.alpha.iter().all(|v| *v == 0.0) {
        return Ok((coef.beta.clone(), 0.0));
    }
    let mut beta = normalize(coef.beta.clone());
    let (mut ll, mut grad, mut hess) = beta_derivatives(data, coef, basis, beta.view());
    if q == 1 {
        let c = -beta.dot(&grad);
        return Ok((beta, c));
    }
    for _ in 0..scfg.newton_max_iters {
        let c = -beta.dot(&grad);
        let resid = &grad + &(&beta * c);
        let rnorm = resid.dot(&resid).sqrt();
        if rnorm <= BETA_RESIDUAL_TOL {
            break;
        }
        // bordered Newton system in (beta, c)
        let mut jac = Array2::zeros((q + 1, q + 1));
        jac.slice_mut(s![..q, ..q]).assign(&hess);
        for i in 0..q {
            jac[[i, i]] += c;
            jac[[i, q]] = beta[i];
            jac[[q, i]] = beta[i];
        }
        let mut rhs = Array1::zeros(q + 1);
        rhs.slice_mut(s![..q]).assign(&(-&resid));
        let newton = solve(jac.view(), rhs.view())
            .map(|sol| sol.slice(s![..q]).to_owned())
            .filter(|step| step.dot(&resid) > 0.0);

        let mut accepted = None;
        if let Some(step) = newton {
            accepted = line_search(data, coef, basis, &beta, &step, 1.0, ll, scfg.newton_step_halvings);
        }
        if accepted.is_none() {
            // projected gradient ascent, initial step of at most half a radian
            let dir = &resid / rnorm;
            accepted = line_search(data, coef, basis, &beta, &dir, 0.5, ll, scfg.newton_step_halvings);
        }
        match accepted {
            Some((b, new_ll)) => {
                let gain = new_ll - ll;
                beta = b;
                let (l2, g2, h2) = beta_derivatives(data, coef, basis, beta.view());
                ll = l2;
                grad = g2;
                hess = h2;
                if gain <= 1e-15 * (1.0 + ll.abs()) && rnorm < 1e-3 {
                    break;
                }
            }
            None => break,
        }
    }
    let c = -beta.dot(&grad);
    Ok((beta, c))
}

#[allow(clippy::too_many_arguments)]
fn line_search(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
    beta: &Array1<f64>,
    dir: &Array1<f64>,
    t0: f64,
    ll: f64,
    halvings: usize,
) -> Option<(Array1<f64>, f64)> {
    let mut t = t0;
    for _ in 0..=halvings {
        let cand = normalize(beta + &(dir * t));
        let cand_ll = loglik_at_beta(data, coef, basis, cand.view());
        if cand_ll.is_finite() && cand_ll >= ll {
            return Some((cand, cand_ll));
        }
        t *= 0.5;
    }
    None
}

/// Initial indices: the normalized all-ones vector followed by seeded
/// uniform draws on the sphere.
pub fn initial_betas(q_u: usize, n_starts: usize, seed: u64) -> Vec<Array1<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_starts);
    out.push(Array1::from_elem(q_u, 1.0 / (q_u as f64).sqrt()));
    while out.len() < n_starts {
        let v: Array1<f64> = (0..q_u).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            out.push(v / norm);
        }
    }
    out
}

/// Result of the alternating algorithm from one initial value.
#[derive(Debug, Clone)]
pub(crate) struct StartOutcome {
    pub coef: Coefficients,
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Running maxima of `|score_gamma_j| / w_j` and
    /// `|transformed score_alpha_j| / w_j` over every visited `beta`.
    pub null_scores: (f64, f64),
}

pub(crate) fn fit_from(
    data: &Dataset,
    basis: &SplineBasis,
    cfg: &PenaltyConfig,
    scfg: &SolverConfig,
    init: Coefficients,
    track_scores: bool,
) -> Result<StartOutcome> {
    match cfg.strategy {
        KStrategy::FixedFromInitial => {
            let mut identity = cfg.clone();
            identity.strategy = KStrategy::Identity;
            let pre = alternate(data, basis, &identity, scfg, init, false)?;
            let v = data.u().dot(&pre.coef.beta);
            let mut fixed = cfg.clone();
            fixed.metrics = build_k_from_design(data.x(), basis.design_matrix(v.view()).view())?;
            let mut out = alternate(data, basis, &fixed, scfg, pre.coef, track_scores)?;
            let mut trace = pre.trace;
            trace.append(&mut out.trace);
            out.trace = trace;
            out.iterations += pre.iterations;
            Ok(out)
        }
        _ => alternate(data, basis, cfg, scfg, init, track_scores),
    }
}

fn alternate(
    data: &Dataset,
    basis: &SplineBasis,
    cfg: &PenaltyConfig,
    scfg: &SolverConfig,
    init: Coefficients,
    track_scores: bool,
) -> Result<StartOutcome> {
    init.check_dims(data, basis)?;
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if cfg.strategy == KStrategy::Identity {
        cfg.metrics = vec![Metric::identity(basis.len()); data.p()];
    }
    let settings = scfg.solve_settings();
    let mut coef = init;
    coef.beta = normalize(coef.beta);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut prev: Option<f64> = None;
    let mut scores = (0.0f64, 0.0f64);
    let mut iterations = 0;
    for _ in 0..scfg.max_outer_iters.max(1) {
        iterations += 1;
        let bmat = basis.design_matrix(data.u().dot(&coef.beta).view());
        if cfg.strategy == KStrategy::UpdateEachIteration {
            cfg.metrics = build_k_from_design(data.x(), bmat.view())?;
        }
        let md = ModelDesign::build(data, basis, coef.beta.view(), Some(&bmat), &cfg);
        let mut dc = md.to_design(&coef);
        let stats = solve_penalized(data.outcome(), &md.design, &mut dc, settings)?;
        coef = md.to_model(&dc, coef.beta.clone());
        if track_scores {
            let (s1, s2) = block_scores(data, &md, &dc, &cfg.weights);
            scores.0 = scores.0.max(s1);
            scores.1 = scores.1.max(s2);
        }
        let obj = stats.objective;
        trace.push(obj);
        if let Some(p) = prev {
            if (p - obj).abs() <= scfg.tol_outer * p.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        prev = Some(obj);
        if scfg.fix_beta || data.q_u() == 1 {
            converged = true;
            break;
        }
        let (beta, _) = update_beta(data, &coef, basis, scfg)?;
        if beta == coef.beta {
            converged = true;
            break;
        }
        coef.beta = beta;
    }
    apply_sign_convention(&mut coef, basis);
    Ok(StartOutcome {
        coef,
        trace,
        converged,
        iterations,
        null_scores: scores,
    })
}

/// Scores of the penalized blocks at the current solution, divided by the
/// predictor weights.
fn block_scores(data: &Dataset, md: &ModelDesign, dc: &DesignCoef, weights: &Array1<f64>) -> (f64, f64) {
    let eta = md.design.eta(dc);
    let (_, g) = data.outcome().score(eta.view());
    let mut out = (0.0f64, 0.0f64);
    for i in 0..md.design.blocks.len() {
        let w = weights[i / 2];
        if w <= 0.0 {
            continue;
        }
        let s = md.design.block_cols(i).t().dot(&g);
        let v = s.dot(&s).sqrt() / w;
        if i % 2 == 0 {
            out.0 = out.0.max(v);
        } else {
            out.1 = out.1.max(v);
        }
    }
    out
}

/// Flips `beta` so that its first nonzero component is non-negative,
/// re-expressing the spline coefficients so that the fitted functions are
/// unchanged. Only possible when the grid is symmetric.
fn apply_sign_convention(coef: &mut Coefficients, basis: &SplineBasis) {
    let first = coef.beta.iter().find(|v| **v != 0.0).cloned().unwrap_or(0.0);
    if first >= 0.0 {
        return;
    }
    if let Some(m) = basis.reflection() {
        coef.beta.mapv_inplace(|v| -v);
        coef.alpha = coef.alpha.dot(&m);
    }
}

pub(crate) fn finalize(
    data: &Dataset,
    basis: &SplineBasis,
    cfg: &PenaltyConfig,
    outcome: StartOutcome,
    start: usize,
) -> Result<FitResult> {
    let coef = outcome.coef;
    let eta = linear_predictor(data, &coef, basis)?;
    let loglik = data.outcome().loglik(eta.view());
    let df = effective_df(data, &coef, basis)?;
    let bic = bic_value(data, loglik, df)?;
    let selected_constant = (1..=data.p()).filter(|&j| coef.gamma[j] != 0.0).collect();
    let selected_varying = (1..=data.p())
        .filter(|&j| coef.alpha.row(j).iter().any(|v| *v != 0.0))
        .collect();
    let objective = *outcome.trace.last().unwrap_or(&f64::NAN);
    Ok(FitResult {
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        weights: cfg.weights.clone(),
        objective_trace: outcome.trace,
        converged: outcome.converged,
        selected_constant,
        selected_varying,
        loglik,
        df,
        bic,
        objective,
        start,
        outer_iterations: outcome.iterations,
        coef,
    })
}

/// Picks the converged fit with the smallest BIC; when none converged, the
/// fit with the smallest objective, flagged as not converged.
pub(crate) fn choose_start(fits: Vec<FitResult>) -> Option<FitResult> {
    let any_converged = fits.iter().any(|f| f.converged);
    let mut best: Option<FitResult> = None;
    for f in fits {
        if any_converged && !f.converged {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) if any_converged => f.bic < b.bic,
            Some(b) => f.objective < b.objective,
        };
        if better {
            best = Some(f);
        }
    }
    best
}

/// Fits the model at one `(lambda1, lambda2)` from `n_starts` initial
/// indices and returns the start with the smallest modified BIC.
pub fn fit(
    data: &Dataset,
    basis: &SplineBasis,
    cfg: &PenaltyConfig,
    scfg: &SolverConfig,
) -> Result<FitResult> {
    scfg.validate()?;
    cfg.validate()?;
    if cfg.weights.len() != data.p() {
        return Err(Error::Dimension("one penalty weight per predictor required".into()));
    }
    let starts = scfg.starts(data.q_u())?;
    let fits: Vec<Result<FitResult>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let init = Coefficients::zeros(b.clone(), data.p(), basis.len(), data.q_z());
            let out = fit_from(data, basis, cfg, scfg, init, false)?;
            finalize(data, basis, cfg, out, i)
        })
        .collect();
    let mut first_err = None;
    let ok: Vec<FitResult> = fits
        .into_iter()
        .filter_map(|r| match r {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("start failed: {e}");
                first_err.get_or_insert(e);
                None
            }
        })
        .collect();
    choose_start(ok).ok_or_else(|| first_err.unwrap_or_else(|| Error::Solver("no starts".into())))
}

/// `g_j(v)` for `j = 0..=p` at each `v` in `grid`; row per grid point.
pub fn tabulate_g(coef: &Coefficients, basis: &SplineBasis, grid: ArrayView1<f64>) -> Array2<f64> {
    let b = basis.design_matrix(grid);
    b.dot(&coef.alpha.t()) + &coef.gamma.view().insert_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_betas_are_unit_and_seeded() {
        let a = initial_betas(4, 5, 11);
        let b = initial_betas(4, 5, 11);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        for v in &a {
            assert!((v.dot(v) - 1.0).abs() < 1e-12);
        }
        assert!((a[0][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn default_config_is_valid() {
        SolverConfig::default().validate().unwrap();
        let bad = SolverConfig {
            n_starts: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
