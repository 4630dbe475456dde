//! Data model, linear predictor and log-(partial-)likelihoods.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::SplineBasis;

/// Floor applied to the diagonal Cox curvature used as IRLS weights.
pub const WEIGHT_FLOOR: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Right-censored survival outcome with a precomputed time ordering.
#[derive(Debug, Clone)]
pub struct Survival {
    time: Array1<f64>,
    event: Vec<bool>,
    /// Subject indices grouped by tied time, groups in descending time.
    groups: Vec<Vec<usize>>,
    n_events: usize,
}

impl Survival {
    pub fn new(time: Array1<f64>, event: Vec<bool>) -> Result<Self> {
        if time.len() != event.len() {
            return Err(Error::Dimension(format!(
                "{} times but {} event indicators",
                time.len(),
                event.len()
            )));
        }
        if let Some(t) = time.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(Error::Data(format!("survival times must be positive and finite, got {t}")));
        }
        let n_events = event.iter().filter(|e| **e).count();
        if n_events == 0 {
            return Err(Error::NoEvents);
        }
        let mut order: Vec<usize> = (0..time.len()).collect();
        order.sort_by(|&a, &b| time[b].total_cmp(&time[a]).then(a.cmp(&b)));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match groups.last_mut() {
                Some(g) if time[g[0]] == time[i] => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        Ok(Survival {
            time,
            event,
            groups,
            n_events,
        })
    }

    pub fn time(&self) -> ArrayView1<'_, f64> {
        self.time.view()
    }

    pub fn event(&self) -> &[bool] {
        &self.event
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn subset(&self, rows: &[usize]) -> Result<Self> {
        Survival::new(
            rows.iter().map(|&i| self.time[i]).collect(),
            rows.iter().map(|&i| self.event[i]).collect(),
        )
    }

    /// Breslow log partial likelihood together with its gradient and the
    /// diagonal of the negative Hessian with respect to `eta`.
    fn derivatives(&self, eta: ArrayView1<f64>) -> (f64, Array1<f64>, Array1<f64>) {
        let n = eta.len();
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Array1<f64> = eta.mapv(|v| (v - shift).exp());
        let mut ll = 0.0;
        let mut risk = 0.0;
        // per group: (events, risk-set sum)
        let mut stats = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            risk += g.iter().map(|&i| e[i]).sum::<f64>();
            let d = g.iter().filter(|&&i| self.event[i]).count();
            if d > 0 {
                ll += g.iter().filter(|&&i| self.event[i]).map(|&i| eta[i]).sum::<f64>()
                    - d as f64 * (risk.ln() + shift);
            }
            stats.push((d as f64, risk));
        }
        let mut grad = Array1::zeros(n);
        let mut hdiag = Array1::zeros(n);
        let (mut a, mut b) = (0.0, 0.0);
        // ascending time: accumulate events with time <= t_h
        for (g, &(d, risk)) in self.groups.iter().zip(stats.iter()).rev() {
            if d > 0.0 {
                a += d / risk;
                b += d / (risk * risk);
            }
            for &h in g {
                let ev = if self.event[h] { 1.0 } else { 0.0 };
                grad[h] = ev - e[h] * a;
                hdiag[h] = e[h] * a - e[h] * e[h] * b;
            }
        }
        (ll, grad, hdiag)
    }

    /// `V^T (-H) V` where `H` is the full Hessian of the log partial likelihood
    /// in `eta` and row `h` of `V` is `v_h`.
    fn neg_hessian_quad(&self, eta: ArrayView1<f64>, v: ArrayView2<f64>) -> Array2<f64> {
        let q = v.ncols();
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Array1<f64> = eta.mapv(|x| (x - shift).exp());
        let mut risk = 0.0;
        let mut first = Array1::<f64>::zeros(q);
        // scaled first moments of the risk sets, one row per event group
        let mut moments = Vec::new();
        let mut jumps = vec![0.0; self.groups.len()];
        for (k, g) in self.groups.iter().enumerate() {
            for &h in g {
                risk += e[h];
                first.scaled_add(e[h], &v.row(h));
            }
            let d = g.iter().filter(|&&i| self.event[i]).count() as f64;
            if d > 0.0 {
                jumps[k] = d / risk;
                moments.extend(first.iter().map(|f| f * d.sqrt() / risk));
            }
        }
        let mut w = Array1::<f64>::zeros(v.nrows());
        let mut a = 0.0;
        for (k, g) in self.groups.iter().enumerate().rev() {
            a += jumps[k];
            for &h in g {
                w[h] = e[h] * a;
            }
        }
        let vw = &v * &w.view().insert_axis(Axis(1));
        let f = Array2::from_shape_vec((moments.len() / q.max(1), q), moments).expect("moment rows");
        let out = v.t().dot(&vw) - f.t().dot(&f);
        // exact symmetry for the eigen-solvers downstream
        (&out + &out.t()) * 0.5
    }
}

/// Outcome of a dataset: Gaussian response with unit variance or a
/// right-censored survival time under the Cox model.
#[derive(Debug, Clone)]
pub enum Outcome {
    Gaussian(Array1<f64>),
    Cox(Survival),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Gaussian,
    Cox,
}

impl Outcome {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            Outcome::Gaussian(_) => OutcomeKind::Gaussian,
            Outcome::Cox(_) => OutcomeKind::Cox,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Outcome::Gaussian(y) => y.len(),
            Outcome::Cox(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `n` for Gaussian outcomes, number of events for Cox outcomes.
    pub fn effective_n(&self) -> usize {
        match self {
            Outcome::Gaussian(y) => y.len(),
            Outcome::Cox(s) => s.n_events(),
        }
    }

    pub fn loglik(&self, eta: ArrayView1<f64>) -> f64 {
        match self {
            Outcome::Gaussian(y) => loglik_gaussian_raw(y.view(), eta),
            Outcome::Cox(s) => s.derivatives(eta).0,
        }
    }

    /// Log-likelihood and its gradient with respect to `eta`.
    pub fn score(&self, eta: ArrayView1<f64>) -> (f64, Array1<f64>) {
        match self {
            Outcome::Gaussian(y) => (loglik_gaussian_raw(y.view(), eta), &y.view() - &eta),
            Outcome::Cox(s) => {
                let (ll, g, _) = s.derivatives(eta);
                (ll, g)
            }
        }
    }

    /// Log-likelihood, gradient and diagonal of the negative Hessian.
    pub fn derivatives(&self, eta: ArrayView1<f64>) -> (f64, Array1<f64>, Array1<f64>) {
        match self {
            Outcome::Gaussian(y) => (
                loglik_gaussian_raw(y.view(), eta),
                &y.view() - &eta,
                Array1::ones(eta.len()),
            ),
            Outcome::Cox(s) => s.derivatives(eta),
        }
    }

    /// `V^T (-H) V` for the Hessian `H` of the log-likelihood in `eta`.
    pub fn neg_hessian_quad(&self, eta: ArrayView1<f64>, v: ArrayView2<f64>) -> Array2<f64> {
        match self {
            Outcome::Gaussian(_) => v.t().dot(&v),
            Outcome::Cox(s) => s.neg_hessian_quad(eta, v),
        }
    }

    fn subset(&self, rows: &[usize]) -> Result<Self> {
        Ok(match self {
            Outcome::Gaussian(y) => Outcome::Gaussian(rows.iter().map(|&i| y[i]).collect()),
            Outcome::Cox(s) => Outcome::Cox(s.subset(rows)?),
        })
    }
}

fn loglik_gaussian_raw(y: ArrayView1<f64>, eta: ArrayView1<f64>) -> f64 {
    y.iter()
        .zip(eta.iter())
        .map(|(y, e)| -0.5 * (y - e) * (y - e) - HALF_LN_2PI)
        .sum()
}

/// Observed data `(Y, X, U, Z)`.
///
/// Column 0 of `x` is the constant predictor `X_0 = 1`. When `u_in_z` is set,
/// entry `k` gives the column of `z` that duplicates column `k` of `u`.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    u: Array2<f64>,
    z: Array2<f64>,
    outcome: Outcome,
    u_in_z: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, u: Array2<f64>, z: Array2<f64>, outcome: Outcome) -> Result<Self> {
        let n = x.nrows();
        if u.nrows() != n || z.nrows() != n || outcome.len() != n {
            return Err(Error::Dimension(format!(
                "row counts differ: X {}, U {}, Z {}, outcome {}",
                n,
                u.nrows(),
                z.nrows(),
                outcome.len()
            )));
        }
        if n == 0 {
            return Err(Error::Data("no observations".into()));
        }
        if x.ncols() == 0 || x.column(0).iter().any(|v| *v != 1.0) {
            return Err(Error::Data("column 0 of X must be identically 1".into()));
        }
        if u.ncols() == 0 {
            return Err(Error::Dimension("U must have at least one column".into()));
        }
        let all = x.iter().chain(u.iter()).chain(z.iter());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Data("predictors must be finite".into()));
        }
        if let Outcome::Gaussian(y) = &outcome {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data("responses must be finite".into()));
            }
        }
        Ok(Dataset {
            x,
            u,
            z,
            outcome,
            u_in_z: None,
        })
    }

    /// Builds a dataset from predictors `X_1..X_p` without the constant column.
    pub fn from_predictors(
        x_without_intercept: ArrayView2<f64>,
        u: Array2<f64>,
        z: Array2<f64>,
        outcome: Outcome,
    ) -> Result<Self> {
        let n = x_without_intercept.nrows();
        let mut x = Array2::ones((n, x_without_intercept.ncols() + 1));
        x.slice_mut(s![.., 1..]).assign(&x_without_intercept);
        Dataset::new(x, u, z, outcome)
    }

    /// Declares that column `k` of `U` is column `map[k]` of `Z`.
    pub fn with_u_in_z(mut self, map: Vec<usize>) -> Result<Self> {
        if map.len() != self.u.ncols() {
            return Err(Error::Dimension(format!(
                "overlap map has {} entries for {} U columns",
                map.len(),
                self.u.ncols()
            )));
        }
        if let Some(&bad) = map.iter().find(|&&c| c >= self.z.ncols()) {
            return Err(Error::Dimension(format!("overlap map refers to Z column {bad}")));
        }
        self.u_in_z = Some(map);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of non-constant predictors `p`.
    pub fn p(&self) -> usize {
        self.x.ncols() - 1
    }

    pub fn q_u(&self) -> usize {
        self.u.ncols()
    }

    pub fn q_z(&self) -> usize {
        self.z.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn u(&self) -> ArrayView2<'_, f64> {
        self.u.view()
    }

    pub fn z(&self) -> ArrayView2<'_, f64> {
        self.z.view()
    }

    pub fn outcome(&self) -> &Outcome {
        &self.outcome
    }

    pub fn kind(&self) -> OutcomeKind {
        self.outcome.kind()
    }

    pub fn u_in_z(&self) -> Option<&[usize]> {
        self.u_in_z.as_deref()
    }

    /// Component of `psi` pinned to zero when `U` is part of `Z`.
    pub fn fixed_psi(&self) -> Option<usize> {
        self.u_in_z.as_ref().map(|m| m[m.len() - 1])
    }

    /// Largest Euclidean norm of a row of `U`.
    pub fn max_u_norm(&self) -> f64 {
        self.u
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0, f64::max)
    }

    /// Dataset restricted to the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let take = |m: &Array2<f64>| m.select(Axis(0), rows);
        let mut out = Dataset::new(
            take(&self.x),
            take(&self.u),
            take(&self.z),
            self.outcome.subset(rows)?,
        )?;
        out.u_in_z = self.u_in_z.clone();
        Ok(out)
    }
}

/// Full parameter state `(beta, psi, gamma, alpha)`.
///
/// `g_j(v) = gamma[j] + sum_k alpha[j, k] B_k(v)` for `j = 0..=p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub beta: Array1<f64>,
    pub psi: Array1<f64>,
    pub gamma: Array1<f64>,
    pub alpha: Array2<f64>,
}

impl Coefficients {
    pub fn zeros(beta: Array1<f64>, p: usize, d: usize, q_z: usize) -> Self {
        Coefficients {
            beta,
            psi: Array1::zeros(q_z),
            gamma: Array1::zeros(p + 1),
            alpha: Array2::zeros((p + 1, d)),
        }
    }

    pub fn p(&self) -> usize {
        self.gamma.len() - 1
    }

    pub fn check_dims(&self, data: &Dataset, basis: &SplineBasis) -> Result<()> {
        let ok = self.beta.len() == data.q_u()
            && self.psi.len() == data.q_z()
            && self.gamma.len() == data.p() + 1
            && self.alpha.dim() == (data.p() + 1, basis.len());
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "coefficients (beta {}, psi {}, gamma {}, alpha {:?}) do not fit data (q_u {}, q_z {}, p {}) and basis size {}",
                self.beta.len(),
                self.psi.len(),
                self.gamma.len(),
                self.alpha.dim(),
                data.q_u(),
                data.q_z(),
                data.p(),
                basis.len()
            )))
        }
    }

    /// `g_j(v)` for one predictor.
    pub fn g(&self, j: usize, basis: &SplineBasis, v: f64) -> f64 {
        let b = basis.evaluate(v);
        self.gamma[j] + self.alpha.row(j).iter().zip(&b).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Index `U beta` together with the spline value and derivative terms that the
/// likelihood needs as functions of `beta`.
#[derive(Debug, Clone)]
pub(crate) struct IndexTerms {
    pub eta: Array1<f64>,
    /// `d eta_i / d v_i`
    pub slope: Array1<f64>,
    /// `d^2 eta_i / d v_i^2`
    pub curvature: Array1<f64>,
}

pub(crate) fn index_terms(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
    beta: ArrayView1<f64>,
) -> IndexTerms {
    let v = data.u.dot(&beta);
    let (bv, b1, b2) = basis.design_jets(v.view());
    let at = coef.alpha.t();
    let g = bv.dot(&at) + &coef.gamma;
    let g1 = b1.dot(&at);
    let g2 = b2.dot(&at);
    let x = &data.x;
    let eta = (&g * x).sum_axis(Axis(1)) + data.z.dot(&coef.psi);
    let slope = (&g1 * x).sum_axis(Axis(1));
    let curvature = (&g2 * x).sum_axis(Axis(1));
    IndexTerms {
        eta,
        slope,
        curvature,
    }
}

/// `eta_i = sum_j g_j(U_i^T beta) X_ij + Z_i^T psi`.
pub fn linear_predictor(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
) -> Result<Array1<f64>> {
    coef.check_dims(data, basis)?;
    let v = data.u.dot(&coef.beta);
    let bv = basis.design_matrix(v.view());
    let g = bv.dot(&coef.alpha.t()) + &coef.gamma;
    Ok((&g * &data.x).sum_axis(Axis(1)) + data.z.dot(&coef.psi))
}

/// `sum_i -(y_i - eta_i)^2 / 2 - log(2 pi) / 2`.
pub fn loglik_gaussian(data: &Dataset, eta: ArrayView1<f64>) -> Result<f64> {
    match &data.outcome {
        Outcome::Gaussian(y) => {
            if y.len() != eta.len() {
                return Err(Error::Dimension("eta length differs from n".into()));
            }
            Ok(loglik_gaussian_raw(y.view(), eta))
        }
        Outcome::Cox(_) => Err(Error::Config("Gaussian likelihood on a survival outcome".into())),
    }
}

/// Breslow log partial likelihood
/// `sum_i Delta_i [eta_i - log sum_{h: Y_h >= Y_i} exp(eta_h)]`.
pub fn loglik_cox(data: &Dataset, eta: ArrayView1<f64>) -> Result<f64> {
    match &data.outcome {
        Outcome::Cox(s) => {
            if s.len() != eta.len() {
                return Err(Error::Dimension("eta length differs from n".into()));
            }
            Ok(s.derivatives(eta).0)
        }
        Outcome::Gaussian(_) => Err(Error::Config("Cox likelihood on a Gaussian outcome".into())),
    }
}

/// Gradient of the log-likelihood with respect to `beta`, ignoring the
/// unit-norm constraint.
pub fn loglik_grad_beta(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
) -> Result<Array1<f64>> {
    coef.check_dims(data, basis)?;
    let t = index_terms(data, coef, basis, coef.beta.view());
    let (_, g) = data.outcome.score(t.eta.view());
    Ok(data.u.t().dot(&(&g * &t.slope)))
}

/// Log-likelihood, gradient and Hessian in `beta` at `beta`.
pub(crate) fn beta_derivatives(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
    beta: ArrayView1<f64>,
) -> (f64, Array1<f64>, Array2<f64>) {
    let t = index_terms(data, coef, basis, beta);
    let (ll, g) = data.outcome.score(t.eta.view());
    let grad = data.u.t().dot(&(&g * &t.slope));
    let jac = &data.u * &t.slope.view().insert_axis(Axis(1));
    let gt = &g * &t.curvature;
    let first = data.u.t().dot(&(&data.u * &gt.view().insert_axis(Axis(1))));
    let second = data.outcome.neg_hessian_quad(t.eta.view(), jac.view());
    (ll, grad, first - second)
}

/// Log-likelihood only, as a function of `beta`.
pub(crate) fn loglik_at_beta(
    data: &Dataset,
    coef: &Coefficients,
    basis: &SplineBasis,
    beta: ArrayView1<f64>,
) -> f64 {
    let v = data.u.dot(&beta);
    let bv = basis.design_matrix(v.view());
    let g = bv.dot(&coef.alpha.t()) + &coef.gamma;
    let eta = (&g * &data.x).sum_axis(Axis(1)) + data.z.dot(&coef.psi);
    data.outcome.loglik(eta.view())
}

/// Quadratic surrogate of the negative log-likelihood at `eta`:
/// `-l(eta') ~ const + sum_i w_i (z_i - eta'_i)^2 / 2`.
///
/// Gaussian: `w = 1`, `z = y`. Cox: `w` is the diagonal of the negative
/// Hessian (floored at [`WEIGHT_FLOOR`]) and `z = eta + gradient / w`.
pub fn working_response_and_weights(
    data: &Dataset,
    eta: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    surrogate(&data.outcome, eta)
}

pub(crate) fn surrogate(outcome: &Outcome, eta: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    match outcome {
        Outcome::Gaussian(y) => (y.clone(), Array1::ones(y.len())),
        Outcome::Cox(s) => {
            let (_, g, h) = s.derivatives(eta);
            let w = h.mapv(|v| v.max(WEIGHT_FLOOR));
            let z = &eta + &(&g / &w);
            (z, w)
        }
    }
}
