//! Block coordinate descent for penalized quadratics and the damped Newton
//! loop that extends it to the Cox partial likelihood.
//!
//! A [`Design`] stores all columns in one matrix: an unpenalized leading
//! block, solved jointly, followed by an ordered list of penalized blocks.
//! Each penalized block carries a plain Euclidean-norm penalty `pen * |a|`;
//! metric-weighted groups are handled by the caller through the change of
//! variables `a = R alpha`. Updates work on the weighted Gram matrix and the
//! gradient `X^T W r`, so a pass costs `O(m^2)` rather than `O(n m)`. Every
//! block update is an exact minimization of the surrogate, so the surrogate
//! objective never increases.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{psd_pinv, sym_eig, SymEig};
use crate::model::Outcome;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Block {
    pub start: usize,
    pub len: usize,
    pub pen: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub x: Array2<f64>,
    pub n_unpen: usize,
    pub blocks: Vec<Block>,
}

/// Coefficients in column order of [`Design::x`].
pub(crate) type DesignCoef = Array1<f64>;

impl Design {
    /// `specs` lists `(width, pen)` for each penalized block, in column
    /// order after the `n_unpen` leading columns.
    pub fn new(x: Array2<f64>, n_unpen: usize, specs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut start = n_unpen;
        let blocks: Vec<Block> = specs
            .into_iter()
            .map(|(len, pen)| {
                let b = Block { start, len, pen };
                start += len;
                b
            })
            .collect();
        assert_eq!(start, x.ncols(), "block widths must cover the design");
        Design { x, n_unpen, blocks }
    }

    pub fn block_cols(&self, j: usize) -> ArrayView2<'_, f64> {
        let b = self.blocks[j];
        self.x.slice(s![.., b.start..b.start + b.len])
    }

    pub fn zero_coef(&self) -> DesignCoef {
        Array1::zeros(self.x.ncols())
    }

    pub fn eta(&self, coef: &DesignCoef) -> Array1<f64> {
        self.x.dot(coef)
    }

    pub fn penalty(&self, coef: &DesignCoef) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let a = coef.slice(s![b.start..b.start + b.len]);
                let norm = a.dot(&a).sqrt();
                if norm == 0.0 {
                    0.0
                } else {
                    b.pen * norm
                }
            })
            .sum()
    }

    /// `-l(eta) + penalty`.
    pub fn objective(&self, outcome: &Outcome, coef: &DesignCoef) -> f64 {
        -outcome.loglik(self.eta(coef).view()) + self.penalty(coef)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CdSettings {
    pub max_passes: usize,
    pub tol: f64,
    /// Record the surrogate objective after every block update.
    pub trace_updates: bool,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct CdStats {
    pub passes: usize,
    pub converged: bool,
    /// Surrogate objective after each pass (or each update when tracing).
    pub trace: Vec<f64>,
}

/// Minimizes `a^T H a / 2 - b^T a + pen |a|` given the eigen-decomposition
/// of `H`.
pub(crate) fn group_minimizer(eig: &SymEig, b: ArrayView1<f64>, pen: f64) -> Array1<f64> {
    let d = b.len();
    let bnorm = b.dot(&b).sqrt();
    if bnorm <= pen {
        return Array1::zeros(d);
    }
    let top = eig.values.iter().cloned().fold(0.0, f64::max);
    let floor = top * 1e-13 + f64::MIN_POSITIVE;
    if d == 1 {
        let mu = eig.values[0];
        if mu <= floor {
            return Array1::zeros(1);
        }
        return Array1::from_elem(1, (bnorm - pen) * b[0].signum() / mu);
    }
    let c = eig.vectors.t().dot(&b);
    if pen == 0.0 {
        // unpenalized: pseudo-inverse solution
        let mut out = Array1::zeros(d);
        for k in 0..d {
            if eig.values[k] > floor {
                out.scaled_add(c[k] / eig.values[k], &eig.vectors.column(k));
            }
        }
        return out;
    }
    let mu: Vec<f64> = eig.values.iter().map(|&m| m.max(floor)).collect();
    let mu_min = mu.iter().cloned().fold(f64::INFINITY, f64::min);
    let mu_max = mu.iter().cloned().fold(0.0, f64::max);
    // find t = |a| > 0 with sum_k c_k^2 / (mu_k t + pen)^2 = 1
    let phi = |t: f64| -> (f64, f64) {
        let mut s = 0.0;
        let mut ds = 0.0;
        for k in 0..d {
            let den = mu[k] * t + pen;
            s += c[k] * c[k] / (den * den);
            ds += -2.0 * mu[k] * c[k] * c[k] / (den * den * den);
        }
        (s, ds)
    };
    let mut lo = (bnorm - pen) / mu_max;
    let mut hi = (bnorm - pen) / mu_min;
    let mut t = lo;
    for _ in 0..200 {
        let (s, ds) = phi(t);
        // h(t) = s^{-1/2} - 1 is increasing in t
        let h = 1.0 / s.sqrt() - 1.0;
        if h < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if h.abs() < 1e-15 || hi - lo <= 1e-15 * hi.abs() {
            break;
        }
        let dh = -0.5 * ds / (s * s.sqrt());
        let mut next = t - h / dh;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        t = next;
    }
    let mut out = Array1::zeros(d);
    for k in 0..d {
        out.scaled_add(t * c[k] / (mu[k] * t + pen), &eig.vectors.column(k));
    }
    out
}

/// Coordinate descent on `sum_i (z_i - eta_i)^2 / 2 + penalty`, starting
/// from `coef`.
pub(crate) fn cd_least_squares(design: &Design, z: ArrayView1<f64>, coef: &mut DesignCoef, settings: CdSettings) -> CdStats {
    let x = &design.x;
    cd_quadratic(design, &x.t().dot(x), &x.t().dot(&z), z.dot(&z), coef, settings)
}

/// Coordinate descent on `(zwz - 2 c0^T a + a^T G a) / 2 + penalty`.
fn cd_quadratic(
    design: &Design,
    gram: &Array2<f64>,
    c0: &Array1<f64>,
    zwz: f64,
    coef: &mut DesignCoef,
    settings: CdSettings,
) -> CdStats {
    let u = design.n_unpen;
    let unpen_pinv = psd_pinv(gram.slice(s![..u, ..u]));
    let eig: Vec<Option<SymEig>> = design
        .blocks
        .iter()
        .map(|b| (b.len > 1).then(|| sym_eig(gram.slice(s![b.start..b.start + b.len, b.start..b.start + b.len]))))
        .collect();
    // g = X^T W r
    let mut g = c0 - &gram.dot(&*coef);
    let objective = |coef: &DesignCoef, g: &Array1<f64>| {
        let rwr = zwz - coef.dot(&(c0 + g));
        0.5 * rwr + design.penalty(coef)
    };

    let mut stats = CdStats::default();
    let nb = design.blocks.len();
    let mut active: Vec<bool> = design
        .blocks
        .iter()
        .map(|b| coef.slice(s![b.start..b.start + b.len]).iter().any(|v| *v != 0.0))
        .collect();
    let mut full_pass = true;

    while stats.passes < settings.max_passes {
        stats.passes += 1;
        let mut max_change: f64 = 0.0;

        if u > 0 {
            let delta = unpen_pinv.dot(&g.slice(s![..u]));
            if delta.iter().any(|v| *v != 0.0) {
                g -= &gram.slice(s![.., ..u]).dot(&delta);
                coef.slice_mut(s![..u]).scaled_add(1.0, &delta);
                max_change = max_change.max(delta.iter().fold(0.0, |m, v| m.max(v.abs())));
            }
            if settings.trace_updates {
                stats.trace.push(objective(coef, &g));
            }
        }

        for j in 0..nb {
            if !full_pass && !active[j] {
                continue;
            }
            let Block { start, len, pen } = design.blocks[j];
            let change;
            if len == 1 {
                let h = gram[[start, start]];
                let old = coef[start];
                let b = g[start] + h * old;
                let new = if b.abs() <= pen || !(h > 0.0) {
                    0.0
                } else {
                    (b.abs() - pen) * b.signum() / h
                };
                let delta = new - old;
                change = delta.abs();
                if delta != 0.0 {
                    g.scaled_add(-delta, &gram.column(start));
                    coef[start] = new;
                }
                active[j] = new != 0.0;
            } else {
                let range = start..start + len;
                let old = coef.slice(s![range.clone()]).to_owned();
                let mut b = g.slice(s![range.clone()]).to_owned();
                if old.iter().any(|v| *v != 0.0) {
                    b += &gram.slice(s![range.clone(), range.clone()]).dot(&old);
                }
                let new = group_minimizer(eig[j].as_ref().expect("group eigen"), b.view(), pen);
                let delta = &new - &old;
                change = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if change > 0.0 {
                    g -= &gram.slice(s![.., range.clone()]).dot(&delta);
                    coef.slice_mut(s![range]).assign(&new);
                }
                active[j] = new.iter().any(|v| *v != 0.0);
            }
            max_change = max_change.max(change);
            if settings.trace_updates {
                stats.trace.push(objective(coef, &g));
            }
        }

        if !settings.trace_updates {
            stats.trace.push(objective(coef, &g));
        }

        if max_change < settings.tol {
            if full_pass {
                stats.converged = true;
                break;
            }
            full_pass = true;
        } else {
            full_pass = false;
        }
    }
    stats
}

/// Relative objective change that ends the Cox IRLS loop.
const IRLS_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SolveSettings {
    pub cd: CdSettings,
    pub max_irls: usize,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct SolveStats {
    pub objective: f64,
    pub cd_passes: usize,
    pub converged: bool,
    pub pass_traces: Vec<Vec<f64>>,
}

/// Minimizes `-l(eta) + penalty` over the design coefficients.
pub(crate) fn solve_penalized(
    outcome: &Outcome,
    design: &Design,
    coef: &mut DesignCoef,
    settings: SolveSettings,
) -> Result<SolveStats> {
    let mut stats = SolveStats::default();
    match outcome {
        Outcome::Gaussian(y) => {
            let cd = cd_least_squares(design, y.view(), coef, settings.cd);
            stats.cd_passes = cd.passes;
            stats.converged = cd.converged;
            stats.pass_traces.push(cd.trace);
            stats.objective = design.objective(outcome, coef);
        }
        Outcome::Cox(_) => {
            let mut eta = design.eta(coef);
            let mut obj = -outcome.loglik(eta.view()) + design.penalty(coef);
            for _ in 0..settings.max_irls.max(1) {
                // second-order expansion of -l with the full Hessian
                let (ll, g) = outcome.score(eta.view());
                let gram = outcome.neg_hessian_quad(eta.view(), design.x.view());
                let ga = gram.dot(&*coef);
                let c0 = &ga + &design.x.t().dot(&g);
                let zwz = 2.0 * (-ll + g.dot(&eta)) + coef.dot(&ga);
                let old = coef.clone();
                let cd = cd_quadratic(design, &gram, &c0, zwz, coef, settings.cd);
                stats.cd_passes += cd.passes;
                stats.pass_traces.push(cd.trace);
                let mut cand_eta = design.eta(coef);
                let mut cand_obj = -outcome.loglik(cand_eta.view()) + design.penalty(coef);
                // backtrack along the segment towards the previous iterate
                let mut t = 1.0;
                let mut halvings = 0;
                while !(cand_obj <= obj + 1e-12 * obj.abs()) && halvings < 40 {
                    t *= 0.5;
                    halvings += 1;
                    *coef = blend(&old, coef, 0.5);
                    cand_eta = design.eta(coef);
                    cand_obj = -outcome.loglik(cand_eta.view()) + design.penalty(coef);
                }
                if !(cand_obj <= obj + 1e-12 * obj.abs()) {
                    *coef = old;
                    stats.converged = true;
                    break;
                }
                let change = max_abs_diff(&old, coef);
                let rel = (obj - cand_obj).abs() / obj.abs().max(1.0);
                eta = cand_eta;
                obj = cand_obj;
                if !obj.is_finite() {
                    return Err(Error::Solver("non-finite Cox objective".into()));
                }
                if t == 1.0 && (change < settings.cd.tol || rel < IRLS_REL_TOL) {
                    stats.converged = true;
                    break;
                }
            }
            stats.objective = obj;
        }
    }
    if !stats.objective.is_finite() {
        return Err(Error::Solver(format!(
            "penalized objective is not finite ({})",
            stats.objective
        )));
    }
    Ok(stats)
}

fn blend(a: &DesignCoef, b: &DesignCoef, t: f64) -> DesignCoef {
    a * (1.0 - t) + b * t
}

fn max_abs_diff(a: &DesignCoef, b: &DesignCoef) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Largest violation of the first-order optimality conditions of
/// `-l + penalty` at `coef`.
pub(crate) fn kkt_violation(outcome: &Outcome, design: &Design, coef: &DesignCoef) -> f64 {
    let eta = design.eta(coef);
    let (_, g) = outcome.score(eta.view());
    let s_all = design.x.t().dot(&g);
    let mut worst: f64 = 0.0;
    for v in s_all.slice(s![..design.n_unpen]).iter() {
        worst = worst.max(v.abs());
    }
    for b in &design.blocks {
        let s = s_all.slice(s![b.start..b.start + b.len]);
        let a = coef.slice(s![b.start..b.start + b.len]);
        let norm = a.dot(&a).sqrt();
        if norm == 0.0 {
            worst = worst.max(s.dot(&s).sqrt() - b.pen);
        } else {
            let resid = &s - &(&a * (b.pen / norm));
            worst = worst.max(resid.dot(&resid).sqrt());
        }
    }
    worst
}
