use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{eval_metrics, Estimate, Metrics};
use super::{calibrate_censoring, generate, SimData, SimDesign, DEFAULT_BETA0, DEFAULT_PSI0, N_SIGNALS};
use crate::error::{Error, Result};
use crate::linear::{adaptive_lasso_weights, lasso_path, LassoPath, LinearProblem};
use crate::model::{linear_predictor, Dataset, OutcomeKind};
use crate::penalty::KStrategy;
use crate::selection::{fit_path, GridSpec};
use crate::solver::{tabulate_g, FitResult, SolverConfig};
use crate::spline::SplineBasis;

/// Offset added to the base seed for the censoring calibration sample.
const CALIBRATION_SEED_OFFSET: u64 = 0x0c0f_fee0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ProposedUnweighted,
    ProposedWeighted,
    LassoMain,
    LassoInteraction,
    AdaptiveLassoMain,
    AdaptiveLassoInteraction,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::ProposedUnweighted,
        Method::ProposedWeighted,
        Method::LassoMain,
        Method::LassoInteraction,
        Method::AdaptiveLassoMain,
        Method::AdaptiveLassoInteraction,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ProposedUnweighted => "proposed_unweighted",
            Method::ProposedWeighted => "proposed_weighted",
            Method::LassoMain => "lasso_main",
            Method::LassoInteraction => "lasso_interaction",
            Method::AdaptiveLassoMain => "adaptive_lasso_main",
            Method::AdaptiveLassoInteraction => "adaptive_lasso_interaction",
        }
    }

    fn interactions(&self) -> bool {
        matches!(self, Method::LassoInteraction | Method::AdaptiveLassoInteraction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub outcome: OutcomeKind,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub beta0: Vec<f64>,
    pub psi0: Vec<f64>,
    pub target_censoring: f64,
    /// Skips calibration when set.
    pub censoring_mean: Option<f64>,
    /// Size of the fresh sample used for prediction metrics.
    pub n_test: usize,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub k_strategy: KStrategy,
    pub lasso_path_len: usize,
    pub lasso_min_ratio: f64,
    pub curve_points: usize,
    /// Curves are tabulated on `[-curve_radius, curve_radius]`.
    pub curve_radius: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 500,
            p: 20,
            outcome: OutcomeKind::Gaussian,
            replicates: 20,
            seed: 1,
            methods: Method::ALL.to_vec(),
            beta0: DEFAULT_BETA0.to_vec(),
            psi0: DEFAULT_PSI0.to_vec(),
            target_censoring: 0.3,
            censoring_mean: None,
            n_test: 2000,
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            k_strategy: KStrategy::default(),
            lasso_path_len: crate::linear::DEFAULT_PATH_LEN,
            lasso_min_ratio: crate::linear::DEFAULT_PATH_RATIO,
            curve_points: 41,
            curve_radius: 3.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn design(&self) -> SimDesign {
        SimDesign {
            n: self.n,
            p: self.p,
            beta0: self.beta0.clone(),
            psi0: self.psi0.clone(),
            outcome: self.outcome,
            target_censoring: self.target_censoring,
            censoring_mean: self.censoring_mean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design().validate()?;
        self.grid.validate()?;
        self.solver.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.n_test == 0 || self.curve_points < 2 || !(self.curve_radius > 0.0) {
            return Err(Error::Config("n_test, curve_points and curve_radius must be positive".into()));
        }
        if let Some(t) = self.censoring_mean {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config("censoring_mean must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub method: Method,
    pub censoring_rate: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub bic: f64,
    pub converged: bool,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Averages over successful replicates, skipping undefined values.
    pub mean: Metrics,
    pub censoring_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRow {
    pub replicate: usize,
    pub method: Method,
    pub j: usize,
    pub v: f64,
    pub g_hat: f64,
    pub g_true: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Failure {
    pub replicate: usize,
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub censoring_mean: Option<f64>,
    pub replicates: Vec<ReplicateRow>,
    pub summary: Vec<SummaryRow>,
    pub curves: Vec<CurveRow>,
    pub failures: Vec<Failure>,
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

impl ExperimentOutput {
    pub fn summary(&self, method: Method) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn summary_tsv(&self) -> String {
        let mut s = String::from("method\tn_ok\tn_failed\tcensoring_rate");
        for name in Metrics::NAMES {
            s.push('\t');
            s.push_str(name);
        }
        s.push('\n');
        for row in &self.summary {
            let _ = write!(s, "{}\t{}\t{}\t{}", row.method.as_str(), row.n_ok, row.n_failed, fmt(row.censoring_rate));
            for v in row.mean.values() {
                let _ = write!(s, "\t{}", fmt(v));
            }
            s.push('\n');
        }
        s
    }

    pub fn replicates_tsv(&self) -> String {
        let mut s = String::from("replicate\tmethod\tcensoring_rate\tlambda1\tlambda2\tbic\tconverged");
        for name in Metrics::NAMES {
            s.push('\t');
            s.push_str(name);
        }
        s.push('\n');
        for r in &self.replicates {
            let _ = write!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.replicate,
                r.method.as_str(),
                fmt(r.censoring_rate),
                fmt(r.lambda1),
                fmt(r.lambda2),
                fmt(r.bic),
                r.converged
            );
            for v in r.metrics.values() {
                let _ = write!(s, "\t{}", fmt(v));
            }
            s.push('\n');
        }
        s
    }

    pub fn curves_tsv(&self) -> String {
        let mut s = String::from("replicate\tmethod\tj\tv\tg_hat\tg_true\n");
        for c in &self.curves {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                c.replicate,
                c.method.as_str(),
                c.j,
                c.v,
                c.g_hat,
                c.g_true
            );
        }
        s
    }

    pub fn failures_tsv(&self) -> String {
        let mut s = String::from("replicate\tmethod\tmessage\n");
        for f in &self.failures {
            let msg = f.message.replace(['\t', '\n'], " ");
            let _ = writeln!(s, "{}\t{}\t{}", f.replicate, f.method.as_str(), msg);
        }
        s
    }

    /// Writes `summary.tsv`, `replicates.tsv`, `curves.tsv` and
    /// `failures.tsv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.tsv"), self.summary_tsv())?;
        fs::write(dir.join("replicates.tsv"), self.replicates_tsv())?;
        fs::write(dir.join("curves.tsv"), self.curves_tsv())?;
        fs::write(dir.join("failures.tsv"), self.failures_tsv())?;
        Ok(())
    }
}

/// Penalized features for the lasso baselines: `X_1..X_p`, then
/// `X_j Z_k` for every `j`, `k` when `interactions` is set.
pub fn lasso_features(data: &Dataset, interactions: bool) -> Array2<f64> {
    let n = data.n();
    let p = data.p();
    let qz = data.q_z();
    let width = if interactions { p + p * qz } else { p };
    let mut m = Array2::zeros((n, width));
    m.slice_mut(ndarray::s![.., ..p]).assign(&data.x().slice(ndarray::s![.., 1..]));
    if interactions {
        for j in 1..=p {
            for k in 0..qz {
                let col = &data.x().column(j) * &data.z().column(k);
                m.column_mut(p + (j - 1) * qz + k).assign(&col);
            }
        }
    }
    m
}

/// Predictor index (1-based) owning lasso feature `f`.
fn feature_owner(f: usize, p: usize, qz: usize) -> usize {
    if f < p {
        f + 1
    } else {
        (f - p) / qz + 1
    }
}

struct MethodResult {
    method: Method,
    lambda1: f64,
    lambda2: f64,
    bic: f64,
    converged: bool,
    estimate: Estimate,
}

fn proposed_result(method: Method, fit: &FitResult, basis: &SplineBasis, test: &SimData) -> Result<MethodResult> {
    Ok(MethodResult {
        method,
        lambda1: fit.lambda1,
        lambda2: fit.lambda2,
        bic: fit.bic,
        converged: fit.converged,
        estimate: Estimate {
            selected: fit.selected(),
            selected_varying: Some(fit.selected_varying.clone()),
            beta: Some(fit.coef.beta.clone()),
            eta_test: linear_predictor(&test.data, &fit.coef, basis)?,
        },
    })
}

fn lasso_result(method: Method, path: &LassoPath, train: &Dataset, test: &Dataset) -> MethodResult {
    let fit = path.best();
    let interactions = method.interactions();
    let p = train.p();
    let qz = train.q_z();
    let mut selected = BTreeSet::new();
    let mut varying = BTreeSet::new();
    for f in fit.selected() {
        let j = feature_owner(f, p, qz);
        selected.insert(j);
        if f >= p {
            varying.insert(j);
        }
    }
    let feats = lasso_features(test, interactions);
    MethodResult {
        method,
        lambda1: fit.lambda,
        lambda2: f64::NAN,
        bic: fit.bic,
        converged: fit.converged,
        estimate: Estimate {
            selected,
            selected_varying: interactions.then_some(varying),
            beta: None,
            eta_test: fit.predict(feats.view(), test.z()),
        },
    }
}

fn curve_grid(cfg: &ExperimentConfig) -> Array1<f64> {
    Array1::linspace(-cfg.curve_radius, cfg.curve_radius, cfg.curve_points)
}

struct ReplicateOut {
    censoring_rate: f64,
    results: Vec<std::result::Result<(MethodResult, Metrics), (Method, String)>>,
    curves: Vec<CurveRow>,
}

fn run_replicate(cfg: &ExperimentConfig, design: &SimDesign, r: usize) -> Result<ReplicateOut> {
    let seed = cfg.seed.wrapping_add(r as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = generate(design, cfg.n, &mut rng)?;
    let test = generate(design, cfg.n_test, &mut rng)?;
    let mut scfg = cfg.solver.clone();
    scfg.seed = seed;
    let mut results = Vec::new();
    let mut curves = Vec::new();
    let grid = curve_grid(cfg);

    let want = |m: Method| cfg.methods.contains(&m);
    if want(Method::ProposedUnweighted) || want(Method::ProposedWeighted) {
        let basis = SplineBasis::symmetric(train.data.max_u_norm())?;
        match fit_path(&train.data, &basis, &cfg.grid, cfg.k_strategy, &scfg, want(Method::ProposedWeighted)) {
            Ok(path) => {
                let stages = [
                    (Method::ProposedUnweighted, Some(&path.unweighted.best)),
                    (Method::ProposedWeighted, path.weighted.as_ref().map(|w| &w.best)),
                ];
                for (m, fit) in stages {
                    let Some(fit) = fit.filter(|_| want(m)) else { continue };
                    results.push(proposed_result(m, fit, &basis, &test).map_err(|e| (m, e.to_string())));
                    let g = tabulate_g(&fit.coef, &basis, grid.view());
                    for j in 0..=design.p.min(N_SIGNALS) {
                        for (i, &v) in grid.iter().enumerate() {
                            curves.push(CurveRow {
                                replicate: r,
                                method: m,
                                j,
                                v,
                                g_hat: g[[i, j]],
                                g_true: design.g_identified(j, v),
                            });
                        }
                    }
                }
            }
            Err(e) => {
                for m in [Method::ProposedUnweighted, Method::ProposedWeighted] {
                    if want(m) {
                        results.push(Err((m, e.to_string())));
                    }
                }
            }
        }
    }

    for (plain, adaptive, interactions) in [
        (Method::LassoMain, Method::AdaptiveLassoMain, false),
        (Method::LassoInteraction, Method::AdaptiveLassoInteraction, true),
    ] {
        if !want(plain) && !want(adaptive) {
            continue;
        }
        let problem = LinearProblem::new(
            lasso_features(&train.data, interactions),
            train.data.z().to_owned(),
            train.data.outcome().clone(),
        )?;
        let ones = Array1::ones(problem.penalized.ncols());
        let path = match lasso_path(&problem, &ones, cfg.lasso_path_len, cfg.lasso_min_ratio, &scfg) {
            Ok(p) => p,
            Err(e) => {
                for m in [plain, adaptive] {
                    if want(m) {
                        results.push(Err((m, e.to_string())));
                    }
                }
                continue;
            }
        };
        if want(plain) {
            results.push(Ok(lasso_result(plain, &path, &train.data, &test.data)));
        }
        if want(adaptive) {
            let w = adaptive_lasso_weights(path.best());
            results.push(
                lasso_path(&problem, &w, cfg.lasso_path_len, cfg.lasso_min_ratio, &scfg)
                    .map(|ap| lasso_result(adaptive, &ap, &train.data, &test.data))
                    .map_err(|e| (adaptive, e.to_string())),
            );
        }
    }
    let results = results
        .into_iter()
        .map(|r| r.map(|m| {
            let metrics = eval_metrics(design, &m.estimate, &test);
            (m, metrics)
        }))
        .collect();
    Ok(ReplicateOut {
        censoring_rate: train.censoring_rate(),
        results,
        curves,
    })
}

fn nan_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut k) = (0.0, 0usize);
    for v in values.filter(|v| !v.is_nan()) {
        s += v;
        k += 1;
    }
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

/// Runs every replicate (concurrently, each with seed `seed + r`) and
/// aggregates per-method means in replicate order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut design = cfg.design();
    if design.outcome == OutcomeKind::Cox && design.censoring_mean.is_none() {
        design.censoring_mean = Some(calibrate_censoring(&design, cfg.seed.wrapping_add(CALIBRATION_SEED_OFFSET))?);
    }
    let outs: Vec<Result<ReplicateOut>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, &design, r))
        .collect();

    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let mut replicates = Vec::new();
    let mut curves = Vec::new();
    let mut failures = Vec::new();
    for (r, out) in outs.into_iter().enumerate() {
        match out {
            Ok(out) => {
                for res in out.results {
                    match res {
                        Ok((m, metrics)) => replicates.push(ReplicateRow {
                            replicate: r,
                            method: m.method,
                            censoring_rate: if design.outcome == OutcomeKind::Cox {
                                out.censoring_rate
                            } else {
                                f64::NAN
                            },
                            lambda1: m.lambda1,
                            lambda2: m.lambda2,
                            bic: m.bic,
                            converged: m.converged,
                            metrics,
                        }),
                        Err((method, message)) => failures.push(Failure {
                            replicate: r,
                            method,
                            message,
                        }),
                    }
                }
                curves.extend(out.curves);
            }
            Err(e) => {
                for &method in &methods {
                    failures.push(Failure {
                        replicate: r,
                        method,
                        message: e.to_string(),
                    });
                }
            }
        }
    }

    let summary = methods
        .iter()
        .map(|&method| {
            let rows: Vec<&ReplicateRow> = replicates.iter().filter(|r| r.method == method).collect();
            let mut mean = [0.0; 9];
            for (k, m) in mean.iter_mut().enumerate() {
                *m = nan_mean(rows.iter().map(|r| r.metrics.values()[k]));
            }
            SummaryRow {
                method,
                n_ok: rows.len(),
                n_failed: failures.iter().filter(|f| f.method == method).count(),
                mean: Metrics::from_values(mean),
                censoring_rate: nan_mean(rows.iter().map(|r| r.censoring_rate)),
            }
        })
        .collect();

    Ok(ExperimentOutput {
        config: cfg.clone(),
        censoring_mean: design.censoring_mean,
        replicates,
        summary,
        curves,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_owners() {
        // p = 3, q_z = 2: features 0..3 main, then (1,0),(1,1),(2,0),(2,1),(3,0),(3,1)
        let owners: Vec<usize> = (0..9).map(|f| feature_owner(f, 3, 2)).collect();
        assert_eq!(owners, vec![1, 2, 3, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn config_defaults_and_unknown_fields() {
        let cfg = ExperimentConfig::from_toml_str("p = 50\noutcome = \"cox\"\n").unwrap();
        assert_eq!(cfg.p, 50);
        assert_eq!(cfg.n, 500);
        assert_eq!(cfg.outcome, OutcomeKind::Cox);
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("p = 5").is_err());
    }
}
