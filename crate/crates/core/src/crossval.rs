//! Repeated stratified train/validation splits.
//!
//! Each split fits the full two-stage path on the training part and scores
//! the chosen model on the held-out part: mean squared prediction error for
//! Gaussian outcomes, Harrell's C-index for Cox outcomes. Cox splits are
//! stratified on the event indicator.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{linear_predictor, Dataset, Outcome};
use crate::penalty::KStrategy;
use crate::selection::{fit_path, GridSpec};
use crate::simulation::c_index;
use crate::solver::SolverConfig;
use crate::spline::SplineBasis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossValConfig {
    pub n_splits: usize,
    pub train_fraction: f64,
    /// Hold `beta` at the full-data estimate in every split.
    pub fix_beta: bool,
    pub seed: u64,
}

impl Default for CrossValConfig {
    fn default() -> Self {
        CrossValConfig {
            n_splits: 100,
            train_fraction: 0.7,
            fix_beta: false,
            seed: 0,
        }
    }
}

impl CrossValConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_splits == 0 {
            return Err(Error::Config("n_splits must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Floor that treats values within rounding of an integer as that integer,
/// so that `0.7 * 90` gives 63.
fn floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

/// Training and validation sizes for each stratum.
///
/// The total training size is `floor(fraction * n)`; it is shared out by
/// largest remainder, ties going to the earlier stratum.
pub fn stratum_sizes(sizes: &[usize], fraction: f64) -> Result<Vec<(usize, usize)>> {
    let n: usize = sizes.iter().sum();
    let total = floor(fraction * n as f64) as usize;
    let quotas: Vec<f64> = sizes.iter().map(|&s| fraction * s as f64).collect();
    let mut train: Vec<usize> = quotas.iter().map(|q| floor(*q) as usize).collect();
    let mut left = total.saturating_sub(train.iter().sum());
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - floor(quotas[a]);
        let rb = quotas[b] - floor(quotas[b]);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(sizes.len() * 2) {
        if left == 0 {
            break;
        }
        if train[k] < sizes[k] {
            train[k] += 1;
            left -= 1;
        }
    }
    let out: Vec<(usize, usize)> = train.iter().zip(sizes).map(|(&t, &s)| (t, s - t)).collect();
    if let Some(k) = out.iter().position(|&(t, v)| t == 0 || v == 0) {
        return Err(Error::Data(format!(
            "stratum {k} with {} subjects is too small for a {:.2} split",
            sizes[k], fraction
        )));
    }
    Ok(out)
}

/// Row indices `(train, validation)`, each sorted, for one split.
pub fn stratified_split(strata: &[usize], fraction: f64, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_strata = strata.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_strata];
    for (i, &s) in strata.iter().enumerate() {
        members[s].push(i);
    }
    members.retain(|m| !m.is_empty());
    if members.is_empty() {
        return Err(Error::Data("no observations to split".into()));
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let alloc = stratum_sizes(&sizes, fraction)?;
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for (mut m, (t, _)) in members.into_iter().zip(alloc) {
        m.shuffle(rng);
        train.extend_from_slice(&m[..t]);
        valid.extend_from_slice(&m[t..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((train, valid))
}

/// Stratum label per subject: the event indicator for Cox, one stratum
/// otherwise.
pub fn strata_for(outcome: &Outcome) -> Vec<usize> {
    match outcome {
        Outcome::Cox(s) => s.event().iter().map(|&e| usize::from(e)).collect(),
        Outcome::Gaussian(y) => vec![0; y.len()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split: usize,
    pub n_train: usize,
    pub n_valid: usize,
    /// Validation MSPE (Gaussian) or C-index (Cox).
    pub score: f64,
    pub beta: Vec<f64>,
    pub n_selected: usize,
    pub n_varying: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub metric: String,
    pub splits: Vec<SplitResult>,
    pub mean: f64,
    pub sd: f64,
    /// Index held fixed across splits, if any.
    pub fixed_beta: Option<Vec<f64>>,
}

impl CrossValReport {
    pub fn to_tsv(&self) -> String {
        let mut s = format!("split\tn_train\tn_valid\t{}\tn_selected\tn_varying\tconverged\tbeta\n", self.metric);
        for r in &self.splits {
            let beta: Vec<String> = r.beta.iter().map(|b| format!("{b}")).collect();
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.split,
                r.n_train,
                r.n_valid,
                r.score,
                r.n_selected,
                r.n_varying,
                r.converged,
                beta.join(",")
            ));
        }
        s
    }
}

/// Everything a single path fit needs besides the data.
#[derive(Debug, Clone)]
pub struct PathSettings {
    pub grid: GridSpec,
    pub strategy: KStrategy,
    pub solver: SolverConfig,
    pub weighted: bool,
}

fn validation_score(data: &Dataset, eta: &Array1<f64>) -> f64 {
    match data.outcome() {
        Outcome::Gaussian(y) => {
            let r = y - eta;
            r.dot(&r) / r.len() as f64
        }
        Outcome::Cox(s) => c_index(eta.view(), s.time(), s.event()),
    }
}

/// Runs `cv.n_splits` splits concurrently; split `k` draws its partition
/// from seed `cv.seed + k`.
pub fn cross_validate(
    data: &Dataset,
    basis: &SplineBasis,
    settings: &PathSettings,
    cv: &CrossValConfig,
) -> Result<CrossValReport> {
    cv.validate()?;
    let strata = strata_for(data.outcome());
    // fail early on bad strata, before any fitting
    stratified_split(&strata, cv.train_fraction, &mut ChaCha8Rng::seed_from_u64(cv.seed))?;

    let mut solver = settings.solver.clone();
    let fixed_beta = if cv.fix_beta {
        let full = fit_path(data, basis, &settings.grid, settings.strategy, &solver, settings.weighted)?;
        let beta = full.best().coef.beta.to_vec();
        solver.fix_beta = true;
        solver.initial_beta = Some(beta.clone());
        Some(beta)
    } else {
        None
    };

    let splits: Vec<Result<SplitResult>> = (0..cv.n_splits)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cv.seed.wrapping_add(k as u64));
            let (train_idx, valid_idx) = stratified_split(&strata, cv.train_fraction, &mut rng)?;
            let train = data.subset(&train_idx)?;
            let valid = data.subset(&valid_idx)?;
            let path = fit_path(&train, basis, &settings.grid, settings.strategy, &solver, settings.weighted)?;
            let best = path.best();
            let eta = linear_predictor(&valid, &best.coef, basis)?;
            Ok(SplitResult {
                split: k,
                n_train: train_idx.len(),
                n_valid: valid_idx.len(),
                score: validation_score(&valid, &eta),
                beta: best.coef.beta.to_vec(),
                n_selected: best.selected().len(),
                n_varying: best.selected_varying.len(),
                converged: best.converged,
            })
        })
        .collect();
    let splits: Vec<SplitResult> = splits.into_iter().collect::<Result<_>>()?;
    let scores: Vec<f64> = splits.iter().map(|s| s.score).filter(|v| v.is_finite()).collect();
    let m = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / m;
    let sd = if scores.len() > 1 {
        (scores.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    let metric = match data.outcome() {
        Outcome::Gaussian(_) => "mspe",
        Outcome::Cox(_) => "c_index",
    };
    Ok(CrossValReport {
        metric: metric.into(),
        splits,
        mean,
        sd,
        fixed_beta,
    })
}
