use std::collections::BTreeSet;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{SimData, SimDesign};
use crate::model::Outcome;

/// What an estimator reports for one replicate.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub selected: BTreeSet<usize>,
    /// `None` for estimators without varying effects.
    pub selected_varying: Option<BTreeSet<usize>>,
    pub beta: Option<Array1<f64>>,
    /// Linear predictor on the evaluation sample.
    pub eta_test: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity_overall: f64,
    pub fdr_overall: f64,
    pub ns_overall: f64,
    pub sensitivity_varying: f64,
    pub fdr_varying: f64,
    pub ns_varying: f64,
    pub mse: f64,
    pub beta_alignment: f64,
    pub c_index: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 9] = [
        "sensitivity_overall",
        "fdr_overall",
        "ns_overall",
        "sensitivity_varying",
        "fdr_varying",
        "ns_varying",
        "mse",
        "beta_alignment",
        "c_index",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.sensitivity_overall,
            self.fdr_overall,
            self.ns_overall,
            self.sensitivity_varying,
            self.fdr_varying,
            self.ns_varying,
            self.mse,
            self.beta_alignment,
            self.c_index,
        ]
    }

    pub fn from_values(v: [f64; 9]) -> Self {
        Metrics {
            sensitivity_overall: v[0],
            fdr_overall: v[1],
            ns_overall: v[2],
            sensitivity_varying: v[3],
            fdr_varying: v[4],
            ns_varying: v[5],
            mse: v[6],
            beta_alignment: v[7],
            c_index: v[8],
        }
    }
}

/// `(sensitivity, fdr, number selected)`.
fn selection_rates(selected: &BTreeSet<usize>, truth: &BTreeSet<usize>) -> (f64, f64, f64) {
    let tp = selected.intersection(truth).count();
    let ns = selected.len();
    let fp = ns - tp;
    let sens = if truth.is_empty() { 0.0 } else { tp as f64 / truth.len() as f64 };
    (sens, fp as f64 / ns.max(1) as f64, ns as f64)
}

/// Harrell's concordance index: among pairs whose shorter time is an
/// event, the fraction where the shorter time has the larger risk score;
/// tied scores count one half. `NaN` when no pair is comparable.
pub fn c_index(score: ArrayView1<f64>, time: ArrayView1<f64>, event: &[bool]) -> f64 {
    let n = score.len();
    let mut comparable = 0u64;
    let mut concordant = 0.0f64;
    for i in 0..n {
        if !event[i] {
            continue;
        }
        for j in 0..n {
            if time[i] < time[j] {
                comparable += 1;
                if score[i] > score[j] {
                    concordant += 1.0;
                } else if score[i] == score[j] {
                    concordant += 0.5;
                }
            }
        }
    }
    if comparable == 0 {
        f64::NAN
    } else {
        concordant / comparable as f64
    }
}

/// Selection accuracy against the design's active sets, and prediction
/// accuracy on `test`.
pub fn eval_metrics(design: &SimDesign, est: &Estimate, test: &SimData) -> Metrics {
    let (so, fo, no) = selection_rates(&est.selected, &design.active());
    let (sv, fv, nv) = match &est.selected_varying {
        Some(s) => selection_rates(s, &design.varying()),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    let diff = &est.eta_test - &test.eta0;
    let mse = diff.dot(&diff) / diff.len().max(1) as f64;
    let beta_alignment = match &est.beta {
        Some(b) => b.iter().zip(&design.beta0).map(|(a, b)| a * b).sum::<f64>().abs(),
        None => f64::NAN,
    };
    let c = match test.data.outcome() {
        Outcome::Cox(s) => c_index(est.eta_test.view(), s.time(), s.event()),
        Outcome::Gaussian(_) => f64::NAN,
    };
    Metrics {
        sensitivity_overall: so,
        fdr_overall: fo,
        ns_overall: no,
        sensitivity_varying: sv,
        fdr_varying: fv,
        ns_varying: nv,
        mse,
        beta_alignment,
        c_index: c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn c_index_ties_and_censoring() {
        // pairs with earlier event: (0,1), (0,2), (0,3), (2,3)
        let time = array![1.0, 2.0, 3.0, 4.0];
        let event = [true, false, true, false];
        let score = array![2.0, 1.0, 0.5, 0.5];
        // (0,*) concordant x3, (2,3) tie = 0.5
        assert!((c_index(score.view(), time.view(), &event) - 3.5 / 4.0).abs() < 1e-15);
        let none = [false; 4];
        assert!(c_index(score.view(), time.view(), &none).is_nan());
    }

    #[test]
    fn fdr_of_empty_selection_is_zero() {
        let truth: BTreeSet<usize> = [1, 2].into_iter().collect();
        assert_eq!(selection_rates(&BTreeSet::new(), &truth), (0.0, 0.0, 0.0));
        let sel: BTreeSet<usize> = [1, 5].into_iter().collect();
        assert_eq!(selection_rates(&sel, &truth), (0.5, 0.5, 2.0));
    }
}
