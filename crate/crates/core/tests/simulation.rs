use std::collections::BTreeSet;

use ndarray::{array, Array1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use sha2::{Digest, Sha256};
use sivc::linear::{lasso_path, LinearProblem};
use sivc::simulation::{
    c_index, calibrate_censoring, calibrate_censoring_for, eval_metrics, event_time, generate, lasso_features,
    run_experiment, true_g_library, Estimate, ExperimentConfig, Method, Shape, SimDesign, N_SIGNALS,
};
use sivc::{GridSpec, Outcome, OutcomeKind, SolverConfig};

#[test]
fn event_times_follow_the_rayleigh_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let n = 100_000;
    let mut t: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = Exp1.sample(&mut rng);
            event_time(e, 0.0)
        })
        .collect();
    t.sort_by(f64::total_cmp);
    // hazard t gives survival exp(-t^2 / 2)
    let ks = t
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x * x / 2.0).exp();
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 1.63 / (n as f64).sqrt(), "ks {ks}");
}

#[test]
fn calibrated_censoring_hits_target_on_fresh_draws() {
    let mut design = SimDesign::new(10_000, 20, OutcomeKind::Cox);
    let theta = calibrate_censoring(&design, 31).unwrap();
    design.censoring_mean = Some(theta);
    let sample = generate(&design, 10_000, &mut ChaCha8Rng::seed_from_u64(32)).unwrap();
    let rate = sample.censoring_rate();
    assert!((rate - 0.30).abs() <= 0.02, "rate {rate}");
}

#[test]
fn faster_events_need_a_shorter_censoring_mean() {
    let mu: Vec<f64> = (0..5000).map(|i| (i as f64 / 5000.0) - 0.5).collect();
    let faster: Vec<f64> = mu.iter().map(|m| m + 1.0).collect();
    let a = calibrate_censoring_for(&mu, 0.3, 33).unwrap();
    let b = calibrate_censoring_for(&faster, 0.3, 33).unwrap();
    assert!(b < a, "{b} vs {a}");
}

#[test]
fn library_is_frozen() {
    let lib = true_g_library();
    assert_eq!(lib.len(), N_SIGNALS);
    let count = |s: Shape| lib.iter().filter(|f| f.shape == s).count();
    assert_eq!((count(Shape::Constant), count(Shape::Linear), count(Shape::Nonlinear)), (7, 6, 7));
    let grid: Vec<f64> = (-12..=12).map(|k| k as f64 / 4.0).collect();
    let mut h = Sha256::new();
    for f in lib {
        assert!(grid.iter().any(|&v| f.eval(v) != 0.0), "{} vanishes", f.name);
        h.update(f.name.as_bytes());
        for &v in &grid {
            h.update(f.eval(v).to_le_bytes());
        }
    }
    let digest: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(digest, "03714bd72bbd36bebb3054da21bfa77745295e8b231c9ce624a9cf93b192db8f");
}

#[test]
fn concordance_by_hand() {
    // comparable pairs (i event, t_i < t_j): (0,1) (0,2) (0,3) (0,4) (2,3) (2,4) (3,4)
    let time = array![1.0, 2.0, 3.0, 4.0, 5.0];
    let event = [true, false, true, true, false];
    let score = array![0.9, 0.1, 0.5, 0.5, 0.7];
    // concordant: (0,*) x4, (2,3) tie 0.5, (2,4) no, (3,4) no
    let want = 4.5 / 7.0;
    assert!((c_index(score.view(), time.view(), &event) - want).abs() < 1e-15);
    assert!(c_index(score.view(), time.view(), &[false; 5]).is_nan());
}

#[test]
fn concordance_of_noise_is_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let n = 2000;
    let time: Array1<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
    let score: Array1<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
    let event = vec![true; n];
    let c = c_index(score.view(), time.view(), &event);
    assert!((c - 0.5).abs() < 0.02, "{c}");
}

#[test]
fn metrics_of_the_truth() {
    let mut design = SimDesign::new(200, 25, OutcomeKind::Cox);
    design.censoring_mean = Some(calibrate_censoring(&design, 35).unwrap());
    let test = generate(&design, 500, &mut ChaCha8Rng::seed_from_u64(36)).unwrap();
    let est = Estimate {
        selected: design.active(),
        selected_varying: Some(design.varying()),
        beta: Some(Array1::from(design.beta0.clone())),
        eta_test: test.eta0.clone(),
    };
    let m = eval_metrics(&design, &est, &test);
    assert_eq!((m.sensitivity_overall, m.fdr_overall, m.ns_overall), (1.0, 0.0, 20.0));
    assert_eq!((m.sensitivity_varying, m.fdr_varying, m.ns_varying), (1.0, 0.0, 13.0));
    assert_eq!(m.mse, 0.0);
    assert!((m.beta_alignment - 1.0).abs() < 1e-15);
    assert!(m.c_index > 0.5);

    // two noise predictors and half the signals
    let selected: BTreeSet<usize> = (1..=10).chain([21, 22]).collect();
    let est = Estimate {
        selected,
        selected_varying: None,
        beta: None,
        eta_test: test.eta0.mapv(|v| v + 1.0),
    };
    let m = eval_metrics(&design, &est, &test);
    assert_eq!(m.sensitivity_overall, 0.5);
    assert!((m.fdr_overall - 2.0 / 12.0).abs() < 1e-15);
    assert!((m.mse - 1.0).abs() < 1e-12);
    assert!(m.beta_alignment.is_nan() && m.fdr_varying.is_nan());
}

#[test]
fn gaussian_noise_has_unit_variance() {
    let design = SimDesign::new(20_000, 20, OutcomeKind::Gaussian);
    let s = generate(&design, 20_000, &mut ChaCha8Rng::seed_from_u64(37)).unwrap();
    let Outcome::Gaussian(y) = s.data.outcome() else { unreachable!() };
    let r = y - &s.eta0;
    let mean = r.mean().unwrap();
    let var = r.mapv(|v| (v - mean).powi(2)).mean().unwrap();
    assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.05, "{mean} {var}");
    assert_eq!(s.data.u_in_z(), Some(&[0, 1, 2, 3][..]));
}

#[test]
fn lasso_baselines() {
    let design = SimDesign::new(300, 20, OutcomeKind::Gaussian);
    let s = generate(&design, 300, &mut ChaCha8Rng::seed_from_u64(38)).unwrap();
    assert_eq!(lasso_features(&s.data, false).ncols(), 20);
    assert_eq!(lasso_features(&s.data, true).ncols(), 20 + 20 * 4);
    let feats = lasso_features(&s.data, true);
    assert_eq!(feats[[7, 20 + 4 * 2 + 3]], s.data.x()[[7, 3]] * s.data.z()[[7, 3]]);
    let problem = LinearProblem::new(feats, s.data.z().to_owned(), s.data.outcome().clone()).unwrap();
    let path = lasso_path(&problem, &Array1::ones(100), 20, 0.01, &Default::default()).unwrap();
    // only the unpenalized covariates enter at the top of the path
    assert!(path.fits[0].penalized.iter().all(|v| *v == 0.0));
    assert!(path.fits[0].unpenalized.iter().any(|v| *v != 0.0));
    assert!(!path.best().selected().is_empty());
}

fn tiny(outcome: OutcomeKind, replicates: usize) -> ExperimentConfig {
    ExperimentConfig {
        n: 150,
        p: 20,
        outcome,
        replicates,
        seed: 39,
        methods: vec![Method::ProposedWeighted, Method::LassoMain, Method::AdaptiveLassoInteraction],
        n_test: 300,
        grid: GridSpec {
            n1: 3,
            n2: 3,
            min_ratio: 0.01,
        },
        solver: SolverConfig {
            n_starts: 1,
            ..SolverConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn single_replicate_summary_is_that_replicate() {
    let out = run_experiment(&tiny(OutcomeKind::Gaussian, 1)).unwrap();
    assert!(out.failures.is_empty());
    for row in &out.replicates {
        let s = out.summary(row.method).unwrap();
        assert_eq!(s.n_ok, 1);
        for (a, b) in s.mean.values().iter().zip(row.metrics.values()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
    assert_eq!(out.summary.len(), 3);
}

#[test]
fn experiments_repeat_exactly() {
    let cfg = tiny(OutcomeKind::Cox, 2);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.summary_tsv(), b.summary_tsv());
    assert_eq!(a.replicates_tsv(), b.replicates_tsv());
    assert_eq!(a.curves_tsv(), b.curves_tsv());
    let rate = a.summary(Method::ProposedWeighted).unwrap().censoring_rate;
    assert!((rate - 0.3).abs() < 0.1, "{rate}");
}
