use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sivc::model::{
    linear_predictor, loglik_cox, loglik_gaussian, loglik_grad_beta, working_response_and_weights, WEIGHT_FLOOR,
};
use sivc::{Coefficients, Dataset, Outcome, SplineBasis, Survival};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps the test free of distribution crates
    let u1: f64 = rng.random_range(1e-12..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, k), || normal(rng))
}

fn random_coef(rng: &mut ChaCha8Rng, q_u: usize, p: usize, d: usize, q_z: usize) -> Coefficients {
    let mut beta: Array1<f64> = (0..q_u).map(|_| normal(rng)).collect();
    beta /= beta.dot(&beta).sqrt();
    let mut c = Coefficients::zeros(beta, p, d, q_z);
    c.gamma.mapv_inplace(|_| normal(rng));
    c.alpha.mapv_inplace(|_| normal(rng));
    c.psi.mapv_inplace(|_| normal(rng));
    c
}

fn gaussian_data(rng: &mut ChaCha8Rng, n: usize, p: usize, q_u: usize, q_z: usize) -> Dataset {
    let y: Array1<f64> = (0..n).map(|_| normal(rng)).collect();
    Dataset::from_predictors(
        random_matrix(rng, n, p).view(),
        random_matrix(rng, n, q_u),
        random_matrix(rng, n, q_z),
        Outcome::Gaussian(y),
    )
    .unwrap()
}

fn cox_outcome(time: Vec<f64>, event: Vec<bool>) -> Outcome {
    Outcome::Cox(Survival::new(Array1::from(time), event).unwrap())
}

fn bare(outcome: Outcome) -> Dataset {
    let n = outcome.len();
    Dataset::new(Array2::ones((n, 1)), Array2::zeros((n, 1)), Array2::zeros((n, 0)), outcome).unwrap()
}

/// `sum_i Delta_i [eta_i - log sum_{h: t_h >= t_i} exp(eta_h)]`, literally.
fn cox_oracle(time: &[f64], event: &[bool], eta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..time.len() {
        if !event[i] {
            continue;
        }
        let mut s = 0.0;
        for h in 0..time.len() {
            if time[h] >= time[i] {
                s += eta[h].exp();
            }
        }
        ll += eta[i] - s.ln();
    }
    ll
}

#[test]
fn predictor_with_zero_alpha_is_dense_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = gaussian_data(&mut rng, 30, 4, 2, 3);
    let basis = SplineBasis::symmetric(2.0).unwrap();
    let mut c = random_coef(&mut rng, 2, 4, 3, 3);
    c.alpha.fill(0.0);
    let eta = linear_predictor(&data, &c, &basis).unwrap();
    for i in 0..30 {
        let mut want = 0.0;
        for j in 0..=4 {
            want += c.gamma[j] * data.x()[[i, j]];
        }
        for k in 0..3 {
            want += c.psi[k] * data.z()[[i, k]];
        }
        assert!((eta[i] - want).abs() < 1e-12);
    }
}

#[test]
fn predictor_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = gaussian_data(&mut rng, 5, 1, 2, 1);
    let basis = SplineBasis::symmetric(1.5).unwrap();
    let c = random_coef(&mut rng, 2, 1, 3, 1);
    let eta = linear_predictor(&data, &c, &basis).unwrap();
    for i in 0..5 {
        let v = data.u()[[i, 0]] * c.beta[0] + data.u()[[i, 1]] * c.beta[1];
        let b = basis.evaluate(v);
        let mut want = c.psi[0] * data.z()[[i, 0]];
        for j in 0..=1 {
            let mut g = c.gamma[j];
            for k in 0..3 {
                g += c.alpha[[j, k]] * b[k];
            }
            want += g * data.x()[[i, j]];
        }
        assert!((eta[i] - want).abs() < 1e-12, "row {i}");
    }
}

#[test]
fn gaussian_matches_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y: Vec<f64> = (0..10).map(|_| normal(&mut rng)).collect();
    let eta: Vec<f64> = (0..10).map(|_| normal(&mut rng)).collect();
    let data = bare(Outcome::Gaussian(Array1::from(y.clone())));
    let mut want = 0.0;
    for i in 0..10 {
        want += -0.5 * (y[i] - eta[i]).powi(2) - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    let got = loglik_gaussian(&data, Array1::from(eta).view()).unwrap();
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn cox_two_events_at_zero_predictor() {
    let data = bare(cox_outcome(vec![1.0, 2.0], vec![true, true]));
    let got = loglik_cox(&data, array![0.0, 0.0].view()).unwrap();
    assert!((got + 2f64.ln()).abs() < 1e-15);
}

#[test]
fn survival_without_events_is_rejected() {
    let s = Survival::new(array![1.0, 2.0, 3.0], vec![false; 3]);
    assert!(matches!(s, Err(sivc::Error::NoEvents)));
}

#[test]
fn cox_matches_double_loop_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let time: Vec<f64> = (0..6).map(|_| rng.random_range(1..5) as f64).collect();
        let event: Vec<bool> = (0..6).map(|_| rng.random_bool(0.7)).collect();
        let eta: Vec<f64> = (0..6).map(|_| normal(&mut rng)).collect();
        let data = bare(cox_outcome(time.clone(), event.clone()));
        let got = loglik_cox(&data, Array1::from(eta.clone()).view()).unwrap();
        let want = cox_oracle(&time, &event, &eta);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn cox_is_permutation_invariant() {
    let time = vec![2.0, 0.5, 3.0, 1.0, 2.0, 4.0];
    let event = vec![true, false, true, true, true, false];
    let eta = vec![0.1, -0.3, 0.7, 0.2, -1.0, 0.4];
    let base = loglik_cox(&bare(cox_outcome(time.clone(), event.clone())), Array1::from(eta.clone()).view()).unwrap();
    let perm = [3, 5, 0, 2, 4, 1];
    let pt: Vec<f64> = perm.iter().map(|&i| time[i]).collect();
    let pe: Vec<bool> = perm.iter().map(|&i| event[i]).collect();
    let pn: Vec<f64> = perm.iter().map(|&i| eta[i]).collect();
    let got = loglik_cox(&bare(cox_outcome(pt, pe)), Array1::from(pn).view()).unwrap();
    assert!((got - base).abs() < 1e-12);
}

fn fd_gradient(data: &Dataset, coef: &Coefficients, basis: &SplineBasis) -> Array1<f64> {
    let h = 1e-6;
    let q = coef.beta.len();
    (0..q)
        .map(|k| {
            let mut cp = coef.clone();
            let mut cm = coef.clone();
            cp.beta[k] += h;
            cm.beta[k] -= h;
            let lp = data.outcome().loglik(linear_predictor(data, &cp, basis).unwrap().view());
            let lm = data.outcome().loglik(linear_predictor(data, &cm, basis).unwrap().view());
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

#[test]
fn beta_gradient_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let basis = SplineBasis::new(sivc::GridPoints::new(vec![-4.0, -1.0, 0.0, 1.5, 4.0]).unwrap());
    let gauss = gaussian_data(&mut rng, 40, 3, 3, 2);
    let time: Vec<f64> = (0..40).map(|_| rng.random_range(0.1..5.0)).collect();
    let event: Vec<bool> = (0..40).map(|_| rng.random_bool(0.7)).collect();
    let cox = Dataset::new(
        gauss.x().to_owned(),
        gauss.u().to_owned(),
        gauss.z().to_owned(),
        cox_outcome(time, event),
    )
    .unwrap();
    for data in [&gauss, &cox] {
        let c = random_coef(&mut rng, 3, 3, 5, 2);
        let g = loglik_grad_beta(data, &c, &basis).unwrap();
        let fd = fd_gradient(data, &c, &basis);
        for k in 0..3 {
            let rel = (g[k] - fd[k]).abs() / g[k].abs().max(1.0);
            assert!(rel < 1e-5, "{:?}: {} vs {}", data.kind(), g[k], fd[k]);
        }
    }
}

#[test]
fn cox_weights_are_negative_hessian_diagonal() {
    let data = bare(cox_outcome(vec![1.0, 2.0, 3.0], vec![true; 3]));
    let eta = array![0.0, 0.0, 0.0];
    let (z, w) = working_response_and_weights(&data, eta.view());
    // risk sets of sizes 3, 2, 1
    let want_w = [2.0 / 9.0, 17.0 / 36.0, 17.0 / 36.0];
    let grad = [2.0 / 3.0, 1.0 / 6.0, -5.0 / 6.0];
    for i in 0..3 {
        assert!((w[i] - want_w[i]).abs() < 1e-15);
        assert!((z[i] - grad[i] / want_w[i]).abs() < 1e-14);
    }
}

#[test]
fn cox_weights_match_numeric_hessian() {
    let time = vec![1.0, 2.5, 2.5, 4.0, 5.0];
    let event = vec![true, true, false, true, false];
    let data = bare(cox_outcome(time.clone(), event.clone()));
    let eta = array![0.2, -0.4, 0.9, 0.1, -0.2];
    let (_, w) = working_response_and_weights(&data, eta.view());
    let h = 1e-4;
    for i in 0..5 {
        let f = |t: f64| {
            let mut e = eta.to_vec();
            e[i] += t;
            cox_oracle(&time, &event, &e)
        };
        let second = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert!((w[i].max(WEIGHT_FLOOR) + second).abs() < 1e-6 || (-second < WEIGHT_FLOOR && w[i] == WEIGHT_FLOOR));
    }
}

#[test]
fn weights_are_floored() {
    // the early censored subject is never in a risk set with an earlier event
    let data = bare(cox_outcome(vec![1.0, 2.0], vec![false, true]));
    let (_, w) = working_response_and_weights(&data, array![0.0, 0.0].view());
    assert_eq!(w[0], WEIGHT_FLOOR);
    assert!(w.iter().all(|v| *v >= WEIGHT_FLOOR));
}

#[test]
fn gaussian_surrogate_is_exact() {
    let y = array![1.0, -2.0, 0.5];
    let data = bare(Outcome::Gaussian(y.clone()));
    let (z, w) = working_response_and_weights(&data, array![9.0, 9.0, 9.0].view());
    assert_eq!(z, y);
    assert_eq!(w, Array1::<f64>::ones(3));
}

proptest! {
    #[test]
    fn cox_shift_invariance(
        eta in prop::collection::vec(-3.0f64..3.0, 8),
        time in prop::collection::vec(0.1f64..10.0, 8),
        mut event in prop::collection::vec(any::<bool>(), 8),
        c in -50.0f64..50.0,
    ) {
        event[0] = true;
        let data = bare(cox_outcome(time, event));
        let e = Array1::from(eta);
        let a = loglik_cox(&data, e.view()).unwrap();
        let b = loglik_cox(&data, (&e + c).view()).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn predictor_is_linear_in_coefficients(seed in 0u64..1000, s in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = gaussian_data(&mut rng, 12, 2, 2, 2);
        let basis = SplineBasis::symmetric(2.0).unwrap();
        let a = random_coef(&mut rng, 2, 2, 3, 2);
        let mut b = random_coef(&mut rng, 2, 2, 3, 2);
        b.beta = a.beta.clone();
        let mut comb = a.clone();
        comb.gamma = &a.gamma * s + &b.gamma;
        comb.alpha = &a.alpha * s + &b.alpha;
        comb.psi = &a.psi * s + &b.psi;
        let ea = linear_predictor(&data, &a, &basis).unwrap();
        let eb = linear_predictor(&data, &b, &basis).unwrap();
        let ec = linear_predictor(&data, &comb, &basis).unwrap();
        for i in 0..12 {
            prop_assert!((ec[i] - (s * ea[i] + eb[i])).abs() < 1e-10);
        }
    }
}
