use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use sivc::penalty::{build_k, compute_adaptive_weights, group_threshold, penalty_value, MAX_WEIGHT};
use sivc::{Coefficients, Dataset, KStrategy, Metric, Outcome, PenaltyConfig, SplineBasis};

fn coef(gamma: &[f64], alpha: &[[f64; 3]]) -> Coefficients {
    let p = gamma.len() - 1;
    let mut c = Coefficients::zeros(array![1.0], p, 3, 0);
    c.gamma = Array1::from(gamma.to_vec());
    for (j, row) in alpha.iter().enumerate() {
        c.alpha.row_mut(j).assign(&Array1::from(row.to_vec()));
    }
    c
}

#[test]
fn value_with_identity_metrics() {
    let c = coef(&[7.0, 1.0, -2.0], &[[5.0, 5.0, 5.0], [0.0, 3.0, 4.0], [1.0, 2.0, 2.0]]);
    let cfg = PenaltyConfig::new(2.0, 3.0, 2, 3, KStrategy::Identity).with_weights(array![1.0, 0.5]);
    // intercept function is never penalized
    let want = 2.0 * (1.0 * 1.0 + 0.5 * 2.0) + 3.0 * (1.0 * 5.0 + 0.5 * 3.0);
    assert!((penalty_value(&c, &cfg).unwrap() - want).abs() < 1e-14);
}

#[test]
fn value_with_general_metric() {
    let c = coef(&[0.0, 0.0], &[[0.0; 3], [1.0, -1.0, 2.0]]);
    let k = array![[2.0, 0.5, 0.0], [0.5, 1.0, 0.1], [0.0, 0.1, 3.0]];
    let mut cfg = PenaltyConfig::new(0.0, 1.5, 1, 3, KStrategy::FixedFromInitial);
    cfg.metrics = vec![Metric::new(k.clone()).unwrap()];
    let a = array![1.0, -1.0, 2.0];
    let want = 1.5 * a.dot(&k.dot(&a)).sqrt();
    assert!((penalty_value(&c, &cfg).unwrap() - want).abs() < 1e-13);
}

#[test]
fn zero_weight_removes_penalty() {
    let c = coef(&[0.0, 4.0], &[[0.0; 3], [1.0, 1.0, 1.0]]);
    let cfg = PenaltyConfig::new(1.0, 1.0, 1, 3, KStrategy::Identity).with_weights(array![0.0]);
    assert_eq!(penalty_value(&c, &cfg).unwrap(), 0.0);
}

#[test]
fn adaptive_weight_cases() {
    let c = coef(
        &[9.0, 0.6, 0.0, 3.0],
        &[[1.0; 3], [0.8, 0.0, 0.0], [0.0; 3], [0.0, 4.0, 0.0]],
    );
    let w = compute_adaptive_weights(&c);
    assert!((w[0] - 1.0).abs() < 1e-15);
    assert_eq!(w[1], MAX_WEIGHT);
    assert!((w[2] - 0.2).abs() < 1e-15);
    let tiny = coef(&[0.0, 1e-20], &[[0.0; 3], [0.0; 3]]);
    assert_eq!(compute_adaptive_weights(&tiny)[0], MAX_WEIGHT);
}

fn two_predictor_data(x1: Vec<f64>, u: Vec<f64>) -> Dataset {
    let n = x1.len();
    let x = Array2::from_shape_fn((n, 1), |(i, _)| x1[i]);
    let u = Array2::from_shape_fn((n, 1), |(i, _)| u[i]);
    Dataset::from_predictors(x.view(), u, Array2::zeros((n, 0)), Outcome::Gaussian(Array1::zeros(n))).unwrap()
}

#[test]
fn metric_is_scaled_spline_gram() {
    let x1 = vec![1.0, -2.0, 0.5, 3.0];
    let u = vec![0.3, -0.7, 0.9, -0.1];
    let data = two_predictor_data(x1.clone(), u.clone());
    let basis = SplineBasis::symmetric(1.0).unwrap();
    let k = build_k(&data, array![1.0].view(), &basis, KStrategy::UpdateEachIteration).unwrap();
    let mut want = Array2::<f64>::zeros((3, 3));
    for i in 0..4 {
        let b = basis.evaluate(u[i]);
        for a in 0..3 {
            for c in 0..3 {
                want[[a, c]] += b[a] * x1[i] * b[c] * x1[i] / 4.0;
            }
        }
    }
    for a in 0..3 {
        for c in 0..3 {
            assert!((k[0].k()[[a, c]] - want[[a, c]]).abs() < 1e-14);
        }
    }
    let id = build_k(&data, array![1.0].view(), &basis, KStrategy::Identity).unwrap();
    assert_eq!(id[0].k(), Array2::<f64>::eye(3));
}

#[test]
fn zero_column_gets_ridge() {
    let data = two_predictor_data(vec![0.0; 5], vec![0.1, 0.2, -0.3, 0.4, -0.5]);
    let basis = SplineBasis::symmetric(1.0).unwrap();
    let k = build_k(&data, array![1.0].view(), &basis, KStrategy::FixedFromInitial).unwrap();
    assert_eq!(k[0].k(), Array2::<f64>::eye(3) * 1e-8);
}

#[test]
fn group_threshold_identity() {
    let m = Metric::identity(2);
    let t = group_threshold(array![3.0, 4.0].view(), 1.0, &m);
    assert!((t[0] - 2.4).abs() < 1e-15 && (t[1] - 3.2).abs() < 1e-15);
    assert_eq!(group_threshold(array![3.0, 4.0].view(), 5.0, &m), array![0.0, 0.0]);
}

#[test]
fn group_threshold_minimizes_on_a_grid() {
    let k = array![[2.0, 0.6], [0.6, 1.0]];
    let m = Metric::new(k.clone()).unwrap();
    let z = array![1.2, -0.8];
    let lam = 0.4;
    let obj = |a: &Array1<f64>| {
        let r = a - &z;
        0.5 * r.dot(&k.dot(&r)) + lam * a.dot(&k.dot(a)).sqrt()
    };
    let got = group_threshold(z.view(), lam, &m);
    let step = 0.002;
    let mut best = (f64::INFINITY, Array1::zeros(2));
    for i in 0..=1500 {
        for j in 0..=1500 {
            let a = array![-1.5 + i as f64 * step, -1.5 + j as f64 * step];
            let v = obj(&a);
            if v < best.0 {
                best = (v, a);
            }
        }
    }
    assert!(obj(&got) <= best.0 + 1e-12);
    assert!((&got - &best.1).iter().all(|d| d.abs() <= 2.0 * step));
}

fn coef_strategy() -> impl Strategy<Value = Coefficients> {
    (prop::collection::vec(-3.0f64..3.0, 3), prop::collection::vec(-3.0f64..3.0, 9)).prop_map(|(g, a)| {
        let mut c = Coefficients::zeros(array![1.0], 2, 3, 0);
        c.gamma = Array1::from(g);
        c.alpha = Array2::from_shape_vec((3, 3), a).unwrap();
        c
    })
}

fn general_config() -> PenaltyConfig {
    let mut cfg = PenaltyConfig::new(0.7, 1.3, 2, 3, KStrategy::FixedFromInitial).with_weights(array![1.0, 2.5]);
    cfg.metrics = vec![
        Metric::new(array![[2.0, 0.5, 0.0], [0.5, 1.0, 0.1], [0.0, 0.1, 3.0]]).unwrap(),
        Metric::new(array![[1.0, 0.9, 0.0], [0.9, 1.0, 0.0], [0.0, 0.0, 0.2]]).unwrap(),
    ];
    cfg
}

fn scale(c: &Coefficients, t: f64) -> Coefficients {
    let mut out = c.clone();
    out.gamma *= t;
    out.alpha *= t;
    out
}

proptest! {
    #[test]
    fn penalty_is_absolutely_homogeneous(c in coef_strategy(), t in -5.0f64..5.0) {
        let cfg = general_config();
        let a = penalty_value(&scale(&c, t), &cfg).unwrap();
        let b = t.abs() * penalty_value(&c, &cfg).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn penalty_is_convex(a in coef_strategy(), b in coef_strategy(), th in 0.0f64..1.0) {
        let cfg = general_config();
        let mut mix = a.clone();
        mix.gamma = &a.gamma * th + &b.gamma * (1.0 - th);
        mix.alpha = &a.alpha * th + &b.alpha * (1.0 - th);
        let lhs = penalty_value(&mix, &cfg).unwrap();
        let rhs = th * penalty_value(&a, &cfg).unwrap() + (1.0 - th) * penalty_value(&b, &cfg).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn threshold_shrinks_the_metric_norm(z in prop::collection::vec(-5.0f64..5.0, 3), lam in 0.0f64..4.0) {
        let cfg = general_config();
        let m = &cfg.metrics[0];
        let z = Array1::from(z);
        let t = group_threshold(z.view(), lam, m);
        let nz = m.norm(z.view());
        prop_assert!((m.norm(t.view()) - (nz - lam).max(0.0)).abs() < 1e-9);
    }
}
