#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use sivc::{Dataset, Outcome, SplineBasis, Survival};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut impl Rng, n: usize, k: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, k), || StandardNormal.sample(rng))
}

/// Two-dimensional index, `g_1(v) = sin(v) + 0.5`, `g_2 = 0.5`, remaining
/// predictors inactive; `Z` is separate from `U`.
pub fn index_eta(x: &Array2<f64>, u: &Array2<f64>, z: &Array2<f64>, angle: f64) -> Array1<f64> {
    let (c, s) = (angle.cos(), angle.sin());
    let n = x.nrows();
    (0..n)
        .map(|i| {
            let v = c * u[[i, 0]] + s * u[[i, 1]];
            let mut e = (v.sin() + 0.5) * x[[i, 0]];
            if x.ncols() > 1 {
                e += 0.5 * x[[i, 1]];
            }
            if z.ncols() > 0 {
                e += 0.3 * z[[i, 0]];
            }
            e
        })
        .collect()
}

pub fn gaussian(seed: u64, n: usize, p: usize, q_z: usize, noise: f64) -> (Dataset, SplineBasis) {
    let mut r = rng(seed);
    let x = normals(&mut r, n, p);
    let u = normals(&mut r, n, 2);
    let z = normals(&mut r, n, q_z);
    let eta = index_eta(&x, &u, &z, 0.6);
    let eps: Array1<f64> = (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut r);
            noise * e
        })
        .collect();
    let data = Dataset::from_predictors(x.view(), u, z, Outcome::Gaussian(eta + eps)).unwrap();
    let basis = SplineBasis::symmetric(data.max_u_norm()).unwrap();
    (data, basis)
}

pub fn cox(seed: u64, n: usize, p: usize, q_z: usize) -> (Dataset, SplineBasis) {
    let mut r = rng(seed);
    let x = normals(&mut r, n, p);
    let u = normals(&mut r, n, 2);
    let z = normals(&mut r, n, q_z);
    let eta = index_eta(&x, &u, &z, 0.6);
    let mut time = Array1::zeros(n);
    let mut event = vec![false; n];
    for i in 0..n {
        let e: f64 = Exp1.sample(&mut r);
        let c0: f64 = Exp1.sample(&mut r);
        let t = e * (-eta[i]).exp();
        let c = 3.0 * c0;
        time[i] = t.min(c);
        event[i] = t <= c;
    }
    let outcome = Outcome::Cox(Survival::new(time, event).unwrap());
    let data = Dataset::from_predictors(x.view(), u, z, outcome).unwrap();
    let basis = SplineBasis::symmetric(data.max_u_norm()).unwrap();
    (data, basis)
}
