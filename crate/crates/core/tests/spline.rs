use nalgebra::DMatrix;
use ndarray::Array1;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sivc::{GridPoints, SplineBasis};

/// Cox-de Boor recursion for `N_{i,k}` on knot vector `t`, half-open spans.
fn cox_de_boor(t: &[f64], i: usize, k: usize, x: f64) -> f64 {
    if k == 0 {
        return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
    }
    let mut out = 0.0;
    let a = t[i + k] - t[i];
    if a > 0.0 {
        out += (x - t[i]) / a * cox_de_boor(t, i, k - 1, x);
    }
    let b = t[i + k + 1] - t[i + 1];
    if b > 0.0 {
        out += (t[i + k + 1] - x) / b * cox_de_boor(t, i + 1, k - 1, x);
    }
    out
}

/// Clamped quadratic knot vector on breaks `0 = b_0 < ... < b_m`.
fn clamped(breaks: &[f64]) -> Vec<f64> {
    let last = *breaks.last().unwrap();
    let mut t = vec![0.0, 0.0];
    t.extend_from_slice(breaks);
    t.extend([last, last]);
    t
}

/// Reference basis built directly from the two half systems.
fn reference(grid: &[f64], x: f64) -> Vec<f64> {
    let d = grid.len();
    let mid = (d - 1) / 2;
    let half = mid + 1;
    let mut right = vec![0.0];
    right.extend_from_slice(&grid[mid + 1..]);
    let mut left = vec![0.0];
    left.extend(grid[..mid].iter().rev().map(|v| -v));
    let ratio = grid[mid + 1] / grid[mid - 1];
    let mut out = vec![0.0; d];
    if x >= 0.0 {
        let t = clamped(&right);
        out[0] = ratio * cox_de_boor(&t, 1, 2, x);
        for j in 1..half {
            out[half - 1 + j] = cox_de_boor(&t, j + 1, 2, x);
        }
    } else {
        let t = clamped(&left);
        for (j, o) in out.iter_mut().enumerate().take(half) {
            *o = cox_de_boor(&t, j + 1, 2, -x);
        }
    }
    out
}

fn basis(points: &[f64]) -> SplineBasis {
    SplineBasis::new(GridPoints::new(points.to_vec()).unwrap())
}

#[test]
fn matches_de_boor_on_unit_grid() {
    let b = basis(&[-1.0, 0.0, 1.0]);
    let got = b.evaluate(0.5);
    let want = reference(&[-1.0, 0.0, 1.0], 0.5);
    for k in 0..3 {
        assert!((got[k] - want[k]).abs() < 1e-14, "{got:?} vs {want:?}");
    }
}

#[test]
fn matches_de_boor_on_uneven_grid() {
    let grid = [-3.0, -1.2, -0.4, 0.0, 0.3, 1.1, 2.5];
    let b = basis(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let x = rng.random_range(-2.999..2.499);
        let got = b.evaluate(x);
        let want = reference(&grid, x);
        for k in 0..grid.len() {
            assert!((got[k] - want[k]).abs() < 1e-13, "x={x} k={k}: {} vs {}", got[k], want[k]);
        }
    }
}

#[test]
fn spans_x_and_x_squared_on_right_half() {
    let b = basis(&[-1.0, 0.0, 1.0]);
    let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let m = DMatrix::from_fn(xs.len(), 3, |i, k| b.evaluate(xs[i])[k]);
    for f in [|x: f64| x, |x: f64| x * x] {
        let y = DMatrix::from_fn(xs.len(), 1, |i, _| f(xs[i]));
        let coef = m.clone().svd(true, true).solve(&y, 1e-12).unwrap();
        let resid = (&m * coef - &y).amax();
        assert!(resid < 1e-12, "residual {resid}");
    }
}

#[test]
fn vanishes_at_origin() {
    for g in [vec![-1.0, 0.0, 1.0], vec![-2.0, -0.5, 0.0, 0.7, 4.0], vec![-3.0, -1.2, -0.4, 0.0, 0.3, 1.1, 2.5]] {
        assert!(basis(&g).evaluate(0.0).iter().all(|v| *v == 0.0));
    }
}

#[test]
fn first_derivative_is_one_sided_consistent_at_origin() {
    let b = basis(&[-2.0, -0.5, 0.0, 0.7, 4.0]);
    let h = 1e-3;
    let right: Vec<f64> = (0..5)
        .map(|k| (-3.0 * b.evaluate(0.0)[k] + 4.0 * b.evaluate(h)[k] - b.evaluate(2.0 * h)[k]) / (2.0 * h))
        .collect();
    let left: Vec<f64> = (0..5)
        .map(|k| (3.0 * b.evaluate(0.0)[k] - 4.0 * b.evaluate(-h)[k] + b.evaluate(-2.0 * h)[k]) / (2.0 * h))
        .collect();
    for k in 0..5 {
        assert!((left[k] - right[k]).abs() < 1e-8, "k={k}: {} vs {}", left[k], right[k]);
    }
}

#[test]
fn derivative_matches_central_differences() {
    let grid = [-3.0, -1.2, -0.4, 0.0, 0.3, 1.1, 2.5];
    let b = basis(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let mut checked = 0;
    while checked < 20 {
        let x: f64 = rng.random_range(-2.9..2.4);
        if grid.iter().any(|k| (k - x).abs() < 1e-4) {
            continue;
        }
        let d = b.evaluate_derivative(x);
        let (p, m) = (b.evaluate(x + h), b.evaluate(x - h));
        for k in 0..grid.len() {
            let fd = (p[k] - m[k]) / (2.0 * h);
            let rel = (fd - d[k]).abs() / d[k].abs().max(1.0);
            assert!(rel < 1e-5, "x={x} k={k}: fd {fd} vs {}", d[k]);
        }
        checked += 1;
    }
}

#[test]
fn constant_outside_the_grid() {
    let b = basis(&[-2.0, -0.5, 0.0, 0.7, 4.0]);
    assert_eq!(b.evaluate(5.0), b.evaluate(4.0));
    assert_eq!(b.evaluate(1e6), b.evaluate(4.0));
    assert_eq!(b.evaluate(-2.5), b.evaluate(-2.0));
    assert!(b.evaluate_derivative(4.5).iter().all(|v| *v == 0.0));
    assert!(b.evaluate_second_derivative(-9.0).iter().all(|v| *v == 0.0));
}

#[test]
fn gram_matrix_is_positive_definite() {
    for g in [vec![-1.0, 0.0, 1.0], vec![-2.0, -0.5, 0.0, 0.7, 4.0]] {
        let b = basis(&g);
        let (lo, hi) = (g[0], *g.last().unwrap());
        let xs = Array1::linspace(lo, hi, 10_000);
        let m = b.design_matrix(xs.view());
        let d = g.len();
        let gram = DMatrix::from_fn(d, d, |i, j| m.column(i).dot(&m.column(j)));
        let smallest = gram.symmetric_eigenvalues().min();
        assert!(smallest > 1e-6, "smallest eigenvalue {smallest}");
    }
}

/// One-sided second-order difference quotients at `x` for every function.
fn one_sided(b: &SplineBasis, x: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let (f0, fp, fpp, fm, fmm) = (
        b.evaluate(x),
        b.evaluate(x + h),
        b.evaluate(x + 2.0 * h),
        b.evaluate(x - h),
        b.evaluate(x - 2.0 * h),
    );
    let right = (0..f0.len()).map(|k| (-3.0 * f0[k] + 4.0 * fp[k] - fpp[k]) / (2.0 * h)).collect();
    let left = (0..f0.len()).map(|k| (3.0 * f0[k] - 4.0 * fm[k] + fmm[k]) / (2.0 * h)).collect();
    (left, right)
}

fn grid_strategy() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=4)
        .prop_flat_map(|half| {
            (
                prop::collection::vec(0.1f64..2.0, half),
                prop::collection::vec(0.1f64..2.0, half),
            )
        })
        .prop_map(|(l, r)| {
            let mut neg: Vec<f64> = l
                .iter()
                .scan(0.0, |s, v| {
                    *s -= v;
                    Some(*s)
                })
                .collect();
            neg.reverse();
            let pos = r.iter().scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            });
            neg.into_iter().chain(std::iter::once(0.0)).chain(pos).collect()
        })
}

proptest! {
    #[test]
    fn zero_at_origin_and_smooth_inside(grid in grid_strategy()) {
        let b = basis(&grid);
        prop_assert!(b.evaluate(0.0).iter().all(|v| *v == 0.0));
        let spacing = grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let h = spacing / 4.0;
        for &k in &grid[1..grid.len() - 1] {
            let (l, r) = (b.evaluate(k - 1e-12), b.evaluate(k + 1e-12));
            for j in 0..grid.len() {
                prop_assert!((l[j] - r[j]).abs() < 1e-8);
            }
            let (dl, dr) = one_sided(&b, k, h);
            for j in 0..grid.len() {
                prop_assert!((dl[j] - dr[j]).abs() < 1e-8, "knot {} fn {}: {} vs {}", k, j, dl[j], dr[j]);
            }
        }
    }

    #[test]
    fn values_continuous_at_end_knots(grid in grid_strategy()) {
        let b = basis(&grid);
        for k in [grid[0], *grid.last().unwrap()] {
            let (l, r) = (b.evaluate(k - 1e-12), b.evaluate(k + 1e-12));
            for j in 0..grid.len() {
                prop_assert!((l[j] - r[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn reflection_holds_on_symmetric_grids(half in prop::collection::vec(0.1f64..2.0, 1..4), x in -5.0f64..5.0) {
        let pos: Vec<f64> = half.iter().scan(0.0, |s, v| { *s += v; Some(*s) }).collect();
        let mut grid: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
        grid.push(0.0);
        grid.extend(&pos);
        let b = basis(&grid);
        let m = b.reflection().unwrap();
        let lhs = b.evaluate(-x);
        let rhs = m.dot(&Array1::from(b.evaluate(x)));
        for k in 0..grid.len() {
            prop_assert!((lhs[k] - rhs[k]).abs() < 1e-12);
        }
    }
}
