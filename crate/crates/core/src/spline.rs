//! Origin-anchored quadratic B-spline basis.
//!
//! The basis is assembled from two clamped quadratic B-spline systems, one on
//! each side of zero, each with its intercept function removed so every member
//! vanishes at the origin. The first function of the left system is coupled to
//! the first function of the right system so that first derivatives agree at
//! zero, which leaves `d` continuously differentiable functions for a grid of
//! `d` points.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered grid points `k_1 < ... < k_d` with `d` odd, `d > 2` and the
/// middle point equal to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GridPoints(Vec<f64>);

impl GridPoints {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let d = points.len();
        if d % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "number of grid points must be odd, got {d}"
            )));
        }
        if d <= 2 {
            return Err(Error::InvalidGrid(format!(
                "need more than two grid points, got {d}"
            )));
        }
        if points.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidGrid("grid points must be finite".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "grid points must be strictly increasing".into(),
            ));
        }
        if points[(d - 1) / 2] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "middle grid point must be exactly 0, got {}",
                points[(d - 1) / 2]
            )));
        }
        Ok(GridPoints(points))
    }

    /// Three-point grid `(-radius, 0, radius)`.
    pub fn symmetric(radius: f64) -> Result<Self> {
        Self::new(vec![-radius, 0.0, radius])
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn is_symmetric(&self) -> bool {
        let d = self.0.len();
        (0..d).all(|i| self.0[i] == -self.0[d - 1 - i])
    }
}

impl TryFrom<Vec<f64>> for GridPoints {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        GridPoints::new(v)
    }
}

impl From<GridPoints> for Vec<f64> {
    fn from(g: GridPoints) -> Self {
        g.0
    }
}

/// Clamped quadratic B-spline system on `[0, t_m]` with the function that is
/// nonzero at the left end removed.
#[derive(Debug, Clone)]
struct HalfSystem {
    knots: Vec<f64>,
}

impl HalfSystem {
    /// `breaks` is `(0, t_1, ..., t_m)`, strictly increasing.
    fn new(breaks: &[f64]) -> Self {
        let last = *breaks.last().expect("non-empty breaks");
        let mut knots = Vec::with_capacity(breaks.len() + 4);
        knots.extend_from_slice(&[0.0, 0.0]);
        knots.extend_from_slice(breaks);
        knots.extend_from_slice(&[last, last]);
        HalfSystem { knots }
    }

    /// Number of retained functions (intercept function dropped).
    fn len(&self) -> usize {
        self.knots.len() - 4
    }

    fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Values and first two derivatives of the retained functions at
    /// `x in [0, upper]`, written into slices of length `len()`.
    fn eval(&self, x: f64, val: &mut [f64], d1: &mut [f64], d2: &mut [f64]) {
        let t = &self.knots;
        let nb = t.len() - 3;
        // span index i with t[i] <= x < t[i+1]; right end uses the last span
        let last_span = nb - 1;
        let mut i = 2;
        while i < last_span && x >= t[i + 1] {
            i += 1;
        }
        let h = t[i + 1] - t[i];
        // degree-1 functions N_{i-1,1}, N_{i,1} and their derivatives
        let n1 = [(t[i + 1] - x) / h, (x - t[i]) / h];
        let dn1 = [-1.0 / h, 1.0 / h];
        let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
        for v in val.iter_mut().chain(d1.iter_mut()).chain(d2.iter_mut()) {
            *v = 0.0;
        }
        // degree-2 functions N_{k,2}, k = i-2, i-1, i
        for (slot, k) in (i - 2..=i).enumerate() {
            let lo = if slot >= 1 { n1[slot - 1] } else { 0.0 };
            let hi = if slot <= 1 { n1[slot] } else { 0.0 };
            let dlo = if slot >= 1 { dn1[slot - 1] } else { 0.0 };
            let dhi = if slot <= 1 { dn1[slot] } else { 0.0 };
            let a = t[k + 2] - t[k];
            let b = t[k + 3] - t[k + 1];
            let value = ratio(x - t[k], a) * lo + ratio(t[k + 3] - x, b) * hi;
            let first = 2.0 * (ratio(lo, a) - ratio(hi, b));
            let second = 2.0 * (ratio(dlo, a) - ratio(dhi, b));
            if k >= 1 {
                val[k - 1] = value;
                d1[k - 1] = first;
                d2[k - 1] = second;
            }
        }
    }
}

/// The `d` origin-anchored basis functions over a [`GridPoints`] grid.
///
/// Outside `[k_1, k_d]` values are extended as constants and derivatives are
/// zero.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    grid: GridPoints,
    left: HalfSystem,
    right: HalfSystem,
    ratio: f64,
}

/// Values and first two derivatives of every basis function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisJet {
    pub value: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl SplineBasis {
    pub fn new(grid: GridPoints) -> Self {
        let k = grid.points();
        let d = k.len();
        let mid = (d - 1) / 2;
        let mut right_breaks = vec![0.0];
        right_breaks.extend_from_slice(&k[mid + 1..]);
        let mut left_breaks = vec![0.0];
        left_breaks.extend(k[..mid].iter().rev().map(|v| -v));
        let ratio = k[mid + 1] / k[mid - 1];
        SplineBasis {
            left: HalfSystem::new(&left_breaks),
            right: HalfSystem::new(&right_breaks),
            ratio,
            grid,
        }
    }

    /// Knots at `-radius, 0, radius`.
    pub fn symmetric(radius: f64) -> Result<Self> {
        Ok(Self::new(GridPoints::symmetric(radius)?))
    }

    pub fn grid(&self) -> &GridPoints {
        &self.grid
    }

    /// Number of basis functions `d`.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coupling coefficient applied to the first right-hand function.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn lower(&self) -> f64 {
        self.grid.points()[0]
    }

    pub fn upper(&self) -> f64 {
        *self.grid.points().last().unwrap()
    }

    /// Evaluates values and the first two derivatives into caller buffers of
    /// length `d`.
    pub fn eval_into(&self, x: f64, val: &mut [f64], d1: &mut [f64], d2: &mut [f64]) {
        let half = self.right.len();
        debug_assert!(val.len() == self.len() && d1.len() == self.len() && d2.len() == self.len());
        if half <= 16 {
            let mut buf = [[0.0; 16]; 3];
            let [hv, h1, h2] = &mut buf;
            self.assemble(x, &mut hv[..half], &mut h1[..half], &mut h2[..half], val, d1, d2);
        } else {
            let (mut hv, mut h1, mut h2) = (vec![0.0; half], vec![0.0; half], vec![0.0; half]);
            self.assemble(x, &mut hv, &mut h1, &mut h2, val, d1, d2);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &self,
        x: f64,
        hv: &mut [f64],
        h1: &mut [f64],
        h2: &mut [f64],
        val: &mut [f64],
        d1: &mut [f64],
        d2: &mut [f64],
    ) {
        let half = hv.len();
        let outside = x < self.lower() || x > self.upper();
        let xc = x.clamp(self.lower(), self.upper());
        for v in val.iter_mut().chain(d1.iter_mut()).chain(d2.iter_mut()) {
            *v = 0.0;
        }
        if xc >= 0.0 {
            self.right.eval(xc.min(self.right.upper()), hv, h1, h2);
            val[0] = self.ratio * hv[0];
            d1[0] = self.ratio * h1[0];
            d2[0] = self.ratio * h2[0];
            for j in 1..half {
                val[half - 1 + j] = hv[j];
                d1[half - 1 + j] = h1[j];
                d2[half - 1 + j] = h2[j];
            }
        } else {
            self.left.eval((-xc).min(self.left.upper()), hv, h1, h2);
            // L_j(x) = L~_j(-x): odd derivatives flip sign
            for j in 0..half {
                val[j] = hv[j];
                d1[j] = -h1[j];
                d2[j] = h2[j];
            }
        }
        if outside {
            d1.iter_mut().for_each(|v| *v = 0.0);
            d2.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn jet(&self, x: f64) -> BasisJet {
        let d = self.len();
        let mut jet = BasisJet {
            value: vec![0.0; d],
            first: vec![0.0; d],
            second: vec![0.0; d],
        };
        self.eval_into(x, &mut jet.value, &mut jet.first, &mut jet.second);
        jet
    }

    /// `(B_1(x), ..., B_d(x))`.
    pub fn evaluate(&self, x: f64) -> Vec<f64> {
        self.jet(x).value
    }

    pub fn evaluate_derivative(&self, x: f64) -> Vec<f64> {
        self.jet(x).first
    }

    /// Second derivative; piecewise constant, taken from the right at knots.
    pub fn evaluate_second_derivative(&self, x: f64) -> Vec<f64> {
        self.jet(x).second
    }

    /// Row `i` holds the basis evaluated at `xs[i]`.
    pub fn design_matrix(&self, xs: ArrayView1<f64>) -> Array2<f64> {
        self.design_jets(xs).0
    }

    /// Value, first and second derivative matrices at every point.
    pub fn design_jets(&self, xs: ArrayView1<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let d = self.len();
        let n = xs.len();
        let mut v = Array2::zeros((n, d));
        let mut f = Array2::zeros((n, d));
        let mut s = Array2::zeros((n, d));
        let (mut bv, mut b1, mut b2) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        for (i, &x) in xs.iter().enumerate() {
            self.eval_into(x, &mut bv, &mut b1, &mut b2);
            for k in 0..d {
                v[[i, k]] = bv[k];
                f[[i, k]] = b1[k];
                s[[i, k]] = b2[k];
            }
        }
        (v, f, s)
    }

    /// Matrix `M` with `B(-x) = M B(x)` for every `x`, which exists when the
    /// grid is symmetric about zero. Returns `None` otherwise.
    pub fn reflection(&self) -> Option<Array2<f64>> {
        if !self.grid.is_symmetric() {
            return None;
        }
        let d = self.len();
        let half = self.right.len();
        // With a symmetric grid L~_j and R_j coincide, so L_j(-x) = R_j(x).
        // The coupled first function is odd because ratio = -1.
        let mut m = Array2::zeros((d, d));
        m[[0, 0]] = -1.0;
        for j in 1..half {
            m[[j, half - 1 + j]] = 1.0;
            m[[half - 1 + j, j]] = 1.0;
        }
        Some(m)
    }
}
