//! Frozen library of the twenty signal functions `g_1..g_20`.

/// Shape class of a coefficient function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Constant,
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Copy)]
pub struct TrueFn {
    pub name: &'static str,
    pub shape: Shape,
    f: fn(f64) -> f64,
}

impl TrueFn {
    pub fn eval(&self, v: f64) -> f64 {
        (self.f)(v)
    }

    /// Whether the effect changes with the index.
    pub fn is_varying(&self) -> bool {
        self.shape != Shape::Constant
    }
}

/// Version tag of the library; bump when any member changes.
pub const LIBRARY_VERSION: u32 = 1;

const LIBRARY: [TrueFn; 20] = [
    TrueFn { name: "1", shape: Shape::Constant, f: |_| 1.0 },
    TrueFn { name: "-1", shape: Shape::Constant, f: |_| -1.0 },
    TrueFn { name: "0.5", shape: Shape::Constant, f: |_| 0.5 },
    TrueFn { name: "-0.5", shape: Shape::Constant, f: |_| -0.5 },
    TrueFn { name: "1.5", shape: Shape::Constant, f: |_| 1.5 },
    TrueFn { name: "-1.5", shape: Shape::Constant, f: |_| -1.5 },
    TrueFn { name: "2", shape: Shape::Constant, f: |_| 2.0 },
    TrueFn { name: "v", shape: Shape::Linear, f: |v| v },
    TrueFn { name: "-v", shape: Shape::Linear, f: |v| -v },
    TrueFn { name: "0.5+0.5v", shape: Shape::Linear, f: |v| 0.5 + 0.5 * v },
    TrueFn { name: "-0.5+v", shape: Shape::Linear, f: |v| -0.5 + v },
    TrueFn { name: "0.5v", shape: Shape::Linear, f: |v| 0.5 * v },
    TrueFn { name: "-0.5-0.5v", shape: Shape::Linear, f: |v| -0.5 - 0.5 * v },
    TrueFn { name: "sin(v)", shape: Shape::Nonlinear, f: f64::sin },
    TrueFn { name: "cos(v)", shape: Shape::Nonlinear, f: f64::cos },
    TrueFn { name: "0.25v^2-0.5", shape: Shape::Nonlinear, f: |v| 0.25 * v * v - 0.5 },
    TrueFn { name: "1.5tanh(v)", shape: Shape::Nonlinear, f: |v| 1.5 * v.tanh() },
    TrueFn { name: "0.3v-0.1v^2", shape: Shape::Nonlinear, f: |v| 0.3 * v - 0.1 * v * v },
    TrueFn { name: "2sin(0.5v)", shape: Shape::Nonlinear, f: |v| 2.0 * (0.5 * v).sin() },
    TrueFn { name: "0.5-tanh(v)", shape: Shape::Nonlinear, f: |v| 0.5 - v.tanh() },
];

/// `g_1..g_20` in predictor order.
pub fn true_g_library() -> &'static [TrueFn; 20] {
    &LIBRARY
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition() {
        let lib = true_g_library();
        let count = |s| lib.iter().filter(|f| f.shape == s).count();
        assert_eq!(count(Shape::Constant), 7);
        assert_eq!(count(Shape::Linear), 6);
        assert_eq!(count(Shape::Nonlinear), 7);
    }

    #[test]
    fn nonzero_and_bounded_on_range() {
        for f in true_g_library() {
            let vals: Vec<f64> = (0..=600).map(|i| f.eval(-3.0 + i as f64 * 0.01)).collect();
            assert!(vals.iter().any(|v| v.abs() > 1e-3), "{}", f.name);
            assert!(vals.iter().all(|v| v.abs() <= 3.5), "{}", f.name);
        }
    }

    #[test]
    fn constants_are_flat() {
        for f in true_g_library().iter().filter(|f| f.shape == Shape::Constant) {
            let h = 1e-4;
            for v in [-2.0, 0.0, 1.7] {
                assert_eq!(f.eval(v + h) - f.eval(v - h), 0.0);
            }
        }
    }
}
