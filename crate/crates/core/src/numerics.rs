//! Dense linear algebra, activations, the adaptive-moment optimizer and a
//! central-difference gradient checker.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                operand: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("matrix contains non-finite entries".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Entries drawn independently from `uniform(-bound, bound)`.
    pub fn random_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `out += self^T * v`
    pub(crate) fn add_transpose_mul(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o += w * vr;
            }
        }
    }

    /// `self += u * v^T`
    pub(crate) fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        let cols = self.cols;
        for (r, &ur) in u.iter().enumerate() {
            if ur == 0.0 {
                continue;
            }
            for (w, &vc) in self.data[r * cols..(r + 1) * cols].iter_mut().zip(v) {
                *w += ur * vc;
            }
        }
    }
}

/// Logistic function, branching on sign so `exp` never overflows.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    // four independent partial sums let the compiler vectorise
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `W · [h, x] + b` without materialising the concatenation.
pub fn affine_concat(w: &Matrix, h: &[f64], x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; b.len()];
    affine_concat_into(w, h, x, b, &mut out)?;
    Ok(out)
}

pub(crate) fn affine_concat_into(
    w: &Matrix,
    h: &[f64],
    x: &[f64],
    b: &[f64],
    out: &mut [f64],
) -> Result<()> {
    if w.cols != h.len() + x.len() {
        return Err(Error::Shape {
            operand: "W (columns vs [h, x])",
            expected: h.len() + x.len(),
            found: w.cols,
        });
    }
    if w.rows != b.len() {
        return Err(Error::Shape {
            operand: "b",
            expected: w.rows,
            found: b.len(),
        });
    }
    if out.len() != b.len() {
        return Err(Error::Shape {
            operand: "output",
            expected: b.len(),
            found: out.len(),
        });
    }
    let split = h.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = w.row(r);
        *o = dot(&row[..split], h) + dot(&row[split..], x) + b[r];
    }
    Ok(())
}

/// Adaptive moment estimation state for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub learning_rate: f64,
    pub decay1: f64,
    pub decay2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        OptimizerState {
            step_count: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            learning_rate,
            decay1: 0.9,
            decay2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// One bias-corrected update. An all-zero gradient leaves both the
    /// parameters and the state untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.len() {
            return Err(Error::Shape {
                operand: "params",
                expected: self.len(),
                found: params.len(),
            });
        }
        if grads.len() != self.len() {
            return Err(Error::Shape {
                operand: "grads",
                expected: self.len(),
                found: grads.len(),
            });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        if grads.iter().all(|&g| g == 0.0) {
            return Ok(());
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let correction1 = 1.0 - libm::pow(self.decay1, t as f64);
        let correction2 = 1.0 - libm::pow(self.decay2, t as f64);
        for i in 0..params.len() {
            let g = grads[i];
            self.first_moment[i] = self.decay1 * self.first_moment[i] + (1.0 - self.decay1) * g;
            self.second_moment[i] =
                self.decay2 * self.second_moment[i] + (1.0 - self.decay2) * g * g;
            let m_hat = self.first_moment[i] / correction1;
            let v_hat = self.second_moment[i] / correction2;
            params[i] -= self.learning_rate * m_hat / (libm::sqrt(v_hat) + self.epsilon);
        }
        Ok(())
    }
}

/// Largest relative disagreement between `analytic` and central differences of
/// `f` around `params`, normalised by `max(1, |analytic| + |numeric|)`.
pub fn gradient_check<F>(mut f: F, analytic: &[f64], params: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        let rel = libm::fabs(a - numeric) / f64::max(1.0, libm::fabs(a) + libm::fabs(numeric));
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-12);
        assert!((sigmoid(100.0) - 1.0).abs() < 1e-12);
        assert!(sigmoid(-800.0).is_finite());
        assert!(sigmoid(800.0).is_finite());
    }

    #[test]
    fn affine_identity_and_zero_maps() {
        let h = [0.3, -1.0];
        let x = [2.5];
        let id = Matrix::identity(3);
        assert_eq!(affine_concat(&id, &h, &x, &[0.0; 3]).unwrap(), vec![0.3, -1.0, 2.5]);

        let zero = Matrix::zeros(2, 3);
        assert_eq!(affine_concat(&zero, &h, &x, &[4.0, 5.0]).unwrap(), vec![4.0, 5.0]);
    }

    #[test]
    fn affine_hand_value() {
        let w = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = affine_concat(&w, &[1.0], &[1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(out, vec![4.0, 8.0]);
    }

    #[test]
    fn affine_shape_errors_name_operand() {
        let w = Matrix::zeros(2, 3);
        let err = affine_concat(&w, &[1.0], &[1.0], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Shape { operand, .. } if operand.starts_with('W')));
        let err = affine_concat(&w, &[1.0, 2.0], &[1.0], &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Shape { operand: "b", .. }));
    }

    #[test]
    fn optimizer_zero_gradient_is_identity() {
        let mut state = OptimizerState::new(3, 0.1);
        let mut p = vec![1.0, 2.0, 3.0];
        state.step(&mut p, &[0.5, -0.5, 1.0]).unwrap();
        let before = p.clone();
        let snapshot = state.clone();
        state.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, before);
        assert_eq!(state, snapshot);
    }

    #[test]
    fn optimizer_single_step_hand_value() {
        let mut state = OptimizerState::new(1, 0.1);
        let mut p = vec![0.0];
        state.step(&mut p, &[1.0]).unwrap();
        // m_hat = 1, v_hat = 1 after bias correction.
        let expected = -0.1 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-6);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn optimizer_two_steps_monotone() {
        let mut state = OptimizerState::new(1, 0.1);
        let mut p = vec![0.0];
        state.step(&mut p, &[-2.0]).unwrap();
        let first = p[0];
        state.step(&mut p, &[-2.0]).unwrap();
        assert!(first > 0.0);
        assert!(p[0] > first);
        // Constant gradient: both bias-corrected steps have magnitude lr.
        assert!((p[0] - 0.2).abs() < 1e-6);
    }

    #[test]
    fn optimizer_rejects_non_finite_gradient() {
        let mut state = OptimizerState::new(3, 0.1);
        let mut p = vec![0.0; 3];
        let err = state.step(&mut p, &[0.0, f64::NAN, 1.0]).unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient { index: 1 });
    }

    #[test]
    fn gradient_check_square() {
        let err = gradient_check(|p| p[0] * p[0], &[6.0], &[3.0], 1e-5);
        assert!(err < 1e-7, "{err}");
        let err = gradient_check(|p| p[0] * p[0], &[12.0], &[3.0], 1e-5);
        assert!(err >= 0.3, "{err}");
    }

    #[test]
    fn gradient_check_three_parameter_quadratic() {
        // f = 2a^2 - ab + 3c^2 + 0.5bc - 4a + c
        let f = |p: &[f64]| {
            let (a, b, c) = (p[0], p[1], p[2]);
            2.0 * a * a - a * b + 3.0 * c * c + 0.5 * b * c - 4.0 * a + c
        };
        let p = [0.7, -1.3, 2.1];
        let (a, b, c) = (p[0], p[1], p[2]);
        let grad = [4.0 * a - b - 4.0, -a + 0.5 * c, 6.0 * c + 0.5 * b + 1.0];
        assert!(gradient_check(f, &grad, &p, 1e-5) < 1e-6);
    }

    proptest! {
        #[test]
        fn activations_stay_in_open_interval(x in -30.0f64..30.0) {
            let s = sigmoid(x);
            prop_assert!(s > 0.0 && s < 1.0);
            let t = tanh(x / 2.0);
            prop_assert!(t > -1.0 && t < 1.0);
        }

        #[test]
        fn sigmoid_is_monotone(a in -700.0f64..700.0, d in 0.0f64..5.0) {
            prop_assert!(sigmoid(a + d) >= sigmoid(a));
        }

        #[test]
        fn affine_bias_is_additive(
            w in proptest::collection::vec(-5.0f64..5.0, 6),
            h in proptest::collection::vec(-5.0f64..5.0, 2),
            x in -5.0f64..5.0,
            b in proptest::collection::vec(-5.0f64..5.0, 2),
        ) {
            let w = Matrix::from_vec(2, 3, w).unwrap();
            let with_b = affine_concat(&w, &h, &[x], &b).unwrap();
            let without = affine_concat(&w, &h, &[x], &[0.0, 0.0]).unwrap();
            for i in 0..2 {
                prop_assert!((with_b[i] - (without[i] + b[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn zero_gradient_never_moves_parameters(
            warm in proptest::collection::vec(-3.0f64..3.0, 4),
            p in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            let mut state = OptimizerState::new(4, 0.05);
            let mut scratch = p.clone();
            state.step(&mut scratch, &warm).unwrap();
            let mut q = p.clone();
            state.step(&mut q, &[0.0; 4]).unwrap();
            prop_assert_eq!(q, p);
        }

        #[test]
        fn polynomial_gradients_check_clean(c in proptest::collection::vec(-3.0f64..3.0, 4), x in -2.0f64..2.0, y in -2.0f64..2.0) {
            // f = c0 x^3 + c1 x y + c2 y^2 + c3 x
            let f = |p: &[f64]| c[0] * p[0].powi(3) + c[1] * p[0] * p[1] + c[2] * p[1] * p[1] + c[3] * p[0];
            let grad = [3.0 * c[0] * x * x + c[1] * y + c[3], c[1] * x + 2.0 * c[2] * y];
            prop_assert!(gradient_check(f, &grad, &[x, y], 1e-5) < 1e-6);
        }
    }
}
