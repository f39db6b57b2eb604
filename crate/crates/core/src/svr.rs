//! Epsilon-insensitive support vector regression from day index to cases.
//!
//! The dual is solved in the difference variables `beta = alpha - alpha*`:
//!
//! ```text
//! minimise  1/2 beta' K beta - y' beta + eps * sum |beta_i|
//! subject   sum beta_i = 0,  -C <= beta_i <= C
//! ```
//!
//! Each update moves one pair `(beta_i, beta_j)` along `e_i - e_j`, which keeps
//! the equality constraint, with an exact line search over the piecewise
//! quadratic restriction of the objective.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{RegionSeries, ScalerParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub const DEFAULT_GAMMA: f64 = 0.1;

    pub fn eval(&self, a: f64, b: f64) -> f64 {
        match *self {
            Kernel::Linear => a * b,
            Kernel::Rbf { gamma } => libm::exp(-gamma * (a - b) * (a - b)),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Linear => Ok(()),
            Kernel::Rbf { gamma } if gamma > 0.0 && gamma.is_finite() => Ok(()),
            Kernel::Rbf { gamma } => Err(Error::Config(alloc::format!(
                "rbf gamma must be positive, got {gamma}"
            ))),
        }
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Rbf {
            gamma: Kernel::DEFAULT_GAMMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrHyper {
    pub kernel: Kernel,
    pub c_reg: f64,
    /// Tube half-width in scaled target units.
    pub epsilon_tube: f64,
    /// One pass is `n` pair updates.
    pub max_passes: usize,
    pub tolerance: f64,
    /// Kept for config symmetry with the other models; the solver draws no
    /// random numbers.
    pub seed: u64,
}

impl Default for SvrHyper {
    fn default() -> Self {
        SvrHyper {
            kernel: Kernel::default(),
            c_reg: 10.0,
            epsilon_tube: 0.01,
            max_passes: 1000,
            tolerance: 1e-4,
            seed: 42,
        }
    }
}

impl SvrHyper {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.c_reg > 0.0 && self.c_reg.is_finite()) {
            return Err(Error::Config(alloc::format!("c_reg must be positive, got {}", self.c_reg)));
        }
        if !(self.epsilon_tube >= 0.0 && self.epsilon_tube.is_finite()) {
            return Err(Error::Config(alloc::format!(
                "epsilon_tube must be non-negative, got {}",
                self.epsilon_tube
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::Config("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    /// Raw day indices of the points with non-zero coefficient.
    pub support_inputs: Vec<f64>,
    pub dual_coeffs: Vec<f64>,
    /// Bias in scaled target units.
    pub bias: f64,
    pub kernel: Kernel,
    pub c_reg: f64,
    pub epsilon_tube: f64,
    pub input_scaler: ScalerParams,
    pub target_scaler: ScalerParams,
}

impl SvrModel {
    /// Decision function in scaled units.
    pub fn decision(&self, scaled_t: f64) -> f64 {
        let sum: f64 = self
            .support_inputs
            .iter()
            .zip(&self.dual_coeffs)
            .map(|(&s, &b)| b * self.kernel.eval(scaled_t, self.input_scaler.scale(s)))
            .sum();
        sum + self.bias
    }

    /// Box and equality constraints on the coefficients.
    pub fn check_feasible(&self) -> Result<()> {
        if self.support_inputs.len() != self.dual_coeffs.len() {
            return Err(Error::Shape {
                operand: "dual_coeffs",
                expected: self.support_inputs.len(),
                found: self.dual_coeffs.len(),
            });
        }
        let sum: f64 = self.dual_coeffs.iter().sum();
        if libm::fabs(sum) > 1e-6 {
            return Err(Error::Fit(alloc::format!("dual coefficients sum to {sum}")));
        }
        if let Some(b) = self.dual_coeffs.iter().find(|b| libm::fabs(**b) > self.c_reg * (1.0 + 1e-12)) {
            return Err(Error::Fit(alloc::format!(
                "dual coefficient {b} exceeds the box {}",
                self.c_reg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SvrTrace {
    /// Dual objective of the returned coefficients in scaled units.
    pub objective: f64,
    pub updates: usize,
    /// Largest remaining pair violation `max_l - min_r`.
    pub violation: f64,
}

pub fn svr_fit(series: &RegionSeries, hyper: &SvrHyper) -> Result<SvrModel> {
    svr_fit_traced(series, hyper).map(|(m, _)| m)
}

pub fn svr_fit_traced(series: &RegionSeries, hyper: &SvrHyper) -> Result<(SvrModel, SvrTrace)> {
    let days: Vec<f64> = (0..series.len()).map(|d| d as f64).collect();
    svr_fit_points(&days, &series.values(), hyper)
}

/// Fits on arbitrary `(day, value)` pairs.
pub fn svr_fit_points(days: &[f64], values: &[f64], hyper: &SvrHyper) -> Result<(SvrModel, SvrTrace)> {
    hyper.validate()?;
    if days.len() != values.len() {
        return Err(Error::Shape {
            operand: "values",
            expected: days.len(),
            found: values.len(),
        });
    }
    if days.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: days.len(),
        });
    }
    if days.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite training point".into()));
    }
    let input_scaler = ScalerParams::fit(days)?;
    let target_scaler = ScalerParams::fit(values)?;
    let x: Vec<f64> = days.iter().map(|&d| input_scaler.scale(d)).collect();
    let y: Vec<f64> = values.iter().map(|&v| target_scaler.scale(v)).collect();
    let n = x.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] = hyper.kernel.eval(x[i], x[j]);
        }
    }

    let solution = solve_dual(&gram, &y, hyper.epsilon_tube, hyper.c_reg, hyper.tolerance, hyper.max_passes * n);
    let objective = dual_objective(&gram, &y, hyper.epsilon_tube, &solution.beta);

    let mut support_inputs = Vec::new();
    let mut dual_coeffs = Vec::new();
    for (i, &b) in solution.beta.iter().enumerate() {
        if b != 0.0 {
            support_inputs.push(days[i]);
            dual_coeffs.push(b);
        }
    }
    let model = SvrModel {
        support_inputs,
        dual_coeffs,
        bias: solution.bias,
        kernel: hyper.kernel,
        c_reg: hyper.c_reg,
        epsilon_tube: hyper.epsilon_tube,
        input_scaler,
        target_scaler,
    };
    let trace = SvrTrace {
        objective,
        updates: solution.updates,
        violation: solution.violation,
    };
    Ok((model, trace))
}

pub fn svr_predict(model: &SvrModel, t: f64) -> f64 {
    let u = model.decision(model.input_scaler.scale(t));
    model.target_scaler.unscale(u)
}

/// Predictions for days `last_train_day + 1 ..= last_train_day + horizon`.
pub fn svr_forecast(model: &SvrModel, last_train_day: usize, horizon: usize) -> Vec<f64> {
    (1..=horizon)
        .map(|h| svr_predict(model, (last_train_day + h) as f64))
        .collect()
}

/// `1/2 beta' K beta - y' beta + eps * sum |beta|` for a row-major `K`.
pub fn dual_objective(gram: &[f64], y: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        let row = &gram[i * n..(i + 1) * n];
        let kb: f64 = row.iter().zip(beta).map(|(k, b)| k * b).sum();
        quad += beta[i] * kb;
    }
    let lin: f64 = y.iter().zip(beta).map(|(a, b)| a * b).sum();
    let l1: f64 = beta.iter().map(|b| libm::fabs(*b)).sum();
    0.5 * quad - lin + eps * l1
}

struct DualSolution {
    beta: Vec<f64>,
    bias: f64,
    updates: usize,
    violation: f64,
}

/// Directional derivative of the objective when `beta_i` grows.
fn right_slope(g: f64, beta: f64, eps: f64) -> f64 {
    if beta >= 0.0 {
        g + eps
    } else {
        g - eps
    }
}

/// Directional derivative, negated, when `beta_i` shrinks.
fn left_slope(g: f64, beta: f64, eps: f64) -> f64 {
    if beta > 0.0 {
        g + eps
    } else {
        g - eps
    }
}

/// Most violating pair: `i` minimises the right slope among coordinates that
/// can grow, `j` maximises the left slope among those that can shrink.
fn select_pair(beta: &[f64], grad: &[f64], eps: f64, c: f64) -> Option<(usize, f64, usize, f64)> {
    let mut up: Option<(usize, f64)> = None;
    let mut down: Option<(usize, f64)> = None;
    for (idx, (&b, &g)) in beta.iter().zip(grad).enumerate() {
        if b < c {
            let r = right_slope(g, b, eps);
            if up.is_none_or(|(_, best)| r < best) {
                up = Some((idx, r));
            }
        }
        if b > -c {
            let l = left_slope(g, b, eps);
            if down.is_none_or(|(_, best)| l > best) {
                down = Some((idx, l));
            }
        }
    }
    match (up, down) {
        (Some((i, r)), Some((j, l))) => Some((i, r, j, l)),
        _ => None,
    }
}

fn solve_dual(gram: &[f64], y: &[f64], eps: f64, c: f64, tol: f64, max_updates: usize) -> DualSolution {
    let n = y.len();
    let mut beta = vec![0.0; n];
    // gradient of the smooth part, K beta - y
    let mut grad: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut updates = 0;
    let mut violation = 0.0;
    while let Some((i, r, j, l)) = select_pair(&beta, &grad, eps, c) {
        violation = f64::max(l - r, 0.0);
        if i == j || l - r <= tol || updates >= max_updates {
            break;
        }
        let curvature = gram[i * n + i] + gram[j * n + j] - 2.0 * gram[i * n + j];
        let (t, bi, bj) = pair_line_search(beta[i], beta[j], grad[i] - grad[j], curvature, eps, c);
        if t <= 0.0 {
            break;
        }
        beta[i] = bi;
        beta[j] = bj;
        for (k, gk) in grad.iter_mut().enumerate() {
            *gk += t * (gram[k * n + i] - gram[k * n + j]);
        }
        updates += 1;
    }
    let bias = match select_pair(&beta, &grad, eps, c) {
        Some((_, r, _, l)) => -0.5 * (r + l),
        None => {
            // every coordinate sits on one bound; use the free side only
            let r = beta
                .iter()
                .zip(&grad)
                .filter(|(b, _)| **b < c)
                .map(|(b, g)| right_slope(*g, *b, eps))
                .fold(f64::INFINITY, f64::min);
            let l = beta
                .iter()
                .zip(&grad)
                .filter(|(b, _)| **b > -c)
                .map(|(b, g)| left_slope(*g, *b, eps))
                .fold(f64::NEG_INFINITY, f64::max);
            if r.is_finite() {
                -r
            } else if l.is_finite() {
                -l
            } else {
                0.0
            }
        }
    };
    DualSolution {
        beta,
        bias,
        updates,
        violation,
    }
}

/// Minimises the objective along `beta_i += t, beta_j -= t` for `t >= 0`.
///
/// `dg` is `grad_i - grad_j` of the smooth part and `curvature` is
/// `K_ii + K_jj - 2 K_ij`. Returns the step and the new pair values, with
/// kinks and bounds hit exactly.
fn pair_line_search(bi: f64, bj: f64, dg: f64, curvature: f64, eps: f64, c: f64) -> (f64, f64, f64) {
    let t_max = f64::min(c - bi, bj + c);
    if t_max <= 0.0 {
        return (0.0, bi, bj);
    }
    let mut breaks: [f64; 3] = [t_max; 3];
    let mut nb = 0;
    if bi < 0.0 && -bi < t_max {
        breaks[nb] = -bi;
        nb += 1;
    }
    if bj > 0.0 && bj < t_max {
        breaks[nb] = bj;
        nb += 1;
    }
    breaks[nb] = t_max;
    nb += 1;
    let breaks = &mut breaks[..nb];
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));

    let at = |t: f64| -> (f64, f64, f64) {
        let new_i = if t == -bi { 0.0 } else if t == c - bi { c } else { bi + t };
        let new_j = if t == bj { 0.0 } else if t == bj + c { -c } else { bj - t };
        (t, new_i, new_j)
    };

    let mut start = 0.0;
    for &end in breaks.iter() {
        if end <= start {
            continue;
        }
        let mid = 0.5 * (start + end);
        let si = if bi + mid > 0.0 { 1.0 } else { -1.0 };
        let sj = if bj - mid > 0.0 { 1.0 } else { -1.0 };
        // phi'(t) = slope0 + curvature * t on this segment
        let slope0 = dg + eps * (si - sj);
        if slope0 + curvature * start >= 0.0 {
            return at(start);
        }
        if curvature > 0.0 {
            let t_star = -slope0 / curvature;
            if t_star < end {
                return at(t_star);
            }
        }
        start = end;
    }
    at(start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RegionKey;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn gram_of(kernel: Kernel, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = kernel.eval(x[i], x[j]);
            }
        }
        k
    }

    fn scaled(days: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let xs = ScalerParams::fit(days).unwrap();
        let ys = ScalerParams::fit(values).unwrap();
        (
            days.iter().map(|&d| xs.scale(d)).collect(),
            values.iter().map(|&v| ys.scale(v)).collect(),
        )
    }

    /// Exhaustive grid over the box with the last coordinate fixed by the
    /// equality constraint.
    fn grid_optimum(gram: &[f64], y: &[f64], eps: f64, c: f64, step: f64) -> f64 {
        let n = y.len();
        let levels = libm::round(2.0 * c / step) as i64;
        let mut beta = vec![0.0; n];
        let mut best = f64::INFINITY;
        let mut idx = vec![0i64; n - 1];
        loop {
            let mut sum = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                beta[k] = -c + i as f64 * step;
                sum += beta[k];
            }
            beta[n - 1] = -sum;
            if libm::fabs(beta[n - 1]) <= c + 1e-12 {
                best = f64::min(best, dual_objective(gram, y, eps, &beta));
            }
            let mut k = 0;
            loop {
                if k == n - 1 {
                    return best;
                }
                idx[k] += 1;
                if idx[k] <= levels {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Exact optimum for a positive definite Gram matrix: try every
    /// assignment of coordinates to {-C, negative free, 0, positive free, +C},
    /// solve the equality-constrained stationarity system on the free ones
    /// and keep the best sign-consistent candidate.
    fn active_set_optimum(gram: &[f64], y: &[f64], eps: f64, c: f64) -> f64 {
        let n = y.len();
        let mut best = f64::INFINITY;
        let total = 5usize.pow(n as u32);
        for code in 0..total {
            let mut state = vec![0u8; n];
            let mut rest = code;
            for s in state.iter_mut() {
                *s = (rest % 5) as u8;
                rest /= 5;
            }
            let mut beta = vec![0.0; n];
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 1 || state[i] == 3).collect();
            for i in 0..n {
                beta[i] = match state[i] {
                    0 => -c,
                    4 => c,
                    _ => 0.0,
                };
            }
            // unknowns: beta_F and the multiplier nu
            let m = free.len() + 1;
            let mut a = vec![0.0; m * m];
            let mut rhs = vec![0.0; m];
            for (r, &i) in free.iter().enumerate() {
                let sign = if state[i] == 3 { 1.0 } else { -1.0 };
                for (q, &j) in free.iter().enumerate() {
                    a[r * m + q] = gram[i * n + j];
                }
                a[r * m + m - 1] = 1.0;
                let fixed: f64 = (0..n).filter(|k| !free.contains(k)).map(|k| gram[i * n + k] * beta[k]).sum();
                rhs[r] = y[i] - eps * sign - fixed;
            }
            for q in 0..free.len() {
                a[(m - 1) * m + q] = 1.0;
            }
            rhs[m - 1] = -beta.iter().sum::<f64>();
            let Some(sol) = gauss_solve(&mut a, &mut rhs, m) else {
                continue;
            };
            let mut ok = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                let good = if state[i] == 3 { v > 0.0 && v < c } else { v < 0.0 && v > -c };
                ok &= good;
                beta[i] = v;
            }
            if ok && libm::fabs(beta.iter().sum::<f64>()) < 1e-9 {
                best = f64::min(best, dual_objective(gram, y, eps, &beta));
            }
        }
        best
    }

    fn gauss_solve(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
        for col in 0..m {
            let piv = (col..m).max_by(|&p, &q| a[p * m + col].abs().partial_cmp(&a[q * m + col].abs()).unwrap())?;
            if a[piv * m + col].abs() < 1e-12 {
                return None;
            }
            for k in 0..m {
                a.swap(col * m + k, piv * m + k);
            }
            b.swap(col, piv);
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col] / a[col * m + col];
                    for k in 0..m {
                        a[r * m + k] -= f * a[col * m + k];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        Some((0..m).map(|i| b[i] / a[i * m + i]).collect())
    }

    fn series(values: Vec<u64>) -> RegionSeries {
        RegionSeries::new(
            RegionKey::country("Testland"),
            NaiveDate::from_ymd_opt(2020, 3, 1).unwrap(),
            values,
        )
    }

    #[test]
    fn constant_series_stays_in_tube() {
        for kernel in [Kernel::Linear, Kernel::default()] {
            let hyper = SvrHyper {
                kernel,
                ..SvrHyper::default()
            };
            let m = svr_fit(&series(vec![42; 12]), &hyper).unwrap();
            for t in 0..12 {
                assert!((svr_predict(&m, t as f64) - 42.0).abs() <= 1e-9);
            }
            m.check_feasible().unwrap();
        }
    }

    #[test]
    fn linear_data_is_reproduced_and_extrapolated() {
        let values = vec![3, 5, 7, 9, 11];
        let hyper = SvrHyper {
            kernel: Kernel::Linear,
            ..SvrHyper::default()
        };
        let (m, trace) = svr_fit_traced(&series(values.clone()), &hyper).unwrap();
        let tube = hyper.epsilon_tube * m.target_scaler.range();
        for (t, v) in values.iter().enumerate() {
            assert!((svr_predict(&m, t as f64) - *v as f64).abs() <= tube + 1e-6);
        }
        // the slope may shrink by at most two tube widths over the span
        let next = svr_predict(&m, 5.0);
        assert!((next - 13.0).abs() <= 2.0 * tube + 1e-6, "next {next}");

        let days: Vec<f64> = (0..5).map(f64::from).collect();
        let vals: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let (x, y) = scaled(&days, &vals);
        let gram = gram_of(Kernel::Linear, &x);
        let grid = grid_optimum(&gram[..], &y, hyper.epsilon_tube, hyper.c_reg, 0.1 * hyper.c_reg);
        assert!(trace.objective <= grid + 1e-3);
    }

    #[test]
    fn solver_matches_grid_on_tiny_sets() {
        let sets: [&[f64]; 3] = [&[1.0, 4.0], &[0.0, 10.0, 11.0], &[2.0, 3.0, 9.0, 30.0]];
        for kernel in [Kernel::Linear, Kernel::default(), Kernel::Rbf { gamma: 5.0 }] {
            for values in sets {
                let days: Vec<f64> = (0..values.len()).map(|d| d as f64).collect();
                let hyper = SvrHyper {
                    kernel,
                    c_reg: 1.0,
                    ..SvrHyper::default()
                };
                let (m, trace) = svr_fit_points(&days, values, &hyper).unwrap();
                m.check_feasible().unwrap();
                let (x, y) = scaled(&days, values);
                let gram = gram_of(kernel, &x);
                let grid = grid_optimum(&gram, &y, hyper.epsilon_tube, hyper.c_reg, 1e-2 * hyper.c_reg);
                assert!(trace.objective <= grid + 1e-3, "{kernel:?} {values:?}");
                assert!(trace.objective >= grid - 5e-3);
            }
        }
    }

    #[test]
    fn solver_matches_active_set_oracle() {
        let sets: [&[f64]; 3] = [&[0.0, 1.0, 5.0, 6.0, 20.0], &[5.0, 1.0, 8.0, 2.0, 9.0, 3.0], &[0.0, 0.0, 1.0, 3.0, 9.0, 27.0]];
        for gamma in [0.1, 2.0, 30.0] {
            for values in sets {
                let days: Vec<f64> = (0..values.len()).map(|d| d as f64).collect();
                let hyper = SvrHyper {
                    kernel: Kernel::Rbf { gamma },
                    tolerance: 1e-10,
                    ..SvrHyper::default()
                };
                let (m, trace) = svr_fit_points(&days, values, &hyper).unwrap();
                m.check_feasible().unwrap();
                let (x, y) = scaled(&days, values);
                let exact = active_set_optimum(&gram_of(hyper.kernel, &x), &y, hyper.epsilon_tube, hyper.c_reg);
                assert!((trace.objective - exact).abs() < 1e-6, "gamma {gamma} {values:?}: {} vs {exact}", trace.objective);
            }
        }
    }

    #[test]
    fn bias_only_model_is_constant() {
        let m = SvrModel {
            support_inputs: vec![],
            dual_coeffs: vec![],
            bias: 0.25,
            kernel: Kernel::default(),
            c_reg: 10.0,
            epsilon_tube: 0.01,
            input_scaler: ScalerParams::new(0.0, 10.0).unwrap(),
            target_scaler: ScalerParams::new(100.0, 500.0).unwrap(),
        };
        assert_eq!(svr_predict(&m, -3.0), 200.0);
        assert_eq!(svr_predict(&m, 1e6), 200.0);
    }

    #[test]
    fn rbf_decays_to_bias_far_away() {
        let hyper = SvrHyper {
            kernel: Kernel::Rbf { gamma: 1.0 },
            ..SvrHyper::default()
        };
        let m = svr_fit(&series(vec![1, 4, 9, 16, 25, 36, 49]), &hyper).unwrap();
        let far = svr_predict(&m, 1e4);
        assert!((far - m.target_scaler.unscale(m.bias)).abs() < 1e-9);
    }

    #[test]
    fn needs_two_points() {
        assert!(matches!(
            svr_fit(&series(vec![7]), &SvrHyper::default()),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn forecast_follows_predict() {
        let m = svr_fit(&series(vec![1, 2, 4, 8, 16, 32]), &SvrHyper::default()).unwrap();
        let f = svr_forecast(&m, 5, 3);
        assert_eq!(f, vec![svr_predict(&m, 6.0), svr_predict(&m, 7.0), svr_predict(&m, 8.0)]);
        assert!(svr_forecast(&m, 5, 0).is_empty());
    }

    proptest! {
        #[test]
        fn fits_are_always_feasible(values in proptest::collection::vec(0u64..10_000, 2..40), linear in any::<bool>()) {
            let hyper = SvrHyper {
                kernel: if linear { Kernel::Linear } else { Kernel::default() },
                ..SvrHyper::default()
            };
            let (m, trace) = svr_fit_traced(&series(values), &hyper).unwrap();
            prop_assert!(m.check_feasible().is_ok());
            prop_assert!(trace.objective <= 0.0);
        }

        #[test]
        fn prediction_is_continuous(values in proptest::collection::vec(0u64..1000, 3..15), t in -5.0f64..30.0) {
            let m = svr_fit(&series(values), &SvrHyper::default()).unwrap();
            let a = svr_predict(&m, t);
            let b = svr_predict(&m, t + 1e-9);
            prop_assert!((a - b).abs() <= 1e-5 * (1.0 + m.target_scaler.range()));
        }
    }
}
