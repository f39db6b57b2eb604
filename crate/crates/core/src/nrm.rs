//! Additive regression with a saturating piecewise-logistic trend and weekly
//! Fourier seasonality.
//!
//! ```text
//! y(t) = g(t) + s(t)
//! g(t) = C / (1 + exp(-(k + a(t)·δ) (t - (m + a(t)·γ))))
//! s(t) = Σ_n β_{2n-1} cos(2πnt/P) + β_{2n} sin(2πnt/P)
//! ```
//!
//! `a_j(t) = 1` once `t` reaches changepoint `s_j`, and the offset corrections
//! `γ` are derived from `(k, m, s, δ)` so the trend stays continuous at every
//! changepoint. Time `t` is the 0-based day offset from the first training
//! date.
//!
//! Fitting keeps `C` fixed and minimises squared error plus a smoothed L1
//! penalty on `δ` with the adaptive-moment optimizer over `(k, m, δ)`. The
//! seasonal coefficients enter linearly and are solved exactly by least
//! squares at every evaluation.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::data::RegionSeries;
use crate::error::{Error, Result};
use crate::numerics::OptimizerState;

#[derive(Debug, Clone, PartialEq)]
pub struct NrmParams {
    pub capacity: f64,
    pub growth_rate: f64,
    pub offset: f64,
    pub changepoints: Vec<f64>,
    pub rate_adjustments: Vec<f64>,
    pub offset_corrections: Vec<f64>,
    pub seasonal_coeffs: Vec<f64>,
    pub seasonal_period: f64,
    pub seasonal_order: usize,
}

impl NrmParams {
    /// Builds a parameter set, deriving the offset corrections.
    pub fn new(
        capacity: f64,
        growth_rate: f64,
        offset: f64,
        changepoints: Vec<f64>,
        rate_adjustments: Vec<f64>,
        seasonal_coeffs: Vec<f64>,
        seasonal_period: f64,
    ) -> Result<Self> {
        if !(capacity > 0.0 && capacity.is_finite()) {
            return Err(Error::Config("capacity must be positive and finite".into()));
        }
        if changepoints.len() != rate_adjustments.len() {
            return Err(Error::Shape {
                operand: "rate_adjustments",
                expected: changepoints.len(),
                found: rate_adjustments.len(),
            });
        }
        if changepoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("changepoints must be strictly ascending".into()));
        }
        if !seasonal_coeffs.len().is_multiple_of(2) {
            return Err(Error::Shape {
                operand: "seasonal_coeffs",
                expected: seasonal_coeffs.len() + 1,
                found: seasonal_coeffs.len(),
            });
        }
        if !(seasonal_period > 0.0) {
            return Err(Error::Config("seasonal period must be positive".into()));
        }
        let offset_corrections = compute_gammas(growth_rate, offset, &changepoints, &rate_adjustments)?;
        let seasonal_order = seasonal_coeffs.len() / 2;
        Ok(NrmParams {
            capacity,
            growth_rate,
            offset,
            changepoints,
            rate_adjustments,
            offset_corrections,
            seasonal_coeffs,
            seasonal_period,
            seasonal_order,
        })
    }

    /// Plain logistic curve without changepoints or seasonality.
    pub fn logistic(capacity: f64, growth_rate: f64, offset: f64) -> Result<Self> {
        NrmParams::new(capacity, growth_rate, offset, Vec::new(), Vec::new(), Vec::new(), 7.0)
    }

    /// Checks that the stored offset corrections agree with the rate
    /// adjustments to within `1e-9`.
    pub fn check_consistency(&self) -> Result<()> {
        let expected = compute_gammas(
            self.growth_rate,
            self.offset,
            &self.changepoints,
            &self.rate_adjustments,
        )?;
        if expected.len() != self.offset_corrections.len()
            || expected
                .iter()
                .zip(&self.offset_corrections)
                .any(|(a, b)| libm::fabs(a - b) > 1e-9 * f64::max(1.0, libm::fabs(*a)))
        {
            return Err(Error::Config(
                "offset corrections inconsistent with rate adjustments".into(),
            ));
        }
        if self.seasonal_coeffs.len() != 2 * self.seasonal_order {
            return Err(Error::Shape {
                operand: "seasonal_coeffs",
                expected: 2 * self.seasonal_order,
                found: self.seasonal_coeffs.len(),
            });
        }
        Ok(())
    }

    /// Growth rate after the last changepoint.
    pub fn final_rate(&self) -> f64 {
        self.growth_rate + self.rate_adjustments.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrmConfig {
    pub n_changepoints: usize,
    pub changepoint_range: f64,
    pub cap_multiplier: f64,
    /// Fixed carrying capacity; overrides `cap_multiplier` when set.
    pub capacity: Option<f64>,
    pub l1_penalty: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seasonality_enabled: bool,
    pub seasonal_order: usize,
    pub seasonal_period: f64,
    pub seed: u64,
}

impl Default for NrmConfig {
    fn default() -> Self {
        NrmConfig {
            n_changepoints: 25,
            changepoint_range: 0.8,
            cap_multiplier: 3.0,
            capacity: None,
            l1_penalty: 0.05,
            max_iterations: 2000,
            tolerance: 1e-8,
            seasonality_enabled: true,
            seasonal_order: 3,
            seasonal_period: 7.0,
            seed: 42,
        }
    }
}

impl NrmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.changepoint_range > 0.0 && self.changepoint_range <= 1.0) {
            return Err(Error::Config("changepoint_range must be in (0, 1]".into()));
        }
        if !(self.cap_multiplier > 1.0) {
            return Err(Error::Config("cap_multiplier must exceed 1".into()));
        }
        if !(self.l1_penalty >= 0.0) || !(self.tolerance >= 0.0) {
            return Err(Error::Config("l1_penalty and tolerance must be non-negative".into()));
        }
        if !(self.seasonal_period > 0.0) {
            return Err(Error::Config("seasonal_period must be positive".into()));
        }
        if let Some(c) = self.capacity {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config("capacity must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Uniform grid over the first `changepoint_range` of the training span,
/// rounded to whole days. Day 0 is dropped because a change there is the
/// base rate itself.
pub fn place_changepoints(train_days: usize, cfg: &NrmConfig) -> Vec<usize> {
    if cfg.n_changepoints == 0 || train_days < 2 {
        return Vec::new();
    }
    let end = cfg.changepoint_range * (train_days - 1) as f64;
    let n = cfg.n_changepoints as f64;
    let mut out: Vec<usize> = (1..=cfg.n_changepoints)
        .map(|i| libm::round(end * i as f64 / n) as usize)
        .filter(|&d| d > 0 && d < train_days)
        .collect();
    out.dedup();
    out
}

/// `a_j(t) = 1` when `t >= s_j`.
pub fn indicator_a(t: f64, changepoints: &[f64]) -> Vec<f64> {
    changepoints
        .iter()
        .map(|&s| if t >= s { 1.0 } else { 0.0 })
        .collect()
}

/// Offset corrections that keep the piecewise-logistic trend continuous,
/// computed left to right.
pub fn compute_gammas(k: f64, m: f64, changepoints: &[f64], deltas: &[f64]) -> Result<Vec<f64>> {
    if changepoints.len() != deltas.len() {
        return Err(Error::Shape {
            operand: "deltas",
            expected: changepoints.len(),
            found: deltas.len(),
        });
    }
    let mut gammas = Vec::with_capacity(deltas.len());
    let mut rate_before = k;
    let mut gamma_sum = 0.0;
    for (j, (&s, &d)) in changepoints.iter().zip(deltas).enumerate() {
        let rate_after = rate_before + d;
        if rate_after == 0.0 || !rate_after.is_finite() {
            return Err(Error::ZeroRate { changepoint: j });
        }
        let g = if d == 0.0 {
            0.0
        } else {
            (s - m - gamma_sum) * (1.0 - rate_before / rate_after)
        };
        gammas.push(g);
        gamma_sum += g;
        rate_before = rate_after;
    }
    Ok(gammas)
}

/// `C / (1 + exp(-z))` without overflow for large `|z|`.
fn saturating(capacity: f64, z: f64) -> f64 {
    if z >= 0.0 {
        capacity / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        capacity * e / (1.0 + e)
    }
}

fn trend_with(capacity: f64, k: f64, m: f64, s: &[f64], delta: &[f64], gamma: &[f64], t: f64) -> f64 {
    let mut rate = k;
    let mut shift = m;
    for ((&sj, &dj), &gj) in s.iter().zip(delta).zip(gamma) {
        if t >= sj {
            rate += dj;
            shift += gj;
        } else {
            break;
        }
    }
    saturating(capacity, rate * (t - shift))
}

pub fn logistic_trend(t: f64, p: &NrmParams) -> f64 {
    trend_with(
        p.capacity,
        p.growth_rate,
        p.offset,
        &p.changepoints,
        &p.rate_adjustments,
        &p.offset_corrections,
        t,
    )
}

fn fourier_row(t: f64, period: f64, order: usize, out: &mut [f64]) {
    for n in 1..=order {
        let angle = 2.0 * PI * n as f64 * t / period;
        out[2 * n - 2] = libm::cos(angle);
        out[2 * n - 1] = libm::sin(angle);
    }
}

pub fn seasonal_component(t: f64, p: &NrmParams) -> f64 {
    let order = p.seasonal_coeffs.len() / 2;
    let mut row = vec![0.0; 2 * order];
    fourier_row(t, p.seasonal_period, order, &mut row);
    row.iter().zip(&p.seasonal_coeffs).map(|(x, b)| x * b).sum()
}

/// Point prediction: trend plus seasonality (no holiday or noise term).
pub fn nrm_predict(t: f64, p: &NrmParams) -> f64 {
    logistic_trend(t, p) + seasonal_component(t, p)
}

/// Predictions for days `last_train_day + 1 ..= last_train_day + horizon`.
pub fn nrm_forecast(p: &NrmParams, last_train_day: usize, horizon: usize) -> Vec<f64> {
    (1..=horizon)
        .map(|h| nrm_predict((last_train_day + h) as f64, p))
        .collect()
}

/// Accepted objective values, one per accepted optimizer step (the first
/// entry is the initial point).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitTrace {
    pub objective: Vec<f64>,
    pub iterations: usize,
}

pub fn nrm_fit(series: &RegionSeries, cfg: &NrmConfig) -> Result<NrmParams> {
    nrm_fit_traced(series, cfg).map(|(p, _)| p)
}

const MIN_FIT_POINTS: usize = 5;
const L1_SMOOTHING: f64 = 1e-16;
const INITIAL_STEP: f64 = 0.05;
const MIN_STEP: f64 = 1e-9;
const CHECK_EVERY: usize = 50;

/// Fits in normalised units: time divided by the training span and counts
/// divided by the largest training value. The penalty applies to the rate
/// adjustments in those units.
pub fn nrm_fit_traced(series: &RegionSeries, cfg: &NrmConfig) -> Result<(NrmParams, FitTrace)> {
    nrm_fit_values(&series.values(), cfg)
}

/// Same as [`nrm_fit_traced`] on raw values indexed by day.
pub fn nrm_fit_values(values: &[f64], cfg: &NrmConfig) -> Result<(NrmParams, FitTrace)> {
    cfg.validate()?;
    if values.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientHistory {
            needed: MIN_FIT_POINTS,
            available: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite observation".into()));
    }
    let n = values.len();
    let y_max = values.iter().cloned().fold(0.0, f64::max);
    let y_scale = if y_max > 0.0 { y_max } else { 1.0 };
    let capacity = match cfg.capacity {
        Some(c) if c <= y_max => {
            return Err(Error::Config(alloc::format!(
                "capacity {c} must exceed the largest training value {y_max}"
            )))
        }
        Some(c) => c,
        None => cfg.cap_multiplier * y_scale,
    };
    let span = (n - 1) as f64;

    let problem = Problem::new(values, y_scale, capacity / y_scale, span, cfg);
    let mut theta = problem.initial_point();
    let mut best = problem.objective(&theta).map_err(|_| {
        Error::Fit("objective is not finite at the initial point".into())
    })?;

    let mut optimizer = OptimizerState::new(theta.len(), INITIAL_STEP);
    let mut trace = FitTrace {
        objective: vec![best.value],
        iterations: 0,
    };
    let mut checkpoint = best.value;
    let mut grad = vec![0.0; theta.len()];
    let mut candidate = theta.clone();

    for iter in 0..cfg.max_iterations {
        trace.iterations = iter + 1;
        problem.gradient(&theta, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Fit("non-finite objective gradient".into()));
        }
        candidate.copy_from_slice(&theta);
        let saved_lr = optimizer.learning_rate;
        optimizer.step(&mut candidate, &grad)?;
        shrink_adjustments(&optimizer, problem.penalty, &theta, &mut candidate);
        match problem.objective(&candidate) {
            Ok(eval) if eval.value <= best.value => {
                theta.copy_from_slice(&candidate);
                best = eval;
                trace.objective.push(best.value);
                optimizer.learning_rate = f64::min(optimizer.learning_rate * 1.1, INITIAL_STEP);
            }
            _ => {
                // Restart the moments: the stale momentum direction need not
                // descend from here, the plain normalised gradient does.
                let lr = saved_lr * 0.5;
                optimizer = OptimizerState::new(theta.len(), lr);
                if lr < MIN_STEP {
                    break;
                }
            }
        }
        if (iter + 1) % CHECK_EVERY == 0 {
            if checkpoint - best.value <= cfg.tolerance * f64::max(1.0, best.value) {
                break;
            }
            checkpoint = best.value;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::Fit("objective is not finite".into()));
    }
    let params = problem.to_params(&theta, &best.beta)?;
    Ok((params, trace))
}

/// Proximal step for the L1 term: the moment step moved `candidate` along the
/// squared-error gradient, now soft-threshold each adjustment with the
/// per-coordinate step size the optimizer just used.
fn shrink_adjustments(opt: &OptimizerState, penalty: f64, theta: &[f64], candidate: &mut [f64]) {
    if penalty == 0.0 {
        return;
    }
    let bias2 = 1.0 - libm::pow(opt.decay2, opt.step_count as f64);
    for j in 2..candidate.len() {
        let v_hat = opt.second_moment[j] / bias2;
        let scale = opt.learning_rate / (libm::sqrt(v_hat) + opt.epsilon);
        let threshold = penalty * scale;
        let z = candidate[j];
        candidate[j] = if z > threshold {
            z - threshold
        } else if z < -threshold {
            z + threshold
        } else {
            0.0
        };
        if !candidate[j].is_finite() {
            candidate[j] = theta[j];
        }
    }
}

struct Evaluation {
    value: f64,
    sse: f64,
    beta: Vec<f64>,
}

/// Normalised least-squares problem over `theta = [k, m, δ...]`.
struct Problem {
    y: Vec<f64>,
    y_scale: f64,
    capacity: f64,
    span: f64,
    t: Vec<f64>,
    changepoints: Vec<f64>,
    penalty: f64,
    period: f64,
    order: usize,
    /// Fourier design, one row of `2 * order` per observation.
    design: Vec<f64>,
    /// Cholesky factor of the (ridged) Gram matrix of `design`.
    gram_chol: Vec<f64>,
}

impl Problem {
    fn new(raw: &[f64], y_scale: f64, capacity: f64, span: f64, cfg: &NrmConfig) -> Self {
        let n = raw.len();
        let t: Vec<f64> = (0..n).map(|i| i as f64 / span).collect();
        let changepoints = place_changepoints(n, cfg)
            .into_iter()
            .map(|d| d as f64 / span)
            .collect();
        let order = if cfg.seasonality_enabled { cfg.seasonal_order } else { 0 };
        let width = 2 * order;
        let mut design = vec![0.0; n * width];
        for i in 0..n {
            fourier_row(i as f64, cfg.seasonal_period, order, &mut design[i * width..(i + 1) * width]);
        }
        let mut gram = vec![0.0; width * width];
        for i in 0..n {
            let row = &design[i * width..(i + 1) * width];
            for a in 0..width {
                for b in 0..width {
                    gram[a * width + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..width {
            gram[a * width + a] += 1e-9 * n as f64;
        }
        let gram_chol = cholesky(&gram, width);
        Problem {
            y: raw.iter().map(|v| v / y_scale).collect(),
            y_scale,
            capacity,
            span,
            t,
            changepoints,
            // the penalty acts on per-day adjustments of the raw-count objective
            penalty: cfg.l1_penalty / (y_scale * y_scale * span),
            period: cfg.seasonal_period,
            order,
            design,
            gram_chol,
        }
    }

    fn n_changepoints(&self) -> usize {
        self.changepoints.len()
    }

    /// Logistic through the first and last (lightly smoothed) observations.
    fn initial_point(&self) -> Vec<f64> {
        let (k, m) = self.logit_regression().unwrap_or_else(|| self.endpoint_guess());
        let mut theta = vec![0.0; 2 + self.n_changepoints()];
        theta[0] = k;
        theta[1] = m;
        theta
    }

    /// Weighted fit of `logit(y / C)` against time; weights follow the delta
    /// method so saturated points barely count.
    fn logit_regression(&self) -> Option<(f64, f64)> {
        let c = self.capacity;
        let (mut sw, mut st, mut sz, mut stt, mut stz) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&t, &y) in self.t.iter().zip(&self.y) {
            let p = y / c;
            if !(1e-3..=1.0 - 1e-3).contains(&p) {
                continue;
            }
            let w = (p * (1.0 - p)) * (p * (1.0 - p));
            let z = libm::log(p / (1.0 - p));
            sw += w;
            st += w * t;
            sz += w * z;
            stt += w * t * t;
            stz += w * t * z;
        }
        let var = stt * sw - st * st;
        if sw <= 0.0 || var <= 1e-12 * sw * sw {
            return None;
        }
        let k = (stz * sw - st * sz) / var;
        if !(k > 1e-6) {
            return None;
        }
        let intercept = (sz - k * st) / sw;
        Some((k, -intercept / k))
    }

    fn endpoint_guess(&self) -> (f64, f64) {
        let n = self.y.len();
        let head = self.y[..3.min(n)].iter().sum::<f64>() / 3.min(n) as f64;
        let tail = self.y[n - 3.min(n)..].iter().sum::<f64>() / 3.min(n) as f64;
        let c = self.capacity;
        let clamp = |v: f64| v.clamp(1e-4 * c, (1.0 - 1e-4) * c);
        let (y0, y1) = (clamp(head), clamp(tail));
        let l0 = libm::log(c / y0 - 1.0);
        let mut l1 = libm::log(c / y1 - 1.0);
        if libm::fabs(l0 - l1) < 1e-6 {
            l1 = l0 - 1e-5;
        }
        // normalised time runs from 0 to 1
        let k = l0 - l1;
        (k, l0 / k)
    }

    fn trend_residuals(&self, theta: &[f64], out: &mut [f64]) -> Result<()> {
        let (k, m) = (theta[0], theta[1]);
        let delta = &theta[2..];
        let gamma = compute_gammas(k, m, &self.changepoints, delta)?;
        for (i, &t) in self.t.iter().enumerate() {
            out[i] = self.y[i] - trend_with(self.capacity, k, m, &self.changepoints, delta, &gamma, t);
        }
        Ok(())
    }

    /// Penalised objective with the seasonal coefficients profiled out.
    fn objective(&self, theta: &[f64]) -> Result<Evaluation> {
        let n = self.y.len();
        let mut r = vec![0.0; n];
        self.trend_residuals(theta, &mut r)?;
        let beta = self.solve_seasonal(&r);
        let width = 2 * self.order;
        let mut sse = 0.0;
        for i in 0..n {
            let row = &self.design[i * width..(i + 1) * width];
            let fit: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let e = r[i] - fit;
            sse += e * e;
        }
        let l1: f64 = theta[2..]
            .iter()
            .map(|d| libm::sqrt(d * d + L1_SMOOTHING))
            .sum();
        let value = sse + self.penalty * l1;
        if !value.is_finite() {
            return Err(Error::Fit("objective is not finite".into()));
        }
        Ok(Evaluation { value, sse, beta })
    }

    /// Squared-error part of the objective, infinite where undefined.
    fn value(&self, theta: &[f64]) -> f64 {
        self.objective(theta).map(|e| e.sse).unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, theta: &[f64], out: &mut [f64]) {
        let mut probe = theta.to_vec();
        for i in 0..theta.len() {
            let h = 1e-6 * f64::max(1.0, libm::fabs(theta[i]));
            probe[i] = theta[i] + h;
            let plus = self.value(&probe);
            probe[i] = theta[i] - h;
            let minus = self.value(&probe);
            probe[i] = theta[i];
            out[i] = (plus - minus) / (2.0 * h);
        }
    }

    fn solve_seasonal(&self, r: &[f64]) -> Vec<f64> {
        let width = 2 * self.order;
        if width == 0 {
            return Vec::new();
        }
        let mut rhs = vec![0.0; width];
        for (i, &ri) in r.iter().enumerate() {
            let row = &self.design[i * width..(i + 1) * width];
            for (acc, x) in rhs.iter_mut().zip(row) {
                *acc += x * ri;
            }
        }
        cholesky_solve(&self.gram_chol, width, &rhs)
    }

    fn to_params(&self, theta: &[f64], beta: &[f64]) -> Result<NrmParams> {
        let span = self.span;
        let k = theta[0] / span;
        let m = theta[1] * span;
        let changepoints: Vec<f64> = self.changepoints.iter().map(|s| libm::round(s * span)).collect();
        let deltas: Vec<f64> = theta[2..].iter().map(|d| d / span).collect();
        let seasonal: Vec<f64> = beta.iter().map(|b| b * self.y_scale).collect();
        NrmParams::new(
            self.capacity * self.y_scale,
            k,
            m,
            changepoints,
            deltas,
            seasonal,
            self.period,
        )
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
fn cholesky(a: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                l[i * n + i] = libm::sqrt(f64::max(s, 1e-300));
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    l
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}
