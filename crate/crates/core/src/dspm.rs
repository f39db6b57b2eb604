//! Stacked LSTM sequence model with a hand-written backward pass.
//!
//! Each region gets its own model. A window of `lookback` scaled values is fed
//! one scalar per time step into the first layer; every higher layer consumes
//! the hidden output of the layer below at the same step. A dense head maps
//! the top layer's final hidden state to the next scaled value.
//!
//! Parameters are exposed both structurally ([`LstmLayerParams`]) and as a
//! flat vector in a fixed order: for every layer `W_f, W_i, W_C, W_o` (row
//! major), then `b_f, b_i, b_C, b_o`; after all layers the head weights and
//! finally the head bias.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{make_windows, RegionSeries, ScalerParams, Window, DEFAULT_LOOKBACK};
use crate::error::{Error, Result};
use crate::numerics::{affine_concat_into, dot, sigmoid, tanh, Matrix, OptimizerState};

/// Weights and biases of one LSTM layer. Every matrix is
/// `hidden x (hidden + input)` and acts on `[h_prev, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let cols = hidden_size + input_size;
        LstmLayerParams {
            w_f: Matrix::zeros(hidden_size, cols),
            w_i: Matrix::zeros(hidden_size, cols),
            w_c: Matrix::zeros(hidden_size, cols),
            w_o: Matrix::zeros(hidden_size, cols),
            b_f: vec![0.0; hidden_size],
            b_i: vec![0.0; hidden_size],
            b_c: vec![0.0; hidden_size],
            b_o: vec![0.0; hidden_size],
        }
    }

    /// Uniform fan-in initialisation; the forget bias starts at 1.
    pub fn random<R: rand::Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let cols = hidden_size + input_size;
        let bound = 1.0 / libm::sqrt(cols as f64);
        LstmLayerParams {
            w_f: Matrix::random_uniform(hidden_size, cols, bound, rng),
            w_i: Matrix::random_uniform(hidden_size, cols, bound, rng),
            w_c: Matrix::random_uniform(hidden_size, cols, bound, rng),
            w_o: Matrix::random_uniform(hidden_size, cols, bound, rng),
            b_f: vec![1.0; hidden_size],
            b_i: vec![0.0; hidden_size],
            b_c: vec![0.0; hidden_size],
            b_o: vec![0.0; hidden_size],
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_f.rows()
    }

    pub fn input_size(&self) -> usize {
        self.w_f.cols() - self.w_f.rows()
    }

    pub fn n_params(&self) -> usize {
        let h = self.hidden_size();
        4 * h * self.w_f.cols() + 4 * h
    }

    fn matrices(&self) -> [&Matrix; 4] {
        [&self.w_f, &self.w_i, &self.w_c, &self.w_o]
    }

    fn matrices_mut(&mut self) -> [&mut Matrix; 4] {
        [&mut self.w_f, &mut self.w_i, &mut self.w_c, &mut self.w_o]
    }

    fn biases(&self) -> [&Vec<f64>; 4] {
        [&self.b_f, &self.b_i, &self.b_c, &self.b_o]
    }

    fn biases_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.b_f, &mut self.b_i, &mut self.b_c, &mut self.b_o]
    }

    fn check_shapes(&self) -> Result<()> {
        let (rows, cols) = (self.w_f.rows(), self.w_f.cols());
        for m in self.matrices() {
            if m.rows() != rows || m.cols() != cols {
                return Err(Error::Shape {
                    operand: "gate weight matrix",
                    expected: rows * cols,
                    found: m.rows() * m.cols(),
                });
            }
        }
        for b in self.biases() {
            if b.len() != rows {
                return Err(Error::Shape {
                    operand: "gate bias",
                    expected: rows,
                    found: b.len(),
                });
            }
        }
        if cols < rows {
            return Err(Error::Shape {
                operand: "gate weight matrix columns",
                expected: rows,
                found: cols,
            });
        }
        Ok(())
    }

    fn extend_flat(&self, out: &mut Vec<f64>) {
        for m in self.matrices() {
            out.extend_from_slice(m.as_slice());
        }
        for b in self.biases() {
            out.extend_from_slice(b);
        }
    }

    fn read_flat(&mut self, flat: &[f64]) -> usize {
        let mut at = 0;
        for m in self.matrices_mut() {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        for b in self.biases_mut() {
            let n = b.len();
            b.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        at
    }
}

/// Hidden output `h` and cell memory `c` of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden_size],
            c: vec![0.0; hidden_size],
        }
    }
}

/// Gate activations kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GateValues {
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
}

/// One cell update: forget, input and output gates, candidate memory, new
/// cell memory and new hidden output.
pub fn lstm_cell_step(
    params: &LstmLayerParams,
    x: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, GateValues)> {
    let hidden = params.hidden_size();
    if prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(Error::Shape {
            operand: "previous state",
            expected: hidden,
            found: prev.h.len().max(prev.c.len()),
        });
    }
    if x.len() != params.input_size() {
        return Err(Error::Shape {
            operand: "x",
            expected: params.input_size(),
            found: x.len(),
        });
    }
    let mut forget = vec![0.0; hidden];
    let mut input = vec![0.0; hidden];
    let mut candidate = vec![0.0; hidden];
    let mut output = vec![0.0; hidden];
    affine_concat_into(&params.w_f, &prev.h, x, &params.b_f, &mut forget)?;
    affine_concat_into(&params.w_i, &prev.h, x, &params.b_i, &mut input)?;
    affine_concat_into(&params.w_c, &prev.h, x, &params.b_c, &mut candidate)?;
    affine_concat_into(&params.w_o, &prev.h, x, &params.b_o, &mut output)?;
    forget.iter_mut().for_each(|v| *v = sigmoid(*v));
    input.iter_mut().for_each(|v| *v = sigmoid(*v));
    candidate.iter_mut().for_each(|v| *v = tanh(*v));
    output.iter_mut().for_each(|v| *v = sigmoid(*v));

    let c: Vec<f64> = (0..hidden)
        .map(|j| forget[j] * prev.c[j] + input[j] * candidate[j])
        .collect();
    let h: Vec<f64> = (0..hidden).map(|j| output[j] * tanh(c[j])).collect();
    Ok((
        LstmState { h, c },
        GateValues {
            forget,
            input,
            candidate,
            output,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DspmHyper {
    pub stack_depth: usize,
    pub hidden_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lookback: usize,
    pub seed: u64,
}

impl Default for DspmHyper {
    fn default() -> Self {
        DspmHyper {
            stack_depth: 4,
            hidden_size: 32,
            epochs: 200,
            learning_rate: 1e-2,
            lookback: DEFAULT_LOOKBACK,
            seed: 42,
        }
    }
}

impl DspmHyper {
    pub fn validate(&self) -> Result<()> {
        if self.stack_depth == 0 || self.hidden_size == 0 || self.epochs == 0 || self.lookback == 0 {
            return Err(Error::Config(
                "stack_depth, hidden_size, epochs and lookback must all be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DspmModel {
    pub layers: Vec<LstmLayerParams>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
    pub scaler: ScalerParams,
    pub lookback: usize,
}

impl DspmModel {
    /// All-zero network; predicts `output_bias` (0) everywhere.
    pub fn zeros(stack_depth: usize, hidden_size: usize, lookback: usize, scaler: ScalerParams) -> Self {
        let layers = (0..stack_depth)
            .map(|l| LstmLayerParams::zeros(if l == 0 { 1 } else { hidden_size }, hidden_size))
            .collect();
        DspmModel {
            layers,
            output_weights: vec![0.0; hidden_size],
            output_bias: 0.0,
            scaler,
            lookback,
        }
    }

    pub fn random<R: rand::Rng + ?Sized>(
        stack_depth: usize,
        hidden_size: usize,
        lookback: usize,
        scaler: ScalerParams,
        rng: &mut R,
    ) -> Self {
        let layers = (0..stack_depth)
            .map(|l| LstmLayerParams::random(if l == 0 { 1 } else { hidden_size }, hidden_size, rng))
            .collect();
        let bound = 1.0 / libm::sqrt(hidden_size as f64);
        let output_weights = (0..hidden_size)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        DspmModel {
            layers,
            output_weights,
            output_bias: 0.0,
            scaler,
            lookback,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.output_weights.len()
    }

    pub fn stack_depth(&self) -> usize {
        self.layers.len()
    }

    /// Checks the stacking invariants.
    pub fn validate(&self) -> Result<()> {
        let hidden = self.hidden_size();
        if self.layers.is_empty() {
            return Err(Error::Config("model needs at least one LSTM layer".into()));
        }
        if self.lookback == 0 {
            return Err(Error::Config("lookback must be at least 1".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.check_shapes()?;
            if layer.hidden_size() != hidden {
                return Err(Error::Shape {
                    operand: "layer hidden size",
                    expected: hidden,
                    found: layer.hidden_size(),
                });
            }
            let expected_input = if l == 0 { 1 } else { hidden };
            if layer.input_size() != expected_input {
                return Err(Error::Shape {
                    operand: "layer input size",
                    expected: expected_input,
                    found: layer.input_size(),
                });
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(LstmLayerParams::n_params).sum::<usize>() + self.hidden_size() + 1
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            layer.extend_flat(&mut out);
        }
        out.extend_from_slice(&self.output_weights);
        out.push(self.output_bias);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Shape {
                operand: "flat parameters",
                expected: self.n_params(),
                found: flat.len(),
            });
        }
        let mut at = 0;
        for layer in &mut self.layers {
            at += layer.read_flat(&flat[at..]);
        }
        let h = self.output_weights.len();
        self.output_weights.copy_from_slice(&flat[at..at + h]);
        self.output_bias = flat[at + h];
        Ok(())
    }

    /// Same architecture, every parameter zero. Used as a gradient buffer.
    fn zeroed_like(&self) -> DspmGradients {
        DspmGradients {
            layers: self
                .layers
                .iter()
                .map(|l| LstmLayerParams::zeros(l.input_size(), l.hidden_size()))
                .collect(),
            output_weights: vec![0.0; self.hidden_size()],
            output_bias: 0.0,
        }
    }
}

/// Everything one cell step produced, for replay in the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub input: Vec<f64>,
    pub prev: LstmState,
    pub gates: GateValues,
    pub next: LstmState,
}

/// Forward-pass record indexed as `steps[time][layer]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    pub steps: Vec<Vec<StepRecord>>,
    pub prediction: f64,
}

/// Gradients with the same layout as [`DspmModel`]'s trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DspmGradients {
    pub layers: Vec<LstmLayerParams>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl DspmGradients {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            layer.extend_flat(&mut out);
        }
        out.extend_from_slice(&self.output_weights);
        out.push(self.output_bias);
        out
    }
}

pub fn dspm_forward(model: &DspmModel, window: &[f64]) -> Result<(f64, Tape)> {
    if window.len() != model.lookback {
        return Err(Error::Shape {
            operand: "window",
            expected: model.lookback,
            found: window.len(),
        });
    }
    let hidden = model.hidden_size();
    let mut states: Vec<LstmState> = model.layers.iter().map(|_| LstmState::zeros(hidden)).collect();
    let mut steps = Vec::with_capacity(window.len());
    for &value in window {
        let mut records = Vec::with_capacity(model.layers.len());
        let mut input = vec![value];
        for (layer, state) in model.layers.iter().zip(states.iter_mut()) {
            let (next, gates) = lstm_cell_step(layer, &input, state)?;
            let prev = core::mem::replace(state, next.clone());
            let out = next.h.clone();
            records.push(StepRecord {
                input,
                prev,
                gates,
                next,
            });
            input = out;
        }
        steps.push(records);
    }
    let top = &states.last().expect("validated non-empty stack").h;
    if top.len() != model.output_weights.len() {
        return Err(Error::Shape {
            operand: "output weights",
            expected: top.len(),
            found: model.output_weights.len(),
        });
    }
    let prediction = dot(&model.output_weights, top) + model.output_bias;
    Ok((prediction, Tape { steps, prediction }))
}

/// Gradient of `0.5 * (prediction - target)^2` with respect to every parameter.
pub fn dspm_backward(model: &DspmModel, tape: &Tape, target: f64) -> DspmGradients {
    let mut grads = model.zeroed_like();
    accumulate_backward(model, tape, target, &mut grads);
    grads
}

fn accumulate_backward(model: &DspmModel, tape: &Tape, target: f64, grads: &mut DspmGradients) {
    let depth = model.layers.len();
    let hidden = model.hidden_size();
    let n_steps = tape.steps.len();
    if n_steps == 0 {
        return;
    }
    let d_pred = tape.prediction - target;
    if d_pred == 0.0 {
        return;
    }
    grads.output_bias += d_pred;
    let top_h = &tape.steps[n_steps - 1][depth - 1].next.h;
    for (g, &h) in grads.output_weights.iter_mut().zip(top_h) {
        *g += d_pred * h;
    }

    // Gradients flowing backwards in time, one slot per layer.
    let mut dh_time = vec![vec![0.0; hidden]; depth];
    let mut dc_time = vec![vec![0.0; hidden]; depth];
    let mut da = [vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden]];
    let mut z = Vec::new();
    let mut dz = Vec::new();

    for t in (0..n_steps).rev() {
        // Gradient arriving from above: the head at the final step, nothing otherwise.
        let mut dh_above: Vec<f64> = if t == n_steps - 1 {
            model.output_weights.iter().map(|w| d_pred * w).collect()
        } else {
            vec![0.0; hidden]
        };
        for l in (0..depth).rev() {
            let rec = &tape.steps[t][l];
            let params = &model.layers[l];
            let g = &mut grads.layers[l];
            let gates = &rec.gates;
            for j in 0..hidden {
                let dh = dh_above[j] + dh_time[l][j];
                let tanh_c = tanh(rec.next.c[j]);
                let o = gates.output[j];
                let dc = dc_time[l][j] + dh * o * (1.0 - tanh_c * tanh_c);
                let (f, i, cand) = (gates.forget[j], gates.input[j], gates.candidate[j]);
                da[0][j] = dc * rec.prev.c[j] * f * (1.0 - f);
                da[1][j] = dc * cand * i * (1.0 - i);
                da[2][j] = dc * i * (1.0 - cand * cand);
                da[3][j] = dh * tanh_c * o * (1.0 - o);
                dc_time[l][j] = dc * f;
            }

            z.clear();
            z.extend_from_slice(&rec.prev.h);
            z.extend_from_slice(&rec.input);
            dz.clear();
            dz.resize(z.len(), 0.0);
            let params_w = params.matrices();
            for (k, (gw, gb)) in [
                (&mut g.w_f, &mut g.b_f),
                (&mut g.w_i, &mut g.b_i),
                (&mut g.w_c, &mut g.b_c),
                (&mut g.w_o, &mut g.b_o),
            ]
            .into_iter()
            .enumerate()
            {
                gw.add_outer(&da[k], &z);
                for (b, d) in gb.iter_mut().zip(&da[k]) {
                    *b += d;
                }
                params_w[k].add_transpose_mul(&da[k], &mut dz);
            }
            dh_time[l].copy_from_slice(&dz[..hidden]);
            dh_above = dz[hidden..].to_vec();
        }
    }
}

/// Per-epoch training losses (mean squared error in scaled space).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub losses: Vec<f64>,
}

pub fn dspm_train(series: &RegionSeries, hyper: &DspmHyper) -> Result<DspmModel> {
    dspm_train_traced(series, hyper).map(|(model, _)| model)
}

/// Full-batch training on every window of the series; deterministic in
/// `(series, hyper)`.
pub fn dspm_train_traced(series: &RegionSeries, hyper: &DspmHyper) -> Result<(DspmModel, TrainTrace)> {
    hyper.validate()?;
    let raw = series.values();
    if raw.len() < hyper.lookback + 1 {
        return Err(Error::InsufficientHistory {
            needed: hyper.lookback + 1,
            available: raw.len(),
        });
    }
    let scaler = ScalerParams::fit(&raw)?;
    let scaled: Vec<f64> = raw.iter().map(|&v| scaler.scale(v)).collect();
    let windows = make_windows(&scaled, hyper.lookback)?;
    dspm_train_on_windows(&windows, scaler, hyper)
}

/// Trains on pre-built windows already expressed in `scaler` units.
///
/// Used directly when the caller wants to hold out a subset of windows.
pub fn dspm_train_on_windows(
    windows: &[Window],
    scaler: ScalerParams,
    hyper: &DspmHyper,
) -> Result<(DspmModel, TrainTrace)> {
    hyper.validate()?;
    if windows.is_empty() {
        return Err(Error::InsufficientHistory {
            needed: hyper.lookback + 1,
            available: 0,
        });
    }
    if let Some(w) = windows.iter().find(|w| w.input.len() != hyper.lookback) {
        return Err(Error::Shape {
            operand: "window",
            expected: hyper.lookback,
            found: w.input.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut model = DspmModel::random(hyper.stack_depth, hyper.hidden_size, hyper.lookback, scaler, &mut rng);
    let mut params = model.to_flat();
    let mut optimizer = OptimizerState::new(params.len(), hyper.learning_rate);
    let mut trace = TrainTrace::default();

    for epoch in 0..hyper.epochs {
        let (mse, grads) = batch_gradient(&model, windows)?;
        if !mse.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        trace.losses.push(mse);
        optimizer.step(&mut params, &grads)?;
        model.set_flat(&params)?;
    }
    Ok((model, trace))
}

/// Mean squared error over `windows` and the gradient of half of it.
pub fn batch_gradient(model: &DspmModel, windows: &[Window]) -> Result<(f64, Vec<f64>)> {
    let mut grads = model.zeroed_like();
    let mut sq = 0.0;
    for w in windows {
        let (pred, tape) = dspm_forward(model, &w.input)?;
        let e = pred - w.target;
        sq += e * e;
        accumulate_backward(model, &tape, w.target, &mut grads);
    }
    let n = windows.len().max(1) as f64;
    let mut flat = grads.to_flat();
    flat.iter_mut().for_each(|g| *g /= n);
    Ok((sq / n, flat))
}

/// Iterated one-step forecast of the `horizon` days after `history`, in case
/// units (unrounded).
pub fn dspm_forecast(model: &DspmModel, history: &RegionSeries, horizon: usize) -> Result<Vec<f64>> {
    dspm_forecast_values(model, &history.values(), horizon)
}

pub fn dspm_forecast_values(model: &DspmModel, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if history.len() < model.lookback {
        return Err(Error::InsufficientHistory {
            needed: model.lookback,
            available: history.len(),
        });
    }
    let mut window: Vec<f64> = history[history.len() - model.lookback..]
        .iter()
        .map(|&v| model.scaler.scale(v))
        .collect();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let (pred, _) = dspm_forward(model, &window)?;
        out.push(model.scaler.unscale(pred));
        window.remove(0);
        window.push(pred);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RegionKey;
    use crate::numerics::gradient_check;
    use chrono::NaiveDate;
    use rand::Rng;

    fn unit_scaler() -> ScalerParams {
        ScalerParams::new(0.0, 1.0).unwrap()
    }

    fn series(values: Vec<u64>) -> RegionSeries {
        RegionSeries::new(
            RegionKey::country("Testland"),
            NaiveDate::from_ymd_opt(2020, 1, 22).unwrap(),
            values,
        )
    }

    /// Scalar-by-scalar evaluation of the gate equations, written without the
    /// matrix helpers.
    fn scalar_cell(p: &LstmLayerParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = p.hidden_size();
        let pre = |w: &Matrix, b: &[f64], j: usize| {
            let mut s = b[j];
            for k in 0..n {
                s += w.get(j, k) * h[k];
            }
            for k in 0..x.len() {
                s += w.get(j, n + k) * x[k];
            }
            s
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h_new = vec![0.0; n];
        let mut c_new = vec![0.0; n];
        for j in 0..n {
            let f = sig(pre(&p.w_f, &p.b_f, j));
            let i = sig(pre(&p.w_i, &p.b_i, j));
            let cand = pre(&p.w_c, &p.b_c, j).tanh();
            let o = sig(pre(&p.w_o, &p.b_o, j));
            c_new[j] = f * c[j] + i * cand;
            h_new[j] = o * c_new[j].tanh();
        }
        (h_new, c_new)
    }

    #[test]
    fn zero_cell_step() {
        let p = LstmLayerParams::zeros(1, 3);
        let (next, gates) = lstm_cell_step(&p, &[0.0], &LstmState::zeros(3)).unwrap();
        assert!(gates.forget.iter().chain(&gates.input).chain(&gates.output).all(|&g| g == 0.5));
        assert!(gates.candidate.iter().all(|&g| g == 0.0));
        assert!(next.c.iter().chain(&next.h).all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_memory() {
        let mut p = LstmLayerParams::zeros(1, 1);
        p.b_f = vec![100.0];
        let prev = LstmState {
            h: vec![0.0],
            c: vec![2.0],
        };
        let (next, gates) = lstm_cell_step(&p, &[0.0], &prev).unwrap();
        assert!((gates.forget[0] - 1.0).abs() < 1e-12);
        assert!((next.c[0] - 2.0).abs() < 1e-12);
        // H = 0.5 * tanh(2)
        assert!((next.h[0] - 0.5 * 2.0f64.tanh()).abs() < 1e-12);
        assert!((next.h[0] - 0.48201).abs() < 1e-5);
    }

    #[test]
    fn random_cell_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = LstmLayerParams::random(1, 2, &mut rng);
        let prev = LstmState {
            h: vec![0.3, -0.7],
            c: vec![1.1, -0.4],
        };
        let (next, _) = lstm_cell_step(&p, &[0.9], &prev).unwrap();
        let (h, c) = scalar_cell(&p, &[0.9], &prev.h, &prev.c);
        for j in 0..2 {
            assert!((next.h[j] - h[j]).abs() < 1e-12);
            assert!((next.c[j] - c[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_rejects_bad_shapes() {
        let p = LstmLayerParams::zeros(1, 2);
        assert!(lstm_cell_step(&p, &[0.0, 1.0], &LstmState::zeros(2)).is_err());
        assert!(lstm_cell_step(&p, &[0.0], &LstmState::zeros(3)).is_err());
    }

    #[test]
    fn zero_network_predicts_bias() {
        let mut m = DspmModel::zeros(3, 4, 5, unit_scaler());
        m.output_bias = 0.37;
        let (pred, _) = dspm_forward(&m, &[0.1, 0.5, 0.2, 0.9, 1.0]).unwrap();
        assert_eq!(pred, 0.37);
    }

    #[test]
    fn chained_hand_evaluation() {
        let mut m = DspmModel::zeros(1, 1, 2, unit_scaler());
        let l = &mut m.layers[0];
        // columns: [h, x]
        l.w_f = Matrix::from_vec(1, 2, vec![0.2, -0.5]).unwrap();
        l.w_i = Matrix::from_vec(1, 2, vec![0.4, 0.8]).unwrap();
        l.w_c = Matrix::from_vec(1, 2, vec![-0.3, 1.2]).unwrap();
        l.w_o = Matrix::from_vec(1, 2, vec![0.6, 0.1]).unwrap();
        l.b_f = vec![0.1];
        l.b_i = vec![-0.2];
        l.b_c = vec![0.05];
        l.b_o = vec![0.3];
        m.output_weights = vec![1.5];
        m.output_bias = -0.25;

        let (h1, c1) = scalar_cell(&m.layers[0], &[1.0], &[0.0], &[0.0]);
        let (h2, _) = scalar_cell(&m.layers[0], &[0.0], &h1, &c1);
        let expected = 1.5 * h2[0] - 0.25;
        let (pred, _) = dspm_forward(&m, &[1.0, 0.0]).unwrap();
        assert!((pred - expected).abs() < 1e-14);
    }

    #[test]
    fn tape_satisfies_gate_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DspmModel::random(3, 4, 6, unit_scaler(), &mut rng);
        let window: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..2.0)).collect();
        let (_, tape) = dspm_forward(&m, &window).unwrap();
        for step in &tape.steps {
            for rec in step {
                let g = &rec.gates;
                for j in 0..4 {
                    for v in [g.forget[j], g.input[j], g.output[j]] {
                        assert!(v > 0.0 && v < 1.0);
                    }
                    assert_eq!(rec.next.c[j], g.forget[j] * rec.prev.c[j] + g.input[j] * g.candidate[j]);
                    assert_eq!(rec.next.h[j], g.output[j] * tanh(rec.next.c[j]));
                }
            }
        }
    }

    #[test]
    fn exact_prediction_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = DspmModel::random(2, 3, 4, unit_scaler(), &mut rng);
        let (pred, tape) = dspm_forward(&m, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = dspm_backward(&m, &tape, pred);
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    fn check_bptt(depth: usize, hidden: usize, lookback: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DspmModel::random(depth, hidden, lookback, unit_scaler(), &mut rng);
        // perturb biases away from their init values so every path is exercised
        let mut flat = m.to_flat();
        flat.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
        m.set_flat(&flat).unwrap();
        let window: Vec<f64> = (0..lookback).map(|_| rng.random_range(0.0..1.0)).collect();
        let target = rng.random_range(0.0..1.0);
        let (_, tape) = dspm_forward(&m, &window).unwrap();
        let analytic = dspm_backward(&m, &tape, target).to_flat();
        let mut probe = m.clone();
        gradient_check(
            |p| {
                probe.set_flat(p).unwrap();
                let (pred, _) = dspm_forward(&probe, &window).unwrap();
                0.5 * (pred - target) * (pred - target)
            },
            &analytic,
            &flat,
            1e-5,
        )
    }

    #[test]
    fn bptt_single_layer() {
        let err = check_bptt(1, 2, 3, 5);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn bptt_four_layer_stack() {
        let err = check_bptt(4, 3, 4, 9);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DspmModel::random(2, 3, 4, unit_scaler(), &mut rng);
        let mut z = DspmModel::zeros(2, 3, 4, unit_scaler());
        z.set_flat(&m.to_flat()).unwrap();
        assert_eq!(z, m);
        assert_eq!(m.to_flat().len(), m.n_params());
    }

    #[test]
    fn constant_series_trains_to_tiny_loss() {
        let s = series(vec![5; 20]);
        let (_, trace) = dspm_train_traced(&s, &DspmHyper::default()).unwrap();
        assert!(*trace.losses.last().unwrap() < 1e-4);
    }

    #[test]
    fn logistic_holdout_beats_naive() {
        let raw: Vec<f64> = (0..200)
            .map(|t| libm::round(50_000.0 / (1.0 + libm::exp(-0.05 * (t as f64 - 100.0)))))
            .collect();
        let scaler = ScalerParams::fit(&raw).unwrap();
        let scaled: Vec<f64> = raw.iter().map(|&v| scaler.scale(v)).collect();
        let windows = make_windows(&scaled, DEFAULT_LOOKBACK).unwrap();
        let (train, held): (Vec<_>, Vec<_>) = windows.into_iter().enumerate().partition(|(i, _)| i % 5 != 0);
        let train: Vec<Window> = train.into_iter().map(|(_, w)| w).collect();
        let (model, _) = dspm_train_on_windows(&train, scaler, &DspmHyper::default()).unwrap();
        let (mut model_err, mut naive_err) = (0.0, 0.0);
        for (_, w) in &held {
            let (pred, _) = dspm_forward(&model, &w.input).unwrap();
            let last = *w.input.last().unwrap();
            model_err += (scaler.unscale(pred) - scaler.unscale(w.target)).abs();
            naive_err += (scaler.unscale(last) - scaler.unscale(w.target)).abs();
        }
        assert!(model_err < naive_err, "model {model_err} naive {naive_err}");
    }

    #[test]
    fn training_is_deterministic() {
        let s = series((0..30).map(|i| i * i).collect());
        let hyper = DspmHyper {
            stack_depth: 2,
            hidden_size: 4,
            epochs: 20,
            ..DspmHyper::default()
        };
        let (a, ta) = dspm_train_traced(&s, &hyper).unwrap();
        let (b, tb) = dspm_train_traced(&s, &hyper).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn training_needs_history() {
        let s = series(vec![1, 2, 3]);
        assert!(matches!(
            dspm_train(&s, &DspmHyper::default()),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn forecast_edge_cases() {
        let scaler = ScalerParams::new(10.0, 110.0).unwrap();
        let mut m = DspmModel::zeros(2, 3, 3, scaler);
        m.output_bias = 0.25;
        let h = series(vec![10, 20, 30, 40]);
        assert!(dspm_forecast(&m, &h, 0).unwrap().is_empty());
        let f = dspm_forecast(&m, &h, 4).unwrap();
        assert!(f.iter().all(|&v| (v - 35.0).abs() < 1e-12));
        assert!(dspm_forecast(&m, &series(vec![1, 2]), 1).is_err());
    }

    #[test]
    fn forecast_base_case_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let scaler = ScalerParams::new(0.0, 400.0).unwrap();
        let m = DspmModel::random(2, 3, 4, scaler, &mut rng);
        let h = series(vec![10, 50, 90, 150, 220, 300]);
        let window: Vec<f64> = [90.0, 150.0, 220.0, 300.0].iter().map(|&v| scaler.scale(v)).collect();
        let (pred, _) = dspm_forward(&m, &window).unwrap();
        assert_eq!(dspm_forecast(&m, &h, 1).unwrap(), vec![scaler.unscale(pred)]);

        // with a fixed scaler, history before the last window is irrelevant
        let other = series(vec![999, 1, 90, 150, 220, 300]);
        assert_eq!(dspm_forecast(&m, &other, 3).unwrap(), dspm_forecast(&m, &h, 3).unwrap());
    }
}
