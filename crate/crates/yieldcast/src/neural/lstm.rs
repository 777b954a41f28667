//! LSTM cells and stacked networks trained by backpropagation through time.
//!
//! Gate equations per step, with sigma the logistic function:
//!
//! f_t = sigma(w_fx x_t + w_fh h_{t-1} + b_f)        forget gate
//! i_t = sigma(w_ix x_t + w_ih h_{t-1} + b_i)        input gate
//! c'_t = tanh(w_cx x_t + w_ch h_{t-1} + b_c)        candidate state
//! o_t = sigma(w_ox x_t + w_oh h_{t-1} + b_o)        output gate
//! C_t = f_t C_{t-1} + i_t c'_t
//! h_t = o_t tanh(C_t)
//!
//! Gradients are exact (the finite-difference check in the tests holds every
//! parameter tensor to a 1e-4 relative error); truncation happens only at
//! sequence/batch boundaries.

use crate::linalg::Mat;
use crate::rng::Rng64;

use super::{glorot_uniform, Loss, RmsProp};

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub const GATES: usize = 4; // forget, input, candidate, output

/// One LSTM layer: four gates of input weights, recurrent weights, biases.
#[derive(Debug, Clone)]
pub struct LstmCell {
    /// Gate order: [forget, input, candidate, output]; each units×features.
    pub w_x: [Mat; GATES],
    /// Recurrent weights, units×units.
    pub w_h: [Mat; GATES],
    pub b: [Vec<f64>; GATES],
    pub units: usize,
    pub features: usize,
}

impl LstmCell {
    pub fn new(features: usize, units: usize, rng: &mut Rng64) -> Self {
        let w_x = std::array::from_fn(|_| glorot_uniform(units, features, rng));
        let w_h = std::array::from_fn(|_| {
            // Scaled uniform for the recurrent weights.
            let mut m = glorot_uniform(units, units, rng);
            for v in m.data_mut() {
                *v *= 0.8;
            }
            m
        });
        let mut b: [Vec<f64>; GATES] = std::array::from_fn(|_| vec![0.0; units]);
        // Forget-gate bias starts at one to keep early gradients flowing.
        for v in b[0].iter_mut() {
            *v = 1.0;
        }
        LstmCell {
            w_x,
            w_h,
            b,
            units,
            features,
        }
    }

    pub fn zeros_like(&self) -> LstmCell {
        LstmCell {
            w_x: std::array::from_fn(|g| Mat::zeros(self.w_x[g].rows(), self.w_x[g].cols())),
            w_h: std::array::from_fn(|g| Mat::zeros(self.w_h[g].rows(), self.w_h[g].cols())),
            b: std::array::from_fn(|_| vec![0.0; self.units]),
            units: self.units,
            features: self.features,
        }
    }
}

/// Cached activations for one step of one layer, kept for BPTT.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub gates: [Vec<f64>; GATES], // f, i, c', o after activation
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Single cell step; exposed so the gate equations can be exercised directly.
pub fn lstm_step(cell: &LstmCell, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    assert_eq!(x.len(), cell.features, "feature dimension mismatch");
    assert_eq!(h_prev.len(), cell.units);
    assert_eq!(c_prev.len(), cell.units);
    let u = cell.units;
    let mut pre: [Vec<f64>; GATES] = std::array::from_fn(|_| vec![0.0; u]);
    for g in 0..GATES {
        for o in 0..u {
            let mut v = cell.b[g][o];
            let wrow = cell.w_x[g].row(o);
            for (a, b) in wrow.iter().zip(x.iter()) {
                v += a * b;
            }
            let rrow = cell.w_h[g].row(o);
            for (a, b) in rrow.iter().zip(h_prev.iter()) {
                v += a * b;
            }
            pre[g][o] = v;
        }
    }
    let f: Vec<f64> = pre[0].iter().map(|&v| sigmoid(v)).collect();
    let i: Vec<f64> = pre[1].iter().map(|&v| sigmoid(v)).collect();
    let cand: Vec<f64> = pre[2].iter().map(|&v| v.tanh()).collect();
    let o: Vec<f64> = pre[3].iter().map(|&v| sigmoid(v)).collect();
    let c: Vec<f64> = (0..u).map(|k| f[k] * c_prev[k] + i[k] * cand[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..u).map(|k| o[k] * tanh_c[k]).collect();
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: [f, i, cand, o],
        c,
        tanh_c,
        h,
    }
}

/// Stacked LSTM layers with a linear scalar head.
#[derive(Debug, Clone)]
pub struct LstmNetwork {
    pub cells: Vec<LstmCell>,
    /// 1×units output weights and bias.
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

/// Hidden/cell state per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn zeros(net: &LstmNetwork) -> Self {
        LstmState {
            h: net.cells.iter().map(|c| vec![0.0; c.units]).collect(),
            c: net.cells.iter().map(|c| vec![0.0; c.units]).collect(),
        }
    }
}

/// Per-layer dropout masks (input and recurrent), drawn per batch.
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    pub x: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

impl DropoutMasks {
    pub fn ones(net: &LstmNetwork) -> Self {
        DropoutMasks {
            x: net.cells.iter().map(|c| vec![1.0; c.features]).collect(),
            h: net.cells.iter().map(|c| vec![1.0; c.units]).collect(),
        }
    }

    /// Inverted-dropout masks at the given rate.
    pub fn draw(net: &LstmNetwork, rate: f64, rng: &mut Rng64) -> Self {
        let keep = 1.0 - rate;
        let mut draw_vec = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| if rng.uniform() < keep { 1.0 / keep } else { 0.0 })
                .collect()
        };
        DropoutMasks {
            x: net.cells.iter().map(|c| draw_vec(c.features)).collect(),
            h: net.cells.iter().map(|c| draw_vec(c.units)).collect(),
        }
    }
}

pub struct LstmGrads {
    pub cells: Vec<LstmCell>,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

impl LstmNetwork {
    /// `layer_units` gives the width of each stacked layer in order.
    pub fn new(features: usize, layer_units: &[usize], seed: u64) -> Self {
        assert!(!layer_units.is_empty());
        let mut rng = Rng64::substream(seed, 1);
        let mut cells = Vec::with_capacity(layer_units.len());
        let mut n_in = features;
        for &units in layer_units {
            cells.push(LstmCell::new(n_in, units, &mut rng));
            n_in = units;
        }
        let top = *layer_units.last().unwrap();
        let head = glorot_uniform(1, top, &mut rng);
        LstmNetwork {
            cells,
            head_w: head.row(0).to_vec(),
            head_b: 0.0,
        }
    }

    pub fn zero_grads(&self) -> LstmGrads {
        LstmGrads {
            cells: self.cells.iter().map(|c| c.zeros_like()).collect(),
            head_w: vec![0.0; self.head_w.len()],
            head_b: 0.0,
        }
    }

    /// Runs the stack over one timestep, mutating `state`; returns the head
    /// output and the per-layer caches.
    pub fn forward_step(
        &self,
        x: &[f64],
        state: &mut LstmState,
        masks: &DropoutMasks,
    ) -> (f64, Vec<StepCache>) {
        let mut caches = Vec::with_capacity(self.cells.len());
        let mut input = x.to_vec();
        for (li, cell) in self.cells.iter().enumerate() {
            let masked_x: Vec<f64> = input
                .iter()
                .zip(masks.x[li].iter())
                .map(|(a, m)| a * m)
                .collect();
            let masked_h: Vec<f64> = state.h[li]
                .iter()
                .zip(masks.h[li].iter())
                .map(|(a, m)| a * m)
                .collect();
            let cache = lstm_step(cell, &masked_x, &masked_h, &state.c[li]);
            state.h[li] = cache.h.clone();
            state.c[li] = cache.c.clone();
            input = cache.h.clone();
            caches.push(cache);
        }
        let yhat = self.head_b
            + self
                .head_w
                .iter()
                .zip(input.iter())
                .map(|(w, v)| w * v)
                .sum::<f64>();
        (yhat, caches)
    }

    /// Prediction over a sequence with dropout disabled, starting from (and
    /// mutating) `state`.
    pub fn predict_sequence(&self, inputs: &Mat, state: &mut LstmState) -> Vec<f64> {
        let masks = DropoutMasks::ones(self);
        (0..inputs.rows())
            .map(|r| self.forward_step(inputs.row(r), state, &masks).0)
            .collect()
    }

    /// Mean loss over a sequence from a zero state, dropout off.
    pub fn evaluate(&self, inputs: &Mat, targets: &[f64], loss: Loss) -> f64 {
        let mut state = LstmState::zeros(self);
        let preds = self.predict_sequence(inputs, &mut state);
        preds
            .iter()
            .zip(targets.iter())
            .map(|(p, t)| loss.value(*p, *t))
            .sum::<f64>()
            / targets.len() as f64
    }

    /// Forward + BPTT over a chunk of consecutive timesteps. State enters as
    /// `state` and leaves updated (values only; gradients truncate at the
    /// chunk boundary). Returns (summed loss, gradients).
    pub fn backprop_chunk(
        &self,
        inputs: &Mat,
        targets: &[f64],
        loss: Loss,
        state: &mut LstmState,
        masks: &DropoutMasks,
        scale: f64,
    ) -> (f64, LstmGrads) {
        let steps = inputs.rows();
        let n_layers = self.cells.len();
        let mut caches: Vec<Vec<StepCache>> = Vec::with_capacity(steps);
        let mut yhats = Vec::with_capacity(steps);
        let mut total_loss = 0.0;
        for t in 0..steps {
            let (yhat, step_caches) = self.forward_step(inputs.row(t), state, masks);
            total_loss += loss.value(yhat, targets[t]);
            yhats.push(yhat);
            caches.push(step_caches);
        }

        let mut grads = self.zero_grads();
        // Gradients flowing backwards through time per layer.
        let mut dh_next: Vec<Vec<f64>> =
            self.cells.iter().map(|c| vec![0.0; c.units]).collect();
        let mut dc_next: Vec<Vec<f64>> =
            self.cells.iter().map(|c| vec![0.0; c.units]).collect();

        for t in (0..steps).rev() {
            let dy = loss.grad(yhats[t], targets[t]) * scale;
            // Head gradients and the gradient reaching the top layer.
            let top_h = &caches[t][n_layers - 1].h;
            for (k, hv) in top_h.iter().enumerate() {
                grads.head_w[k] += dy * hv;
            }
            grads.head_b += dy;
            let mut dh_from_above: Vec<f64> =
                self.head_w.iter().map(|w| w * dy).collect();

            for li in (0..n_layers).rev() {
                let cell = &self.cells[li];
                let cache = &caches[t][li];
                let u = cell.units;
                let mut dh = dh_from_above.clone();
                for k in 0..u {
                    dh[k] += dh_next[li][k];
                }
                let (f, i, cand, o) = (
                    &cache.gates[0],
                    &cache.gates[1],
                    &cache.gates[2],
                    &cache.gates[3],
                );
                // dC_total = dh*o*(1-tanh²C) + dc from the future.
                let mut dc = vec![0.0; u];
                for k in 0..u {
                    dc[k] = dh[k] * o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k])
                        + dc_next[li][k];
                }
                let mut dz = [
                    vec![0.0; u], // forget
                    vec![0.0; u], // input
                    vec![0.0; u], // candidate
                    vec![0.0; u], // output
                ];
                for k in 0..u {
                    dz[0][k] = dc[k] * cache.c_prev[k] * f[k] * (1.0 - f[k]);
                    dz[1][k] = dc[k] * cand[k] * i[k] * (1.0 - i[k]);
                    dz[2][k] = dc[k] * i[k] * (1.0 - cand[k] * cand[k]);
                    dz[3][k] = dh[k] * cache.tanh_c[k] * o[k] * (1.0 - o[k]);
                }
                // Parameter gradients (inputs are already masked in the cache).
                for g in 0..GATES {
                    for k in 0..u {
                        let d = dz[g][k];
                        if d == 0.0 {
                            continue;
                        }
                        grads.cells[li].b[g][k] += d;
                        for (j, xv) in cache.x.iter().enumerate() {
                            grads.cells[li].w_x[g].add_to(k, j, d * xv);
                        }
                        for (j, hv) in cache.h_prev.iter().enumerate() {
                            grads.cells[li].w_h[g].add_to(k, j, d * hv);
                        }
                    }
                }
                // Gradients to the masked inputs, then through the masks.
                let mut dx = vec![0.0; cell.features];
                let mut dh_prev = vec![0.0; u];
                for g in 0..GATES {
                    for k in 0..u {
                        let d = dz[g][k];
                        if d == 0.0 {
                            continue;
                        }
                        let wrow = cell.w_x[g].row(k);
                        for (j, w) in wrow.iter().enumerate() {
                            dx[j] += w * d;
                        }
                        let rrow = cell.w_h[g].row(k);
                        for (j, w) in rrow.iter().enumerate() {
                            dh_prev[j] += w * d;
                        }
                    }
                }
                for (j, v) in dx.iter_mut().enumerate() {
                    *v *= masks.x[li][j];
                }
                for (j, v) in dh_prev.iter_mut().enumerate() {
                    *v *= masks.h[li][j];
                }
                // dc_prev = dC * f.
                for k in 0..u {
                    dc_next[li][k] = dc[k] * f[k];
                    dh_next[li][k] = dh_prev[k];
                }
                dh_from_above = dx;
            }
        }
        (total_loss, grads)
    }

    /// One chronological pass over the data in chunks of `batch_size` steps.
    /// `carry_state` keeps hidden/cell state across chunk boundaries
    /// (the stateful regime); otherwise state resets to zero per chunk.
    #[allow(clippy::too_many_arguments)]
    pub fn train_epoch(
        &mut self,
        inputs: &Mat,
        targets: &[f64],
        batch_size: usize,
        loss: Loss,
        dropout: f64,
        carry_state: bool,
        state: &mut LstmState,
        opt: &mut RmsProp,
        rng: &mut Rng64,
    ) -> f64 {
        let n = inputs.rows();
        let mut total = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + batch_size).min(n);
            if !carry_state {
                *state = LstmState::zeros(self);
            }
            let masks = if dropout > 0.0 {
                DropoutMasks::draw(self, dropout, rng)
            } else {
                DropoutMasks::ones(self)
            };
            let chunk = inputs.slice_rows(start, end);
            let scale = 1.0 / (end - start) as f64;
            let (chunk_loss, grads) =
                self.backprop_chunk(&chunk, &targets[start..end], loss, state, &masks, scale);
            total += chunk_loss;
            self.apply_grads(&grads, opt);
            start = end;
        }
        total / n as f64
    }

    fn apply_grads(&mut self, grads: &LstmGrads, opt: &mut RmsProp) {
        let mut slot = 0;
        for (li, cell) in self.cells.iter_mut().enumerate() {
            for g in 0..GATES {
                opt.step(slot, cell.w_x[g].data_mut(), grads.cells[li].w_x[g].data());
                slot += 1;
                opt.step(slot, cell.w_h[g].data_mut(), grads.cells[li].w_h[g].data());
                slot += 1;
                opt.step(slot, &mut cell.b[g], &grads.cells[li].b[g]);
                slot += 1;
            }
        }
        opt.step(slot, &mut self.head_w, &grads.head_w);
        slot += 1;
        let mut hb = [self.head_b];
        opt.step(slot, &mut hb, &[grads.head_b]);
        self.head_b = hb[0];
    }

    pub fn n_param_slots(&self) -> usize {
        self.cells.len() * GATES * 3 + 2
    }

    /// Flattens every parameter into one vector; paired with `set_params`
    /// for the finite-difference gradient checks.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for cell in &self.cells {
            for g in 0..GATES {
                out.extend_from_slice(cell.w_x[g].data());
                out.extend_from_slice(cell.w_h[g].data());
                out.extend_from_slice(&cell.b[g]);
            }
        }
        out.extend_from_slice(&self.head_w);
        out.push(self.head_b);
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut at = 0;
        for cell in &mut self.cells {
            for g in 0..GATES {
                let nw = cell.w_x[g].data().len();
                cell.w_x[g].data_mut().copy_from_slice(&flat[at..at + nw]);
                at += nw;
                let nh = cell.w_h[g].data().len();
                cell.w_h[g].data_mut().copy_from_slice(&flat[at..at + nh]);
                at += nh;
                let nb = cell.b[g].len();
                cell.b[g].copy_from_slice(&flat[at..at + nb]);
                at += nb;
            }
        }
        let nw = self.head_w.len();
        self.head_w.copy_from_slice(&flat[at..at + nw]);
        at += nw;
        self.head_b = flat[at];
    }

    /// Flattened gradients in the same order as `flatten_params`.
    pub fn flatten_grads(grads: &LstmGrads) -> Vec<f64> {
        let mut out = Vec::new();
        for cell in &grads.cells {
            for g in 0..GATES {
                out.extend_from_slice(cell.w_x[g].data());
                out.extend_from_slice(cell.w_h[g].data());
                out.extend_from_slice(&cell.b[g]);
            }
        }
        out.extend_from_slice(&grads.head_w);
        out.push(grads.head_b);
        out
    }
}
