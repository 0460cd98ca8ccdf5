//! Minimal dense/LSTM network kernel with reverse-mode gradients.
//!
//! All parameters of a [`Network`] live in one flat `Vec<f64>` so that
//! optimizers, soft target updates, and checkpoints can treat a network
//! as a plain parameter vector. Forward passes run one time step per
//! call; sequences are processed by repeated calls against a [`State`]
//! that carries LSTM hidden and cell vectors. Recording steps into a
//! [`Tape`] enables full backpropagation through time afterwards.

mod adam;
mod gradcheck;

pub use adam::Adam;
pub use gradcheck::max_relative_error;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Pointwise nonlinearity applied after a dense layer's affine map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One layer of a [`Network`].
///
/// Dense parameters are laid out as the weight matrix `W` (`output` x
/// `input`, row major) followed by the bias vector when `bias` is set.
/// LSTM parameters are `W_ih` (`4*hidden` x `input`), then `W_hh`
/// (`4*hidden` x `hidden`), then the bias (`4*hidden`), with gate rows
/// grouped in the order input, forget, candidate, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
        bias: bool,
    },
    Lstm {
        input: usize,
        hidden: usize,
    },
}

impl LayerSpec {
    pub fn input_dim(&self) -> usize {
        match *self {
            LayerSpec::Dense { input, .. } => input,
            LayerSpec::Lstm { input, .. } => input,
        }
    }

    pub fn output_dim(&self) -> usize {
        match *self {
            LayerSpec::Dense { output, .. } => output,
            LayerSpec::Lstm { hidden, .. } => hidden,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense {
                input,
                output,
                bias,
                ..
            } => output * input + if bias { output } else { 0 },
            LayerSpec::Lstm { input, hidden } => {
                4 * hidden * input + 4 * hidden * hidden + 4 * hidden
            }
        }
    }
}

/// Per-layer recurrent state: `(h, c)` for every LSTM layer in layer order.
#[derive(Clone, Debug, Default)]
pub struct State {
    lstm: Vec<(Vec<f64>, Vec<f64>)>,
}

impl State {
    pub fn reset(&mut self) {
        for (h, c) in &mut self.lstm {
            h.iter_mut().for_each(|v| *v = 0.0);
            c.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

#[derive(Clone, Debug)]
enum LayerRecord {
    Dense {
        x: Vec<f64>,
        z: Vec<f64>,
    },
    Lstm {
        x: Vec<f64>,
        h_prev: Vec<f64>,
        c_prev: Vec<f64>,
        gi: Vec<f64>,
        gf: Vec<f64>,
        gg: Vec<f64>,
        go: Vec<f64>,
        c: Vec<f64>,
    },
}

/// Recorded forward steps for a later [`Network::backward`] call.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    steps: Vec<Vec<LayerRecord>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.steps.clear();
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// A feedforward or recurrent network over `f64` with flat parameters.
#[derive(Clone, Debug)]
pub struct Network {
    specs: Vec<LayerSpec>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

impl Network {
    /// Builds a network with all parameters zero. Consecutive layer
    /// dimensions must agree.
    pub fn new(specs: Vec<LayerSpec>) -> Self {
        assert!(!specs.is_empty(), "network needs at least one layer");
        for pair in specs.windows(2) {
            assert_eq!(
                pair[0].output_dim(),
                pair[1].input_dim(),
                "layer output dim must match next layer input dim"
            );
        }
        let mut offsets = Vec::with_capacity(specs.len());
        let mut total = 0;
        for spec in &specs {
            offsets.push(total);
            total += spec.param_count();
        }
        Self {
            specs,
            offsets,
            params: vec![0.0; total],
        }
    }

    /// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights
    /// (LSTM layers use `1/sqrt(hidden)` throughout), zero biases, and
    /// a forget-gate bias of one so early training does not erase cell
    /// memory.
    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        for (idx, spec) in self.specs.iter().enumerate() {
            let base = self.offsets[idx];
            match *spec {
                LayerSpec::Dense {
                    input,
                    output,
                    bias,
                    ..
                } => {
                    let bound = 1.0 / (input as f64).sqrt();
                    for w in &mut self.params[base..base + output * input] {
                        *w = rng.random_range(-bound..=bound);
                    }
                    if bias {
                        let b0 = base + output * input;
                        self.params[b0..b0 + output].iter_mut().for_each(|v| *v = 0.0);
                    }
                }
                LayerSpec::Lstm { input, hidden } => {
                    let bound = 1.0 / (hidden as f64).sqrt();
                    let weight_count = 4 * hidden * input + 4 * hidden * hidden;
                    for w in &mut self.params[base..base + weight_count] {
                        *w = rng.random_range(-bound..=bound);
                    }
                    let b0 = base + weight_count;
                    for gate in 0..4 * hidden {
                        self.params[b0 + gate] = if gate >= hidden && gate < 2 * hidden {
                            1.0
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.params.len(), "parameter count mismatch");
        self.params.copy_from_slice(params);
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.specs[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.specs[self.specs.len() - 1].output_dim()
    }

    pub fn has_recurrent_layers(&self) -> bool {
        self.specs
            .iter()
            .any(|s| matches!(s, LayerSpec::Lstm { .. }))
    }

    /// Fresh all-zero recurrent state sized for this network.
    pub fn new_state(&self) -> State {
        let lstm = self
            .specs
            .iter()
            .filter_map(|s| match *s {
                LayerSpec::Lstm { hidden, .. } => {
                    Some((vec![0.0; hidden], vec![0.0; hidden]))
                }
                _ => None,
            })
            .collect();
        State { lstm }
    }

    /// One forward time step, updating `state` in place.
    pub fn step(&self, x: &[f64], state: &mut State) -> Vec<f64> {
        self.step_inner(x, state, None)
    }

    /// One forward time step that also records intermediates onto `tape`.
    pub fn step_traced(&self, x: &[f64], state: &mut State, tape: &mut Tape) -> Vec<f64> {
        let mut records = Vec::with_capacity(self.specs.len());
        let out = self.step_inner(x, state, Some(&mut records));
        tape.steps.push(records);
        out
    }

    /// Forward pass for networks without recurrent layers.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert!(
            !self.has_recurrent_layers(),
            "apply() would silently reset recurrent state; use step()"
        );
        let mut state = State::default();
        self.step_inner(x, &mut state, None)
    }

    fn step_inner(
        &self,
        x: &[f64],
        state: &mut State,
        mut records: Option<&mut Vec<LayerRecord>>,
    ) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        let mut cur = x.to_vec();
        let mut lstm_idx = 0;
        for (idx, spec) in self.specs.iter().enumerate() {
            let base = self.offsets[idx];
            match *spec {
                LayerSpec::Dense {
                    input,
                    output,
                    activation,
                    bias,
                } => {
                    let w = &self.params[base..base + output * input];
                    let mut z = vec![0.0; output];
                    for r in 0..output {
                        let row = &w[r * input..(r + 1) * input];
                        let mut acc = 0.0;
                        for (wv, xv) in row.iter().zip(cur.iter()) {
                            acc += wv * xv;
                        }
                        if bias {
                            acc += self.params[base + output * input + r];
                        }
                        z[r] = acc;
                    }
                    let y: Vec<f64> = z.iter().map(|&v| activation.apply(v)).collect();
                    if let Some(recs) = records.as_deref_mut() {
                        recs.push(LayerRecord::Dense {
                            x: cur.clone(),
                            z,
                        });
                    }
                    cur = y;
                }
                LayerSpec::Lstm { input, hidden } => {
                    let (h_prev, c_prev) = {
                        let (h, c) = &state.lstm[lstm_idx];
                        (h.clone(), c.clone())
                    };
                    let w_ih = &self.params[base..base + 4 * hidden * input];
                    let hh0 = base + 4 * hidden * input;
                    let w_hh = &self.params[hh0..hh0 + 4 * hidden * hidden];
                    let b0 = hh0 + 4 * hidden * hidden;
                    let bias = &self.params[b0..b0 + 4 * hidden];

                    let mut pre = vec![0.0; 4 * hidden];
                    for r in 0..4 * hidden {
                        let mut acc = bias[r];
                        let row_ih = &w_ih[r * input..(r + 1) * input];
                        for (wv, xv) in row_ih.iter().zip(cur.iter()) {
                            acc += wv * xv;
                        }
                        let row_hh = &w_hh[r * hidden..(r + 1) * hidden];
                        for (wv, hv) in row_hh.iter().zip(h_prev.iter()) {
                            acc += wv * hv;
                        }
                        pre[r] = acc;
                    }

                    let mut gi = vec![0.0; hidden];
                    let mut gf = vec![0.0; hidden];
                    let mut gg = vec![0.0; hidden];
                    let mut go = vec![0.0; hidden];
                    let mut c = vec![0.0; hidden];
                    let mut h = vec![0.0; hidden];
                    for j in 0..hidden {
                        gi[j] = sigmoid(pre[j]);
                        gf[j] = sigmoid(pre[hidden + j]);
                        gg[j] = pre[2 * hidden + j].tanh();
                        go[j] = sigmoid(pre[3 * hidden + j]);
                        c[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
                        h[j] = go[j] * c[j].tanh();
                    }

                    if let Some(recs) = records.as_deref_mut() {
                        recs.push(LayerRecord::Lstm {
                            x: cur.clone(),
                            h_prev: h_prev.clone(),
                            c_prev: c_prev.clone(),
                            gi: gi.clone(),
                            gf: gf.clone(),
                            gg: gg.clone(),
                            go: go.clone(),
                            c: c.clone(),
                        });
                    }

                    state.lstm[lstm_idx] = (h.clone(), c);
                    lstm_idx += 1;
                    cur = h;
                }
            }
        }
        cur
    }

    /// Backpropagation through all recorded steps of `tape`.
    ///
    /// `d_out[s]` is the loss gradient with respect to the network
    /// output at step `s`. Parameter gradients accumulate into `grads`
    /// (callers zero it between batches); the return value holds the
    /// loss gradient with respect to the network input at each step.
    /// Recurrent state entering the first recorded step is treated as
    /// constant, which is the usual truncation boundary.
    pub fn backward(&self, tape: &Tape, d_out: &[Vec<f64>], grads: &mut [f64]) -> Vec<Vec<f64>> {
        assert_eq!(tape.steps.len(), d_out.len(), "one d_out per recorded step");
        assert_eq!(grads.len(), self.params.len(), "gradient buffer size mismatch");

        let lstm_layers = self
            .specs
            .iter()
            .filter(|s| matches!(s, LayerSpec::Lstm { .. }))
            .count();
        // dh/dc flowing backwards in time, one pair per LSTM layer.
        let mut carry_h: Vec<Vec<f64>> = Vec::with_capacity(lstm_layers);
        let mut carry_c: Vec<Vec<f64>> = Vec::with_capacity(lstm_layers);
        for spec in &self.specs {
            if let LayerSpec::Lstm { hidden, .. } = *spec {
                carry_h.push(vec![0.0; hidden]);
                carry_c.push(vec![0.0; hidden]);
            }
        }

        let mut d_inputs = vec![Vec::new(); tape.steps.len()];
        for step in (0..tape.steps.len()).rev() {
            let records = &tape.steps[step];
            assert_eq!(records.len(), self.specs.len(), "tape/network layer mismatch");
            let mut d_cur = d_out[step].clone();
            let mut lstm_idx = lstm_layers;
            for (idx, spec) in self.specs.iter().enumerate().rev() {
                let base = self.offsets[idx];
                match (*spec, &records[idx]) {
                    (
                        LayerSpec::Dense {
                            input,
                            output,
                            activation,
                            bias,
                        },
                        LayerRecord::Dense { x, z },
                    ) => {
                        assert_eq!(d_cur.len(), output);
                        let mut dz = vec![0.0; output];
                        for r in 0..output {
                            dz[r] = d_cur[r] * activation.derivative(z[r]);
                        }
                        for r in 0..output {
                            let row = base + r * input;
                            for cix in 0..input {
                                grads[row + cix] += dz[r] * x[cix];
                            }
                        }
                        if bias {
                            let b0 = base + output * input;
                            for r in 0..output {
                                grads[b0 + r] += dz[r];
                            }
                        }
                        let mut dx = vec![0.0; input];
                        for r in 0..output {
                            let row = base + r * input;
                            for cix in 0..input {
                                dx[cix] += self.params[row + cix] * dz[r];
                            }
                        }
                        d_cur = dx;
                    }
                    (
                        LayerSpec::Lstm { input, hidden },
                        LayerRecord::Lstm {
                            x,
                            h_prev,
                            c_prev,
                            gi,
                            gf,
                            gg,
                            go,
                            c,
                        },
                    ) => {
                        lstm_idx -= 1;
                        assert_eq!(d_cur.len(), hidden);
                        let mut dh = d_cur.clone();
                        for j in 0..hidden {
                            dh[j] += carry_h[lstm_idx][j];
                        }

                        // Pre-activation gradients in gate-row order i, f, g, o.
                        let mut d_pre = vec![0.0; 4 * hidden];
                        let mut dc_prev = vec![0.0; hidden];
                        for j in 0..hidden {
                            let tc = c[j].tanh();
                            let dc = dh[j] * go[j] * (1.0 - tc * tc) + carry_c[lstm_idx][j];
                            let d_go = dh[j] * tc;
                            let d_gi = dc * gg[j];
                            let d_gf = dc * c_prev[j];
                            let d_gg = dc * gi[j];
                            d_pre[j] = d_gi * gi[j] * (1.0 - gi[j]);
                            d_pre[hidden + j] = d_gf * gf[j] * (1.0 - gf[j]);
                            d_pre[2 * hidden + j] = d_gg * (1.0 - gg[j] * gg[j]);
                            d_pre[3 * hidden + j] = d_go * go[j] * (1.0 - go[j]);
                            dc_prev[j] = dc * gf[j];
                        }

                        let hh0 = base + 4 * hidden * input;
                        let b0 = hh0 + 4 * hidden * hidden;
                        let mut dx = vec![0.0; input];
                        let mut dh_prev = vec![0.0; hidden];
                        for r in 0..4 * hidden {
                            let dp = d_pre[r];
                            let row_ih = base + r * input;
                            for cix in 0..input {
                                grads[row_ih + cix] += dp * x[cix];
                                dx[cix] += self.params[row_ih + cix] * dp;
                            }
                            let row_hh = hh0 + r * hidden;
                            for cix in 0..hidden {
                                grads[row_hh + cix] += dp * h_prev[cix];
                                dh_prev[cix] += self.params[row_hh + cix] * dp;
                            }
                            grads[b0 + r] += dp;
                        }

                        carry_h[lstm_idx] = dh_prev;
                        carry_c[lstm_idx] = dc_prev;
                        d_cur = dx;
                    }
                    _ => unreachable!("tape record kind does not match layer spec"),
                }
            }
            d_inputs[step] = d_cur;
        }
        d_inputs
    }
}
