//! LSTM inverse model of the plant and the trajectory-tracking
//! controllers built on it.
//!
//! The inverse model maps a configuration transition `(p_t, p_{t+1})`
//! to the actuation `u_t` that produced it. Trained on excitation
//! data, it drives two controllers: an open-loop one that reads the
//! reference alone (`u_t = f(p_t^d, p_{t+1}^d)`, no sensing) and a
//! closed-loop one that replaces the first input with the measured
//! angle (`u_t = f(p_t, p_{t+1}^d)`). LSTM state persists across an
//! episode and is cleared at reset.

use crate::error::{Error, Result};
use crate::harness::{Controller, Obs, ObsMode};
use crate::nn::{Activation, Adam, LayerSpec, Network, State, Tape};
use crate::plant::Plant;
use crate::seeds::derive_seed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::BufRead;

/// Min/max constants mapping angles and actuations to `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub p_min: f64,
    pub p_max: f64,
    pub u_min: f64,
    pub u_max: f64,
}

fn to_unit(x: f64, min: f64, max: f64) -> f64 {
    2.0 * (x - min) / (max - min) - 1.0
}

fn from_unit(v: f64, min: f64, max: f64) -> f64 {
    min + (v + 1.0) * (max - min) / 2.0
}

impl Normalization {
    fn from_data(p: &[f64], u: &[f64]) -> Self {
        let bounds = |xs: &[f64]| {
            let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // Degenerate (constant) signals get a unit span.
            if max - min < 1e-9 {
                (min, min + 1.0)
            } else {
                (min, max)
            }
        };
        let (p_min, p_max) = bounds(p);
        let (u_min, u_max) = bounds(u);
        Self { p_min, p_max, u_min, u_max }
    }

    pub fn norm_p(&self, p: f64) -> f64 {
        to_unit(p, self.p_min, self.p_max)
    }

    pub fn denorm_p(&self, v: f64) -> f64 {
        from_unit(v, self.p_min, self.p_max)
    }

    pub fn norm_u(&self, u: f64) -> f64 {
        to_unit(u, self.u_min, self.u_max)
    }

    pub fn denorm_u(&self, v: f64) -> f64 {
        from_unit(v, self.u_min, self.u_max)
    }
}

/// Aligned excitation data: `u[t]` is the actuation that drove the
/// plant from angle `p[t]` to `p[t+1]`, so `p` holds one more sample
/// than `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseDataset {
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub norm: Normalization,
    /// Excitation samples that had to be clamped into the actuation
    /// range before being applied.
    pub clamped_samples: usize,
}

impl InverseDataset {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Excitation generator settings: random holds, ramps, and sine bursts
/// with segment lengths drawn from `[min_segment, max_segment]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExcitationConfig {
    pub seed: u64,
    pub min_segment: usize,
    pub max_segment: usize,
    /// Fraction of the actuation span the excitation covers, from
    /// `u_min` upward. Keeps the data out of the deep-saturation band
    /// where the inverse map is ill-conditioned.
    pub level_fraction: f64,
}

impl Default for ExcitationConfig {
    fn default() -> Self {
        Self { seed: 0, min_segment: 40, max_segment: 160, level_fraction: 0.4 }
    }
}

/// Drives the plant with a stored actuation sequence and records the
/// resulting angles. Out-of-range samples are clamped and counted; the
/// stored `u` is the clamped value actually applied, keeping the
/// replay property exact.
pub fn dataset_from_actuation<P: Plant>(plant: &mut P, raw_u: &[f64]) -> Result<InverseDataset> {
    if raw_u.len() < 2 {
        return Err(Error::Input(format!(
            "dataset: need at least 2 samples, got {}",
            raw_u.len()
        )));
    }
    let (u_min, u_max) = plant.actuation_limits();
    let mut clamped_samples = 0;
    let u: Vec<f64> = raw_u
        .iter()
        .map(|&raw| {
            let c = raw.clamp(u_min, u_max);
            if c != raw {
                clamped_samples += 1;
            }
            c
        })
        .collect();
    plant.reset();
    let mut p = Vec::with_capacity(u.len() + 1);
    p.push(0.0);
    for &ut in &u {
        p.push(plant.step(ut)?.theta);
    }
    let norm = Normalization::from_data(&p, &u);
    Ok(InverseDataset { p, u, norm, clamped_samples })
}

/// Generates `m` aligned samples from a randomized excitation of
/// holds, ramps, and sine bursts spanning the actuation range.
pub fn generate_dataset<P: Plant>(
    plant: &mut P,
    cfg: &ExcitationConfig,
    m: usize,
) -> Result<InverseDataset> {
    if m < 2 {
        return Err(Error::Input(format!("dataset: need at least 2 samples, got {m}")));
    }
    if cfg.min_segment < 1 || cfg.min_segment > cfg.max_segment {
        return Err(Error::Config(format!(
            "excitation: segment bounds must satisfy 1 <= min <= max, got {}..{}",
            cfg.min_segment, cfg.max_segment
        )));
    }
    if !(cfg.level_fraction > 0.0 && cfg.level_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "excitation: level_fraction must be in (0, 1], got {}",
            cfg.level_fraction
        )));
    }
    let (u_min, u_max) = plant.actuation_limits();
    let span = (u_max - u_min) * cfg.level_fraction;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "excitation"));
    let mut level = u_min + span * rng.random::<f64>();
    let mut u = Vec::with_capacity(m + cfg.max_segment);
    while u.len() < m {
        let duration = rng.random_range(cfg.min_segment..=cfg.max_segment);
        match rng.random_range(0..3u32) {
            0 => {
                level = u_min + span * rng.random::<f64>();
                for _ in 0..duration {
                    u.push(level);
                }
            }
            1 => {
                let target = u_min + span * rng.random::<f64>();
                for i in 0..duration {
                    u.push(level + (target - level) * (i + 1) as f64 / duration as f64);
                }
                level = target;
            }
            _ => {
                let offset = u_min + span * rng.random::<f64>();
                let amplitude = 0.5 * span * rng.random::<f64>();
                let period = rng.random_range(20..=300usize) as f64;
                for i in 0..duration {
                    u.push(
                        offset
                            + amplitude
                                * (2.0 * std::f64::consts::PI * (i + 1) as f64 / period).sin(),
                    );
                }
                level = *u.last().expect("segment is non-empty");
            }
        }
    }
    u.truncate(m);
    let ceiling = u_min + span;
    for sample in &mut u {
        *sample = sample.clamp(u_min, ceiling);
    }
    dataset_from_actuation(plant, &u)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseTrainConfig {
    pub hidden: usize,
    /// Truncated-backpropagation window length in steps.
    pub window: usize,
    /// Windows per gradient step.
    pub batch_windows: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Held-out fraction, taken as the final contiguous block.
    pub val_fraction: f64,
}

impl Default for InverseTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            window: 50,
            batch_windows: 16,
            epochs: 200,
            lr: 1e-3,
            seed: 0,
            val_fraction: 0.1,
        }
    }
}

impl InverseTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.window == 0 || self.batch_windows == 0 {
            return Err(Error::Config(
                "lstm: hidden, window, and batch_windows must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lstm: lr must be positive, got {}", self.lr)));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "lstm: val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// Trained inverse model: LSTM stack, linear readout, and the
/// normalization constants it was fitted under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseModel {
    pub specs: Vec<LayerSpec>,
    pub params: Vec<f64>,
    pub norm: Normalization,
}

impl InverseModel {
    pub fn network(&self) -> Network {
        let mut net = Network::new(self.specs.clone());
        net.set_params(&self.params);
        net
    }

    /// Computes the whole actuation sequence from the reference alone,
    /// LSTM state carried across steps. Output length is one less than
    /// the reference length.
    pub fn open_loop_rollout(&self, reference: &[f64]) -> Result<Vec<f64>> {
        if reference.len() < 2 {
            return Err(Error::Input("rollout: reference needs at least two samples".into()));
        }
        let net = self.network();
        let mut state = net.new_state();
        let mut u = Vec::with_capacity(reference.len() - 1);
        for t in 0..reference.len() - 1 {
            let x = [self.norm.norm_p(reference[t]), self.norm.norm_p(reference[t + 1])];
            u.push(self.norm.denorm_u(net.step(&x, &mut state)[0]));
        }
        Ok(u)
    }
}

fn inverse_specs(hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Lstm { input: 2, hidden },
        LayerSpec::Dense { input: hidden, output: 1, activation: Activation::Linear, bias: true },
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseTrainStats {
    /// Mean squared training loss per epoch, normalized units.
    pub train_loss: Vec<f64>,
    /// Mean squared error on the held-out block, normalized units.
    pub val_mse: f64,
}

/// Fits the inverse model with truncated backpropagation through time
/// over non-overlapping windows, Adam updates per window batch.
pub fn train_inverse(
    ds: &InverseDataset,
    cfg: &InverseTrainConfig,
) -> Result<(InverseModel, InverseTrainStats)> {
    cfg.validate()?;
    let m = ds.u.len();
    if m < 2 {
        return Err(Error::Input("lstm: dataset too small to train on".into()));
    }
    if ds.p.len() != m + 1 {
        return Err(Error::Input(format!(
            "lstm: misaligned dataset, {} angles for {} actuations",
            ds.p.len(),
            m
        )));
    }

    let xs: Vec<[f64; 2]> = (0..m)
        .map(|t| [ds.norm.norm_p(ds.p[t]), ds.norm.norm_p(ds.p[t + 1])])
        .collect();
    let ys: Vec<f64> = ds.u.iter().map(|&u| ds.norm.norm_u(u)).collect();

    let val_len = ((m as f64 * cfg.val_fraction) as usize).clamp(1, m - 1);
    let train_len = m - val_len;

    let mut net = Network::new(inverse_specs(cfg.hidden));
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "lstm-init"));
    net.init(&mut init_rng);
    let mut adam = Adam::new(net.param_count(), cfg.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "lstm-shuffle"));

    let window = cfg.window.min(train_len);
    let mut starts: Vec<usize> = (0..=train_len - window).step_by(window).collect();
    let mut grads = vec![0.0; net.param_count()];
    let mut tape = Tape::new();
    let mut train_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        starts.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_terms = 0usize;
        for batch in starts.chunks(cfg.batch_windows) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let terms = (batch.len() * window) as f64;
            let mut batch_loss = 0.0;
            for &start in batch {
                tape.clear();
                let mut state = net.new_state();
                let mut d_out = Vec::with_capacity(window);
                for t in start..start + window {
                    let y_hat = net.step_traced(&xs[t], &mut state, &mut tape)[0];
                    let diff = y_hat - ys[t];
                    batch_loss += diff * diff;
                    d_out.push(vec![2.0 * diff / terms]);
                }
                net.backward(&tape, &d_out, &mut grads);
            }
            batch_loss /= terms;
            if !batch_loss.is_finite() {
                return Err(Error::Training(format!(
                    "lstm: non-finite loss at epoch {epoch}, aborting"
                )));
            }
            adam.step(net.params_mut(), &grads);
            epoch_loss += batch_loss * terms;
            epoch_terms += batch.len() * window;
        }
        train_loss.push(epoch_loss / epoch_terms as f64);
    }

    // Held-out block evaluated as one contiguous sequence.
    let mut state = net.new_state();
    let mut val_mse = 0.0;
    for t in train_len..m {
        let diff = net.step(&xs[t], &mut state)[0] - ys[t];
        val_mse += diff * diff;
    }
    val_mse /= val_len as f64;

    let model = InverseModel {
        specs: inverse_specs(cfg.hidden),
        params: net.params().to_vec(),
        norm: ds.norm,
    };
    Ok((model, InverseTrainStats { train_loss, val_mse }))
}

/// Reference-only tracking controller: consumes the desired transition
/// `(p_t^d, p_{t+1}^d)` and never the measured angle.
#[derive(Clone, Debug)]
pub struct OpenLoopLstm {
    model: InverseModel,
    net: Network,
    state: State,
}

impl OpenLoopLstm {
    pub fn new(model: InverseModel) -> Self {
        let net = model.network();
        let state = net.new_state();
        Self { model, net, state }
    }
}

impl Controller for OpenLoopLstm {
    fn obs_mode(&self) -> ObsMode {
        ObsMode::ReferenceOnly
    }

    fn reset(&mut self) {
        self.state = self.net.new_state();
    }

    fn act(&mut self, obs: &Obs) -> Result<f64> {
        let x = [
            self.model.norm.norm_p(obs.ref_now),
            self.model.norm.norm_p(obs.ref_next),
        ];
        Ok(self.model.norm.denorm_u(self.net.step(&x, &mut self.state)[0]))
    }
}

/// Feedback tracking controller: consumes the measured angle and the
/// next desired angle, `u_t = f(p_t, p_{t+1}^d)`.
#[derive(Clone, Debug)]
pub struct ClosedLoopLstm {
    model: InverseModel,
    net: Network,
    state: State,
}

impl ClosedLoopLstm {
    pub fn new(model: InverseModel) -> Self {
        let net = model.network();
        let state = net.new_state();
        Self { model, net, state }
    }

    /// One inference step outside the harness loop.
    pub fn step(&mut self, p_t: f64, p_next_desired: f64) -> f64 {
        let x = [self.model.norm.norm_p(p_t), self.model.norm.norm_p(p_next_desired)];
        self.model.norm.denorm_u(self.net.step(&x, &mut self.state)[0])
    }
}

impl Controller for ClosedLoopLstm {
    fn reset(&mut self) {
        self.state = self.net.new_state();
    }

    fn act(&mut self, obs: &Obs) -> Result<f64> {
        let theta = obs
            .theta
            .ok_or_else(|| Error::Input("closed-loop controller requires a measured angle".into()))?;
        Ok(self.step(theta, obs.ref_next))
    }
}

/// Writes the dataset as `t,u,p` rows; the final row carries the last
/// angle with an empty actuation column.
pub fn write_dataset_csv<W: std::io::Write>(out: &mut W, ds: &InverseDataset) -> Result<()> {
    out.write_all(b"t,u,p\n")?;
    for t in 0..ds.p.len() {
        if t < ds.u.len() {
            writeln!(out, "{},{},{}", t, ds.u[t], ds.p[t])?;
        } else {
            writeln!(out, "{},,{}", t, ds.p[t])?;
        }
    }
    Ok(())
}

pub fn read_dataset_csv<R: BufRead>(input: R) -> Result<InverseDataset> {
    let mut p = Vec::new();
    let mut u = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "t,u,p" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "dataset line {}: expected 3 fields, got {}",
                i + 1,
                fields.len()
            )));
        }
        if !fields[1].is_empty() {
            u.push(fields[1].parse::<f64>().map_err(|e| {
                Error::Format(format!("dataset line {}: bad actuation: {e}", i + 1))
            })?);
        }
        p.push(fields[2].parse::<f64>().map_err(|e| {
            Error::Format(format!("dataset line {}: bad angle: {e}", i + 1))
        })?);
    }
    if p.len() != u.len() + 1 {
        return Err(Error::Format(format!(
            "dataset: {} angles do not align with {} actuations",
            p.len(),
            u.len()
        )));
    }
    let norm = Normalization::from_data(&p, &u);
    Ok(InverseDataset { p, u, norm, clamped_samples: 0 })
}
