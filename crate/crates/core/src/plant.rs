//! Discrete-time surrogate of the pneumatic soft finger.
//!
//! The real finger is a slow, smooth, saturating pressure-to-angle
//! system. The surrogate keeps exactly those properties with a
//! first-order lag toward a tanh saturation curve:
//!
//! ```text
//! theta[t+1] = theta[t] + alpha * (g(u) - theta[t])
//! g(u) = theta_max * tanh(clamp(u) / u_scale)
//! ```
//!
//! which has the closed-form steady state `g(u)`, used as the test
//! oracle. Observation noise, when enabled, is added to the returned
//! angle only; the internal state stays clean so noise never feeds back
//! into the dynamics.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    /// Lag coefficient in (0, 1]; smaller is slower.
    pub alpha: f64,
    /// Saturation angle in degrees.
    pub theta_max: f64,
    /// Pressure scale of the saturation curve in kPa.
    pub u_scale: f64,
    /// Lower actuation clamp in kPa.
    pub u_min: f64,
    /// Upper actuation clamp in kPa.
    pub u_max: f64,
    /// Standard deviation of observation noise in degrees.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            theta_max: 90.0,
            u_scale: 60.0,
            u_min: 0.0,
            u_max: 200.0,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.alpha,
            self.theta_max,
            self.u_scale,
            self.u_min,
            self.u_max,
            self.noise_std,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("plant: all parameters must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "plant: alpha must satisfy 0 < alpha <= 1, got {}",
                self.alpha
            )));
        }
        if self.theta_max <= 0.0 {
            return Err(Error::Config(format!(
                "plant: theta_max must be positive, got {}",
                self.theta_max
            )));
        }
        if self.u_scale <= 0.0 {
            return Err(Error::Config(format!(
                "plant: u_scale must be positive, got {}",
                self.u_scale
            )));
        }
        if self.u_min >= self.u_max {
            return Err(Error::Config(format!(
                "plant: u_min must be below u_max, got [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        if self.noise_std < 0.0 {
            return Err(Error::Config(format!(
                "plant: noise_std must be non-negative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// Observed plant output after a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantState {
    /// Tip angle in degrees; noisy when observation noise is enabled.
    pub theta: f64,
    /// Time-step index, incremented once per `step`.
    pub t: u64,
}

/// Anything the harness can drive: reset, step, and a disturbance hook.
pub trait Plant {
    /// Returns the plant to its rest state and reseeds its noise source.
    fn reset(&mut self);
    /// Advances one step under actuation `u` (kPa, clamped internally).
    fn step(&mut self, u: f64) -> Result<PlantState>;
    /// Shifts the internal angle by `delta` degrees, modelling an
    /// external poke; the result stays within the saturation bound.
    fn nudge(&mut self, delta: f64);
    fn theta_max(&self) -> f64;
    /// `(u_min, u_max)` clamp applied to actuation.
    fn actuation_limits(&self) -> (f64, f64);
}

/// The default surrogate finger with tanh pressure-to-angle saturation.
#[derive(Clone, Debug)]
pub struct SurrogateFinger {
    config: PlantConfig,
    theta: f64,
    t: u64,
    rng: ChaCha8Rng,
}

impl SurrogateFinger {
    pub fn new(config: PlantConfig) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            config,
            theta: 0.0,
            t: 0,
            rng,
        })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    /// Closed-form limit of repeated `step` with constant `u` and noise
    /// off: `g(clamp(u))`.
    pub fn steady_state(&self, u: f64) -> f64 {
        let u = u.clamp(self.config.u_min, self.config.u_max);
        self.config.theta_max * (u / self.config.u_scale).tanh()
    }
}

impl Plant for SurrogateFinger {
    fn reset(&mut self) {
        self.theta = 0.0;
        self.t = 0;
        self.rng = ChaCha8Rng::seed_from_u64(self.config.seed);
    }

    fn step(&mut self, u: f64) -> Result<PlantState> {
        if !u.is_finite() {
            return Err(Error::Input(format!("plant: actuation must be finite, got {u}")));
        }
        let target = self.steady_state(u);
        self.theta += self.config.alpha * (target - self.theta);
        self.t += 1;
        let observed = if self.config.noise_std > 0.0 {
            let normal = Normal::new(0.0, self.config.noise_std).expect("validated std");
            let noisy = self.theta + normal.sample(&mut self.rng);
            noisy.clamp(-self.config.theta_max, self.config.theta_max)
        } else {
            self.theta
        };
        Ok(PlantState {
            theta: observed,
            t: self.t,
        })
    }

    fn nudge(&mut self, delta: f64) {
        self.theta = (self.theta + delta).clamp(-self.config.theta_max, self.config.theta_max);
    }

    fn theta_max(&self) -> f64 {
        self.config.theta_max
    }

    fn actuation_limits(&self) -> (f64, f64) {
        (self.config.u_min, self.config.u_max)
    }
}

/// Linear-gain variant `g(u) = slope * u`, same lag and clamps. Useful
/// where an exactly invertible plant makes learned inverses easy to
/// verify.
#[derive(Clone, Debug)]
pub struct LinearFinger {
    config: PlantConfig,
    pub slope: f64,
    theta: f64,
    t: u64,
}

impl LinearFinger {
    pub fn new(config: PlantConfig, slope: f64) -> Result<Self> {
        config.validate()?;
        if !slope.is_finite() {
            return Err(Error::Config("plant: slope must be finite".into()));
        }
        Ok(Self {
            config,
            slope,
            theta: 0.0,
            t: 0,
        })
    }

    pub fn steady_state(&self, u: f64) -> f64 {
        let u = u.clamp(self.config.u_min, self.config.u_max);
        (self.slope * u).clamp(-self.config.theta_max, self.config.theta_max)
    }
}

impl Plant for LinearFinger {
    fn reset(&mut self) {
        self.theta = 0.0;
        self.t = 0;
    }

    fn step(&mut self, u: f64) -> Result<PlantState> {
        if !u.is_finite() {
            return Err(Error::Input(format!("plant: actuation must be finite, got {u}")));
        }
        let target = self.steady_state(u);
        self.theta += self.config.alpha * (target - self.theta);
        self.t += 1;
        Ok(PlantState {
            theta: self.theta,
            t: self.t,
        })
    }

    fn nudge(&mut self, delta: f64) {
        self.theta = (self.theta + delta).clamp(-self.config.theta_max, self.config.theta_max);
    }

    fn theta_max(&self) -> f64 {
        self.config.theta_max
    }

    fn actuation_limits(&self) -> (f64, f64) {
        (self.config.u_min, self.config.u_max)
    }
}
