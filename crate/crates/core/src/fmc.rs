//! Finite memory controller: a fixed-depth history of tracking errors
//! and a single-layer weighted-sum actor emitting actuation increments.
//!
//! The controller state is `s_t = [e_t, e_{t-1}, ..., e_{t-k}]`, newest
//! first. The actor computes `a_t = out_scale * act(sum w_i * e_{t-i})`
//! with no bias term, so zero error always means zero pre-activation.
//! Actions are increments on the previous pressure, clamped to the
//! plant's actuation range; controllers start every episode from u = 0.

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec, Network};
use serde::{Deserialize, Serialize};

/// Ring buffer of the `k+1` most recent tracking errors, newest first.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorHistory {
    buf: Vec<f64>,
}

impl ErrorHistory {
    /// History holding `k+1` zeros for memory depth `k`.
    pub fn new(k: usize) -> Self {
        Self {
            buf: vec![0.0; k + 1],
        }
    }

    pub fn memory_depth(&self) -> usize {
        self.buf.len() - 1
    }

    /// Inserts `e` as the newest error, evicting the oldest.
    pub fn push(&mut self, e: f64) -> Result<()> {
        if !e.is_finite() {
            return Err(Error::Input(format!("error history: non-finite error {e}")));
        }
        self.buf.rotate_right(1);
        self.buf[0] = e;
        Ok(())
    }

    /// The RL state `[e_t, ..., e_{t-k}]`.
    pub fn state_vector(&self) -> &[f64] {
        &self.buf
    }

    pub fn reset(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Trained weighted-sum actor. `w` has one weight per stored error,
/// `out_activation` squashes the weighted sum, `out_scale` bounds the
/// per-step increment for saturating activations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmcWeights {
    pub w: Vec<f64>,
    pub out_activation: Activation,
    pub out_scale: f64,
}

impl FmcWeights {
    pub fn new(w: Vec<f64>, out_activation: Activation, out_scale: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Input("fmc: weight vector must be non-empty".into()));
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::Input("fmc: weights must be finite".into()));
        }
        if !(out_scale > 0.0 && out_scale.is_finite()) {
            return Err(Error::Input(format!(
                "fmc: out_scale must be positive and finite, got {out_scale}"
            )));
        }
        if !matches!(
            out_activation,
            Activation::Tanh | Activation::Sigmoid | Activation::Linear
        ) {
            return Err(Error::Input(
                "fmc: output activation must be tanh, sigmoid, or linear".into(),
            ));
        }
        Ok(Self {
            w,
            out_activation,
            out_scale,
        })
    }

    pub fn memory_depth(&self) -> usize {
        self.w.len() - 1
    }

    /// `sum_i w_i * e_{t-i}`; zero whenever the history is all zeros.
    pub fn pre_activation(&self, h: &ErrorHistory) -> Result<f64> {
        let errors = h.state_vector();
        if errors.len() != self.w.len() {
            return Err(Error::Input(format!(
                "fmc: weight count {} does not match history length {}",
                self.w.len(),
                errors.len()
            )));
        }
        let mut acc = 0.0;
        for (w, e) in self.w.iter().zip(errors) {
            acc += w * e;
        }
        Ok(acc)
    }

    /// The actuation increment `a_t` in kPa.
    pub fn action(&self, h: &ErrorHistory) -> Result<f64> {
        Ok(self.out_scale * self.out_activation.apply(self.pre_activation(h)?))
    }

    /// Equivalent single-dense-layer network (no bias), sharing the
    /// same weight order; useful for gradient-based training.
    pub fn to_network(&self) -> Network {
        let mut net = Network::new(vec![LayerSpec::Dense {
            input: self.w.len(),
            output: 1,
            activation: self.out_activation,
            bias: false,
        }]);
        net.set_params(&self.w);
        net
    }
}

/// `u_t = clamp(u_prev + a_t)`; the incremental actuation update shared
/// by every finite memory controller.
pub fn apply_increment(u_prev: f64, a: f64, limits: (f64, f64)) -> f64 {
    (u_prev + a).clamp(limits.0, limits.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn push_inserts_newest_first() {
        let mut h = ErrorHistory::new(2);
        h.push(1.5).unwrap();
        assert_eq!(h.state_vector(), &[1.5, 0.0, 0.0]);
    }

    #[test]
    fn push_evicts_oldest() {
        let mut h = ErrorHistory::new(1);
        h.push(1.0).unwrap();
        h.push(2.0).unwrap();
        h.push(3.0).unwrap();
        assert_eq!(h.state_vector(), &[3.0, 2.0]);
    }

    #[test]
    fn capacity_is_fixed() {
        let mut h = ErrorHistory::new(4);
        for k in 0..10 {
            h.push(k as f64).unwrap();
        }
        assert_eq!(h.state_vector().len(), 5);
        assert_eq!(h.state_vector(), &[9.0, 8.0, 7.0, 6.0, 5.0]);
    }

    #[test]
    fn non_finite_error_is_rejected() {
        let mut h = ErrorHistory::new(2);
        assert!(h.push(f64::NAN).is_err());
        assert!(h.push(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn fresh_history_is_all_zeros() {
        let h = ErrorHistory::new(4);
        assert_eq!(h.state_vector(), &[0.0; 5]);
    }

    #[test]
    fn linear_action_matches_weighted_sum() {
        let wts = FmcWeights::new(vec![0.5, 0.25], Activation::Linear, 1.0).unwrap();
        let mut h = ErrorHistory::new(1);
        h.push(4.0).unwrap();
        h.push(2.0).unwrap();
        assert_eq!(wts.action(&h).unwrap(), 2.0);
    }

    #[test]
    fn tanh_action_saturates_at_out_scale() {
        let wts = FmcWeights::new(vec![100.0], Activation::Tanh, 5.0).unwrap();
        let mut h = ErrorHistory::new(0);
        h.push(10.0).unwrap();
        let a = wts.action(&h).unwrap();
        assert!((a - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_history_gives_zero_pre_activation() {
        let wts = FmcWeights::new(vec![3.0, -7.0, 11.0], Activation::Tanh, 5.0).unwrap();
        let h = ErrorHistory::new(2);
        assert_eq!(wts.pre_activation(&h).unwrap(), 0.0);
        assert_eq!(wts.action(&h).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let wts = FmcWeights::new(vec![1.0, 2.0], Activation::Linear, 1.0).unwrap();
        let h = ErrorHistory::new(4);
        assert!(wts.action(&h).is_err());
    }

    #[test]
    fn invalid_weights_are_rejected() {
        assert!(FmcWeights::new(vec![], Activation::Tanh, 5.0).is_err());
        assert!(FmcWeights::new(vec![f64::NAN], Activation::Tanh, 5.0).is_err());
        assert!(FmcWeights::new(vec![1.0], Activation::Tanh, 0.0).is_err());
        assert!(FmcWeights::new(vec![1.0], Activation::Relu, 5.0).is_err());
    }

    #[test]
    fn action_agrees_with_network_form() {
        let wts = FmcWeights::new(vec![0.4, -0.2, 0.9], Activation::Tanh, 5.0).unwrap();
        let net = wts.to_network();
        let mut h = ErrorHistory::new(2);
        for e in [1.7, -3.2, 0.4] {
            h.push(e).unwrap();
        }
        let direct = wts.action(&h).unwrap();
        let via_net = wts.out_scale * net.apply(h.state_vector())[0];
        assert_eq!(direct.to_bits(), via_net.to_bits());
    }

    #[test]
    fn apply_increment_clamps_both_ends() {
        assert_eq!(apply_increment(10.0, 2.0, (0.0, 200.0)), 12.0);
        assert_eq!(apply_increment(199.0, 5.0, (0.0, 200.0)), 200.0);
        assert_eq!(apply_increment(0.0, -1.0, (0.0, 200.0)), 0.0);
    }

    #[test]
    fn linear_actor_integrates_constant_error() {
        let wts = FmcWeights::new(vec![1.0, 0.0], Activation::Linear, 1.0).unwrap();
        let mut h = ErrorHistory::new(1);
        let mut u = 0.0;
        let mut previous = 0.0;
        for t in 1..=120 {
            h.push(2.0).unwrap();
            u = apply_increment(u, wts.action(&h).unwrap(), (0.0, 200.0));
            if t <= 100 {
                assert_eq!(u, 2.0 * t as f64);
            } else {
                assert_eq!(u, 200.0);
            }
            assert!(u >= previous);
            previous = u;
        }
    }

    proptest! {
        #[test]
        fn pre_activation_is_homogeneous_in_errors(
            w in proptest::collection::vec(-10.0f64..10.0, 1..8),
            errors in proptest::collection::vec(-45.0f64..45.0, 1..8),
        ) {
            let depth = w.len().min(errors.len()) - 1;
            let wts = FmcWeights::new(w[..depth + 1].to_vec(), Activation::Linear, 1.0).unwrap();
            let mut h = ErrorHistory::new(depth);
            let mut doubled = ErrorHistory::new(depth);
            for &e in errors[..depth + 1].iter() {
                h.push(e).unwrap();
                doubled.push(2.0 * e).unwrap();
            }
            // Scaling by a power of two is exact, so equality is bitwise.
            let a = wts.pre_activation(&h).unwrap();
            let b = wts.pre_activation(&doubled).unwrap();
            prop_assert_eq!((2.0 * a).to_bits(), b.to_bits());
        }

        #[test]
        fn newest_error_is_always_front(
            seed_errors in proptest::collection::vec(-45.0f64..45.0, 1..20),
        ) {
            let mut h = ErrorHistory::new(4);
            for &e in &seed_errors {
                h.push(e).unwrap();
                prop_assert_eq!(h.state_vector()[0], e);
            }
        }
    }
}
