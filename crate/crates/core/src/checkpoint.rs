//! JSON checkpoint format shared by every trained controller.
//!
//! A checkpoint is a versioned envelope around one payload kind; the
//! loader validates the version and the payload's internal shape
//! before anything touches a network constructor.

use crate::error::{Error, Result};
use crate::fmc::FmcWeights;
use crate::harness::{Controller, DqnController, FmcController, MlpController};
use crate::lstm_ctrl::{ClosedLoopLstm, InverseModel, OpenLoopLstm};
use crate::nn::LayerSpec;
use crate::pid::{PidController, PidGains};
use crate::rl::{DqnPolicy, MlpPolicy};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub algorithm: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Fmc(FmcWeights),
    Mlp(MlpPolicy),
    Dqn(DqnPolicy),
    LstmInverse(InverseModel),
    Pid(PidGains),
}

impl Payload {
    /// Builds the runnable controller for this payload. `open_loop`
    /// selects the reference-only inverse-model controller and is
    /// rejected for every other payload kind.
    pub fn controller(
        &self,
        open_loop: bool,
        limits: (f64, f64),
    ) -> Result<Box<dyn Controller>> {
        if open_loop && !matches!(self, Payload::LstmInverse(_)) {
            return Err(Error::Input(
                "open-loop mode applies only to inverse-model checkpoints".into(),
            ));
        }
        Ok(match self {
            Payload::Fmc(w) => Box::new(FmcController::new(w.clone(), limits)),
            Payload::Mlp(p) => Box::new(MlpController::new(p.clone(), limits)),
            Payload::Dqn(p) => Box::new(DqnController::new(p.clone(), limits)),
            Payload::Pid(g) => Box::new(PidController::new(*g, limits)),
            Payload::LstmInverse(m) => {
                if open_loop {
                    Box::new(OpenLoopLstm::new(m.clone()))
                } else {
                    Box::new(ClosedLoopLstm::new(m.clone()))
                }
            }
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub meta: CheckpointMeta,
    pub payload: Payload,
}

/// Checks layer dimensions chain correctly without constructing a
/// network (construction asserts and must never see bad specs).
fn check_specs(specs: &[LayerSpec], params: &[f64], what: &str) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Format(format!("{what}: empty layer list")));
    }
    for pair in specs.windows(2) {
        if pair[0].output_dim() != pair[1].input_dim() {
            return Err(Error::Format(format!(
                "{what}: layer output {} does not feed layer input {}",
                pair[0].output_dim(),
                pair[1].input_dim()
            )));
        }
    }
    let expected: usize = specs.iter().map(|s| s.param_count()).sum();
    if params.len() != expected {
        return Err(Error::Format(format!(
            "{what}: {} parameters for a {expected}-parameter layout",
            params.len()
        )));
    }
    if let Some(bad) = params.iter().find(|p| !p.is_finite()) {
        return Err(Error::Format(format!("{what}: non-finite parameter {bad}")));
    }
    Ok(())
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta, payload: Payload) -> Self {
        Self { format_version: FORMAT_VERSION, meta, payload }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint: format version {} is not the supported {FORMAT_VERSION}",
                self.format_version
            )));
        }
        match &self.payload {
            Payload::Fmc(w) => {
                FmcWeights::new(w.w.clone(), w.out_activation, w.out_scale)?;
            }
            Payload::Mlp(p) => {
                check_specs(&p.specs, &p.params, "mlp checkpoint")?;
                if p.specs.last().map(|s| s.output_dim()) != Some(1) {
                    return Err(Error::Format("mlp checkpoint: output must be scalar".into()));
                }
                if !(p.out_scale > 0.0 && p.out_scale.is_finite()) {
                    return Err(Error::Format(format!(
                        "mlp checkpoint: bad out_scale {}",
                        p.out_scale
                    )));
                }
            }
            Payload::Dqn(p) => {
                check_specs(&p.specs, &p.params, "dqn checkpoint")?;
                if p.action_set.len() < 2 || !p.action_set.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::Format(
                        "dqn checkpoint: action set must be strictly increasing with \
                         at least two entries"
                            .into(),
                    ));
                }
                if p.specs.last().map(|s| s.output_dim()) != Some(p.action_set.len()) {
                    return Err(Error::Format(
                        "dqn checkpoint: output width must match the action set".into(),
                    ));
                }
            }
            Payload::LstmInverse(m) => {
                check_specs(&m.specs, &m.params, "lstm checkpoint")?;
                if m.specs[0].input_dim() != 2
                    || m.specs.last().map(|s| s.output_dim()) != Some(1)
                {
                    return Err(Error::Format(
                        "lstm checkpoint: inverse model must map 2 inputs to 1 output".into(),
                    ));
                }
                if !(m.norm.p_max > m.norm.p_min && m.norm.u_max > m.norm.u_min) {
                    return Err(Error::Format(
                        "lstm checkpoint: degenerate normalization bounds".into(),
                    ));
                }
            }
            Payload::Pid(gains) => gains.validate()?,
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let checkpoint: Checkpoint = serde_json::from_str(&text)?;
        checkpoint.validate()?;
        Ok(checkpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm_ctrl::Normalization;
    use crate::nn::Activation;
    use crate::rl::BaselineObs;
    use std::path::PathBuf;

    fn meta() -> CheckpointMeta {
        CheckpointMeta {
            algorithm: "fmc-ddpg".into(),
            seed: 3,
            config_hash: "00000000deadbeef".into(),
        }
    }

    fn temp_path(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("memctrl-{}-{name}.json", std::process::id()))
    }

    fn fmc_payload() -> Payload {
        Payload::Fmc(
            FmcWeights::new(vec![-0.4, -0.1, 0.05, 0.0, 0.02], Activation::Tanh, 5.0).unwrap(),
        )
    }

    fn mlp_payload() -> Payload {
        let specs = vec![
            LayerSpec::Dense { input: 5, output: 4, activation: Activation::Relu, bias: true },
            LayerSpec::Dense { input: 4, output: 1, activation: Activation::Tanh, bias: true },
        ];
        let count: usize = specs.iter().map(|s| s.param_count()).sum();
        Payload::Mlp(MlpPolicy {
            specs,
            params: vec![0.01; count],
            out_scale: 5.0,
            obs: BaselineObs::ErrorHistory,
            memory_depth: 4,
            theta_max: 90.0,
        })
    }

    fn lstm_payload() -> Payload {
        let specs = vec![
            LayerSpec::Lstm { input: 2, hidden: 3 },
            LayerSpec::Dense { input: 3, output: 1, activation: Activation::Linear, bias: true },
        ];
        let count: usize = specs.iter().map(|s| s.param_count()).sum();
        Payload::LstmInverse(InverseModel {
            specs,
            params: vec![0.02; count],
            norm: Normalization { p_min: 0.0, p_max: 90.0, u_min: 0.0, u_max: 200.0 },
        })
    }

    #[test]
    fn fmc_checkpoint_round_trips() {
        let path = temp_path("fmc");
        Checkpoint::new(meta(), fmc_payload()).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(back.meta, meta());
        match back.payload {
            Payload::Fmc(w) => assert_eq!(w.w, vec![-0.4, -0.1, 0.05, 0.0, 0.02]),
            _ => panic!("wrong payload kind"),
        }
    }

    #[test]
    fn mlp_and_lstm_checkpoints_round_trip() {
        for (name, payload) in [("mlp", mlp_payload()), ("lstm", lstm_payload())] {
            let path = temp_path(name);
            Checkpoint::new(meta(), payload.clone()).save(&path).unwrap();
            let back = Checkpoint::load(&path).unwrap();
            std::fs::remove_file(&path).unwrap();
            match (&back.payload, &payload) {
                (Payload::Mlp(a), Payload::Mlp(b)) => assert_eq!(a.params, b.params),
                (Payload::LstmInverse(a), Payload::LstmInverse(b)) => {
                    assert_eq!(a.params, b.params);
                    assert_eq!(a.norm, b.norm);
                }
                _ => panic!("payload kind changed in flight"),
            }
        }
    }

    #[test]
    fn serialization_is_deterministic() {
        let a = serde_json::to_string(&Checkpoint::new(meta(), fmc_payload())).unwrap();
        let b = serde_json::to_string(&Checkpoint::new(meta(), fmc_payload())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut c = Checkpoint::new(meta(), fmc_payload());
        c.format_version = 99;
        assert!(c.validate().is_err());
    }

    #[test]
    fn truncated_params_are_rejected() {
        let mut c = Checkpoint::new(meta(), mlp_payload());
        if let Payload::Mlp(p) = &mut c.payload {
            p.params.pop();
        }
        assert!(c.validate().is_err());
    }

    #[test]
    fn mismatched_layer_dims_are_rejected() {
        let mut c = Checkpoint::new(meta(), mlp_payload());
        if let Payload::Mlp(p) = &mut c.payload {
            p.specs[1] = LayerSpec::Dense {
                input: 7,
                output: 1,
                activation: Activation::Tanh,
                bias: true,
            };
        }
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"format_version":1,"meta":{"algorithm":"a","seed":0,"config_hash":"x"},
            "payload":{"kind":"pid","kp":1.0,"ki":0.0,"kd":0.0,"integral_clamp":400.0},
            "extra":true}"#;
        assert!(serde_json::from_str::<Checkpoint>(text).is_err());
    }

    #[test]
    fn pid_checkpoint_round_trips() {
        let path = temp_path("pid");
        let payload = Payload::Pid(PidGains { kp: 2.0, ki: 0.1, kd: 0.0, integral_clamp: 400.0 });
        Checkpoint::new(meta(), payload).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        match back.payload {
            Payload::Pid(g) => assert_eq!(g.kp, 2.0),
            _ => panic!("wrong payload kind"),
        }
    }
}
