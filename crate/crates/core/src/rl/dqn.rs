//! DQN trainer over a discrete set of actuation increments.
//!
//! The Q-network maps the observation to one value per increment in F.
//! Actions are epsilon-greedy with a linearly annealed epsilon; the
//! target network is a hard copy refreshed every C environment steps.
//! Terminal transitions regress onto the raw reward.

use super::{
    check_divergence, check_reference, lerp, reward, td_target_dqn, BaselineObs, EpisodeStats,
    ReplayBuffer, SnapshotTracker, TrainLog, TrainResult, TrainerConfig, Transition,
};
use super::ddpg::{finish, obs_vector};
use crate::error::Result;
use crate::fmc::{apply_increment, ErrorHistory};
use crate::nn::{Activation, Adam, LayerSpec, Network, State, Tape};
use crate::plant::Plant;
use crate::seeds::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A trained Q-network policy: greedy over the discrete increment set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DqnPolicy {
    pub specs: Vec<LayerSpec>,
    pub params: Vec<f64>,
    /// Discrete increments F in kPa, strictly increasing.
    pub action_set: Vec<f64>,
    pub obs: BaselineObs,
    pub memory_depth: usize,
    pub theta_max: f64,
}

impl DqnPolicy {
    pub fn network(&self) -> Network {
        let mut net = Network::new(self.specs.clone());
        net.set_params(&self.params);
        net
    }

    /// Greedy action index; ties break toward the lowest index so the
    /// policy is deterministic.
    pub fn greedy_index(&self, normalized_obs: &[f64]) -> usize {
        argmax(&self.network().apply(normalized_obs))
    }

    pub fn increment(&self, index: usize) -> f64 {
        self.action_set[index]
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (idx, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = idx;
        }
    }
    best
}

/// Epsilon-greedy selection over the Q-network's outputs.
fn epsilon_greedy(
    qnet: &Network,
    obs: &[f64],
    epsilon: f64,
    action_count: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    // The uniform draw happens unconditionally so the random stream
    // advances identically regardless of which branch acts.
    let roll: f64 = rng.random_range(0.0..1.0);
    let uniform = rng.random_range(0..action_count);
    if roll < epsilon {
        uniform
    } else {
        argmax(&qnet.apply(obs))
    }
}

/// Trains the finite-memory DQN controller: error-history observation,
/// sigmoid hidden layer, one Q output per increment.
pub fn train_fmc_dqn<P: Plant>(
    plant: &mut P,
    reference: &[f64],
    cfg: &TrainerConfig,
) -> Result<TrainResult<DqnPolicy>> {
    let obs_dim = cfg.memory_depth + 1;
    let specs = vec![
        LayerSpec::Dense {
            input: obs_dim,
            output: cfg.hidden_dim,
            activation: Activation::Sigmoid,
            bias: true,
        },
        LayerSpec::Dense {
            input: cfg.hidden_dim,
            output: cfg.action_set.len(),
            activation: Activation::Linear,
            bias: true,
        },
    ];
    dqn_core(plant, reference, cfg, BaselineObs::ErrorHistory, specs)
}

/// Trains the three-layer baseline DQN under the identical protocol.
pub fn train_baseline_dqn<P: Plant>(
    plant: &mut P,
    reference: &[f64],
    cfg: &TrainerConfig,
) -> Result<TrainResult<DqnPolicy>> {
    let obs_dim = match cfg.baseline_obs {
        BaselineObs::ErrorHistory => cfg.memory_depth + 1,
        BaselineObs::AnglePair => 2,
    };
    let specs = vec![
        LayerSpec::Dense {
            input: obs_dim,
            output: cfg.hidden_dim,
            activation: Activation::Sigmoid,
            bias: true,
        },
        LayerSpec::Dense {
            input: cfg.hidden_dim,
            output: cfg.hidden_dim,
            activation: Activation::Sigmoid,
            bias: true,
        },
        LayerSpec::Dense {
            input: cfg.hidden_dim,
            output: cfg.action_set.len(),
            activation: Activation::Linear,
            bias: true,
        },
    ];
    dqn_core(plant, reference, cfg, cfg.baseline_obs, specs)
}

fn dqn_core<P: Plant>(
    plant: &mut P,
    reference: &[f64],
    cfg: &TrainerConfig,
    obs_kind: BaselineObs,
    specs: Vec<LayerSpec>,
) -> Result<TrainResult<DqnPolicy>> {
    cfg.validate()?;
    let theta_max = plant.theta_max();
    let limits = plant.actuation_limits();
    check_reference(reference, cfg.steps_per_episode, theta_max)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "dqn-init"));
    let mut explore_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "dqn-explore"));

    let mut qnet = Network::new(specs.clone());
    qnet.init(&mut init_rng);
    let mut qnet_target = qnet.clone();
    let mut adam = Adam::new(qnet.param_count(), cfg.critic_lr);
    let mut replay: ReplayBuffer<usize> =
        ReplayBuffer::new(cfg.replay_capacity, derive_seed(cfg.seed, "dqn-replay"));

    let policy_of = |net: &Network| DqnPolicy {
        specs: specs.clone(),
        params: net.params().to_vec(),
        action_set: cfg.action_set.clone(),
        obs: obs_kind,
        memory_depth: cfg.memory_depth,
        theta_max,
    };

    let mut tracker: SnapshotTracker<DqnPolicy> = SnapshotTracker::new();
    let mut log = TrainLog::default();
    let mut history = ErrorHistory::new(cfg.memory_depth);

    let total_steps = cfg.episodes * cfg.steps_per_episode;
    let decay_steps = ((total_steps as f64) * cfg.epsilon_decay_fraction).max(1.0);
    let mut global_step = 0usize;

    for episode in 1..=cfg.episodes {
        plant.reset();
        history.reset();
        let mut u = 0.0;
        let mut theta = 0.0;
        history.push(theta - reference[0])?;

        let mut reward_sum = 0.0;
        let mut loss_sum = 0.0;
        let mut update_count = 0usize;

        for t in 0..cfg.steps_per_episode {
            let s = obs_vector(obs_kind, &history, theta, reference[t], theta_max);
            let epsilon = lerp(
                cfg.epsilon_start,
                cfg.epsilon_end,
                global_step as f64 / decay_steps,
            );
            let action = epsilon_greedy(
                &qnet,
                &s,
                epsilon,
                cfg.action_set.len(),
                &mut explore_rng,
            );

            u = apply_increment(u, cfg.action_set[action], limits);
            theta = plant.step(u)?.theta;
            let r = reward(theta / theta_max, reference[t + 1] / theta_max, cfg.reward_scale);
            history.push(theta - reference[t + 1])?;
            let s_next = obs_vector(obs_kind, &history, theta, reference[t + 1], theta_max);

            replay.push(Transition {
                s,
                a: action,
                r,
                s_next,
                done: t + 1 == cfg.steps_per_episode,
            });
            reward_sum += r;
            global_step += 1;

            if global_step % cfg.target_reset_period == 0 {
                qnet_target.set_params(qnet.params());
            }

            if replay.len() >= cfg.warmup {
                for _ in 0..cfg.gradient_steps {
                    loss_sum += dqn_update(cfg, &mut replay, &mut qnet, &qnet_target, &mut adam)?;
                    update_count += 1;
                }
            }
        }

        let mean_reward = reward_sum / cfg.steps_per_episode as f64;
        let snapshot = policy_of(&qnet);
        let fired = tracker.snapshot_if_improved(episode, mean_reward, &snapshot);
        log.episodes.push(EpisodeStats {
            episode,
            mean_reward,
            critic_loss_mean: loss_sum / update_count.max(1) as f64,
            actor_loss_mean: 0.0,
            snapshot_flag: fired,
        });
    }

    finish(tracker, log, policy_of(&qnet))
}

fn dqn_update(
    cfg: &TrainerConfig,
    replay: &mut ReplayBuffer<usize>,
    qnet: &mut Network,
    qnet_target: &Network,
    adam: &mut Adam,
) -> Result<f64> {
    let batch = match replay.sample(cfg.batch_size) {
        Some(batch) => batch,
        None => return Ok(0.0),
    };
    let n = batch.len() as f64;
    let y = td_target_dqn(&batch, |s| qnet_target.apply(s), cfg.gamma);

    let mut grads = vec![0.0; qnet.param_count()];
    let mut loss = 0.0;
    let mut tape = Tape::new();
    let action_count = cfg.action_set.len();
    for (transition, target) in batch.iter().zip(&y) {
        tape.clear();
        let mut state = State::default();
        let q = qnet.step_traced(&transition.s, &mut state, &mut tape);
        let diff = q[transition.a] - target;
        loss += diff * diff;
        // Loss touches only the chosen action's output.
        let mut d_out = vec![0.0; action_count];
        d_out[transition.a] = 2.0 * diff / n;
        qnet.backward(&tape, &[d_out], &mut grads);
    }
    loss /= n;
    adam.step(qnet.params_mut(), &grads);
    check_divergence("dqn", qnet.params(), loss, cfg.divergence_bound)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{PlantConfig, SurrogateFinger};

    fn tiny_cfg() -> TrainerConfig {
        TrainerConfig {
            episodes: 2,
            steps_per_episode: 10,
            warmup: 5,
            batch_size: 4,
            ..TrainerConfig::default()
        }
    }

    fn step_reference(steps: usize) -> Vec<f64> {
        (0..=steps).map(|_| 30.0).collect()
    }

    fn fixed_qnet() -> Network {
        let mut net = Network::new(vec![LayerSpec::Dense {
            input: 2,
            output: 4,
            activation: Activation::Linear,
            bias: true,
        }]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        net.init(&mut rng);
        net
    }

    #[test]
    fn epsilon_one_explores_uniformly() {
        let net = fixed_qnet();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[epsilon_greedy(&net, &[0.1, -0.2], 1.0, 4, &mut rng)] += 1;
        }
        for count in counts {
            // Each action should land near one quarter of the draws.
            assert!((9_400..=10_600).contains(&count), "count {count}");
        }
    }

    #[test]
    fn epsilon_zero_is_deterministic_greedy() {
        let net = fixed_qnet();
        let mut rng_a = ChaCha8Rng::seed_from_u64(1);
        let mut rng_b = ChaCha8Rng::seed_from_u64(999);
        let obs = [0.3, 0.7];
        let a = epsilon_greedy(&net, &obs, 0.0, 4, &mut rng_a);
        let b = epsilon_greedy(&net, &obs, 0.0, 4, &mut rng_b);
        assert_eq!(a, b);
        assert_eq!(a, argmax(&net.apply(&obs)));
    }

    #[test]
    fn log_has_one_entry_per_episode() {
        let mut plant = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let result = train_fmc_dqn(&mut plant, &step_reference(10), &tiny_cfg()).unwrap();
        assert_eq!(result.log.episodes.len(), 2);
    }

    #[test]
    fn same_seed_gives_identical_runs() {
        let reference = step_reference(10);
        let cfg = tiny_cfg();
        let mut plant_a = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let mut plant_b = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let a = train_fmc_dqn(&mut plant_a, &reference, &cfg).unwrap();
        let b = train_fmc_dqn(&mut plant_b, &reference, &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.best.params, b.best.params);
    }

    #[test]
    fn fmc_qnet_has_two_layers_baseline_three() {
        let mut plant = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let cfg = tiny_cfg();
        let fmc = train_fmc_dqn(&mut plant, &step_reference(10), &cfg).unwrap();
        assert_eq!(fmc.best.specs.len(), 2);
        let mut plant = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let baseline = train_baseline_dqn(&mut plant, &step_reference(10), &cfg).unwrap();
        assert_eq!(baseline.best.specs.len(), 3);
    }

    #[test]
    fn qnet_output_count_matches_action_set() {
        let mut plant = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let cfg = tiny_cfg();
        let result = train_fmc_dqn(&mut plant, &step_reference(10), &cfg).unwrap();
        let net = result.best.network();
        assert_eq!(net.output_dim(), cfg.action_set.len());
    }
}
