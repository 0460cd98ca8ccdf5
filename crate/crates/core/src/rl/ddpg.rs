//! DDPG trainer for the finite memory actor and the three-layer
//! baseline actor.
//!
//! The critic regresses onto TD targets built from target copies of
//! both networks; the actor ascends the sampled policy gradient, i.e.
//! the critic's action gradient pushed through the actor. Target
//! parameters track the main ones by soft updates. Exploration is
//! zero-mean Gaussian noise on the action, annealed over training.

use super::{
    check_divergence, check_reference, lerp, reward, soft_update, standard_normal, td_target_ddpg,
    BaselineObs, EpisodeStats, ReplayBuffer, SnapshotTracker, TrainLog, TrainResult, TrainerConfig,
    Transition,
};
use crate::error::Result;
use crate::fmc::{apply_increment, ErrorHistory, FmcWeights};
use crate::nn::{Activation, Adam, LayerSpec, Network, State, Tape};
use crate::plant::Plant;
use crate::seeds::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A trained multi-layer continuous policy (baseline DDPG/SAC). The
/// network consumes normalized observations; `action` returns kPa.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpPolicy {
    pub specs: Vec<LayerSpec>,
    pub params: Vec<f64>,
    pub out_scale: f64,
    pub obs: BaselineObs,
    pub memory_depth: usize,
    pub theta_max: f64,
}

impl MlpPolicy {
    pub fn network(&self) -> Network {
        let mut net = Network::new(self.specs.clone());
        net.set_params(&self.params);
        net
    }

    pub fn action(&self, normalized_obs: &[f64]) -> f64 {
        self.out_scale * self.network().apply(normalized_obs)[0]
    }
}

pub(crate) fn obs_vector(
    kind: BaselineObs,
    history: &ErrorHistory,
    theta: f64,
    reference_now: f64,
    theta_max: f64,
) -> Vec<f64> {
    match kind {
        BaselineObs::ErrorHistory => history
            .state_vector()
            .iter()
            .map(|e| e / theta_max)
            .collect(),
        BaselineObs::AnglePair => vec![theta / theta_max, reference_now / theta_max],
    }
}

pub(crate) fn critic_network(obs_dim: usize, hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            input: obs_dim + 1,
            output: hidden,
            activation: Activation::Relu,
            bias: true,
        },
        LayerSpec::Dense {
            input: hidden,
            output: hidden,
            activation: Activation::Relu,
            bias: true,
        },
        LayerSpec::Dense {
            input: hidden,
            output: 1,
            activation: Activation::Linear,
            bias: true,
        },
    ]
}

pub(crate) fn baseline_actor_network(
    obs_dim: usize,
    hidden: usize,
    hidden_act: Activation,
    out_act: Activation,
) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            input: obs_dim,
            output: hidden,
            activation: hidden_act,
            bias: true,
        },
        LayerSpec::Dense {
            input: hidden,
            output: hidden,
            activation: hidden_act,
            bias: true,
        },
        LayerSpec::Dense {
            input: hidden,
            output: 1,
            activation: out_act,
            bias: true,
        },
    ]
}

/// Single dense layer without bias: the finite memory actor. Weights
/// live in normalized-error space during training.
pub(crate) fn fmc_actor_network(k: usize, activation: Activation) -> Vec<LayerSpec> {
    vec![LayerSpec::Dense {
        input: k + 1,
        output: 1,
        activation,
        bias: false,
    }]
}

/// Converts trained normalized-space actor weights into raw-error
/// weights: `act(sum w_norm * e/theta_max) = act(sum (w_norm/theta_max) * e)`.
pub(crate) fn fmc_weights_from_actor(
    actor: &Network,
    activation: Activation,
    out_scale: f64,
    theta_max: f64,
) -> FmcWeights {
    let w = actor.params().iter().map(|w| w / theta_max).collect();
    FmcWeights::new(w, activation, out_scale).expect("trained actor weights are finite")
}

/// Trains the finite memory controller with DDPG and a tanh output.
pub fn train_fmc_ddpg<P: Plant>(
    plant: &mut P,
    reference: &[f64],
    cfg: &TrainerConfig,
) -> Result<TrainResult<FmcWeights>> {
    let theta_max = plant.theta_max();
    let actor = fmc_actor_network(cfg.memory_depth, Activation::Tanh);
    ddpg_core(plant, reference, cfg, BaselineObs::ErrorHistory, actor, |net| {
        fmc_weights_from_actor(net, Activation::Tanh, cfg.out_scale, theta_max)
    })
}

/// Trains the three-layer baseline actor with DDPG (Relu hidden, tanh
/// output) under the identical environment protocol.
pub fn train_baseline_ddpg<P: Plant>(
    plant: &mut P,
    reference: &[f64],
    cfg: &TrainerConfig,
) -> Result<TrainResult<MlpPolicy>> {
    let theta_max = plant.theta_max();
    let obs_dim = match cfg.baseline_obs {
        BaselineObs::ErrorHistory => cfg.memory_depth + 1,
        BaselineObs::AnglePair => 2,
    };
    let actor =
        baseline_actor_network(obs_dim, cfg.hidden_dim, Activation::Relu, Activation::Tanh);
    let specs = actor.clone();
    ddpg_core(plant, reference, cfg, cfg.baseline_obs, actor, move |net| MlpPolicy {
        specs: specs.clone(),
        params: net.params().to_vec(),
        out_scale: cfg.out_scale,
        obs: cfg.baseline_obs,
        memory_depth: cfg.memory_depth,
        theta_max,
    })
}

fn ddpg_core<P: Plant, W: Clone>(
    plant: &mut P,
    reference: &[f64],
    cfg: &TrainerConfig,
    obs_kind: BaselineObs,
    actor_specs: Vec<LayerSpec>,
    extract: impl Fn(&Network) -> W,
) -> Result<TrainResult<W>> {
    cfg.validate()?;
    let theta_max = plant.theta_max();
    let limits = plant.actuation_limits();
    check_reference(reference, cfg.steps_per_episode, theta_max)?;

    let obs_dim = actor_specs[0].input_dim();
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "ddpg-init"));
    let mut explore_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "ddpg-explore"));

    let mut actor = Network::new(actor_specs);
    actor.init(&mut init_rng);
    let mut critic = Network::new(critic_network(obs_dim, cfg.hidden_dim));
    critic.init(&mut init_rng);
    let mut actor_target = actor.clone();
    let mut critic_target = critic.clone();

    let mut adam_actor = Adam::new(actor.param_count(), cfg.actor_lr);
    let mut adam_critic = Adam::new(critic.param_count(), cfg.critic_lr);
    let mut replay: ReplayBuffer<f64> =
        ReplayBuffer::new(cfg.replay_capacity, derive_seed(cfg.seed, "ddpg-replay"));

    let mut tracker: SnapshotTracker<W> = SnapshotTracker::new();
    let mut log = TrainLog::default();
    let mut history = ErrorHistory::new(cfg.memory_depth);

    for episode in 1..=cfg.episodes {
        plant.reset();
        history.reset();
        let mut u = 0.0;
        let mut theta = 0.0;
        history.push(theta - reference[0])?;

        let progress = if cfg.episodes > 1 {
            (episode - 1) as f64 / (cfg.episodes - 1) as f64
        } else {
            0.0
        };
        let noise_std =
            cfg.out_scale * lerp(cfg.noise_frac_start, cfg.noise_frac_end, progress);

        let mut reward_sum = 0.0;
        let mut critic_loss_sum = 0.0;
        let mut actor_loss_sum = 0.0;
        let mut update_count = 0usize;

        for t in 0..cfg.steps_per_episode {
            let s = obs_vector(obs_kind, &history, theta, reference[t], theta_max);
            let mut a = cfg.out_scale * actor.apply(&s)[0];
            a += noise_std * standard_normal(&mut explore_rng);
            a = a.clamp(-cfg.out_scale, cfg.out_scale);

            u = apply_increment(u, a, limits);
            theta = plant.step(u)?.theta;
            let r = reward(theta / theta_max, reference[t + 1] / theta_max, cfg.reward_scale);
            history.push(theta - reference[t + 1])?;
            let s_next = obs_vector(obs_kind, &history, theta, reference[t + 1], theta_max);

            replay.push(Transition {
                s,
                a,
                r,
                s_next,
                done: t + 1 == cfg.steps_per_episode,
            });
            reward_sum += r;

            if replay.len() >= cfg.warmup {
                for _ in 0..cfg.gradient_steps {
                    let (critic_loss, actor_loss) = ddpg_update(
                        cfg,
                        &mut replay,
                        &mut actor,
                        &mut critic,
                        &mut actor_target,
                        &mut critic_target,
                        &mut adam_actor,
                        &mut adam_critic,
                    )?;
                    critic_loss_sum += critic_loss;
                    actor_loss_sum += actor_loss;
                    update_count += 1;
                }
            }
        }

        let mean_reward = reward_sum / cfg.steps_per_episode as f64;
        let snapshot = extract(&actor);
        let fired = tracker.snapshot_if_improved(episode, mean_reward, &snapshot);
        let denom = update_count.max(1) as f64;
        log.episodes.push(EpisodeStats {
            episode,
            mean_reward,
            critic_loss_mean: critic_loss_sum / denom,
            actor_loss_mean: actor_loss_sum / denom,
            snapshot_flag: fired,
        });
    }

    finish(tracker, log, extract(&actor))
}

#[allow(clippy::too_many_arguments)]
fn ddpg_update(
    cfg: &TrainerConfig,
    replay: &mut ReplayBuffer<f64>,
    actor: &mut Network,
    critic: &mut Network,
    actor_target: &mut Network,
    critic_target: &mut Network,
    adam_actor: &mut Adam,
    adam_critic: &mut Adam,
) -> Result<(f64, f64)> {
    let batch = match replay.sample(cfg.batch_size) {
        Some(batch) => batch,
        None => return Ok((0.0, 0.0)),
    };
    let n = batch.len() as f64;

    let y = td_target_ddpg(
        &batch,
        |s| cfg.out_scale * actor_target.apply(s)[0],
        |s, a| {
            let mut input = s.to_vec();
            input.push(a / cfg.out_scale);
            critic_target.apply(&input)[0]
        },
        cfg.gamma,
    );

    // Critic regression on the targets.
    let mut critic_grads = vec![0.0; critic.param_count()];
    let mut critic_loss = 0.0;
    let mut tape = Tape::new();
    for (transition, target) in batch.iter().zip(&y) {
        let mut input = transition.s.clone();
        input.push(transition.a / cfg.out_scale);
        tape.clear();
        let mut state = State::default();
        let q = critic.step_traced(&input, &mut state, &mut tape)[0];
        let diff = q - target;
        critic_loss += diff * diff;
        critic.backward(&tape, &[vec![2.0 * diff / n]], &mut critic_grads);
    }
    critic_loss /= n;
    adam_critic.step(critic.params_mut(), &critic_grads);
    check_divergence("ddpg critic", critic.params(), critic_loss, cfg.divergence_bound)?;

    // Sampled policy gradient: push the critic's action gradient
    // through the actor, maximizing mean Q.
    let mut actor_grads = vec![0.0; actor.param_count()];
    let mut scratch = vec![0.0; critic.param_count()];
    let mut q_sum = 0.0;
    let obs_dim = actor.input_dim();
    for transition in &batch {
        tape.clear();
        let mut state = State::default();
        let a_unit = actor.step_traced(&transition.s, &mut state, &mut tape)[0];
        let actor_tape = tape.clone();

        let mut input = transition.s.clone();
        input.push(a_unit);
        tape.clear();
        let mut cstate = State::default();
        let q = critic.step_traced(&input, &mut cstate, &mut tape)[0];
        q_sum += q;
        let d_input = critic.backward(&tape, &[vec![1.0]], &mut scratch);
        let dq_da_unit = d_input[0][obs_dim];

        actor.backward(&actor_tape, &[vec![-dq_da_unit / n]], &mut actor_grads);
    }
    adam_actor.step(actor.params_mut(), &actor_grads);
    let actor_loss = -q_sum / n;
    check_divergence("ddpg actor", actor.params(), actor_loss, cfg.divergence_bound)?;

    soft_update(critic_target.params_mut(), critic.params(), cfg.tau);
    soft_update(actor_target.params_mut(), actor.params(), cfg.tau);
    Ok((critic_loss, actor_loss))
}

pub(crate) fn finish<W: Clone>(
    tracker: SnapshotTracker<W>,
    mut log: TrainLog,
    last: W,
) -> Result<TrainResult<W>> {
    let (literal, best) = tracker.into_parts();
    log.literal_snapshot_episode = literal.as_ref().map(|(ep, _)| *ep);
    log.best_snapshot_episode = best.as_ref().map(|(ep, _)| *ep);
    let (best_episode, best_weights) = best.expect("at least one episode ran");
    Ok(TrainResult {
        best: best_weights,
        best_episode,
        literal,
        last,
        log,
    })
}
