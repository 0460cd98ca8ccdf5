//! SAC trainer with the explicit V-critic / target-V formulation.
//!
//! The stochastic policy is a Gaussian whose mean comes from the actor
//! network (single-layer linear for the finite memory variant) and
//! whose standard deviation is one learned state-independent parameter
//! kept above a configured floor. Twin Q critics regress onto
//! `r + gamma * V_target(s')`; the V critic regresses onto
//! `min(Q1, Q2) - alpha * log pi` at freshly sampled actions; the actor
//! minimizes `alpha * log pi - min(Q1, Q2)` through the
//! reparameterization `a = mean + sigma * xi`.

use super::ddpg::{
    baseline_actor_network, critic_network, finish, fmc_actor_network, fmc_weights_from_actor,
    obs_vector,
};
use super::{
    check_divergence, check_reference, reward, soft_update, standard_normal, BaselineObs,
    EpisodeStats, MlpPolicy, ReplayBuffer, SnapshotTracker, TrainLog, TrainResult, TrainerConfig,
    Transition,
};
use crate::error::Result;
use crate::fmc::{apply_increment, ErrorHistory, FmcWeights};
use crate::nn::{Activation, Adam, LayerSpec, Network, State, Tape};
use crate::plant::Plant;
use crate::seeds::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LOG_2PI: f64 = 1.8378770664093453;

/// Gaussian log density evaluated at the reparameterized sample
/// `a = mean + sigma * xi`, which reduces to a function of `xi` and
/// `sigma` only.
fn log_pi(xi: f64, sigma: f64) -> f64 {
    -0.5 * xi * xi - sigma.ln() - 0.5 * LOG_2PI
}

/// Gradient of the per-sample actor loss with respect to sigma:
/// the reparameterized Q term plus the entropy pressure `-alpha/sigma`
/// that keeps sigma away from zero while alpha is positive. As alpha
/// approaches zero only the Q term remains and sigma is free to
/// collapse toward its floor.
fn sigma_gradient(xi: f64, dq_da: f64, alpha: f64, sigma: f64) -> f64 {
    -xi * dq_da - alpha / sigma
}

/// V-network layout: observation in, scalar value out.
fn value_network(obs_dim: usize, hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            input: obs_dim,
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

/// Trains the finite memory controller with SAC and a linear output.
pub fn train_fmc_sac<P: Plant>(
    plant: &mut P,
    reference: &[f64],
    cfg: &TrainerConfig,
) -> Result<TrainResult<FmcWeights>> {
    let theta_max = plant.theta_max();
    let actor = fmc_actor_network(cfg.memory_depth, Activation::Linear);
    sac_core(plant, reference, cfg, BaselineObs::ErrorHistory, actor, |net| {
        fmc_weights_from_actor(net, Activation::Linear, cfg.out_scale, theta_max)
    })
}

/// Trains the three-layer baseline actor with SAC (Relu hidden, linear
/// output) under the identical protocol.
pub fn train_baseline_sac<P: Plant>(
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
        baseline_actor_network(obs_dim, cfg.hidden_dim, Activation::Relu, Activation::Linear);
    let specs = actor.clone();
    sac_core(plant, reference, cfg, cfg.baseline_obs, actor, move |net| MlpPolicy {
        specs: specs.clone(),
        params: net.params().to_vec(),
        out_scale: cfg.out_scale,
        obs: cfg.baseline_obs,
        memory_depth: cfg.memory_depth,
        theta_max,
    })
}

struct SacNets {
    actor: Network,
    /// Raw parameter behind sigma = std_floor + exp(raw).
    log_std: f64,
    q1: Network,
    q2: Network,
    v: Network,
    v_target: Network,
}

impl SacNets {
    fn sigma(&self, floor: f64) -> f64 {
        floor + self.log_std.exp()
    }
}

fn sac_core<P: Plant, W: Clone>(
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
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "sac-init"));
    let mut explore_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "sac-explore"));
    let mut update_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "sac-update"));

    let mut actor = Network::new(actor_specs);
    actor.init(&mut init_rng);
    let mut q1 = Network::new(critic_network(obs_dim, cfg.hidden_dim));
    q1.init(&mut init_rng);
    let mut q2 = Network::new(critic_network(obs_dim, cfg.hidden_dim));
    q2.init(&mut init_rng);
    let mut v = Network::new(value_network(obs_dim, cfg.hidden_dim));
    v.init(&mut init_rng);
    let v_target = v.clone();

    let mut nets = SacNets {
        actor,
        // Initial sigma near half the output scale.
        log_std: (0.5 * cfg.out_scale).ln(),
        q1,
        q2,
        v,
        v_target,
    };

    let mut adam_actor = Adam::new(nets.actor.param_count(), cfg.actor_lr);
    let mut adam_log_std = Adam::new(1, cfg.actor_lr);
    let mut adam_q1 = Adam::new(nets.q1.param_count(), cfg.critic_lr);
    let mut adam_q2 = Adam::new(nets.q2.param_count(), cfg.critic_lr);
    let mut adam_v = Adam::new(nets.v.param_count(), cfg.critic_lr);

    let mut replay: ReplayBuffer<f64> =
        ReplayBuffer::new(cfg.replay_capacity, derive_seed(cfg.seed, "sac-replay"));
    let mut tracker: SnapshotTracker<W> = SnapshotTracker::new();
    let mut log = TrainLog::default();
    let mut history = ErrorHistory::new(cfg.memory_depth);

    for episode in 1..=cfg.episodes {
        plant.reset();
        history.reset();
        let mut u = 0.0;
        let mut theta = 0.0;
        history.push(theta - reference[0])?;

        let mut reward_sum = 0.0;
        let mut critic_loss_sum = 0.0;
        let mut actor_loss_sum = 0.0;
        let mut update_count = 0usize;

        for t in 0..cfg.steps_per_episode {
            let s = obs_vector(obs_kind, &history, theta, reference[t], theta_max);
            let mean = cfg.out_scale * nets.actor.apply(&s)[0];
            let sigma = nets.sigma(cfg.std_floor);
            let a = mean + sigma * standard_normal(&mut explore_rng);

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
                    let (critic_loss, actor_loss) = sac_update(
                        cfg,
                        &mut replay,
                        &mut nets,
                        &mut adam_actor,
                        &mut adam_log_std,
                        &mut adam_q1,
                        &mut adam_q2,
                        &mut adam_v,
                        &mut update_rng,
                    )?;
                    critic_loss_sum += critic_loss;
                    actor_loss_sum += actor_loss;
                    update_count += 1;
                }
            }
        }

        let mean_reward = reward_sum / cfg.steps_per_episode as f64;
        let snapshot = extract(&nets.actor);
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

    let last = extract(&nets.actor);
    finish(tracker, log, last)
}

#[allow(clippy::too_many_arguments)]
fn sac_update(
    cfg: &TrainerConfig,
    replay: &mut ReplayBuffer<f64>,
    nets: &mut SacNets,
    adam_actor: &mut Adam,
    adam_log_std: &mut Adam,
    adam_q1: &mut Adam,
    adam_q2: &mut Adam,
    adam_v: &mut Adam,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let batch = match replay.sample(cfg.batch_size) {
        Some(batch) => batch,
        None => return Ok((0.0, 0.0)),
    };
    let n = batch.len() as f64;
    let sigma = nets.sigma(cfg.std_floor);
    let alpha = cfg.alpha_ent;

    // Twin Q regression onto r + gamma * V_target(s').
    let mut q1_grads = vec![0.0; nets.q1.param_count()];
    let mut q2_grads = vec![0.0; nets.q2.param_count()];
    let mut q_loss = 0.0;
    let mut tape = Tape::new();
    for transition in &batch {
        let q_hat = transition.r + cfg.gamma * nets.v_target.apply(&transition.s_next)[0];
        let mut input = transition.s.clone();
        input.push(transition.a / cfg.out_scale);
        for (qnet, grads) in [(&mut nets.q1, &mut q1_grads), (&mut nets.q2, &mut q2_grads)] {
            tape.clear();
            let mut state = State::default();
            let q = qnet.step_traced(&input, &mut state, &mut tape)[0];
            let diff = q - q_hat;
            q_loss += diff * diff;
            qnet.backward(&tape, &[vec![2.0 * diff / n]], grads);
        }
    }
    q_loss /= 2.0 * n;
    adam_q1.step(nets.q1.params_mut(), &q1_grads);
    adam_q2.step(nets.q2.params_mut(), &q2_grads);
    check_divergence("sac q1", nets.q1.params(), q_loss, cfg.divergence_bound)?;
    check_divergence("sac q2", nets.q2.params(), q_loss, cfg.divergence_bound)?;

    // V regression onto min(Q1, Q2) - alpha * log pi at fresh actions.
    let mut v_grads = vec![0.0; nets.v.param_count()];
    let mut v_loss = 0.0;
    for transition in &batch {
        let mean = cfg.out_scale * nets.actor.apply(&transition.s)[0];
        let xi = standard_normal(rng);
        let sampled = mean + sigma * xi;
        let mut input = transition.s.clone();
        input.push(sampled / cfg.out_scale);
        let q_min = nets.q1.apply(&input)[0].min(nets.q2.apply(&input)[0]);
        let target_v = q_min - alpha * log_pi(xi, sigma);

        tape.clear();
        let mut state = State::default();
        let value = nets.v.step_traced(&transition.s, &mut state, &mut tape)[0];
        let diff = value - target_v;
        v_loss += diff * diff;
        nets.v.backward(&tape, &[vec![2.0 * diff / n]], &mut v_grads);
    }
    v_loss /= n;
    adam_v.step(nets.v.params_mut(), &v_grads);
    check_divergence("sac v", nets.v.params(), v_loss, cfg.divergence_bound)?;

    // Reparameterized policy update through min(Q1, Q2).
    let mut actor_grads = vec![0.0; nets.actor.param_count()];
    let mut log_std_grad = 0.0;
    let mut actor_loss = 0.0;
    let mut scratch1 = vec![0.0; nets.q1.param_count()];
    let mut scratch2 = vec![0.0; nets.q2.param_count()];
    let obs_dim = nets.actor.input_dim();
    for transition in &batch {
        tape.clear();
        let mut astate = State::default();
        let mean_unit = nets.actor.step_traced(&transition.s, &mut astate, &mut tape)[0];
        let actor_tape = tape.clone();
        let mean = cfg.out_scale * mean_unit;
        let xi = standard_normal(rng);
        let sampled = mean + sigma * xi;

        let mut input = transition.s.clone();
        input.push(sampled / cfg.out_scale);
        tape.clear();
        let mut q1_state = State::default();
        let q1_val = nets.q1.step_traced(&input, &mut q1_state, &mut tape)[0];
        let q1_tape = tape.clone();
        tape.clear();
        let mut q2_state = State::default();
        let q2_val = nets.q2.step_traced(&input, &mut q2_state, &mut tape)[0];

        let (q_min, dq_da) = if q1_val <= q2_val {
            let d_in = nets.q1.backward(&q1_tape, &[vec![1.0]], &mut scratch1);
            (q1_val, d_in[0][obs_dim] / cfg.out_scale)
        } else {
            let d_in = nets.q2.backward(&tape, &[vec![1.0]], &mut scratch2);
            (q2_val, d_in[0][obs_dim] / cfg.out_scale)
        };

        actor_loss += alpha * log_pi(xi, sigma) - q_min;
        // d loss / d mean = -dQ/da; the entropy term's mean-gradient
        // cancels exactly under reparameterization.
        nets.actor
            .backward(&actor_tape, &[vec![-dq_da * cfg.out_scale / n]], &mut actor_grads);
        log_std_grad += sigma_gradient(xi, dq_da, alpha, sigma) * nets.log_std.exp() / n;
    }
    actor_loss /= n;
    adam_actor.step(nets.actor.params_mut(), &actor_grads);
    let mut log_std_param = [nets.log_std];
    adam_log_std.step(&mut log_std_param, &[log_std_grad]);
    nets.log_std = log_std_param[0];
    check_divergence("sac actor", nets.actor.params(), actor_loss, cfg.divergence_bound)?;
    check_divergence("sac log-std", &[nets.log_std], actor_loss, cfg.divergence_bound)?;

    let (v_target, v_main) = (&mut nets.v_target, &nets.v);
    soft_update(v_target.params_mut(), v_main.params(), cfg.tau);

    Ok((q_loss + v_loss, actor_loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::max_relative_error;
    use crate::plant::{PlantConfig, SurrogateFinger};

    fn tiny_cfg() -> TrainerConfig {
        TrainerConfig {
            episodes: 3,
            steps_per_episode: 10,
            warmup: 5,
            batch_size: 4,
            out_scale: 1.0,
            ..TrainerConfig::default()
        }
    }

    fn step_reference(steps: usize) -> Vec<f64> {
        (0..=steps).map(|_| 30.0).collect()
    }

    #[test]
    fn log_has_one_entry_per_episode() {
        let mut plant = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let result = train_fmc_sac(&mut plant, &step_reference(10), &tiny_cfg()).unwrap();
        assert_eq!(result.log.episodes.len(), 3);
    }

    #[test]
    fn same_seed_gives_identical_runs() {
        let reference = step_reference(10);
        let cfg = tiny_cfg();
        let mut plant_a = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let mut plant_b = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let a = train_fmc_sac(&mut plant_a, &reference, &cfg).unwrap();
        let b = train_fmc_sac(&mut plant_b, &reference, &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.best.w, b.best.w);
    }

    #[test]
    fn fmc_actor_is_linear_single_layer() {
        let mut plant = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let cfg = tiny_cfg();
        let result = train_fmc_sac(&mut plant, &step_reference(10), &cfg).unwrap();
        assert_eq!(result.best.out_activation, Activation::Linear);
        assert_eq!(result.best.w.len(), cfg.memory_depth + 1);
    }

    #[test]
    fn baseline_actor_has_three_layers() {
        let mut plant = SurrogateFinger::new(PlantConfig::default()).unwrap();
        let result =
            train_baseline_sac(&mut plant, &step_reference(10), &tiny_cfg()).unwrap();
        assert_eq!(result.best.specs.len(), 3);
    }

    #[test]
    fn zero_entropy_lets_sigma_collapse_toward_floor() {
        // Simulate the sigma update rule on a concave synthetic
        // Q(a) = -a^2 whose optimum is deterministic. With alpha = 0
        // nothing opposes shrinking sigma; with alpha > 0 the entropy
        // pressure -alpha/sigma holds it away from the floor.
        let floor = 1e-3;
        let run = |alpha: f64| -> f64 {
            let mut raw = (0.5f64).ln();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let lr = 0.05;
            for _ in 0..200_000 {
                let sigma = floor + raw.exp();
                let xi = standard_normal(&mut rng);
                let a = sigma * xi;
                let dq_da = -2.0 * a;
                let grad = sigma_gradient(xi, dq_da, alpha, sigma) * raw.exp();
                raw -= lr * grad;
            }
            floor + raw.exp()
        };
        let sigma_zero_alpha = run(0.0);
        let sigma_with_entropy = run(0.05);
        assert!(
            sigma_zero_alpha < 10.0 * floor,
            "sigma should collapse toward the floor, got {sigma_zero_alpha}"
        );
        assert!(
            sigma_with_entropy > 10.0 * sigma_zero_alpha,
            "entropy pressure should keep sigma well above the collapsed value"
        );
    }

    #[test]
    fn actor_gradient_matches_central_differences() {
        // Fixed critic, fixed noise draws: the actor loss is a plain
        // deterministic function of the mean-net parameters and the
        // log-std, so its gradient can be checked numerically.
        let mut actor = Network::new(fmc_actor_network(2, Activation::Linear));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        actor.init(&mut rng);
        let mut critic = Network::new(critic_network(3, 8));
        critic.init(&mut rng);

        let out_scale = 1.0;
        let alpha = 0.05;
        let floor = 1e-3;
        let states = [
            vec![0.2, -0.1, 0.4],
            vec![-0.3, 0.5, 0.0],
            vec![0.1, 0.1, -0.2],
        ];
        let xis = [0.7, -1.2, 0.3];

        // Parameter vector: actor weights then the raw log-std.
        let mut params: Vec<f64> = actor.params().to_vec();
        params.push((0.4f64).ln());

        let loss_of = |p: &[f64]| -> f64 {
            let mut net = actor.clone();
            net.set_params(&p[..p.len() - 1]);
            let sigma = floor + p[p.len() - 1].exp();
            let mut total = 0.0;
            for (s, xi) in states.iter().zip(&xis) {
                let mean = out_scale * net.apply(s)[0];
                let a = mean + sigma * xi;
                let mut input = s.clone();
                input.push(a / out_scale);
                let q = critic.apply(&input)[0];
                total += alpha * log_pi(*xi, sigma) - q;
            }
            total / states.len() as f64
        };

        // Analytic gradient assembled exactly as the trainer does.
        let mut analytic = vec![0.0; params.len()];
        let n = states.len() as f64;
        let raw = params[params.len() - 1];
        let sigma = floor + raw.exp();
        let mut actor_grads = vec![0.0; actor.param_count()];
        let mut scratch = vec![0.0; critic.param_count()];
        let mut net = actor.clone();
        net.set_params(&params[..params.len() - 1]);
        let mut log_std_grad = 0.0;
        for (s, xi) in states.iter().zip(&xis) {
            let mut tape = Tape::new();
            let mut state = State::default();
            let mean_unit = net.step_traced(s, &mut state, &mut tape)[0];
            let mean = out_scale * mean_unit;
            let a = mean + sigma * xi;
            let mut input = s.clone();
            input.push(a / out_scale);
            let mut ctape = Tape::new();
            let mut cstate = State::default();
            critic.step_traced(&input, &mut cstate, &mut ctape);
            scratch.iter_mut().for_each(|g| *g = 0.0);
            let d_in = critic.backward(&ctape, &[vec![1.0]], &mut scratch);
            let dq_da = d_in[0][3] / out_scale;
            net.backward(&tape, &[vec![-dq_da * out_scale / n]], &mut actor_grads);
            log_std_grad += sigma_gradient(*xi, dq_da, alpha, sigma) * raw.exp() / n;
        }
        analytic[..actor.param_count()].copy_from_slice(&actor_grads);
        let last = analytic.len() - 1;
        analytic[last] = log_std_grad;

        let worst = max_relative_error(&mut params, &analytic, loss_of, 1e-5);
        assert!(worst < 1e-5, "max relative gradient error {worst}");
    }
}
