//! Shared reinforcement learning machinery: reward, replay buffer,
//! target-network updates, TD targets, episode bookkeeping, and the
//! mean-reward snapshot rule used by all trainers.
//!
//! Three trainers build on this module. DDPG and SAC learn the
//! single-layer finite memory actor; DQN learns a Q-network over a
//! discrete set of actuation increments. Each also has a three-layer
//! baseline variant that shares the environment loop and differs only
//! in policy architecture.

mod ddpg;
mod dqn;
mod sac;

pub use ddpg::{train_baseline_ddpg, train_fmc_ddpg, MlpPolicy};
pub use dqn::{train_baseline_dqn, train_fmc_dqn, DqnPolicy};
pub use sac::{train_baseline_sac, train_fmc_sac};

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Tracking reward `-scale * (p - p_d)^2`.
///
/// Both angles are expected in normalized units (degrees divided by the
/// plant's saturation angle) so the conventional `scale = 1000` gives
/// rewards of comparable magnitude across plants.
pub fn reward(p: f64, p_d: f64, scale: f64) -> f64 {
    let e = p - p_d;
    -scale * e * e
}

/// One stored environment step. `A` is `f64` for continuous-action
/// trainers and a `usize` action-set index for DQN.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<A: Clone> {
    pub s: Vec<f64>,
    pub a: A,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

/// Bounded FIFO of transitions with uniform with-replacement sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<A: Clone> {
    items: VecDeque<Transition<A>>,
    capacity: usize,
    rng: ChaCha8Rng,
}

impl<A: Clone> ReplayBuffer<A> {
    pub fn new(capacity: usize, seed: u64) -> Self {
        use rand::SeedableRng;
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 20)),
            capacity,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn push(&mut self, t: Transition<A>) {
        assert_eq!(t.s.len(), t.s_next.len(), "transition state dims must match");
        assert!(t.r.is_finite(), "transition reward must be finite");
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Draws `n` transitions uniformly with replacement, or `None`
    /// while the buffer is empty so trainers can skip gradient steps
    /// until warm.
    pub fn sample(&mut self, n: usize) -> Option<Vec<Transition<A>>> {
        if self.items.is_empty() {
            return None;
        }
        let len = self.items.len();
        Some(
            (0..n)
                .map(|_| self.items[self.rng.random_range(0..len)].clone())
                .collect(),
        )
    }
}

/// How a baseline policy observes the plant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineObs {
    /// Same error history state as the finite memory controllers.
    ErrorHistory,
    /// Current angle and current reference, `[p_t, p_t^d]`.
    AnglePair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    /// Discount factor in `[0, 1)`.
    pub gamma: f64,
    /// Soft target-update rate in `(0, 1]`.
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Transitions stored before gradient steps begin.
    pub warmup: usize,
    /// Gradient steps per environment step once warm.
    pub gradient_steps: usize,
    pub reward_scale: f64,
    /// Memory depth k; the error history holds k+1 entries.
    pub memory_depth: usize,
    /// Output scale of continuous actors in kPa per step.
    pub out_scale: f64,
    /// DDPG exploration noise std as a fraction of `out_scale`,
    /// annealed linearly from start to end over the episodes.
    pub noise_frac_start: f64,
    pub noise_frac_end: f64,
    /// DQN discrete increment set F in kPa, strictly increasing.
    pub action_set: Vec<f64>,
    /// DQN epsilon-greedy schedule: linear from start to end over the
    /// first `epsilon_decay_fraction` of all environment steps.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_fraction: f64,
    /// DQN hard target reset period C in environment steps.
    pub target_reset_period: usize,
    /// SAC entropy temperature.
    pub alpha_ent: f64,
    /// SAC policy standard deviation floor.
    pub std_floor: f64,
    /// Output scale substituted for `out_scale` when assembling a SAC
    /// run; the unbounded linear actor needs a gentler increment.
    pub sac_out_scale: f64,
    /// Hidden width of critics, Q-networks, and baseline actors.
    pub hidden_dim: usize,
    pub seed: u64,
    /// Training aborts when any parameter magnitude exceeds this.
    pub divergence_bound: f64,
    pub baseline_obs: BaselineObs,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            tau: 0.01,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            episodes: 150,
            steps_per_episode: 400,
            batch_size: 64,
            replay_capacity: 50_000,
            warmup: 500,
            gradient_steps: 1,
            reward_scale: 1000.0,
            memory_depth: 4,
            out_scale: 5.0,
            noise_frac_start: 0.2,
            noise_frac_end: 0.02,
            action_set: vec![-5.0, -2.0, -0.5, 0.0, 0.5, 2.0, 5.0],
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            target_reset_period: 200,
            alpha_ent: 0.05,
            std_floor: 1e-3,
            sac_out_scale: 1.0,
            hidden_dim: 32,
            seed: 0,
            divergence_bound: 1e6,
            baseline_obs: BaselineObs::ErrorHistory,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "trainer: gamma must satisfy 0 <= gamma < 1, got {}",
                self.gamma
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!(
                "trainer: tau must satisfy 0 < tau <= 1, got {}",
                self.tau
            )));
        }
        if self.target_reset_period < 1 {
            return Err(Error::Config("trainer: target reset period must be >= 1".into()));
        }
        if self.action_set.len() < 2 {
            return Err(Error::Config("trainer: action set needs at least two increments".into()));
        }
        if !self.action_set.windows(2).all(|p| p[0] < p[1]) {
            return Err(Error::Config("trainer: action set must be strictly increasing".into()));
        }
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return Err(Error::Config("trainer: episodes and steps must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("trainer: batch size must be positive".into()));
        }
        if !(self.out_scale > 0.0) {
            return Err(Error::Config("trainer: out_scale must be positive".into()));
        }
        if !(self.sac_out_scale > 0.0) {
            return Err(Error::Config("trainer: sac_out_scale must be positive".into()));
        }
        if !(self.epsilon_start >= 0.0
            && self.epsilon_start <= 1.0
            && self.epsilon_end >= 0.0
            && self.epsilon_end <= 1.0)
        {
            return Err(Error::Config("trainer: epsilon bounds must lie in [0, 1]".into()));
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            return Err(Error::Config(
                "trainer: epsilon decay fraction must lie in (0, 1]".into(),
            ));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(Error::Config("trainer: divergence bound must be positive".into()));
        }
        if !(self.std_floor > 0.0) {
            return Err(Error::Config("trainer: std floor must be positive".into()));
        }
        if self.alpha_ent < 0.0 {
            return Err(Error::Config("trainer: entropy temperature must be >= 0".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("trainer: hidden dim must be positive".into()));
        }
        Ok(())
    }
}

/// Per-episode training statistics, one CSV row each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    /// 1-based episode index n.
    pub episode: usize,
    /// Mean reward over the episode's steps.
    pub mean_reward: f64,
    pub critic_loss_mean: f64,
    pub actor_loss_mean: f64,
    /// Whether the literal snapshot rule fired after this episode.
    pub snapshot_flag: bool,
}

/// Complete per-episode record of one training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeStats>,
    /// Episode of the last literal-rule snapshot, if any fired.
    pub literal_snapshot_episode: Option<usize>,
    /// Episode of the best-mean-reward snapshot used for evaluation.
    pub best_snapshot_episode: Option<usize>,
}

impl TrainLog {
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "episode,mean_reward,critic_loss_mean,actor_loss_mean,snapshot_flag")?;
        for row in &self.episodes {
            writeln!(
                out,
                "{},{},{},{},{}",
                row.episode,
                row.mean_reward,
                row.critic_loss_mean,
                row.actor_loss_mean,
                row.snapshot_flag as u8
            )?;
        }
        Ok(())
    }
}

/// Implements the per-episode snapshot bookkeeping.
///
/// The literal rule copies the policy whenever an episode's mean reward
/// strictly exceeds the immediately preceding episode's; that can keep
/// a non-best policy, so the best-so-far snapshot is tracked alongside
/// and is what evaluation uses. Both store deep copies.
#[derive(Clone, Debug)]
pub struct SnapshotTracker<W: Clone> {
    prev_mean: Option<f64>,
    best_mean: Option<f64>,
    literal: Option<(usize, W)>,
    best: Option<(usize, W)>,
}

impl<W: Clone> SnapshotTracker<W> {
    pub fn new() -> Self {
        Self {
            prev_mean: None,
            best_mean: None,
            literal: None,
            best: None,
        }
    }

    /// Feeds one completed episode; returns whether the literal rule
    /// fired (`mean_reward` strictly above the previous episode's).
    pub fn snapshot_if_improved(&mut self, episode: usize, mean_reward: f64, weights: &W) -> bool {
        let literal_fired = match self.prev_mean {
            Some(prev) => mean_reward > prev,
            // No preceding episode to improve on.
            None => false,
        };
        if literal_fired {
            self.literal = Some((episode, weights.clone()));
        }
        let best_fired = match self.best_mean {
            Some(best) => mean_reward > best,
            None => true,
        };
        if best_fired {
            self.best_mean = Some(mean_reward);
            self.best = Some((episode, weights.clone()));
        }
        self.prev_mean = Some(mean_reward);
        literal_fired
    }

    pub fn literal(&self) -> Option<&(usize, W)> {
        self.literal.as_ref()
    }

    pub fn best(&self) -> Option<&(usize, W)> {
        self.best.as_ref()
    }

    pub fn into_parts(self) -> (Option<(usize, W)>, Option<(usize, W)>) {
        (self.literal, self.best)
    }
}

impl<W: Clone> Default for SnapshotTracker<W> {
    fn default() -> Self {
        Self::new()
    }
}

/// Result of one training run: the evaluation (best-so-far) policy,
/// the literal-rule snapshot when one fired, the final policy, and the
/// full log.
#[derive(Clone, Debug)]
pub struct TrainResult<W> {
    pub best: W,
    pub best_episode: usize,
    pub literal: Option<(usize, W)>,
    pub last: W,
    pub log: TrainLog,
}

/// In-place soft target update `w_target <- tau*w_main + (1-tau)*w_target`.
pub fn soft_update(target: &mut [f64], main: &[f64], tau: f64) {
    assert_eq!(target.len(), main.len(), "soft update requires matching shapes");
    for (t, m) in target.iter_mut().zip(main) {
        *t = tau * m + (1.0 - tau) * *t;
    }
}

/// DDPG TD targets `y_i = r_i + gamma * Q_target(s', actor_target(s'))`,
/// computed entirely from target-network closures so no gradient can
/// flow through them. The continuing-task form has no terminal split.
pub fn td_target_ddpg<A: Clone>(
    batch: &[Transition<A>],
    actor_target: impl Fn(&[f64]) -> f64,
    critic_target: impl Fn(&[f64], f64) -> f64,
    gamma: f64,
) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            let a_next = actor_target(&t.s_next);
            t.r + gamma * critic_target(&t.s_next, a_next)
        })
        .collect()
}

/// DQN TD targets with the terminal case split:
/// `y_i = r_i` at episode termination, otherwise
/// `y_i = r_i + gamma * max_a Q_target(s')`.
pub fn td_target_dqn(
    batch: &[Transition<usize>],
    qnet_target: impl Fn(&[f64]) -> Vec<f64>,
    gamma: f64,
) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                t.r
            } else {
                let qs = qnet_target(&t.s_next);
                let max_q = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                t.r + gamma * max_q
            }
        })
        .collect()
}

/// Aborts training when parameters blow up or a loss stops being finite.
pub(crate) fn check_divergence(tag: &str, params: &[f64], loss: f64, bound: f64) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Training(format!("{tag}: loss became non-finite ({loss})")));
    }
    for (idx, p) in params.iter().enumerate() {
        if !p.is_finite() || p.abs() > bound {
            return Err(Error::Training(format!(
                "{tag}: parameter {idx} diverged to {p} (bound {bound})"
            )));
        }
    }
    Ok(())
}

/// Validates a reference trajectory against an episode protocol: one
/// value per step plus the initial point, all finite and within the
/// plant's angle range.
pub(crate) fn check_reference(reference: &[f64], steps: usize, theta_max: f64) -> Result<()> {
    if reference.len() != steps + 1 {
        return Err(Error::Input(format!(
            "reference trajectory must have steps+1 = {} values, got {}",
            steps + 1,
            reference.len()
        )));
    }
    for (idx, v) in reference.iter().enumerate() {
        if !v.is_finite() || v.abs() > theta_max {
            return Err(Error::Input(format!(
                "reference value {v} at index {idx} outside plant range [-{theta_max}, {theta_max}]"
            )));
        }
    }
    Ok(())
}

/// Linear interpolation helper for schedules over `[0, 1]` progress.
pub(crate) fn lerp(start: f64, end: f64, progress: f64) -> f64 {
    start + (end - start) * progress.clamp(0.0, 1.0)
}

/// Draws one standard normal sample via Box-Muller-free ziggurat from
/// `rand_distr`, kept behind a helper so trainers share one code path.
pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::StandardNormal;
    let v: f64 = rng.sample(StandardNormal);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn transition(s: f64, a: f64, r: f64, s_next: f64, done: bool) -> Transition<f64> {
        Transition {
            s: vec![s],
            a,
            r,
            s_next: vec![s_next],
            done,
        }
    }

    #[test]
    fn reward_is_zero_at_perfect_tracking() {
        assert_eq!(reward(0.4, 0.4, 1000.0), 0.0);
    }

    #[test]
    fn reward_matches_formula() {
        assert!((reward(0.1, 0.0, 1000.0) - (-10.0)).abs() < 1e-12);
    }

    #[test]
    fn reward_is_symmetric() {
        assert_eq!(reward(0.3, 0.7, 1000.0), reward(0.7, 0.3, 1000.0));
    }

    #[test]
    fn sampling_single_item_buffer_repeats_it() {
        let mut buf = ReplayBuffer::new(10, 0);
        buf.push(transition(1.0, 2.0, -1.0, 1.5, false));
        let batch = buf.sample(3).unwrap();
        assert_eq!(batch.len(), 3);
        for t in batch {
            assert_eq!(t.a, 2.0);
        }
    }

    #[test]
    fn sampling_empty_buffer_signals_not_ready() {
        let mut buf: ReplayBuffer<f64> = ReplayBuffer::new(10, 0);
        assert!(buf.sample(4).is_none());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut a = ReplayBuffer::new(100, 5);
        let mut b = ReplayBuffer::new(100, 5);
        for k in 0..50 {
            let t = transition(k as f64, 0.0, -1.0, k as f64 + 1.0, false);
            a.push(t.clone());
            b.push(t);
        }
        assert_eq!(a.sample(16), b.sample(16));
    }

    #[test]
    fn sampling_is_close_to_uniform() {
        let mut buf = ReplayBuffer::new(2, 123);
        buf.push(transition(0.0, 0.0, 0.0, 0.0, false));
        buf.push(transition(1.0, 1.0, 0.0, 1.0, false));
        let mut count_first = 0usize;
        for t in buf.sample(10_000).unwrap() {
            if t.a == 0.0 {
                count_first += 1;
            }
        }
        // Each item's frequency must land within 5% of one half.
        assert!((4750..=5250).contains(&count_first), "count {count_first}");
    }

    #[test]
    fn buffer_evicts_oldest_beyond_capacity() {
        let mut buf = ReplayBuffer::new(3, 0);
        for k in 0..5 {
            buf.push(transition(k as f64, k as f64, 0.0, 0.0, false));
        }
        assert_eq!(buf.len(), 3);
        let batch = buf.sample(100).unwrap();
        assert!(batch.iter().all(|t| t.a >= 2.0));
    }

    #[test]
    fn soft_update_tau_one_is_hard_copy() {
        let main = vec![1.5, -2.0, 0.25, 1e-9];
        let mut target = vec![9.0, 3.0, -4.0, 7.0];
        soft_update(&mut target, &main, 1.0);
        for (t, m) in target.iter().zip(&main) {
            assert_eq!(t.to_bits(), m.to_bits());
        }
    }

    #[test]
    fn soft_update_tau_zero_is_identity() {
        let main = vec![1.0, 2.0];
        let mut target = vec![5.0, -6.0];
        soft_update(&mut target, &main, 0.0);
        assert_eq!(target, vec![5.0, -6.0]);
    }

    #[test]
    fn soft_update_midpoint() {
        let mut target = vec![0.0];
        soft_update(&mut target, &[1.0], 0.5);
        assert_eq!(target, vec![0.5]);
    }

    #[test]
    fn soft_update_converges_geometrically() {
        let main = vec![2.0; 4];
        let mut target = vec![0.0; 4];
        let tau = 0.1;
        let mut gap: f64 = 2.0;
        for _ in 0..100 {
            soft_update(&mut target, &main, tau);
            let new_gap = (target[0] - 2.0).abs();
            assert!((new_gap - (1.0 - tau) * gap).abs() < 1e-12);
            gap = new_gap;
        }
    }

    #[test]
    fn ddpg_targets_reduce_to_reward_at_gamma_zero() {
        let batch = vec![
            transition(0.0, 0.1, -3.0, 0.5, false),
            transition(0.5, -0.2, -1.0, 0.2, true),
        ];
        let y = td_target_ddpg(&batch, |_| 0.7, |_, _| 123.0, 0.0);
        assert_eq!(y, vec![-3.0, -1.0]);
    }

    #[test]
    fn ddpg_targets_use_target_networks() {
        let batch = vec![transition(0.0, 0.0, -2.0, 1.0, false)];
        // Constant target critic output 4 regardless of input.
        let y = td_target_ddpg(&batch, |_| 0.0, |_, _| 4.0, 0.5);
        assert_eq!(y, vec![-2.0 + 0.5 * 4.0]);
    }

    #[test]
    fn ddpg_targets_match_hand_computed_linear_nets() {
        // Actor g(s) = 2*s0, critic Q(s, a) = s0 + 3*a.
        let batch = vec![
            transition(1.0, 0.5, -1.0, 2.0, false),
            transition(-1.0, 0.2, -4.0, 0.5, false),
        ];
        let y = td_target_ddpg(
            &batch,
            |s| 2.0 * s[0],
            |s, a| s[0] + 3.0 * a,
            0.9,
        );
        // y0 = -1 + 0.9*(2 + 3*4) = 11.6; y1 = -4 + 0.9*(0.5 + 3*1) = -0.85
        assert!((y[0] - 11.6).abs() < 1e-12);
        assert!((y[1] - (-0.85)).abs() < 1e-12);
    }

    #[test]
    fn dqn_terminal_transitions_get_raw_reward() {
        let batch = vec![Transition {
            s: vec![0.0],
            a: 1usize,
            r: -7.0,
            s_next: vec![1.0],
            done: true,
        }];
        let y = td_target_dqn(&batch, |_| vec![100.0, 200.0], 0.9);
        assert_eq!(y, vec![-7.0]);
    }

    #[test]
    fn dqn_target_arithmetic() {
        let batch = vec![Transition {
            s: vec![0.0],
            a: 0usize,
            r: -10.0,
            s_next: vec![1.0],
            done: false,
        }];
        let y = td_target_dqn(&batch, |_| vec![5.0, 2.0], 0.9);
        assert!((y[0] - (-5.5)).abs() < 1e-12);
    }

    #[test]
    fn dqn_max_ignores_action_order() {
        let batch = vec![Transition {
            s: vec![0.0],
            a: 0usize,
            r: 0.0,
            s_next: vec![1.0],
            done: false,
        }];
        let a = td_target_dqn(&batch, |_| vec![3.0, 7.0], 1.0 - 1e-9);
        let b = td_target_dqn(&batch, |_| vec![7.0, 3.0], 1.0 - 1e-9);
        assert_eq!(a, b);
    }

    #[test]
    fn snapshot_fires_on_strict_improvement() {
        let mut tracker = SnapshotTracker::new();
        assert!(!tracker.snapshot_if_improved(1, -5.0, &"w1"));
        assert!(tracker.snapshot_if_improved(2, -3.0, &"w2"));
        assert_eq!(tracker.literal().unwrap(), &(2, "w2"));
    }

    #[test]
    fn snapshot_requires_strict_inequality() {
        let mut tracker = SnapshotTracker::new();
        tracker.snapshot_if_improved(1, -3.0, &"w1");
        assert!(!tracker.snapshot_if_improved(2, -3.0, &"w2"));
        assert!(tracker.literal().is_none());
    }

    #[test]
    fn snapshot_rule_is_literal_not_best_so_far() {
        let mut tracker = SnapshotTracker::new();
        tracker.snapshot_if_improved(1, -3.0, &"w1");
        tracker.snapshot_if_improved(2, -5.0, &"w2");
        // -4 > -5 fires the literal rule even though -4 < -3.
        assert!(tracker.snapshot_if_improved(3, -4.0, &"w3"));
        assert_eq!(tracker.literal().unwrap(), &(3, "w3"));
        // Best-so-far still points at episode 1.
        assert_eq!(tracker.best().unwrap(), &(1, "w1"));
    }

    #[test]
    fn best_snapshot_means_are_non_decreasing() {
        let mut tracker = SnapshotTracker::new();
        let rewards = [-9.0, -4.0, -6.0, -2.0, -2.0, -1.0];
        let mut best_means = Vec::new();
        let mut best_mean = f64::NEG_INFINITY;
        for (ep, r) in rewards.iter().enumerate() {
            tracker.snapshot_if_improved(ep + 1, *r, &ep);
            if *r > best_mean {
                best_mean = *r;
                best_means.push(best_mean);
            }
        }
        assert!(best_means.windows(2).all(|p| p[0] <= p[1]));
        assert_eq!(tracker.best().unwrap().0, 6);
    }

    #[test]
    fn trainer_config_invariants_are_enforced() {
        let mut cfg = TrainerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.gamma = 1.0;
        assert!(cfg.validate().is_err());
        cfg = TrainerConfig::default();
        cfg.tau = 0.0;
        assert!(cfg.validate().is_err());
        cfg = TrainerConfig::default();
        cfg.target_reset_period = 0;
        assert!(cfg.validate().is_err());
        cfg = TrainerConfig::default();
        cfg.action_set = vec![-1.0, -1.0, 2.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn divergence_detector_flags_blowups() {
        assert!(check_divergence("t", &[0.5, 2.0], -1.0, 1e6).is_ok());
        assert!(check_divergence("t", &[0.5, 2e6], -1.0, 1e6).is_err());
        assert!(check_divergence("t", &[0.5], f64::NAN, 1e6).is_err());
        assert!(check_divergence("t", &[f64::INFINITY], -1.0, 1e6).is_err());
    }

    #[test]
    fn train_log_csv_has_expected_shape() {
        let log = TrainLog {
            episodes: vec![
                EpisodeStats {
                    episode: 1,
                    mean_reward: -5.25,
                    critic_loss_mean: 0.5,
                    actor_loss_mean: -0.1,
                    snapshot_flag: false,
                },
                EpisodeStats {
                    episode: 2,
                    mean_reward: -3.0,
                    critic_loss_mean: 0.25,
                    actor_loss_mean: -0.2,
                    snapshot_flag: true,
                },
            ],
            literal_snapshot_episode: Some(2),
            best_snapshot_episode: Some(2),
        };
        let mut out = Vec::new();
        log.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "episode,mean_reward,critic_loss_mean,actor_loss_mean,snapshot_flag"
        );
        assert_eq!(lines[1], "1,-5.25,0.5,-0.1,0");
        assert_eq!(lines[2], "2,-3,0.25,-0.2,1");
    }

    proptest! {
        #[test]
        fn every_sampled_transition_was_stored(
            rewards in proptest::collection::vec(-100.0f64..0.0, 1..40),
            seed in 0u64..500,
        ) {
            let mut buf = ReplayBuffer::new(64, seed);
            let mut stored = Vec::new();
            for (k, r) in rewards.iter().enumerate() {
                let t = transition(k as f64 * 0.5, *r, *r, k as f64, false);
                stored.push(t.clone());
                buf.push(t);
            }
            for t in buf.sample(64).unwrap() {
                prop_assert!(stored.contains(&t));
            }
        }

        #[test]
        fn greedy_action_is_scale_invariant(
            qs in proptest::collection::vec(-50.0f64..50.0, 2..10),
            scale in 0.01f64..100.0,
        ) {
            let argmax = |v: &[f64]| {
                let mut best = 0;
                for (idx, val) in v.iter().enumerate() {
                    if *val > v[best] {
                        best = idx;
                    }
                }
                best
            };
            let scaled: Vec<f64> = qs.iter().map(|q| q * scale).collect();
            prop_assert_eq!(argmax(&qs), argmax(&scaled));
        }

        #[test]
        fn soft_update_stays_within_endpoints(
            main in -10.0f64..10.0,
            target in -10.0f64..10.0,
            tau in 0.0f64..=1.0,
        ) {
            let mut t = vec![target];
            soft_update(&mut t, &[main], tau);
            let lo = main.min(target) - 1e-12;
            let hi = main.max(target) + 1e-12;
            prop_assert!(t[0] >= lo && t[0] <= hi);
        }
    }
}
