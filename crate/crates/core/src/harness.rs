//! Reference trajectories, episode execution, tracking metrics, and
//! the head-to-head comparison report.
//!
//! Every controller family is evaluated through the same
//! [`run_episode`] loop against the same plant and reference, so the
//! comparison differs only in the controller under test. Observation
//! routing is explicit: reference-only controllers never receive the
//! measured angle.

use crate::error::{Error, Result};
use crate::fmc::{apply_increment, ErrorHistory, FmcWeights};
use crate::plant::Plant;
use crate::rl::{reward, BaselineObs, DqnPolicy, MlpPolicy, TrainLog};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Steps,
    Sine,
    Mixed,
}

/// A desired-angle trajectory `[theta_0^r, ..., theta_N^r]` in degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTrajectory {
    pub kind: ReferenceKind,
    pub values: Vec<f64>,
}

impl ReferenceTrajectory {
    /// Plateau profile: `levels[i]` held for `n / levels.len()` steps,
    /// the final level absorbing the remainder. The trajectory has
    /// `n + 1` samples.
    pub fn steps(levels: &[f64], n: usize, theta_max: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("reference: steps needs at least one level".into()));
        }
        if n < 1 {
            return Err(Error::Config("reference: length must be at least 1".into()));
        }
        for &level in levels {
            if !level.is_finite() || level.abs() > theta_max {
                return Err(Error::Config(format!(
                    "reference: level {level} outside [-{theta_max}, {theta_max}]"
                )));
            }
        }
        let hold = (n / levels.len()).max(1);
        let values = (0..=n)
            .map(|t| levels[(t / hold).min(levels.len() - 1)])
            .collect();
        Ok(Self { kind: ReferenceKind::Steps, values })
    }

    /// Sinusoid `offset + amplitude * sin(2 pi f t)` with `f` in cycles
    /// per step.
    pub fn sine(
        offset: f64,
        amplitude: f64,
        frequency: f64,
        n: usize,
        theta_max: f64,
    ) -> Result<Self> {
        if n < 1 {
            return Err(Error::Config("reference: length must be at least 1".into()));
        }
        if !(offset.is_finite() && amplitude.is_finite() && frequency.is_finite()) {
            return Err(Error::Config("reference: sine parameters must be finite".into()));
        }
        if offset.abs() + amplitude.abs() > theta_max {
            return Err(Error::Config(format!(
                "reference: sine range {} exceeds theta_max {theta_max}",
                offset.abs() + amplitude.abs()
            )));
        }
        let values = (0..=n)
            .map(|t| offset + amplitude * (2.0 * std::f64::consts::PI * frequency * t as f64).sin())
            .collect();
        Ok(Self { kind: ReferenceKind::Sine, values })
    }

    /// Plateaus over the first half, a sinusoid over the second.
    pub fn mixed(
        levels: &[f64],
        offset: f64,
        amplitude: f64,
        frequency: f64,
        n: usize,
        theta_max: f64,
    ) -> Result<Self> {
        let half = n / 2;
        let head = Self::steps(levels, half.max(1), theta_max)?;
        let tail = Self::sine(offset, amplitude, frequency, n - half, theta_max)?;
        let mut values = head.values;
        values.pop();
        values.extend(tail.values);
        Ok(Self { kind: ReferenceKind::Mixed, values })
    }

    /// Number of control steps N (one less than the sample count).
    pub fn steps_len(&self) -> usize {
        self.values.len() - 1
    }
}

/// Default evaluation profile: four plateaus at 10, 40, 25, 60 degrees.
pub fn default_test_reference(n: usize, theta_max: f64) -> Result<ReferenceTrajectory> {
    ReferenceTrajectory::steps(&[10.0, 40.0, 25.0, 60.0], n, theta_max)
}

/// Default training profile: a sinusoid differing from the test
/// profile in both kind and frequency content.
pub fn default_train_reference(n: usize, theta_max: f64) -> Result<ReferenceTrajectory> {
    ReferenceTrajectory::sine(30.0, 20.0, 0.005, n, theta_max)
}

/// What a controller is allowed to observe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObsMode {
    /// Consumes the reference alone; the measured angle is withheld.
    ReferenceOnly,
    /// Receives the measured angle alongside the reference.
    Measured,
}

/// Per-step observation handed to a controller. `theta` is `None` for
/// reference-only controllers, enforcing the sensing contract
/// structurally rather than by convention.
#[derive(Clone, Copy, Debug)]
pub struct Obs {
    pub t: usize,
    pub theta: Option<f64>,
    pub ref_now: f64,
    pub ref_next: f64,
}

pub trait Controller {
    fn obs_mode(&self) -> ObsMode {
        ObsMode::Measured
    }
    /// Clears internal state (integrators, histories, recurrent state)
    /// for a fresh episode.
    fn reset(&mut self);
    /// Emits the actuation for this step.
    fn act(&mut self, obs: &Obs) -> Result<f64>;
}

/// An additive angle offset applied to the plant before the controller
/// observes step `step`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disturbance {
    pub step: usize,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub theta: f64,
    pub theta_ref: f64,
    pub error: f64,
    pub u: f64,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
    /// Step at which a non-finite actuation aborted the episode, if any.
    pub aborted_at: Option<usize>,
}

/// Runs one episode of `controller` against `plant` along `reference`.
/// The trace has one row per control step; `e_t = theta_t - theta_t^r`
/// by construction. A non-finite controller output stops the episode
/// and marks the trace aborted.
pub fn run_episode<C, P>(
    controller: &mut C,
    plant: &mut P,
    reference: &ReferenceTrajectory,
    reward_scale: f64,
    disturbance: Option<Disturbance>,
) -> Result<EpisodeTrace>
where
    C: Controller + ?Sized,
    P: Plant + ?Sized,
{
    if reference.values.len() < 2 {
        return Err(Error::Input("episode: reference needs at least two samples".into()));
    }
    plant.reset();
    controller.reset();
    let theta_max = plant.theta_max();
    let n = reference.steps_len();
    let mut theta = 0.0;
    let mut rows = Vec::with_capacity(n);

    for t in 0..n {
        if let Some(d) = disturbance {
            if d.step == t {
                plant.nudge(d.delta);
                theta = (theta + d.delta).clamp(-theta_max, theta_max);
            }
        }
        let obs = Obs {
            t,
            theta: match controller.obs_mode() {
                ObsMode::ReferenceOnly => None,
                ObsMode::Measured => Some(theta),
            },
            ref_now: reference.values[t],
            ref_next: reference.values[t + 1],
        };
        let u = controller.act(&obs)?;
        if !u.is_finite() {
            return Ok(EpisodeTrace { rows, aborted_at: Some(t) });
        }
        let next = plant.step(u)?;
        rows.push(TraceRow {
            t,
            theta,
            theta_ref: reference.values[t],
            error: theta - reference.values[t],
            u,
            reward: reward(
                next.theta / theta_max,
                reference.values[t + 1] / theta_max,
                reward_scale,
            ),
        });
        theta = next.theta;
    }
    Ok(EpisodeTrace { rows, aborted_at: None })
}

/// Mean absolute tracking error over all recorded steps.
pub fn avg_tracking_error(trace: &EpisodeTrace) -> f64 {
    if trace.rows.is_empty() {
        return f64::NAN;
    }
    trace.rows.iter().map(|r| r.error.abs()).sum::<f64>() / trace.rows.len() as f64
}

/// Largest absolute tracking error in the trace.
pub fn max_tracking_error(trace: &EpisodeTrace) -> f64 {
    trace
        .rows
        .iter()
        .map(|r| r.error.abs())
        .fold(f64::NAN, f64::max)
}

/// First episode (1-based) whose mean reward covers `fraction` of the
/// gap between the first episode and the final plateau, the plateau
/// being the mean over the last tenth of the curve.
pub fn episodes_to_plateau(mean_rewards: &[f64], fraction: f64) -> usize {
    assert!(!mean_rewards.is_empty(), "empty reward curve");
    let window = (mean_rewards.len() / 10).max(1);
    let plateau =
        mean_rewards[mean_rewards.len() - window..].iter().sum::<f64>() / window as f64;
    let start = mean_rewards[0];
    if plateau <= start {
        return 1;
    }
    let threshold = start + fraction * (plateau - start);
    mean_rewards
        .iter()
        .position(|&r| r >= threshold)
        .map(|i| i + 1)
        .unwrap_or(mean_rewards.len())
}

/// Header comment written at the top of every CSV artifact.
#[derive(Clone, Debug)]
pub struct TraceMeta {
    pub config_hash: String,
    pub seed: u64,
}

impl TraceMeta {
    pub fn comment(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }
}

pub fn write_trace_csv<W: std::io::Write>(
    out: &mut W,
    trace: &EpisodeTrace,
    meta: &TraceMeta,
) -> Result<()> {
    out.write_all(meta.comment().as_bytes())?;
    out.write_all(b"t,theta,theta_ref,error,u,reward\n")?;
    for r in &trace.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t, r.theta, r.theta_ref, r.error, r.u, r.reward
        )?;
    }
    Ok(())
}

/// One evaluated controller in a comparison.
#[derive(Clone, Debug)]
pub struct ComparisonRun {
    pub name: String,
    pub trace: EpisodeTrace,
    pub log: Option<TrainLog>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub avg_error: f64,
    pub max_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    /// One row per run, in input order.
    pub rows: Vec<ReportRow>,
    /// Run names ordered by ascending average tracking error.
    pub ranking: Vec<String>,
}

pub fn compare_report(runs: &[ComparisonRun]) -> Result<CompareReport> {
    if runs.is_empty() {
        return Err(Error::Input("compare: at least one run is required".into()));
    }
    let rows: Vec<ReportRow> = runs
        .iter()
        .map(|run| ReportRow {
            name: run.name.clone(),
            avg_error: avg_tracking_error(&run.trace),
            max_error: max_tracking_error(&run.trace),
        })
        .collect();
    let mut ranked: Vec<&ReportRow> = rows.iter().collect();
    ranked.sort_by(|a, b| a.avg_error.total_cmp(&b.avg_error));
    let ranking = ranked.iter().map(|r| r.name.clone()).collect();
    Ok(CompareReport { rows, ranking })
}

pub fn write_report_csv<W: std::io::Write>(
    out: &mut W,
    report: &CompareReport,
    meta: &TraceMeta,
) -> Result<()> {
    out.write_all(meta.comment().as_bytes())?;
    out.write_all(b"controller,avg_error,max_error\n")?;
    for row in &report.rows {
        writeln!(out, "{},{},{}", row.name, row.avg_error, row.max_error)?;
    }
    Ok(())
}

/// Finite memory controller wrapped for evaluation: pushes the current
/// error, applies the weighted sum, integrates the increment.
#[derive(Clone, Debug)]
pub struct FmcController {
    weights: FmcWeights,
    history: ErrorHistory,
    u: f64,
    limits: (f64, f64),
}

impl FmcController {
    pub fn new(weights: FmcWeights, limits: (f64, f64)) -> Self {
        let history = ErrorHistory::new(weights.memory_depth());
        Self { weights, history, u: 0.0, limits }
    }
}

impl Controller for FmcController {
    fn reset(&mut self) {
        self.history.reset();
        self.u = 0.0;
    }

    fn act(&mut self, obs: &Obs) -> Result<f64> {
        let theta = obs
            .theta
            .ok_or_else(|| Error::Input("fmc controller requires a measured angle".into()))?;
        self.history.push(theta - obs.ref_now)?;
        let a = self.weights.action(&self.history)?;
        self.u = apply_increment(self.u, a, self.limits);
        Ok(self.u)
    }
}

/// Baseline continuous policy wrapped for evaluation.
#[derive(Clone, Debug)]
pub struct MlpController {
    policy: MlpPolicy,
    history: ErrorHistory,
    u: f64,
    limits: (f64, f64),
}

impl MlpController {
    pub fn new(policy: MlpPolicy, limits: (f64, f64)) -> Self {
        let history = ErrorHistory::new(policy.memory_depth);
        Self { policy, history, u: 0.0, limits }
    }
}

impl Controller for MlpController {
    fn reset(&mut self) {
        self.history.reset();
        self.u = 0.0;
    }

    fn act(&mut self, obs: &Obs) -> Result<f64> {
        let theta = obs
            .theta
            .ok_or_else(|| Error::Input("baseline controller requires a measured angle".into()))?;
        let v = match self.policy.obs {
            BaselineObs::ErrorHistory => {
                self.history.push(theta - obs.ref_now)?;
                self.history
                    .state_vector()
                    .iter()
                    .map(|e| e / self.policy.theta_max)
                    .collect::<Vec<f64>>()
            }
            BaselineObs::AnglePair => {
                vec![theta / self.policy.theta_max, obs.ref_now / self.policy.theta_max]
            }
        };
        let a = self.policy.action(&v);
        self.u = apply_increment(self.u, a, self.limits);
        Ok(self.u)
    }
}

/// Greedy discrete policy wrapped for evaluation.
#[derive(Clone, Debug)]
pub struct DqnController {
    policy: DqnPolicy,
    history: ErrorHistory,
    u: f64,
    limits: (f64, f64),
}

impl DqnController {
    pub fn new(policy: DqnPolicy, limits: (f64, f64)) -> Self {
        let history = ErrorHistory::new(policy.memory_depth);
        Self { policy, history, u: 0.0, limits }
    }
}

impl Controller for DqnController {
    fn reset(&mut self) {
        self.history.reset();
        self.u = 0.0;
    }

    fn act(&mut self, obs: &Obs) -> Result<f64> {
        let theta = obs
            .theta
            .ok_or_else(|| Error::Input("dqn controller requires a measured angle".into()))?;
        let v = match self.policy.obs {
            BaselineObs::ErrorHistory => {
                self.history.push(theta - obs.ref_now)?;
                self.history
                    .state_vector()
                    .iter()
                    .map(|e| e / self.policy.theta_max)
                    .collect::<Vec<f64>>()
            }
            BaselineObs::AnglePair => {
                vec![theta / self.policy.theta_max, obs.ref_now / self.policy.theta_max]
            }
        };
        let a = self.policy.increment(self.policy.greedy_index(&v));
        self.u = apply_increment(self.u, a, self.limits);
        Ok(self.u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::plant::{PlantConfig, SurrogateFinger};
    use proptest::prelude::*;

    struct ZeroController;
    impl Controller for ZeroController {
        fn reset(&mut self) {}
        fn act(&mut self, _obs: &Obs) -> Result<f64> {
            Ok(0.0)
        }
    }

    fn plant() -> SurrogateFinger {
        SurrogateFinger::new(PlantConfig::default()).unwrap()
    }

    fn trace_from_errors(errors: &[f64]) -> EpisodeTrace {
        EpisodeTrace {
            rows: errors
                .iter()
                .enumerate()
                .map(|(t, &e)| TraceRow {
                    t,
                    theta: e,
                    theta_ref: 0.0,
                    error: e,
                    u: 0.0,
                    reward: 0.0,
                })
                .collect(),
            aborted_at: None,
        }
    }

    #[test]
    fn steps_reference_has_four_plateaus() {
        let r = default_test_reference(400, 90.0).unwrap();
        assert_eq!(r.values.len(), 401);
        assert_eq!(r.values[0], 10.0);
        assert_eq!(r.values[99], 10.0);
        assert_eq!(r.values[100], 40.0);
        assert_eq!(r.values[250], 25.0);
        assert_eq!(r.values[400], 60.0);
        let mut levels: Vec<f64> = r.values.clone();
        levels.dedup();
        assert_eq!(levels, vec![10.0, 40.0, 25.0, 60.0]);
    }

    #[test]
    fn zero_frequency_sine_is_constant() {
        let r = ReferenceTrajectory::sine(30.0, 20.0, 0.0, 50, 90.0).unwrap();
        assert!(r.values.iter().all(|&v| v == 30.0));
    }

    #[test]
    fn out_of_range_levels_are_rejected() {
        assert!(ReferenceTrajectory::steps(&[10.0, 95.0], 100, 90.0).is_err());
        assert!(ReferenceTrajectory::sine(80.0, 20.0, 0.01, 100, 90.0).is_err());
    }

    #[test]
    fn train_and_test_defaults_differ_in_kind() {
        let train = default_train_reference(400, 90.0).unwrap();
        let test = default_test_reference(400, 90.0).unwrap();
        assert_ne!(train.kind, test.kind);
    }

    #[test]
    fn mixed_reference_has_expected_length() {
        let r = ReferenceTrajectory::mixed(&[10.0, 40.0], 30.0, 20.0, 0.01, 400, 90.0).unwrap();
        assert_eq!(r.values.len(), 401);
        assert_eq!(r.kind, ReferenceKind::Mixed);
    }

    #[test]
    fn zero_controller_on_zero_reference_has_zero_error() {
        let reference = ReferenceTrajectory::steps(&[0.0], 50, 90.0).unwrap();
        let trace =
            run_episode(&mut ZeroController, &mut plant(), &reference, 1000.0, None).unwrap();
        assert_eq!(trace.rows.len(), 50);
        assert!(trace.rows.iter().all(|r| r.error == 0.0));
    }

    #[test]
    fn trace_error_is_definitional() {
        let reference = default_test_reference(80, 90.0).unwrap();
        let weights =
            FmcWeights::new(vec![-0.5, 0.0, 0.0, 0.0, 0.0], Activation::Tanh, 5.0).unwrap();
        let mut ctl = FmcController::new(weights, (0.0, 200.0));
        let trace = run_episode(&mut ctl, &mut plant(), &reference, 1000.0, None).unwrap();
        for row in &trace.rows {
            assert_eq!(row.error, row.theta - row.theta_ref);
        }
    }

    #[test]
    fn replaying_trace_actuation_reproduces_angles() {
        let reference = default_test_reference(120, 90.0).unwrap();
        let weights =
            FmcWeights::new(vec![-0.5, -0.1, 0.0, 0.0, 0.0], Activation::Tanh, 5.0).unwrap();
        let mut ctl = FmcController::new(weights, (0.0, 200.0));
        let mut p = plant();
        let trace = run_episode(&mut ctl, &mut p, &reference, 1000.0, None).unwrap();

        p.reset();
        let mut theta = 0.0;
        for row in &trace.rows {
            assert_eq!(row.theta, theta);
            theta = p.step(row.u).unwrap().theta;
        }
    }

    #[test]
    fn non_finite_actuation_aborts_with_partial_trace() {
        struct Poison;
        impl Controller for Poison {
            fn reset(&mut self) {}
            fn act(&mut self, obs: &Obs) -> Result<f64> {
                Ok(if obs.t < 3 { 1.0 } else { f64::NAN })
            }
        }
        let reference = default_test_reference(50, 90.0).unwrap();
        let trace = run_episode(&mut Poison, &mut plant(), &reference, 1000.0, None).unwrap();
        assert_eq!(trace.aborted_at, Some(3));
        assert_eq!(trace.rows.len(), 3);
    }

    #[test]
    fn avg_error_matches_hand_arithmetic() {
        let trace = trace_from_errors(&[1.0, -1.0, 2.0]);
        assert_eq!(avg_tracking_error(&trace), 4.0 / 3.0);
        assert_eq!(max_tracking_error(&trace), 2.0);
    }

    #[test]
    fn all_zero_errors_give_zero_avg() {
        let trace = trace_from_errors(&[0.0; 10]);
        assert_eq!(avg_tracking_error(&trace), 0.0);
    }

    #[test]
    fn max_error_examples() {
        assert_eq!(max_tracking_error(&trace_from_errors(&[1.0, -3.0, 2.0])), 3.0);
        assert_eq!(max_tracking_error(&trace_from_errors(&[-0.7])), 0.7);
    }

    #[test]
    fn avg_error_matches_second_pass_on_large_random_trace() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let errors: Vec<f64> = (0..10_000).map(|_| rng.random_range(-90.0..90.0)).collect();
        let trace = trace_from_errors(&errors);
        let fast = avg_tracking_error(&trace);
        // Second pass: streaming mean updated one element at a time.
        let mut mean = 0.0;
        for (i, e) in errors.iter().enumerate() {
            mean += (e.abs() - mean) / (i + 1) as f64;
        }
        assert!((fast - mean).abs() < 1e-12, "fast {fast} streaming {mean}");
    }

    #[test]
    fn plateau_counter_finds_first_crossing() {
        // Gap from -10 toward a plateau of -1: 90% progress is -1.9.
        let curve = [-10.0, -8.0, -4.0, -1.8, -1.2, -1.0, -1.0, -1.0, -1.0, -1.0];
        assert_eq!(episodes_to_plateau(&curve, 0.9), 4);
        // Flat curve: already there.
        assert_eq!(episodes_to_plateau(&[-2.0, -2.0, -2.0], 0.9), 1);
    }

    #[test]
    fn disturbance_changes_closed_loop_actuation() {
        let reference = default_test_reference(100, 90.0).unwrap();
        let weights =
            FmcWeights::new(vec![-0.5, 0.0, 0.0, 0.0, 0.0], Activation::Tanh, 5.0).unwrap();
        let clean = run_episode(
            &mut FmcController::new(weights.clone(), (0.0, 200.0)),
            &mut plant(),
            &reference,
            1000.0,
            None,
        )
        .unwrap();
        let disturbed = run_episode(
            &mut FmcController::new(weights, (0.0, 200.0)),
            &mut plant(),
            &reference,
            1000.0,
            Some(Disturbance { step: 50, delta: 15.0 }),
        )
        .unwrap();
        let clean_u: Vec<f64> = clean.rows.iter().map(|r| r.u).collect();
        let disturbed_u: Vec<f64> = disturbed.rows.iter().map(|r| r.u).collect();
        assert_eq!(clean_u[..50], disturbed_u[..50]);
        assert_ne!(clean_u[50..], disturbed_u[50..]);
    }

    #[test]
    fn compare_report_ranks_by_avg_error() {
        let runs = vec![
            ComparisonRun {
                name: "b".into(),
                trace: trace_from_errors(&[0.2, 0.2]),
                log: None,
            },
            ComparisonRun {
                name: "a".into(),
                trace: trace_from_errors(&[0.1, 0.1]),
                log: None,
            },
        ];
        let report = compare_report(&runs).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.ranking, vec!["a".to_string(), "b".to_string()]);
        assert!(compare_report(&[]).is_err());
    }

    #[test]
    fn trace_csv_has_header_comment_and_schema() {
        let trace = trace_from_errors(&[1.0, -2.0]);
        let meta = TraceMeta { config_hash: "deadbeef".into(), seed: 7 };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace, &meta).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# config_hash=deadbeef seed=7");
        assert_eq!(lines.next().unwrap(), "t,theta,theta_ref,error,u,reward");
        assert_eq!(lines.next().unwrap(), "0,1,0,1,0,0");
    }

    proptest! {
        #[test]
        fn max_is_at_least_avg(errors in proptest::collection::vec(-90.0f64..90.0, 1..200)) {
            let trace = trace_from_errors(&errors);
            prop_assert!(max_tracking_error(&trace) >= avg_tracking_error(&trace) - 1e-12);
        }

        #[test]
        fn metrics_match_reversed_recomputation(
            errors in proptest::collection::vec(-90.0f64..90.0, 1..200),
        ) {
            let trace = trace_from_errors(&errors);
            let avg = avg_tracking_error(&trace);
            let rev: f64 = errors.iter().rev().map(|e| e.abs()).sum::<f64>() / errors.len() as f64;
            prop_assert!((avg - rev).abs() < 1e-12);
        }
    }
}
