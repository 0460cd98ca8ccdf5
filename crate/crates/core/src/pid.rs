//! Discrete-time PID feedback baseline with anti-windup and a
//! grid-search tuner.
//!
//! Sign convention: the tracking error is `e_t = theta_t - theta_t^r`,
//! so the control law is `u_t = -(kp e_t + integral + kd (e_t - e_{t-1}))`
//! with the integral accumulated in output units and clamped. With
//! `kd = 0` this is the PI form used as the benchmark default.

use crate::error::{Error, Result};
use crate::harness::{avg_tracking_error, run_episode, Controller, Obs, ReferenceTrajectory};
use crate::plant::Plant;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PidGains {
    /// Proportional gain, kPa per degree.
    pub kp: f64,
    /// Integral gain, kPa per degree-step.
    pub ki: f64,
    /// Derivative gain, kPa-step per degree.
    pub kd: f64,
    /// Magnitude bound on the accumulated integral term, kPa.
    pub integral_clamp: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self { kp: 2.0, ki: 0.1, kd: 0.0, integral_clamp: 400.0 }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("pid: {name} must be finite, got {v}")));
            }
        }
        if !(self.integral_clamp > 0.0) {
            return Err(Error::Config(format!(
                "pid: integral clamp must be positive, got {}",
                self.integral_clamp
            )));
        }
        Ok(())
    }
}

/// Mutable controller state carried between steps.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PidState {
    /// Accumulated integral term in kPa, clamped.
    pub integral: f64,
    pub prev_error: f64,
}

/// One positional PID step: accumulates the clamped integral term and
/// returns the actuation clamped to `limits`.
pub fn pid_step(gains: &PidGains, e: f64, state: &mut PidState, limits: (f64, f64)) -> f64 {
    state.integral =
        (state.integral + gains.ki * e).clamp(-gains.integral_clamp, gains.integral_clamp);
    let derivative = e - state.prev_error;
    state.prev_error = e;
    let u = -(gains.kp * e + state.integral + gains.kd * derivative);
    u.clamp(limits.0, limits.1)
}

#[derive(Clone, Debug)]
pub struct PidController {
    gains: PidGains,
    state: PidState,
    limits: (f64, f64),
}

impl PidController {
    pub fn new(gains: PidGains, limits: (f64, f64)) -> Self {
        Self { gains, state: PidState::default(), limits }
    }

    pub fn gains(&self) -> &PidGains {
        &self.gains
    }
}

impl Controller for PidController {
    fn reset(&mut self) {
        self.state = PidState::default();
    }

    fn act(&mut self, obs: &Obs) -> Result<f64> {
        let theta = obs
            .theta
            .ok_or_else(|| Error::Input("pid controller requires a measured angle".into()))?;
        Ok(pid_step(&self.gains, theta - obs.ref_now, &mut self.state, self.limits))
    }
}

/// Candidate grid for the tuner; evaluated in index order
/// (kp outermost, kd innermost).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PidGrid {
    pub kp: Vec<f64>,
    pub ki: Vec<f64>,
    pub kd: Vec<f64>,
    pub integral_clamp: f64,
}

impl Default for PidGrid {
    fn default() -> Self {
        Self {
            kp: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            ki: vec![0.0, 0.05, 0.1, 0.2, 0.5],
            kd: vec![0.0],
            integral_clamp: 400.0,
        }
    }
}

/// One evaluated grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TuneRow {
    pub gains: PidGains,
    pub avg_error: f64,
}

/// Exhaustively evaluates the grid on one episode each and returns the
/// gains with the smallest average tracking error plus the full report.
/// Ties go to the smaller gains in lexicographic (kp, ki, kd) order.
pub fn tune_gains<P: Plant>(
    plant: &mut P,
    reference: &ReferenceTrajectory,
    grid: &PidGrid,
) -> Result<(PidGains, Vec<TuneRow>)> {
    if grid.kp.is_empty() || grid.ki.is_empty() || grid.kd.is_empty() {
        return Err(Error::Config("pid: tuning grid must be non-empty on every axis".into()));
    }
    let mut sorted = grid.clone();
    for axis in [&mut sorted.kp, &mut sorted.ki, &mut sorted.kd] {
        axis.sort_by(f64::total_cmp);
    }
    let limits = plant.actuation_limits();
    let mut rows = Vec::new();
    let mut best: Option<TuneRow> = None;
    for &kp in &sorted.kp {
        for &ki in &sorted.ki {
            for &kd in &sorted.kd {
                let gains = PidGains { kp, ki, kd, integral_clamp: sorted.integral_clamp };
                gains.validate()?;
                let mut controller = PidController::new(gains, limits);
                // A plant rejection or aborted episode marks this grid
                // point unstable instead of ending the search.
                let avg_error = match run_episode(&mut controller, plant, reference, 1000.0, None)
                {
                    Ok(trace) if trace.aborted_at.is_none() => avg_tracking_error(&trace),
                    _ => f64::INFINITY,
                };
                rows.push(TuneRow { gains, avg_error });
                // Ascending iteration plus strict improvement keeps the
                // smallest tied gains.
                if avg_error.is_finite()
                    && best.map_or(true, |b| avg_error < b.avg_error)
                {
                    best = Some(TuneRow { gains, avg_error });
                }
            }
        }
    }
    match best {
        Some(row) => Ok((row.gains, rows)),
        None => Err(Error::Training(
            "pid tuning failed: every grid point produced a non-finite tracking error".into(),
        )),
    }
}

pub fn write_tuning_csv<W: std::io::Write>(out: &mut W, rows: &[TuneRow]) -> Result<()> {
    out.write_all(b"kp,ki,kd,avg_error\n")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.gains.kp, row.gains.ki, row.gains.kd, row.avg_error
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::default_test_reference;
    use crate::plant::{PlantConfig, PlantState, SurrogateFinger};

    fn plant() -> SurrogateFinger {
        SurrogateFinger::new(PlantConfig::default()).unwrap()
    }

    #[test]
    fn zero_error_gives_zero_actuation() {
        let gains = PidGains { kp: 3.0, ki: 0.4, kd: 0.2, integral_clamp: 400.0 };
        let mut state = PidState::default();
        for _ in 0..10 {
            assert_eq!(pid_step(&gains, 0.0, &mut state, (-200.0, 200.0)), 0.0);
        }
    }

    #[test]
    fn proportional_sign_convention() {
        let gains = PidGains { kp: 1.0, ki: 0.0, kd: 0.0, integral_clamp: 400.0 };
        let mut state = PidState::default();
        assert_eq!(pid_step(&gains, -2.0, &mut state, (-200.0, 200.0)), 2.0);
    }

    #[test]
    fn integral_accumulates_over_steps() {
        let gains = PidGains { kp: 0.0, ki: 0.5, kd: 0.0, integral_clamp: 400.0 };
        let mut state = PidState::default();
        let mut u = 0.0;
        for _ in 0..4 {
            u = pid_step(&gains, -1.0, &mut state, (-200.0, 200.0));
        }
        assert_eq!(u, 2.0);
    }

    #[test]
    fn integral_term_respects_clamp() {
        let gains = PidGains { kp: 0.0, ki: 1.0, kd: 0.0, integral_clamp: 3.0 };
        let mut state = PidState::default();
        for _ in 0..100 {
            pid_step(&gains, -5.0, &mut state, (-200.0, 200.0));
            assert!(state.integral.abs() <= 3.0);
        }
        assert_eq!(state.integral, -3.0);
    }

    #[test]
    fn derivative_uses_one_step_difference() {
        let gains = PidGains { kp: 0.0, ki: 0.0, kd: 2.0, integral_clamp: 400.0 };
        let mut state = PidState::default();
        assert_eq!(pid_step(&gains, 1.0, &mut state, (-200.0, 200.0)), -2.0);
        assert_eq!(pid_step(&gains, 1.0, &mut state, (-200.0, 200.0)), 0.0);
        assert_eq!(pid_step(&gains, 0.5, &mut state, (-200.0, 200.0)), 1.0);
    }

    #[test]
    fn invalid_gains_are_rejected() {
        let bad = PidGains { kp: f64::NAN, ..PidGains::default() };
        assert!(bad.validate().is_err());
        let bad = PidGains { integral_clamp: 0.0, ..PidGains::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let grid = PidGrid {
            kp: vec![2.0],
            ki: vec![0.1],
            kd: vec![0.0],
            integral_clamp: 400.0,
        };
        let reference = default_test_reference(100, 90.0).unwrap();
        let (gains, rows) = tune_gains(&mut plant(), &reference, &grid).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((gains.kp, gains.ki, gains.kd), (2.0, 0.1, 0.0));
    }

    #[test]
    fn tuner_agrees_with_brute_force() {
        let grid = PidGrid {
            kp: vec![0.5, 2.0, 8.0],
            ki: vec![0.0, 0.1],
            kd: vec![0.0],
            integral_clamp: 400.0,
        };
        let reference = default_test_reference(200, 90.0).unwrap();
        let (gains, rows) = tune_gains(&mut plant(), &reference, &grid).unwrap();
        let best = rows
            .iter()
            .min_by(|a, b| a.avg_error.total_cmp(&b.avg_error))
            .unwrap();
        assert_eq!(gains, best.gains);
        assert_eq!(rows.len(), 6);
    }

    #[test]
    fn tuned_pi_drives_step_error_to_zero() {
        let grid = PidGrid::default();
        let reference = ReferenceTrajectory::steps(&[40.0], 600, 90.0).unwrap();
        let mut p = plant();
        let (gains, _) = tune_gains(&mut p, &reference, &grid).unwrap();
        assert!(gains.ki > 0.0, "integral action should win on a step reference");
        let mut controller = PidController::new(gains, p.actuation_limits());
        let trace = run_episode(&mut controller, &mut p, &reference, 1000.0, None).unwrap();
        let tail = &trace.rows[550..];
        let tail_err = tail.iter().map(|r| r.error.abs()).fold(0.0, f64::max);
        assert!(tail_err < 0.05, "steady-state error {tail_err}");
    }

    #[test]
    fn tuner_is_deterministic() {
        let grid = PidGrid::default();
        let reference = default_test_reference(150, 90.0).unwrap();
        let (a, _) = tune_gains(&mut plant(), &reference, &grid).unwrap();
        let (b, _) = tune_gains(&mut plant(), &reference, &grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_unstable_grid_reports_failure() {
        struct Broken;
        impl crate::plant::Plant for Broken {
            fn reset(&mut self) {}
            fn step(&mut self, _u: f64) -> crate::Result<PlantState> {
                Err(crate::Error::Input("broken plant".into()))
            }
            fn nudge(&mut self, _delta: f64) {}
            fn theta_max(&self) -> f64 {
                90.0
            }
            fn actuation_limits(&self) -> (f64, f64) {
                (0.0, 200.0)
            }
        }
        let grid = PidGrid::default();
        let reference = default_test_reference(10, 90.0).unwrap();
        assert!(tune_gains(&mut Broken, &reference, &grid).is_err());
    }

    #[test]
    fn tuning_csv_lists_every_grid_point() {
        let grid = PidGrid {
            kp: vec![1.0, 2.0],
            ki: vec![0.0],
            kd: vec![0.0],
            integral_clamp: 400.0,
        };
        let reference = default_test_reference(50, 90.0).unwrap();
        let (_, rows) = tune_gains(&mut plant(), &reference, &grid).unwrap();
        let mut buf = Vec::new();
        write_tuning_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("kp,ki,kd,avg_error\n"));
    }
}
