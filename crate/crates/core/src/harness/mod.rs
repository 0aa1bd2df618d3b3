//! Closed-loop experiments: nominal walking, single pushes, and the
//! direction-by-phase sweep of the largest recoverable push.

mod episode;
mod sweep;

pub use episode::{
    run_episode, Episode, EpisodeResult, FootholdRecord, KeyframeRecord, PlanSummary, Simulator,
    Status, StepOutcome,
};
pub use sweep::{
    max_recoverable_force, push_prefix, resume_push, search_from, sweep, sweep_with, CellDominance,
    CellResult, ForceSearch, PhaseSummary, SpiderRow, SpiderTable, SweepError, SweepSummary,
};

use serde::{Deserialize, Serialize};

use crate::locomotion::{FootBound, NominalGait};
use crate::model::{lipm_flow_omega, ControlInput, ModelParams, ReducedState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    #[serde(rename = "stl")]
    StlMpc,
    Baseline,
}

impl Controller {
    pub fn id(&self) -> &'static str {
        match self {
            Controller::StlMpc => "stl",
            Controller::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stl" | "stl_mpc" | "mpc" => Some(Controller::StlMpc),
            "baseline" | "cp" => Some(Controller::Baseline),
            _ => None,
        }
    }
}

/// Number of push directions, spaced evenly starting at forward (+x).
pub const N_DIRECTIONS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Direction `30 deg * index` counter-clockwise from forward.
    pub direction_index: usize,
    /// Force in newtons.
    pub magnitude: f64,
    pub duration: f64,
    /// Fraction of the nominal step duration into the pushed left stance.
    pub phase: f64,
}

impl Perturbation {
    pub fn angle(&self) -> f64 {
        (self.direction_index % N_DIRECTIONS) as f64 * std::f64::consts::TAU / N_DIRECTIONS as f64
    }
}

/// Impulsive push: adds `F * duration / mass` along the push direction to the
/// CoM velocity.
pub fn apply_push(state: &ReducedState, push: &Perturbation, mass: f64) -> ReducedState {
    let dv = push.magnitude * push.duration / mass;
    let a = push.angle();
    let mut out = *state;
    if dv != 0.0 {
        out.com_vel[0] += dv * a.cos();
        out.com_vel[1] += dv * a.sin();
    }
    out
}

/// Capture-point stepping: the instantaneous capture point plus the offset
/// that reproduces the nominal gait, at the nominal duration, clamped to the
/// treadmill at the nominal landing time.
pub fn baseline_controller(
    state: &ReducedState,
    nominal: &NominalGait,
    params: &ModelParams,
    bound: &FootBound,
) -> ControlInput {
    let w = params.omega();
    let offset = nominal.capture_offset(state.stance_leg, state.elapsed);
    let mut foot = [0.0; 2];
    for a in 0..2 {
        foot[a] = state.com_pos[a] + state.com_vel[a] / w + offset[a];
    }
    let t = nominal.gait.nominal_t;
    let landing = state.time + (t - state.elapsed).max(0.0);
    ControlInput {
        next_foothold: bound.clamp(foot, landing),
        step_duration: t,
        swing_apex_height: nominal.gait.swing_apex,
    }
}

/// Capture point `x + v / omega` on both axes.
pub fn capture_point(state: &ReducedState, omega: f64) -> [f64; 2] {
    [
        state.com_pos[0] + state.com_vel[0] / omega,
        state.com_pos[1] + state.com_vel[1] / omega,
    ]
}

/// Nominal capture point relative to the stance foot after `elapsed` seconds.
pub fn nominal_capture_rel(nominal: &NominalGait, state: &ReducedState) -> [f64; 2] {
    let td = nominal.touchdown_state([0.0, 0.0], state.stance_leg, 0.0);
    std::array::from_fn(|a| {
        let (x, v) = lipm_flow_omega(
            td.com_pos[a],
            td.com_vel[a],
            0.0,
            state.elapsed,
            nominal.omega,
        );
        x + v / nominal.omega
    })
}

fn d_directions() -> Vec<usize> {
    (0..N_DIRECTIONS).collect()
}
fn d_phases() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}
fn d_cap() -> f64 {
    600.0
}
fn d_resolution() -> f64 {
    5.0
}
fn d_push_duration() -> f64 {
    0.1
}
fn d_warmup() -> usize {
    2
}
fn d_post_steps() -> usize {
    4
}
fn d_rate() -> f64 {
    30.0
}
fn d_controllers() -> Vec<Controller> {
    vec![Controller::StlMpc, Controller::Baseline]
}

/// Experiment settings (JSON key `sweep`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "d_directions")]
    pub directions: Vec<usize>,
    #[serde(default = "d_phases")]
    pub phases: Vec<f64>,
    #[serde(default = "d_controllers")]
    pub controllers: Vec<Controller>,
    /// Largest force tried by the bisection (N).
    #[serde(default = "d_cap")]
    pub force_cap: f64,
    #[serde(default = "d_resolution")]
    pub resolution: f64,
    #[serde(default = "d_push_duration")]
    pub push_duration: f64,
    /// Steps walked before the pushed left stance.
    #[serde(default = "d_warmup")]
    pub warmup_steps: usize,
    /// Steps simulated after the pushed one before giving up.
    #[serde(default = "d_post_steps")]
    pub post_push_steps: usize,
    #[serde(default = "d_rate")]
    pub control_rate_hz: f64,
    /// Standard deviation of Gaussian CoM velocity noise added at every
    /// control tick (m/s); zero disables it.
    #[serde(default)]
    pub state_noise: f64,
    #[serde(default)]
    pub noise_seed: u64,
    /// Keep the MPC's wall-clock budget during sweeps. Off by default so that
    /// results do not depend on machine speed.
    #[serde(default)]
    pub enforce_budget: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            directions: d_directions(),
            phases: d_phases(),
            controllers: d_controllers(),
            force_cap: d_cap(),
            resolution: d_resolution(),
            push_duration: d_push_duration(),
            warmup_steps: d_warmup(),
            post_push_steps: d_post_steps(),
            control_rate_hz: d_rate(),
            state_noise: 0.0,
            noise_seed: 0,
            enforce_budget: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locomotion::{nominal_gait, GaitParams};
    use crate::model::Leg;

    #[test]
    fn push_arithmetic() {
        let s = ReducedState {
            com_pos: [0.0, 0.0],
            com_vel: [0.5, -0.1],
            swing_pos: [0.0, -0.2, 0.0],
            stance_pos: [0.15, 0.1],
            stance_leg: Leg::Left,
            phase: 0.2,
            elapsed: 0.08,
            time: 1.0,
        };
        let mut p = Perturbation {
            direction_index: 0,
            magnitude: 0.0,
            duration: 0.1,
            phase: 0.25,
        };
        assert_eq!(apply_push(&s, &p, 33.0), s);
        p.magnitude = 100.0;
        let out = apply_push(&s, &p, 33.0);
        assert!((out.com_vel[0] - s.com_vel[0] - 0.30303).abs() < 1e-5);
        assert_eq!(out.com_vel[1], s.com_vel[1]);
        p.direction_index = 3;
        let out = apply_push(&s, &p, 33.0);
        assert!((out.com_vel[0] - s.com_vel[0]).abs() < 1e-15);
        assert!(out.com_vel[1] > s.com_vel[1]);
        assert_eq!(out.com_pos, s.com_pos);
    }

    #[test]
    fn baseline_at_nominal_keyframe() {
        let p = ModelParams::default();
        let n = nominal_gait(&GaitParams::default(), &p).unwrap();
        let bound = FootBound::centered(2.0, 1.0, 0.0, 0.1);
        let mut kf = n.keyframe;
        kf.stance_pos = [0.1, 0.1];
        kf.com_pos[0] += 0.1;
        kf.com_pos[1] += 0.1;
        let c = baseline_controller(&kf, &n, &p, &bound);
        let expect = n.next_foothold(kf.stance_pos, Leg::Left);
        assert!((c.next_foothold[0] - expect[0]).abs() < 1e-6);
        assert!((c.next_foothold[1] - expect[1]).abs() < 1e-6);
        assert_eq!(c.step_duration, n.gait.nominal_t);
        let mut fast = kf;
        fast.com_vel[0] += 0.3;
        let c2 = baseline_controller(&fast, &n, &p, &bound);
        assert!((c2.next_foothold[0] - c.next_foothold[0] - 0.3 / p.omega()).abs() < 1e-12);
        assert!((0.3 / p.omega() - 0.0909).abs() < 1e-4);
    }

    #[test]
    fn baseline_clamps_to_treadmill() {
        let p = ModelParams::default();
        let n = nominal_gait(&GaitParams::default(), &p).unwrap();
        let bound = FootBound::centered(2.0, 1.0, 0.0, 0.1);
        let mut s = n.keyframe;
        s.com_vel[1] = -5.0;
        let c = baseline_controller(&s, &n, &p, &bound);
        assert_eq!(c.next_foothold[1], -0.5);
    }
}
