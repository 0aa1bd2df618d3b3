//! Linear inverted pendulum hybrid dynamics with an appended swing-foot state.
//!
//! The continuous part is the closed-form LIPM flow per horizontal axis, the
//! swing foot follows a polynomial profile, and touchdown is an impact-free
//! reset that swaps stance and swing legs.

mod real;
mod rollout;

pub use real::{Dual, Real};
pub use rollout::{
    rollout, rollout_samples, samples_to_trace, step_end_states, PlanStep, RolloutSample,
    BASE_CHANNELS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("step {step}: duration {duration} s outside [{min}, {max}]")]
    DurationOutOfBounds {
        step: usize,
        duration: f64,
        min: f64,
        max: f64,
    },
    #[error("plan is empty")]
    EmptyPlan,
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    Left,
    Right,
}

impl Leg {
    pub fn other(self) -> Leg {
        match self {
            Leg::Left => Leg::Right,
            Leg::Right => Leg::Left,
        }
    }

    /// +1 for the left leg, -1 for the right leg (lateral axis points left).
    pub fn sign(self) -> f64 {
        match self {
            Leg::Left => 1.0,
            Leg::Right => -1.0,
        }
    }
}

/// Reduced-order state: CoM, swing foot, stance foot and gait phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub com_pos: [f64; 2],
    pub com_vel: [f64; 2],
    pub swing_pos: [f64; 3],
    pub stance_pos: [f64; 2],
    pub stance_leg: Leg,
    /// Fraction of the current step elapsed, in `[0, 1)`.
    pub phase: f64,
    /// Seconds since the last touchdown.
    pub elapsed: f64,
    /// Absolute time in seconds.
    pub time: f64,
}

impl ReducedState {
    pub fn rel(&self) -> [f64; 2] {
        [
            self.com_pos[0] - self.stance_pos[0],
            self.com_pos[1] - self.stance_pos[1],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.com_pos
            .iter()
            .chain(&self.com_vel)
            .chain(&self.swing_pos)
            .chain(&self.stance_pos)
            .chain([&self.phase, &self.elapsed, &self.time])
            .all(|v| v.is_finite())
    }

    /// Advances the continuous dynamics by `t` seconds while the swing foot
    /// tracks `swing` (start position, target foothold, apex) over a step of
    /// total duration `step_duration`.
    pub fn advance(
        &self,
        t: f64,
        target: [f64; 2],
        apex: f64,
        step_duration: f64,
        params: &ModelParams,
    ) -> ReducedState {
        let mut next = *self;
        for axis in 0..2 {
            let (x, v) = lipm_flow(
                self.com_pos[axis],
                self.com_vel[axis],
                self.stance_pos[axis],
                t,
                params,
            );
            next.com_pos[axis] = x;
            next.com_vel[axis] = v;
        }
        let s0 = self.elapsed / step_duration;
        let s1 = (self.elapsed + t) / step_duration;
        let lateral = lateral_window(target[1], self.stance_pos[1], self.stance_leg);
        next.swing_pos = swing_trajectory(self.swing_pos, target, apex, s0, s1, lateral);
        next.elapsed = self.elapsed + t;
        next.time = self.time + t;
        next.phase = (next.elapsed / step_duration).clamp(0.0, 1.0 - f64::EPSILON);
        next
    }
}

/// Step command: where and when the swing foot lands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub next_foothold: [f64; 2],
    /// Total duration of the step in seconds, measured from its touchdown.
    pub step_duration: f64,
    pub swing_apex_height: f64,
}

fn default_h() -> f64 {
    0.9
}
fn default_g() -> f64 {
    9.81
}
fn default_mass() -> f64 {
    33.0
}
fn default_t_min() -> f64 {
    0.25
}
fn default_t_max() -> f64 {
    0.6
}
fn default_dt() -> f64 {
    0.02
}

/// Physical constants of the reduced model (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// Trace sampling period.
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            h: default_h(),
            g: default_g(),
            mass: default_mass(),
            t_min: default_t_min(),
            t_max: default_t_max(),
            dt: default_dt(),
        }
    }
}

impl ModelParams {
    /// Pendulum natural frequency `sqrt(g / h)`.
    pub fn omega(&self) -> f64 {
        (self.g / self.h).sqrt()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all_positive = [self.h, self.g, self.mass, self.t_min, self.t_max, self.dt]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !all_positive {
            return Err(ModelError::InvalidParams(
                "all parameters must be positive".into(),
            ));
        }
        if self.t_min > self.t_max {
            return Err(ModelError::InvalidParams(format!(
                "t_min {} exceeds t_max {}",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }
}

/// Closed-form solution of `x'' = omega^2 (x - p)` after `t` seconds.
pub fn lipm_flow(x0: f64, v0: f64, p: f64, t: f64, params: &ModelParams) -> (f64, f64) {
    flow(x0, v0, p, t, params.omega())
}

/// [`lipm_flow`] for a given natural frequency.
pub fn lipm_flow_omega(x0: f64, v0: f64, p: f64, t: f64, omega: f64) -> (f64, f64) {
    flow(x0, v0, p, t, omega)
}

pub(crate) fn flow<S: Real>(x0: S, v0: S, p: S, t: S, omega: f64) -> (S, S) {
    let wt = t.scale(omega);
    let (c, s) = (wt.cosh(), wt.sinh());
    let r = x0 - p;
    (
        p + r * c + v0 * s.scale(1.0 / omega),
        (r * s).scale(omega) + v0 * c,
    )
}

/// Orbital energy `v^2/2 - omega^2 (x - p)^2 / 2`, invariant along [`lipm_flow`].
pub fn orbital_energy(x: f64, v: f64, p: f64, omega: f64) -> f64 {
    0.5 * v * v - 0.5 * omega * omega * (x - p) * (x - p)
}

/// Time until the CoM passes forward over the stance foot along the sagittal
/// flow, if it does so at all.
pub fn time_to_keyframe(rel_x: f64, vel_x: f64, omega: f64) -> Option<f64> {
    if vel_x <= 0.0 {
        return None;
    }
    if rel_x >= 0.0 {
        return (rel_x == 0.0).then_some(0.0);
    }
    let arg = -rel_x * omega / vel_x;
    (arg < 1.0).then(|| arg.atanh() / omega)
}

/// Step phase splitting the swing into its lateral and forward-first halves.
pub const LATERAL_ONSET: f64 = 0.5;

/// Phase window of the swing foot's lateral motion. A foot landing across the
/// stance foot's sagittal line moves laterally only in the second half, so it
/// passes the stance foot while still on its own side; any other foot moves
/// laterally in the first half, so a crossed foot uncrosses before passing.
pub fn lateral_window(target_y: f64, stance_y: f64, stance: Leg) -> (f64, f64) {
    if (target_y - stance_y) * stance.sign() > 0.0 {
        (LATERAL_ONSET, 1.0)
    } else {
        (0.0, LATERAL_ONSET)
    }
}

/// Fraction of the remaining distance covered going from phase `s0` to `s1`
/// when moving at constant speed over `[max(s0, a), b]`.
fn progress<S: Real>(s0: S, s1: S, (a, b): (f64, f64)) -> S {
    let start = if s0.value() < a { S::cst(a) } else { s0 };
    if s1.value() <= start.value() {
        S::cst(0.0)
    } else if s1.value() >= b || b - start.value() < 1e-12 {
        S::cst(1.0)
    } else {
        (s1 - start) / (S::cst(b) - start)
    }
}

fn lift<S: Real>(s: S, apex: f64) -> S {
    (s * (S::cst(1.0) - s)).sq().scale(16.0 * apex)
}

/// Swing foot at step phase `s1` given its position `from` at phase `s0`.
/// Horizontal motion is linear in time toward the target, so the path is the
/// same whether or not it is restarted from an intermediate point; the height
/// follows a quartic lift profile plus a linearly decaying offset from it.
/// Lateral motion is confined to the phase window `lateral`.
pub(crate) fn swing_point<S: Real>(
    from: [S; 3],
    to: [S; 2],
    apex: f64,
    s0: S,
    s1: S,
    lateral: (f64, f64),
) -> [S; 3] {
    let fx = progress(s0, s1, (0.0, 1.0));
    let fy = progress(s0, s1, lateral);
    let z = lift(s1, apex) + (from[2] - lift(s0, apex)) * (S::cst(1.0) - fx);
    [
        from[0] + (to[0] - from[0]) * fx,
        from[1] + (to[1] - from[1]) * fy,
        if z.value() < 0.0 { S::cst(0.0) } else { z },
    ]
}

/// Swing foot at phase `s` of a step with apex height `apex`, given its
/// position `from` at phase `s0`, moving laterally within the phase window
/// `lateral` (see [`lateral_window`]). Phases are clamped to `[0, 1]`.
pub fn swing_trajectory(
    from: [f64; 3],
    to_foothold: [f64; 2],
    apex: f64,
    s0: f64,
    s: f64,
    lateral: (f64, f64),
) -> [f64; 3] {
    let s0 = s0.clamp(0.0, 1.0);
    swing_point(from, to_foothold, apex, s0, s.clamp(s0, 1.0), lateral)
}

/// Touchdown: the swing foot lands at `touchdown` and becomes the stance foot,
/// the old stance foot becomes the swing foot on the ground. The CoM is
/// unchanged.
pub fn reset_map(state: &ReducedState, touchdown: [f64; 2]) -> ReducedState {
    ReducedState {
        com_pos: state.com_pos,
        com_vel: state.com_vel,
        swing_pos: [state.stance_pos[0], state.stance_pos[1], 0.0],
        stance_pos: touchdown,
        stance_leg: state.stance_leg.other(),
        phase: 0.0,
        elapsed: 0.0,
        time: state.time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn flow_equilibrium_and_identity() {
        let p = params();
        assert_eq!(lipm_flow(0.3, 0.0, 0.3, 0.7, &p), (0.3, 0.0));
        assert_eq!(lipm_flow(0.1, -0.2, 0.05, 0.0, &p), (0.1, -0.2));
    }

    #[test]
    fn flow_closed_form_value() {
        let p = params();
        let (x, _) = lipm_flow(0.1, 0.0, 0.0, 0.1, &p);
        assert_abs_diff_eq!(x, 0.1 * (0.1 * p.omega()).cosh(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.omega() * 0.1, 0.330_15, epsilon = 1e-5);
    }

    #[test]
    fn swing_boundaries() {
        let from = [0.1, -0.2, 0.03];
        assert_eq!(
            swing_trajectory(from, [0.5, 0.1], 0.08, 0.0, 0.0, LATE),
            from
        );
        let end = swing_trajectory(from, [0.5, 0.1], 0.08, 0.0, 1.0, LATE);
        assert_abs_diff_eq!(end[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(end[1], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(end[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn swing_midpoint() {
        let mid = swing_trajectory([0.0, 0.0, 0.0], [0.4, 0.0], 0.08, 0.0, 0.5, LATE);
        assert_abs_diff_eq!(mid[0], 0.2, epsilon = 1e-15);
        assert!(mid[2] >= 0.07);
        assert_abs_diff_eq!(mid[2], 0.08, epsilon = 1e-15);
    }

    #[test]
    fn swing_restart_invariant() {
        let (from, to) = ([0.0, -0.2, 0.0], [0.65, 0.05]);
        for (s_mid, s) in [(0.2, 0.45), (0.3, 0.8), (0.6, 0.9), (0.7, 1.0)] {
            let mid = swing_trajectory(from, to, 0.08, 0.0, s_mid, LATE);
            let direct = swing_trajectory(from, to, 0.08, 0.0, s, LATE);
            let restarted = swing_trajectory(mid, to, 0.08, s_mid, s, LATE);
            for a in 0..3 {
                assert_abs_diff_eq!(direct[a], restarted[a], epsilon = 1e-14);
            }
        }
    }

    const LATE: (f64, f64) = (LATERAL_ONSET, 1.0);

    #[test]
    fn lateral_window_depends_on_crossing() {
        // left stance at y = 0.1: landing further left crosses its sagittal line
        assert_eq!(lateral_window(0.3, 0.1, Leg::Left), LATE);
        assert_eq!(lateral_window(-0.1, 0.1, Leg::Left), (0.0, LATERAL_ONSET));
        assert_eq!(lateral_window(-0.3, -0.1, Leg::Right), LATE);
        assert_eq!(lateral_window(0.1, -0.1, Leg::Right), (0.0, LATERAL_ONSET));
    }

    #[test]
    fn swing_lateral_motion_completes_early_when_uncrossing() {
        let from = [-0.3, 0.2, 0.0];
        let early = (0.0, LATERAL_ONSET);
        let p = swing_trajectory(from, [0.3, -0.1], 0.08, 0.0, 0.25, early);
        assert_abs_diff_eq!(p[1], 0.05, epsilon = 1e-15);
        let q = swing_trajectory(from, [0.3, -0.1], 0.08, 0.0, LATERAL_ONSET, early);
        assert_abs_diff_eq!(q[1], -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(q[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn swing_lateral_motion_waits_for_onset() {
        let from = [0.0, -0.2, 0.0];
        let p = swing_trajectory(from, [0.6, 0.1], 0.08, 0.0, LATERAL_ONSET, LATE);
        assert_eq!(p[1], -0.2);
        assert_abs_diff_eq!(p[0], 0.3, epsilon = 1e-15);
        let q = swing_trajectory(from, [0.6, 0.1], 0.08, 0.0, 0.75, LATE);
        assert_abs_diff_eq!(q[1], -0.05, epsilon = 1e-15);
    }

    #[test]
    fn swing_height_nonnegative() {
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            assert!(swing_trajectory([0.0, 0.0, 0.05], [0.3, 0.1], 0.0, 0.0, s, LATE)[2] >= 0.0);
            assert!(swing_trajectory([0.0, 0.0, 0.0], [0.3, 0.1], 0.1, 0.0, s, LATE)[2] >= 0.0);
        }
    }

    fn left_state() -> ReducedState {
        ReducedState {
            com_pos: [0.05, 0.02],
            com_vel: [0.4, -0.1],
            swing_pos: [0.3, -0.1, 0.0],
            stance_pos: [0.0, 0.1],
            stance_leg: Leg::Left,
            phase: 0.999,
            elapsed: 0.4,
            time: 1.0,
        }
    }

    #[test]
    fn reset_preserves_com_and_flips_leg() {
        let s = left_state();
        let r = reset_map(&s, [0.3, -0.1]);
        assert_eq!(r.stance_leg, Leg::Right);
        assert_eq!(r.com_pos, s.com_pos);
        assert_eq!(r.com_vel, s.com_vel);
        assert_eq!(r.stance_pos, [0.3, -0.1]);
        assert_eq!(r.swing_pos, [0.0, 0.1, 0.0]);
        assert_eq!(r.phase, 0.0);
        let back = reset_map(&r, s.stance_pos);
        assert_eq!(back.stance_leg, Leg::Left);
        assert_eq!(back.stance_pos, s.stance_pos);
    }

    #[test]
    fn keyframe_time() {
        let w = params().omega();
        let t = time_to_keyframe(-0.1, 0.5, w).unwrap();
        let (x, _) = flow(-0.1, 0.5, 0.0, t, w);
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-14);
        assert!(time_to_keyframe(-0.1, -0.5, w).is_none());
        // not enough energy to pass over the foot
        assert!(time_to_keyframe(-0.3, 0.5, w).is_none());
        assert_eq!(time_to_keyframe(0.0, 0.5, w), Some(0.0));
    }
}
