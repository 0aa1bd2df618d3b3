//! The locomotion formula: the robot's footholds stay on the treadmill
//! at all times, and within the horizon the CoM reaches a keyframe whose
//! orbital energies lie inside the stable region around the periodic gait.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ControlInput, Leg, ModelParams, ReducedState};
use crate::stl::{Formula, Predicate, StlError, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocomotionError {
    #[error("no periodic gait: {0}")]
    Infeasible(String),
    #[error("trace is missing channel `{0}`")]
    MissingChannel(String),
    #[error(transparent)]
    Stl(#[from] StlError),
}

/// Keyframe atoms are normalized by this fraction of the keyframe tolerance so
/// that a well-sampled keyframe never binds against the region margin.
pub const KEYFRAME_SCALE_FRACTION: f64 = 0.25;

fn d_step_length() -> f64 {
    0.3
}
fn d_step_width() -> f64 {
    0.2
}
fn d_nominal_t() -> f64 {
    0.4
}
fn d_keyframe_tol() -> f64 {
    0.01
}
fn d_apex() -> f64 {
    0.08
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitParams {
    /// Sagittal distance between consecutive footholds.
    #[serde(default = "d_step_length")]
    pub step_length: f64,
    /// Lateral distance between left and right footholds.
    #[serde(default = "d_step_width")]
    pub step_width: f64,
    #[serde(default = "d_nominal_t")]
    pub nominal_t: f64,
    /// Keyframe tolerance on `|rel_x|`.
    #[serde(default = "d_keyframe_tol")]
    pub keyframe_tol: f64,
    #[serde(default = "d_apex")]
    pub swing_apex: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            step_length: d_step_length(),
            step_width: d_step_width(),
            nominal_t: d_nominal_t(),
            keyframe_tol: d_keyframe_tol(),
            swing_apex: d_apex(),
        }
    }
}

/// Treadmill surface in the world frame. The belt carries footholds
/// backwards at `belt_speed`, so a foothold placed at `x` (belt frame) is at
/// `x - belt_speed * t` in the world at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootBound {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub belt_speed: f64,
    /// Normalizer of the bound atoms (m).
    pub scale: f64,
}

impl FootBound {
    pub fn centered(length: f64, width: f64, belt_speed: f64, scale: f64) -> Self {
        Self {
            x_min: -0.5 * length,
            x_max: 0.5 * length,
            y_min: -0.5 * width,
            y_max: 0.5 * width,
            belt_speed,
            scale,
        }
    }

    pub fn world_x(&self, belt_x: f64, time: f64) -> f64 {
        belt_x - self.belt_speed * time
    }

    /// Smallest signed distance of a belt-frame point to the rectangle edges at
    /// `time` (positive inside).
    pub fn margin(&self, foot: [f64; 2], time: f64) -> f64 {
        let x = self.world_x(foot[0], time);
        (x - self.x_min)
            .min(self.x_max - x)
            .min(foot[1] - self.y_min)
            .min(self.y_max - foot[1])
    }

    /// Clamps a belt-frame foothold into the rectangle as seen at `time`.
    pub fn clamp(&self, foot: [f64; 2], time: f64) -> [f64; 2] {
        let shift = self.belt_speed * time;
        [
            foot[0].clamp(self.x_min + shift, self.x_max + shift),
            foot[1].clamp(self.y_min, self.y_max),
        ]
    }
}

/// Orbital-energy bounds on each axis, `sigma = v^2 - omega^2 * rel^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannianRegion {
    pub sigma_sag: (f64, f64),
    pub sigma_lat: (f64, f64),
    /// Bound on the lateral CoM speed at the keyframe. Orbital energy alone
    /// accepts states on the nominal orbit that are out of lateral phase.
    pub lateral_speed: Option<f64>,
    /// Scale of reported margins: sagittal energy, lateral energy, lateral speed.
    pub normalizer: [f64; 3],
}

impl RiemannianRegion {
    /// Region `sigma* +- margin * |sigma*|` around the nominal keyframe,
    /// normalized by `|sigma*|` on each axis. With `sync_lateral`, the lateral
    /// speed is also bounded by the nominal peak lateral speed (reached at
    /// touchdown) and normalized by that bound, so the nominal keyframe sits
    /// at distance 1 on this atom and never binds near it.
    pub fn calibrate(
        nominal: &NominalGait,
        margin: f64,
        sync_lateral: bool,
    ) -> Result<Self, LocomotionError> {
        let sag = nominal.sigma[0];
        let lat = nominal.sigma[1];
        if sag == 0.0 || lat == 0.0 || !(margin > 0.0) {
            return Err(LocomotionError::Infeasible(
                "orbital-energy region is degenerate (zero nominal energy or margin)".into(),
            ));
        }
        let bounds = |s: f64| {
            let (a, b) = (s - margin * s.abs(), s + margin * s.abs());
            (a.min(b), a.max(b))
        };
        let w = nominal.omega;
        let v_td = w * nominal.keyframe.rel()[1].abs() * (0.5 * w * nominal.gait.nominal_t).sinh();
        Ok(Self {
            sigma_sag: bounds(sag),
            sigma_lat: bounds(lat),
            lateral_speed: sync_lateral.then_some(v_td),
            normalizer: [sag.abs(), lat.abs(), v_td],
        })
    }
}

/// Periodic gait of the LIPM for the given gait parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalGait {
    /// Keyframe of a left stance with the stance foot at the origin.
    pub keyframe: ReducedState,
    /// Offset of the next foothold from the stance foot, lateral component
    /// for a left stance (a right stance mirrors it).
    pub foothold_offset: [f64; 2],
    /// Orbital energies (sagittal, lateral) of the periodic gait.
    pub sigma: [f64; 2],
    pub gait: GaitParams,
    pub omega: f64,
}

/// Solves the step-to-step periodicity conditions of the LIPM.
///
/// With the keyframe at mid-step, symmetry forces the sagittal keyframe
/// velocity `v = omega L / (2 sinh(omega T / 2))` and the lateral keyframe
/// offset `rel_y = -W / (2 cosh(omega T / 2))` with zero lateral velocity.
pub fn nominal_gait(
    gait: &GaitParams,
    params: &ModelParams,
) -> Result<NominalGait, LocomotionError> {
    params
        .validate()
        .map_err(|e| LocomotionError::Infeasible(e.to_string()))?;
    if !(gait.nominal_t >= params.t_min && gait.nominal_t <= params.t_max) {
        return Err(LocomotionError::Infeasible(format!(
            "nominal duration {} outside [{}, {}]",
            gait.nominal_t, params.t_min, params.t_max
        )));
    }
    if !(gait.step_width > 0.0) || !(gait.step_length >= 0.0) {
        return Err(LocomotionError::Infeasible(format!(
            "step width must be positive and step length non-negative (got {}, {})",
            gait.step_width, gait.step_length
        )));
    }
    if !(gait.keyframe_tol > 0.0) {
        return Err(LocomotionError::Infeasible(
            "keyframe tolerance must be positive".into(),
        ));
    }
    let w = params.omega();
    let half = 0.5 * w * gait.nominal_t;
    let vx = w * gait.step_length / (2.0 * half.sinh());
    let rel_y = -gait.step_width / (2.0 * half.cosh());
    let keyframe = ReducedState {
        com_pos: [0.0, rel_y],
        com_vel: [vx, 0.0],
        swing_pos: [0.0, -gait.step_width, gait.swing_apex],
        stance_pos: [0.0, 0.0],
        stance_leg: Leg::Left,
        phase: 0.5,
        elapsed: 0.5 * gait.nominal_t,
        time: 0.0,
    };
    Ok(NominalGait {
        keyframe,
        foothold_offset: [gait.step_length, -gait.step_width],
        sigma: [vx * vx, -w * w * rel_y * rel_y],
        gait: *gait,
        omega: w,
    })
}

impl NominalGait {
    /// Nominal next foothold after a stance on `leg` at `stance`.
    pub fn next_foothold(&self, stance: [f64; 2], leg: Leg) -> [f64; 2] {
        [
            stance[0] + self.foothold_offset[0],
            stance[1] + leg.sign() * self.foothold_offset[1],
        ]
    }

    /// `n` nominal steps continuing from `state` (first duration is the
    /// nominal total, or the elapsed time plus `min_remaining` if later).
    pub fn plan(&self, state: &ReducedState, n: usize, min_remaining: f64) -> Vec<ControlInput> {
        let mut out = Vec::with_capacity(n);
        let mut stance = state.stance_pos;
        let mut leg = state.stance_leg;
        for i in 0..n {
            let foothold = self.next_foothold(stance, leg);
            let duration = if i == 0 {
                self.gait.nominal_t.max(state.elapsed + min_remaining)
            } else {
                self.gait.nominal_t
            };
            out.push(ControlInput {
                next_foothold: foothold,
                step_duration: duration,
                swing_apex_height: self.gait.swing_apex,
            });
            stance = foothold;
            leg = leg.other();
        }
        out
    }

    /// Touchdown state of a nominal step on `leg` with the stance foot at
    /// `stance`, at absolute time `time`.
    pub fn touchdown_state(&self, stance: [f64; 2], leg: Leg, time: f64) -> ReducedState {
        let half = 0.5 * self.gait.nominal_t;
        let kf = &self.keyframe;
        let (c, s) = ((self.omega * half).cosh(), (self.omega * half).sinh());
        // backward flow from the keyframe by half a step
        let rel_x = -kf.com_vel[0] * s / self.omega;
        let vx = kf.com_vel[0] * c;
        let rel_y = kf.com_pos[1] * c;
        let vy = -kf.com_pos[1] * self.omega * s;
        let sign = leg.sign();
        ReducedState {
            com_pos: [stance[0] + rel_x, stance[1] + sign * rel_y],
            com_vel: [vx, sign * vy],
            swing_pos: [
                stance[0] - self.foothold_offset[0],
                stance[1] + sign * self.foothold_offset[1],
                0.0,
            ],
            stance_pos: stance,
            stance_leg: leg,
            phase: 0.0,
            elapsed: 0.0,
            time,
        }
    }

    /// Offset from the nominal instantaneous capture point, `elapsed` seconds
    /// into a stance on `leg`, to the nominal next foothold.
    pub fn capture_offset(&self, leg: Leg, elapsed: f64) -> [f64; 2] {
        let td = self.touchdown_state([0.0, 0.0], leg, 0.0);
        let next = self.next_foothold([0.0, 0.0], leg);
        let mut out = [0.0; 2];
        for axis in 0..2 {
            let (x, v) = crate::model::lipm_flow_omega(
                td.com_pos[axis],
                td.com_vel[axis],
                0.0,
                elapsed,
                self.omega,
            );
            out[axis] = next[axis] - (x + v / self.omega);
        }
        out
    }

    /// Keyframe relative state (rel_x, rel_y, vx, vy) for a stance on `leg`.
    pub fn keyframe_rel(&self, leg: Leg) -> [f64; 4] {
        let kf = &self.keyframe;
        [
            0.0,
            leg.sign() * kf.com_pos[1],
            kf.com_vel[0],
            leg.sign() * kf.com_vel[1],
        ]
    }
}

/// Orbital-energy coordinates of a state, (sagittal, lateral).
pub fn orbital_coordinates(state: &ReducedState, omega: f64) -> [f64; 2] {
    let rel = state.rel();
    [
        state.com_vel[0].powi(2) - omega * omega * rel[0].powi(2),
        state.com_vel[1].powi(2) - omega * omega * rel[1].powi(2),
    ]
}

/// Appends `riem_sag` and `riem_lat` channels computed from `rel_x`, `rel_y`,
/// `com_vx` and `com_vy`.
pub fn riemannian_channels(trace: &Trace, params: &ModelParams) -> Result<Trace, LocomotionError> {
    let get = |name: &str| {
        trace
            .channel(name)
            .ok_or_else(|| LocomotionError::MissingChannel(name.to_string()))
    };
    let (rx, ry, vx, vy) = (get("rel_x")?, get("rel_y")?, get("com_vx")?, get("com_vy")?);
    let w2 = params.omega().powi(2);
    let sag = rx.iter().zip(vx).map(|(r, v)| v * v - w2 * r * r).collect();
    let lat = ry.iter().zip(vy).map(|(r, v)| v * v - w2 * r * r).collect();
    let mut out = trace.clone();
    out.set_channel("riem_sag", "m^2/s^2", sag)?;
    out.set_channel("riem_lat", "m^2/s^2", lat)?;
    Ok(out)
}

/// Atoms `lo <= channel <= hi` normalized by `scale`.
fn band(channel: &str, lo: f64, hi: f64, scale: f64) -> [Formula; 2] {
    [
        Formula::Predicate(Predicate::ge(channel, lo).with_scale(scale)),
        Formula::Predicate(Predicate::le(channel, hi).with_scale(scale)),
    ]
}

/// Foot-bound conjunction over `foot_x - belt_speed * clock` and `foot_y`.
pub fn foot_formula(bound: &FootBound) -> Formula {
    let world_x = |sign: f64, c: f64| Predicate {
        terms: vec![
            ("foot_x".into(), sign),
            ("clock".into(), -sign * bound.belt_speed),
        ],
        offset: c,
        scale: bound.scale,
    };
    let [y_lo, y_hi] = band("foot_y", bound.y_min, bound.y_max, bound.scale);
    Formula::And(vec![
        Formula::Predicate(world_x(1.0, -bound.x_min)),
        Formula::Predicate(world_x(-1.0, bound.x_max)),
        y_lo,
        y_hi,
    ])
}

/// Keyframe and region conjunction evaluated at a single sample.
pub fn stable_formula(region: &RiemannianRegion, gait: &GaitParams) -> Formula {
    let eps = gait.keyframe_tol;
    let [k_lo, k_hi] = band("rel_x", -eps, eps, KEYFRAME_SCALE_FRACTION * eps);
    let [s_lo, s_hi] = band(
        "riem_sag",
        region.sigma_sag.0,
        region.sigma_sag.1,
        region.normalizer[0],
    );
    let [l_lo, l_hi] = band(
        "riem_lat",
        region.sigma_lat.0,
        region.sigma_lat.1,
        region.normalizer[1],
    );
    let mut atoms = vec![k_lo, k_hi, s_lo, s_hi, l_lo, l_hi];
    if let Some(v) = region.lateral_speed {
        atoms.extend(band("com_vy", -v, v, region.normalizer[2]));
    }
    Formula::And(atoms)
}

/// `G[0,H](foot on treadmill) & F[0,H](keyframe & orbital energies in region)`.
pub fn build_loco_spec(
    bound: &FootBound,
    region: &RiemannianRegion,
    gait: &GaitParams,
    horizon_t: f64,
) -> Formula {
    Formula::And(vec![
        Formula::always(0.0, horizon_t, foot_formula(bound)),
        Formula::eventually(0.0, horizon_t, stable_formula(region, gait)),
    ])
}

/// Minimum normalized margin of the state's orbital energies to the region
/// bounds; positive inside the region.
pub fn riemannian_distance(
    state: &ReducedState,
    region: &RiemannianRegion,
    params: &ModelParams,
) -> f64 {
    let sigma = orbital_coordinates(state, params.omega());
    let m = |s: f64, (lo, hi): (f64, f64), scale: f64| ((s - lo) / scale).min((hi - s) / scale);
    let d = m(sigma[0], region.sigma_sag, region.normalizer[0]).min(m(
        sigma[1],
        region.sigma_lat,
        region.normalizer[1],
    ));
    match region.lateral_speed {
        Some(v) => d.min((v - state.com_vel[1].abs()) / region.normalizer[2]),
        None => d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rollout, step_end_states, time_to_keyframe};
    use crate::stl::{parse, robustness};

    fn setup() -> (ModelParams, GaitParams, NominalGait, RiemannianRegion) {
        let p = ModelParams::default();
        let g = GaitParams::default();
        let n = nominal_gait(&g, &p).unwrap();
        let r = RiemannianRegion::calibrate(&n, 0.5, true).unwrap();
        (p, g, n, r)
    }

    #[test]
    fn standing_oscillation_limit() {
        let p = ModelParams::default();
        let g = GaitParams {
            step_length: 0.0,
            ..GaitParams::default()
        };
        let n = nominal_gait(&g, &p).unwrap();
        assert_eq!(n.keyframe.com_vel[0], 0.0);
    }

    #[test]
    fn longer_steps_are_faster() {
        let p = ModelParams::default();
        let g = GaitParams::default();
        let a = nominal_gait(&g, &p).unwrap();
        let b = nominal_gait(
            &GaitParams {
                step_length: 2.0 * g.step_length,
                ..g
            },
            &p,
        )
        .unwrap();
        assert!(b.keyframe.com_vel[0] > a.keyframe.com_vel[0]);
    }

    #[test]
    fn infeasible_gaits() {
        let p = ModelParams::default();
        for g in [
            GaitParams {
                step_width: 0.0,
                ..GaitParams::default()
            },
            GaitParams {
                nominal_t: 0.9,
                ..GaitParams::default()
            },
            GaitParams {
                keyframe_tol: 0.0,
                ..GaitParams::default()
            },
        ] {
            assert!(matches!(
                nominal_gait(&g, &p),
                Err(LocomotionError::Infeasible(_))
            ));
        }
    }

    #[test]
    fn touchdown_state_reaches_keyframe() {
        let (p, g, n, _) = setup();
        let td = n.touchdown_state([0.15, 0.1], Leg::Left, 0.0);
        let rel = td.rel();
        let t = time_to_keyframe(rel[0], td.com_vel[0], p.omega()).unwrap();
        assert!((t - 0.5 * g.nominal_t).abs() < 1e-12);
        let kf = td.advance(t, [0.45, -0.1], g.swing_apex, g.nominal_t, &p);
        let expected = n.keyframe_rel(Leg::Left);
        assert!((kf.rel()[1] - expected[1]).abs() < 1e-12);
        assert!((kf.com_vel[0] - expected[2]).abs() < 1e-12);
        assert!(kf.com_vel[1].abs() < 1e-12);
    }

    #[test]
    fn periodic_gait_repeats() {
        let (p, _, n, _) = setup();
        let start = n.touchdown_state([0.15, 0.1], Leg::Left, 0.0);
        let plan = n.plan(&start, 10, 0.02);
        let ends = step_end_states(&start, &plan, &p).unwrap();
        for (i, s) in ends.iter().enumerate() {
            let expected = n.touchdown_state(plan[i].next_foothold, s.stance_leg, 0.0);
            for a in 0..2 {
                assert!(
                    (s.com_pos[a] - expected.com_pos[a]).abs() < 1e-8,
                    "step {i}"
                );
                assert!(
                    (s.com_vel[a] - expected.com_vel[a]).abs() < 1e-8,
                    "step {i}"
                );
            }
        }
    }

    #[test]
    fn riemannian_channels_values() {
        let (p, _, n, _) = setup();
        let t = Trace::from_channels(
            0.02,
            0.0,
            [
                ("rel_x", vec![0.0, 0.1]),
                ("rel_y", vec![0.0, -0.05]),
                ("com_vx", vec![0.0, 0.5]),
                ("com_vy", vec![0.0, 0.0]),
            ],
        )
        .unwrap();
        let out = riemannian_channels(&t, &p).unwrap();
        assert_eq!(out.channel("riem_sag").unwrap()[0], 0.0);
        assert_eq!(out.channel("riem_lat").unwrap()[0], 0.0);
        let w2 = n.omega * n.omega;
        assert!((out.channel("riem_sag").unwrap()[1] - (0.25 - w2 * 0.01)).abs() < 1e-15);
        let missing = Trace::from_channels(0.02, 0.0, [("rel_x", vec![0.0])]).unwrap();
        assert!(matches!(
            riemannian_channels(&missing, &p),
            Err(LocomotionError::MissingChannel(_))
        ));
    }

    #[test]
    fn orbital_channel_constant_within_step() {
        let (p, _, n, _) = setup();
        let start = n.touchdown_state([0.15, 0.1], Leg::Left, 0.0);
        let perturbed = ReducedState {
            com_vel: [start.com_vel[0] + 0.2, start.com_vel[1] - 0.1],
            ..start
        };
        let tr = rollout(&perturbed, &n.plan(&perturbed, 1, 0.02), &p).unwrap();
        let tr = riemannian_channels(&tr, &p).unwrap();
        let sag = tr.channel("riem_sag").unwrap();
        for v in sag {
            assert!((v - sag[0]).abs() <= 1e-9 * sag[0].abs().max(1.0));
        }
    }

    #[test]
    fn nominal_keyframe_distance() {
        let (p, _, n, r) = setup();
        let d = riemannian_distance(&n.keyframe, &r, &p);
        assert!((d - 0.5).abs() < 1e-12, "{d}");
        // on the lower sagittal bound
        let mut s = n.keyframe;
        s.com_vel[0] = r.sigma_sag.0.sqrt();
        assert!(riemannian_distance(&s, &r, &p).abs() < 1e-12);
        // outside: twice the nominal energy
        s.com_vel[0] = (2.0 * n.sigma[0]).sqrt();
        let d = riemannian_distance(&s, &r, &p);
        assert!((d - (-(2.0 * n.sigma[0] - r.sigma_sag.1) / r.normalizer[0])).abs() < 1e-12);
        assert!(d < 0.0);
    }

    #[test]
    fn lateral_band_rejects_out_of_phase_states() {
        let (p, _, n, r) = setup();
        let w = n.omega;
        assert!((r.lateral_speed.unwrap() - 0.191).abs() < 1e-3);
        // same lateral orbit, a full nominal step away from mid-stance
        let tau = n.gait.nominal_t;
        let y = n.keyframe.rel()[1];
        let mut s = n.keyframe;
        s.com_pos[1] = s.stance_pos[1] + y * (w * tau).cosh();
        s.com_vel[1] = w * y * (w * tau).sinh();
        let sigma = orbital_coordinates(&s, w);
        assert!((sigma[1] - n.sigma[1]).abs() < 1e-12);
        assert!(riemannian_distance(&s, &r, &p) < 0.0);
        let no_band = RiemannianRegion {
            lateral_speed: None,
            ..r
        };
        assert!((riemannian_distance(&s, &no_band, &p) - 0.5).abs() < 1e-9);
    }

    fn spec_trace(start: &ReducedState, plan: &[ControlInput], p: &ModelParams) -> Trace {
        riemannian_channels(&rollout(start, plan, p).unwrap(), p).unwrap()
    }

    #[test]
    fn nominal_rollout_satisfies_spec() {
        let (p, g, n, r) = setup();
        let bound = FootBound::centered(2.0, 1.0, g.step_length / g.nominal_t, 0.1);
        let start = n.touchdown_state([0.15, 0.1], Leg::Left, 0.0);
        let plan = n.plan(&start, 3, 0.02);
        let tr = spec_trace(&start, &plan, &p);
        let spec = build_loco_spec(&bound, &r, &g, 1.2);
        let rho = robustness(&spec, &tr, 0).unwrap().value;
        assert!(rho > 0.0, "{rho}");
        // round trip through the text syntax
        assert_eq!(parse(&spec.to_string()).unwrap(), spec);
    }

    #[test]
    fn off_treadmill_foothold_violates() {
        let (p, g, n, r) = setup();
        let bound = FootBound::centered(2.0, 1.0, g.step_length / g.nominal_t, 0.1);
        let start = n.touchdown_state([0.15, 0.1], Leg::Left, 0.0);
        let mut plan = n.plan(&start, 3, 0.02);
        plan[0].next_foothold[1] -= 1.0;
        let tr = spec_trace(&start, &plan, &p);
        let rho = robustness(&build_loco_spec(&bound, &r, &g, 1.2), &tr, 0)
            .unwrap()
            .value;
        assert!(rho < 0.0);
        let foot = robustness(&Formula::always(0.0, 1.2, foot_formula(&bound)), &tr, 0)
            .unwrap()
            .value;
        assert_eq!(rho, foot);
    }

    #[test]
    fn short_horizon_misses_keyframe() {
        let (p, g, n, r) = setup();
        let bound = FootBound::centered(2.0, 1.0, g.step_length / g.nominal_t, 0.1);
        let start = n.touchdown_state([0.15, 0.1], Leg::Left, 0.0);
        let tr = spec_trace(&start, &n.plan(&start, 3, 0.02), &p);
        let rho = robustness(&build_loco_spec(&bound, &r, &g, 0.1), &tr, 0)
            .unwrap()
            .value;
        assert!(rho < 0.0);
    }
}
