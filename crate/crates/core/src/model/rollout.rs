use super::{
    flow, lateral_window, reset_map, swing_point, ControlInput, Leg, ModelError, ModelParams, Real,
    ReducedState,
};
use crate::stl::Trace;

/// Channels emitted by [`rollout`], in order, with their units. The
/// orbital-energy channels are appended separately by
/// [`crate::locomotion::riemannian_channels`].
pub const BASE_CHANNELS: [(&str, &str); 13] = [
    ("clock", "s"),
    ("com_x", "m"),
    ("com_y", "m"),
    ("com_vx", "m/s"),
    ("com_vy", "m/s"),
    ("rel_x", "m"),
    ("rel_y", "m"),
    ("swing_x", "m"),
    ("swing_y", "m"),
    ("swing_z", "m"),
    ("foot_x", "m"),
    ("foot_y", "m"),
    ("stance_left", "1"),
];

/// One step of a plan in a possibly differentiable scalar type.
#[derive(Debug, Clone, Copy)]
pub struct PlanStep<S> {
    pub foothold: [S; 2],
    pub duration: S,
    pub apex: f64,
}

impl From<&ControlInput> for PlanStep<f64> {
    fn from(c: &ControlInput) -> Self {
        Self {
            foothold: c.next_foothold,
            duration: c.step_duration,
            apex: c.swing_apex_height,
        }
    }
}

/// Hybrid state at one trace sample.
#[derive(Debug, Clone, Copy)]
pub struct RolloutSample<S> {
    /// Absolute time.
    pub time: f64,
    /// Index into the plan of the step this sample belongs to.
    pub step: usize,
    pub com_pos: [S; 2],
    pub com_vel: [S; 2],
    pub stance_pos: [S; 2],
    pub swing_pos: [S; 3],
    pub stance_leg: Leg,
}

fn check_durations<S: Real>(
    initial: &ReducedState,
    plan: &[PlanStep<S>],
    params: &ModelParams,
) -> Result<(), ModelError> {
    if plan.is_empty() {
        return Err(ModelError::EmptyPlan);
    }
    let tol = 1e-9;
    for (i, step) in plan.iter().enumerate() {
        let d = step.duration.value();
        let min = if i == 0 {
            params.t_min.max(initial.elapsed)
        } else {
            params.t_min
        };
        let bad_first = i == 0 && d <= initial.elapsed;
        if !d.is_finite() || d < min - tol || d > params.t_max + tol || bad_first {
            return Err(ModelError::DurationOutOfBounds {
                step: i,
                duration: d,
                min,
                max: params.t_max,
            });
        }
    }
    Ok(())
}

/// Rolls the hybrid model forward through `plan`, sampling every `params.dt`.
///
/// The first step continues the current stance from `initial` (its duration
/// counts from the last touchdown); later steps start at their touchdown with
/// the swing foot lifting off from the previous stance position. The result has
/// `round(remaining / dt) + 1` samples, where `remaining` is the total time
/// left in the plan.
pub fn rollout_samples<S: Real>(
    initial: &ReducedState,
    plan: &[PlanStep<S>],
    params: &ModelParams,
) -> Result<Vec<RolloutSample<S>>, ModelError> {
    check_durations(initial, plan, params)?;
    let omega = params.omega();

    // per-step start data
    struct StepStart<S> {
        begin: S,
        end: S,
        com_pos: [S; 2],
        com_vel: [S; 2],
        stance: [S; 2],
        swing_from: [S; 3],
        /// Step phase at `begin` and the step's total duration.
        phase0: S,
        duration: S,
        apex: f64,
        leg: Leg,
    }

    let mut starts: Vec<StepStart<S>> = Vec::with_capacity(plan.len());
    let mut begin = S::cst(0.0);
    let mut com_pos = initial.com_pos.map(S::cst);
    let mut com_vel = initial.com_vel.map(S::cst);
    let mut stance = initial.stance_pos.map(S::cst);
    let mut swing_from = initial.swing_pos.map(S::cst);
    let mut leg = initial.stance_leg;
    for (i, step) in plan.iter().enumerate() {
        let length = if i == 0 {
            step.duration.offset(-initial.elapsed)
        } else {
            step.duration
        };
        let end = begin + length;
        starts.push(StepStart {
            begin,
            end,
            com_pos,
            com_vel,
            stance,
            swing_from,
            phase0: if i == 0 {
                S::cst(initial.elapsed) / step.duration
            } else {
                S::cst(0.0)
            },
            duration: step.duration,
            apex: step.apex,
            leg,
        });
        for axis in 0..2 {
            let (x, v) = flow(com_pos[axis], com_vel[axis], stance[axis], length, omega);
            com_pos[axis] = x;
            com_vel[axis] = v;
        }
        swing_from = [stance[0], stance[1], S::cst(0.0)];
        stance = step.foothold;
        leg = leg.other();
        begin = end;
    }

    let total = begin.value();
    let n = (total / params.dt).round() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut j = 0;
    for k in 0..=n {
        let t = k as f64 * params.dt;
        while j + 1 < starts.len() && t >= starts[j].end.value() - 1e-9 {
            j += 1;
        }
        let st = &starts[j];
        let tau = S::cst(t) - st.begin;
        let mut cp = [S::cst(0.0); 2];
        let mut cv = [S::cst(0.0); 2];
        for axis in 0..2 {
            let (x, v) = flow(
                st.com_pos[axis],
                st.com_vel[axis],
                st.stance[axis],
                tau,
                omega,
            );
            cp[axis] = x;
            cv[axis] = v;
        }
        let mut s = st.phase0 + tau / st.duration;
        if s.value() > 1.0 {
            s = S::cst(1.0);
        } else if s.value() < st.phase0.value() {
            s = st.phase0;
        }
        let lateral = lateral_window(plan[j].foothold[1].value(), st.stance[1].value(), st.leg);
        let swing = swing_point(
            st.swing_from,
            plan[j].foothold,
            st.apex,
            st.phase0,
            s,
            lateral,
        );
        out.push(RolloutSample {
            time: initial.time + t,
            step: j,
            com_pos: cp,
            com_vel: cv,
            stance_pos: st.stance,
            swing_pos: swing,
            stance_leg: st.leg,
        });
    }
    Ok(out)
}

/// Converts samples into a trace with the [`BASE_CHANNELS`] layout.
pub fn samples_to_trace<S: Real>(samples: &[RolloutSample<S>], dt: f64) -> Trace {
    let t0 = samples.first().map_or(0.0, |s| s.time);
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(samples.len()); BASE_CHANNELS.len()];
    for s in samples {
        let row = [
            s.time,
            s.com_pos[0].value(),
            s.com_pos[1].value(),
            s.com_vel[0].value(),
            s.com_vel[1].value(),
            s.com_pos[0].value() - s.stance_pos[0].value(),
            s.com_pos[1].value() - s.stance_pos[1].value(),
            s.swing_pos[0].value(),
            s.swing_pos[1].value(),
            s.swing_pos[2].value(),
            s.stance_pos[0].value(),
            s.stance_pos[1].value(),
            if s.stance_leg == Leg::Left { 1.0 } else { 0.0 },
        ];
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    let mut trace = Trace::new(dt, t0).expect("positive sampling period");
    for ((name, units), col) in BASE_CHANNELS.iter().zip(cols) {
        trace
            .push_channel(*name, *units, col)
            .expect("uniform channel lengths");
    }
    trace
}

/// Rolls out `plan` from `initial` and returns the sampled trace.
pub fn rollout(
    initial: &ReducedState,
    plan: &[ControlInput],
    params: &ModelParams,
) -> Result<crate::stl::Trace, ModelError> {
    params.validate()?;
    let steps: Vec<PlanStep<f64>> = plan.iter().map(PlanStep::from).collect();
    let samples = rollout_samples(initial, &steps, params)?;
    Ok(samples_to_trace(&samples, params.dt))
}

/// States right after each touchdown of `plan`, obtained by alternating the
/// continuous flow with [`reset_map`].
pub fn step_end_states(
    initial: &ReducedState,
    plan: &[ControlInput],
    params: &ModelParams,
) -> Result<Vec<ReducedState>, ModelError> {
    let steps: Vec<PlanStep<f64>> = plan.iter().map(PlanStep::from).collect();
    check_durations(initial, &steps, params)?;
    let mut state = *initial;
    let mut out = Vec::with_capacity(plan.len());
    for c in plan {
        let t = c.step_duration - state.elapsed;
        let end = state.advance(
            t,
            c.next_foothold,
            c.swing_apex_height,
            c.step_duration,
            params,
        );
        state = reset_map(&end, c.next_foothold);
        out.push(state);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> ReducedState {
        ReducedState {
            com_pos: [0.0, 0.0],
            com_vel: [0.5, 0.2],
            swing_pos: [-0.15, -0.1, 0.0],
            stance_pos: [0.15, 0.1],
            stance_leg: Leg::Left,
            phase: 0.0,
            elapsed: 0.0,
            time: 0.0,
        }
    }

    fn step(x: f64, y: f64, t: f64) -> ControlInput {
        ControlInput {
            next_foothold: [x, y],
            step_duration: t,
            swing_apex_height: 0.08,
        }
    }

    #[test]
    fn single_step_length() {
        let p = ModelParams::default();
        let tr = rollout(&start(), &[step(0.45, -0.1, 0.4)], &p).unwrap();
        assert_eq!(tr.len(), 21);
        assert_eq!(tr.channels().len(), BASE_CHANNELS.len());
    }

    #[test]
    fn duration_bounds() {
        let p = ModelParams::default();
        assert!(matches!(
            rollout(&start(), &[step(0.45, -0.1, 0.7)], &p),
            Err(ModelError::DurationOutOfBounds { step: 0, .. })
        ));
        assert!(matches!(
            rollout(&start(), &[], &p),
            Err(ModelError::EmptyPlan)
        ));
        let mut late = start();
        late.elapsed = 0.3;
        assert!(rollout(&late, &[step(0.45, -0.1, 0.3)], &p).is_err());
        assert_eq!(
            rollout(&late, &[step(0.45, -0.1, 0.4)], &p).unwrap().len(),
            6
        );
    }

    #[test]
    fn com_continuous_across_touchdowns() {
        let p = ModelParams::default();
        let plan = [
            step(0.45, -0.1, 0.4),
            step(0.75, 0.1, 0.4),
            step(1.05, -0.1, 0.4),
        ];
        let tr = rollout(&start(), &plan, &p).unwrap();
        let w = p.omega();
        // the state at sample 20 (first touchdown) must equal the flow of sample 19 by dt
        for k in 0..tr.len() - 1 {
            let x = tr.channel("com_x").unwrap();
            let v = tr.channel("com_vx").unwrap();
            let foot = tr.channel("foot_x").unwrap();
            let (xn, vn) = flow(x[k], v[k], foot[k], p.dt, w);
            assert!((xn - x[k + 1]).abs() < 1e-12, "k={k}");
            assert!((vn - v[k + 1]).abs() < 1e-12, "k={k}");
        }
        let foot_y = tr.channel("foot_y").unwrap();
        assert_eq!(foot_y[19], 0.1);
        assert_eq!(foot_y[20], -0.1);
        let stance = tr.channel("stance_left").unwrap();
        assert_eq!((stance[19], stance[20], stance[40]), (1.0, 0.0, 1.0));
    }

    #[test]
    fn step_end_states_match_trace() {
        let p = ModelParams::default();
        let plan = [step(0.45, -0.1, 0.4), step(0.75, 0.1, 0.4)];
        let ends = step_end_states(&start(), &plan, &p).unwrap();
        let tr = rollout(&start(), &plan, &p).unwrap();
        assert!((ends[0].com_pos[0] - tr.channel("com_x").unwrap()[20]).abs() < 1e-12);
        assert_eq!(ends[1].stance_leg, Leg::Left);
        assert_eq!(ends[1].swing_pos, [0.45, -0.1, 0.0]);
    }
}
