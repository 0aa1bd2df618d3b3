use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{apply_push, baseline_controller, Controller, Perturbation, SweepConfig};
use crate::collision::capsule_margin;
use crate::locomotion::{orbital_coordinates, riemannian_distance};
use crate::model::{reset_map, time_to_keyframe, ControlInput, Leg, ReducedState, BASE_CHANNELS};
use crate::mpc::{DecisionVector, MpcConfig, MpcError, PlanResult, Planner, PlannerContext, Seed};
use crate::stl::{satisfies, Trace};

/// Events closer than this are treated as simultaneous.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyframeRecord {
    pub time: f64,
    pub step: usize,
    pub leg: Leg,
    pub distance: f64,
    pub state: ReducedState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootholdRecord {
    pub time: f64,
    /// Index of the step that this foothold starts.
    pub step: usize,
    /// Leg that landed.
    pub leg: Leg,
    pub position: [f64; 2],
    /// Stance foot the landing leg swung around.
    pub previous_stance: [f64; 2],
}

impl FootholdRecord {
    /// Whether the landing foot lies across the sagittal line of the stance
    /// foot it swung past.
    pub fn crosses(&self) -> bool {
        // the stance leg was the other one
        self.leg.other().sign() * (self.position[1] - self.previous_stance[1]) > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub time: f64,
    pub robustness: f64,
    pub horizon_robustness: f64,
    pub feasible: bool,
    pub iterations: usize,
    pub total_iterations: usize,
    pub wall_time_s: f64,
    pub timed_out: bool,
    pub evaluations: usize,
    pub exhausted: bool,
    pub seed: Option<Seed>,
    /// Exact Boolean satisfaction of the formula on the plan's trace.
    pub satisfied: bool,
    pub decision: DecisionVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub index: usize,
    pub leg: Leg,
    pub start_time: f64,
    pub stance: [f64; 2],
    pub keyframe: Option<KeyframeRecord>,
    pub ended: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub controller: Controller,
    pub push: Option<Perturbation>,
    pub push_time: Option<f64>,
    pub recovered: bool,
    pub steps_to_recover: Option<usize>,
    #[serde(skip)]
    pub trace: Option<Trace>,
    pub plans: Vec<PlanSummary>,
    #[serde(skip)]
    pub full_plans: Vec<PlanResult>,
    pub min_collision_margin: f64,
    pub min_foot_margin: f64,
    pub keyframes: Vec<KeyframeRecord>,
    pub footholds: Vec<FootholdRecord>,
    pub steps: Vec<StepOutcome>,
    pub failure: Option<String>,
    /// Feasible plans whose trace violates the formula (must stay zero).
    pub gate_violations: usize,
}

impl EpisodeResult {
    pub fn trace(&self) -> &Trace {
        self.trace.as_ref().expect("episode carries its trace")
    }

    /// First foothold placed after the push.
    pub fn first_post_push_foothold(&self) -> Option<&FootholdRecord> {
        let t = self.push_time?;
        self.footholds.iter().find(|f| f.time >= t)
    }

    pub fn feasible_plans(&self) -> usize {
        self.plans.iter().filter(|p| p.feasible).count()
    }
}

/// Builds episodes that share one planner context and experiment settings.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub ctx: Arc<PlannerContext>,
    pub cfg: SweepConfig,
}

impl Simulator {
    pub fn new(ctx: Arc<PlannerContext>, cfg: SweepConfig) -> Self {
        Self { ctx, cfg }
    }

    /// Touchdown of a nominal left stance with the CoM at the origin.
    pub fn initial_state(&self) -> ReducedState {
        let g = &self.ctx.gait;
        self.ctx
            .nominal
            .touchdown_state([0.5 * g.step_length, 0.5 * g.step_width], Leg::Left, 0.0)
    }

    pub fn push(&self, direction_index: usize, magnitude: f64, phase: f64) -> Perturbation {
        Perturbation {
            direction_index,
            magnitude,
            duration: self.cfg.push_duration,
            phase,
        }
    }

    /// Index of the pushed step: the first left stance after the warm-up.
    pub fn push_step(&self) -> usize {
        let w = self.cfg.warmup_steps;
        w + w % 2
    }

    /// Fresh episode; `n_steps` bounds the number of steps simulated.
    pub fn start(&self, controller: Controller, n_steps: usize) -> Episode {
        Episode::new(self, controller, n_steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Stopped right before applying the push.
    AtPush,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Propagate,
    Push,
}

/// A closed-loop run in progress; cloning it snapshots the whole simulation.
#[derive(Debug, Clone)]
pub struct Episode {
    ctx: Arc<PlannerContext>,
    cfg: SweepConfig,
    solver: MpcConfig,
    controller: Controller,
    planner: Planner,
    anchor: ReducedState,
    command: ControlInput,
    decision: Option<DecisionVector>,
    state: ReducedState,
    sample_k: usize,
    control_m: usize,
    rows: Vec<[f64; N_CH]>,
    steps: Vec<StepOutcome>,
    footholds: Vec<FootholdRecord>,
    plans: Vec<PlanSummary>,
    full_plans: Vec<PlanResult>,
    push: Option<(Perturbation, usize)>,
    push_time: Option<f64>,
    push_step: Option<usize>,
    pushed: bool,
    min_margin: f64,
    min_foot_margin: f64,
    failure: Option<String>,
    outcome: Option<(bool, Option<usize>)>,
    max_steps: usize,
    resume: Option<(f64, Stage)>,
    rng: Option<ChaCha8Rng>,
    gate_violations: usize,
    /// Stop as soon as recovery or failure is decided.
    pub early_stop: bool,
    /// Keep every plan with its trace.
    pub keep_plans: bool,
}

const EXTRA_CHANNELS: [(&str, &str); 4] = [
    ("riem_sag", "m^2/s^2"),
    ("riem_lat", "m^2/s^2"),
    ("collision_margin", "m"),
    ("foot_margin", "m"),
];
const N_CH: usize = BASE_CHANNELS.len() + EXTRA_CHANNELS.len();

impl Episode {
    fn new(sim: &Simulator, controller: Controller, n_steps: usize) -> Self {
        let state = sim.initial_state();
        let mut solver = sim.ctx.mpc.clone();
        if !sim.cfg.enforce_budget {
            solver.budget_ms = None;
        }
        let rng =
            (sim.cfg.state_noise > 0.0).then(|| ChaCha8Rng::seed_from_u64(sim.cfg.noise_seed));
        let mut ep = Self {
            ctx: sim.ctx.clone(),
            cfg: sim.cfg.clone(),
            solver,
            controller,
            planner: Planner::new(sim.ctx.clone()),
            anchor: state,
            command: ControlInput {
                next_foothold: sim
                    .ctx
                    .nominal
                    .next_foothold(state.stance_pos, state.stance_leg),
                step_duration: sim.ctx.gait.nominal_t,
                swing_apex_height: sim.ctx.gait.swing_apex,
            },
            decision: None,
            state,
            sample_k: 0,
            control_m: 0,
            rows: Vec::new(),
            steps: vec![StepOutcome {
                index: 0,
                leg: state.stance_leg,
                start_time: 0.0,
                stance: state.stance_pos,
                keyframe: None,
                ended: false,
            }],
            footholds: Vec::new(),
            plans: Vec::new(),
            full_plans: Vec::new(),
            push: None,
            push_time: None,
            push_step: None,
            pushed: false,
            min_margin: f64::INFINITY,
            min_foot_margin: f64::INFINITY,
            failure: None,
            outcome: None,
            max_steps: n_steps.max(1),
            resume: None,
            rng,
            gate_violations: 0,
            early_stop: true,
            keep_plans: false,
        };
        ep.check_state();
        ep
    }

    /// Schedules `push` at its phase of step `step`.
    pub fn set_push(&mut self, push: Perturbation, step: usize) {
        self.push = Some((push, step));
    }

    /// Replaces the magnitude of a scheduled push that has not been applied.
    pub fn set_push_magnitude(&mut self, magnitude: f64) {
        if let Some((p, _)) = &mut self.push {
            p.magnitude = magnitude;
        }
    }

    pub fn scheduled_phase(&self) -> Option<f64> {
        self.push.map(|(p, _)| p.phase)
    }

    pub fn state(&self) -> &ReducedState {
        &self.state
    }

    pub fn is_finished(&self) -> bool {
        self.failure.is_some()
            || (self.early_stop && self.outcome.is_some())
            || self.steps.len() > self.max_steps
    }

    fn state_at(&self, t: f64) -> ReducedState {
        let c = &self.command;
        self.anchor.advance(
            t - self.anchor.time,
            c.next_foothold,
            c.swing_apex_height,
            c.step_duration,
            &self.ctx.params,
        )
    }

    fn touchdown_time(&self) -> f64 {
        self.anchor.time + (self.command.step_duration - self.anchor.elapsed)
    }

    fn push_event_time(&self) -> Option<f64> {
        if self.pushed {
            return None;
        }
        let (p, step) = self.push.as_ref()?;
        let rec = self.steps.get(*step)?;
        Some(rec.start_time + p.phase * self.ctx.gait.nominal_t)
    }

    fn control_time(&self) -> f64 {
        self.control_m as f64 / self.cfg.control_rate_hz
    }

    fn sample_time(&self) -> f64 {
        self.sample_k as f64 * self.ctx.params.dt
    }

    /// Advances until the episode finishes, or until right before the push
    /// when `pause_at_push` is set.
    pub fn run(&mut self, pause_at_push: bool) -> Status {
        loop {
            if self.is_finished() {
                return Status::Finished;
            }
            let (t, from) = match self.resume.take() {
                Some(r) => r,
                None => {
                    let mut t = self
                        .touchdown_time()
                        .min(self.control_time())
                        .min(self.sample_time());
                    if let Some(tp) = self.push_event_time() {
                        t = t.min(tp);
                    }
                    (t, Stage::Propagate)
                }
            };
            if from == Stage::Propagate {
                self.propagate(t);
                if (self.touchdown_time() - t).abs() <= TIME_EPS {
                    self.touchdown(t);
                }
            }
            if let Some(tp) = self.push_event_time() {
                if (tp - t).abs() <= TIME_EPS {
                    if pause_at_push {
                        self.resume = Some((t, Stage::Push));
                        return Status::AtPush;
                    }
                    self.apply_push(t);
                }
            }
            if (self.control_time() - t).abs() <= TIME_EPS {
                self.control(t);
                self.control_m += 1;
            }
            if (self.sample_time() - t).abs() <= TIME_EPS {
                self.record();
                self.sample_k += 1;
            }
            self.check_state();
            self.evaluate_recovery();
        }
    }

    fn propagate(&mut self, t: f64) {
        if t <= self.state.time {
            return;
        }
        let cur = self.state;
        let step = self.steps.len() - 1;
        if self.steps[step].keyframe.is_none() {
            if let Some(tk) =
                time_to_keyframe(cur.rel()[0], cur.com_vel[0], self.ctx.params.omega())
            {
                if cur.time + tk <= t + 1e-12 {
                    let kf = self.state_at(cur.time + tk);
                    self.steps[step].keyframe = Some(KeyframeRecord {
                        time: kf.time,
                        step,
                        leg: kf.stance_leg,
                        distance: riemannian_distance(&kf, &self.ctx.region, &self.ctx.params),
                        state: kf,
                    });
                }
            }
        }
        self.state = self.state_at(t);
    }

    fn touchdown(&mut self, t: f64) {
        let old_stance = self.state.stance_pos;
        let landed = reset_map(&self.state, self.command.next_foothold);
        self.state = ReducedState { time: t, ..landed };
        self.anchor = self.state;
        let idx = self.steps.len();
        if let Some(last) = self.steps.last_mut() {
            last.ended = true;
        }
        self.steps.push(StepOutcome {
            index: idx,
            leg: self.state.stance_leg,
            start_time: t,
            stance: self.state.stance_pos,
            keyframe: None,
            ended: false,
        });
        self.footholds.push(FootholdRecord {
            time: t,
            step: idx,
            leg: self.state.stance_leg,
            position: self.state.stance_pos,
            previous_stance: old_stance,
        });
        self.command = match self.controller {
            Controller::Baseline => baseline_controller(
                &self.state,
                &self.ctx.nominal,
                &self.ctx.params,
                &self.ctx.bound,
            ),
            Controller::StlMpc => {
                let next = self
                    .decision
                    .map(|d| d.shifted(&self.ctx.nominal, self.state.stance_leg.other()))
                    .unwrap_or_else(|| self.ctx.nominal_decision(&self.state));
                self.decision = Some(next);
                ControlInput {
                    next_foothold: next.footholds[0],
                    step_duration: next.durations[0].max(self.ctx.params.t_min),
                    swing_apex_height: self.ctx.gait.swing_apex,
                }
            }
        };
    }

    fn apply_push(&mut self, t: f64) {
        let (p, _) = self.push.expect("scheduled push");
        self.state = apply_push(&self.state, &p, self.ctx.params.mass);
        self.anchor = self.state;
        self.pushed = true;
        self.push_time = Some(t);
        self.push_step = Some(self.steps.len() - 1);
    }

    fn control(&mut self, t: f64) {
        if let (Some(rng), true) = (self.rng.as_mut(), self.cfg.state_noise > 0.0) {
            let n = Normal::new(0.0, self.cfg.state_noise).expect("finite noise level");
            self.state.com_vel[0] += n.sample(rng);
            self.state.com_vel[1] += n.sample(rng);
        }
        self.anchor = self.state;
        match self.controller {
            Controller::Baseline => {
                self.command = baseline_controller(
                    &self.state,
                    &self.ctx.nominal,
                    &self.ctx.params,
                    &self.ctx.bound,
                );
            }
            Controller::StlMpc => match self.planner.replan_with(&self.state, &self.solver) {
                Ok(plan) => {
                    let satisfied = satisfies(&self.ctx.spec, plan.trace(), 0).unwrap_or(false);
                    if plan.feasible && !satisfied {
                        self.gate_violations += 1;
                    }
                    self.plans.push(PlanSummary {
                        time: t,
                        robustness: plan.robustness,
                        horizon_robustness: plan.horizon_robustness,
                        feasible: plan.feasible,
                        iterations: plan.stats.iterations,
                        total_iterations: plan.stats.total_iterations,
                        wall_time_s: plan.stats.wall_time_s,
                        timed_out: plan.stats.timed_out,
                        evaluations: plan.stats.evaluations,
                        exhausted: plan.stats.exhausted,
                        seed: plan.stats.seed,
                        satisfied,
                        decision: plan.decision,
                    });
                    self.decision = Some(plan.decision);
                    self.command = ControlInput {
                        next_foothold: plan.decision.footholds[0],
                        step_duration: plan.decision.durations[0],
                        swing_apex_height: self.ctx.gait.swing_apex,
                    };
                    if self.keep_plans {
                        self.full_plans.push(plan);
                    }
                }
                Err(MpcError::NonFiniteState) => self.fail("state diverged"),
                Err(e) => self.fail(&format!("planner error: {e}")),
            },
        }
    }

    fn record(&mut self) {
        let s = &self.state;
        let rel = s.rel();
        let sigma = orbital_coordinates(s, self.ctx.params.omega());
        let row = [
            s.time,
            s.com_pos[0],
            s.com_pos[1],
            s.com_vel[0],
            s.com_vel[1],
            rel[0],
            rel[1],
            s.swing_pos[0],
            s.swing_pos[1],
            s.swing_pos[2],
            s.stance_pos[0],
            s.stance_pos[1],
            if s.stance_leg == Leg::Left { 1.0 } else { 0.0 },
            sigma[0],
            sigma[1],
            capsule_margin(s, &self.ctx.geometry),
            self.ctx.bound.margin(s.stance_pos, s.time),
        ];
        self.rows.push(row);
    }

    fn fail(&mut self, reason: &str) {
        if self.failure.is_none() {
            self.failure = Some(reason.to_string());
        }
    }

    fn check_state(&mut self) {
        if !self.state.is_finite() {
            self.fail("state diverged");
            return;
        }
        let m = capsule_margin(&self.state, &self.ctx.geometry);
        self.min_margin = self.min_margin.min(m);
        if m < 0.0 {
            self.fail("legs collide");
        }
        let f = self
            .ctx
            .bound
            .margin(self.state.stance_pos, self.state.time);
        self.min_foot_margin = self.min_foot_margin.min(f);
        if f < 0.0 {
            self.fail("foothold left the treadmill");
        }
    }

    /// Looks for two consecutive in-region keyframes after the push, the
    /// second one at most two steps after the pushed step.
    fn evaluate_recovery(&mut self) {
        if self.outcome.is_some() || self.failure.is_some() {
            return;
        }
        let (t_ref, ref_step) = match (self.push.is_some(), self.push_time) {
            (false, _) => (0.0, 0),
            (true, Some(t)) => (t, self.push_step.unwrap_or(0)),
            (true, None) => return,
        };
        let mut prev_good = false;
        for step in self.steps.iter().skip(ref_step) {
            let rel = step.index - ref_step;
            let status = match step.keyframe {
                Some(k) if k.time + 1e-12 < t_ref => continue,
                Some(k) => Some(k.distance > 0.0),
                None if step.ended => Some(false),
                None => None,
            };
            match status {
                Some(true) if prev_good => {
                    self.outcome = Some((rel <= 2, Some(rel)));
                    return;
                }
                Some(good) => {
                    // two steps out without a completed pair
                    if rel >= 2 {
                        self.outcome = Some((false, None));
                        return;
                    }
                    prev_good = good;
                }
                None => return,
            }
        }
    }

    pub fn finish(self) -> EpisodeResult {
        let mut trace = Trace::new(self.ctx.params.dt, 0.0).expect("positive dt");
        let names = BASE_CHANNELS.iter().chain(&EXTRA_CHANNELS);
        for (c, (name, units)) in names.enumerate() {
            trace
                .push_channel(*name, *units, self.rows.iter().map(|r| r[c]).collect())
                .expect("uniform channel lengths");
        }
        let (recovered, steps_to_recover) = match (self.failure.is_some(), self.outcome) {
            (true, _) => (false, None),
            (false, Some((ok, n))) => (ok, n),
            (false, None) => (false, None),
        };
        let keyframes = self.steps.iter().filter_map(|s| s.keyframe).collect();
        let failure = self.failure.or_else(|| {
            (!recovered).then(|| "no two consecutive stable keyframes within two steps".to_string())
        });
        EpisodeResult {
            controller: self.controller,
            push: self.push.map(|(p, _)| p),
            push_time: self.push_time,
            recovered,
            steps_to_recover,
            trace: Some(trace),
            plans: self.plans,
            full_plans: self.full_plans,
            min_collision_margin: self.min_margin,
            min_foot_margin: self.min_foot_margin,
            keyframes,
            footholds: self.footholds,
            steps: self.steps,
            failure,
            gate_violations: self.gate_violations,
        }
    }
}

/// Runs one episode: `n_steps` steps in total, with the optional push applied
/// in the first left stance after the warm-up.
pub fn run_episode(
    sim: &Simulator,
    controller: Controller,
    push: Option<Perturbation>,
    n_steps: usize,
    early_stop: bool,
) -> EpisodeResult {
    let mut ep = sim.start(controller, n_steps);
    ep.early_stop = early_stop;
    if let Some(p) = push {
        ep.set_push(p, sim.push_step());
    }
    ep.run(false);
    ep.finish()
}
