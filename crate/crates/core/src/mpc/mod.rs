//! Three-step shooting MPC over footholds and step durations.
//!
//! The objective trades smoothed robustness of the locomotion formula against
//! deviation from the nominal gait and a quadratic penalty on the learned
//! collision margin. Feasibility is certified afterwards with the exact
//! semantics on the returned trace.

mod problem;
mod solver;

pub use problem::{Evaluation, NlpProblem, Weights, RIEM_CHANNELS};
pub use solver::solve;
use solver::{solve_warm, Curvature};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{LegGeometry, Mlp};
use crate::config::Config;
use crate::locomotion::{
    build_loco_spec, nominal_gait, FootBound, GaitParams, LocomotionError, NominalGait,
    RiemannianRegion,
};
use crate::model::{lipm_flow_omega, ControlInput, Leg, ModelError, ModelParams, ReducedState};
use crate::stl::{Formula, StlError, Trace};

/// Decision size: three footholds and three durations.
pub const N_DECISION: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpcError {
    #[error("measured state is not finite")]
    NonFiniteState,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Locomotion(#[from] LocomotionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seed {
    Nominal,
    CapturePoint,
    CrossedLeg,
}

fn d_w_rho() -> f64 {
    10.0
}
fn d_w_u() -> f64 {
    1.0
}
fn d_w_pen() -> f64 {
    1e3
}
fn d_delta() -> f64 {
    0.02
}
fn d_beta() -> f64 {
    50.0
}
fn d_tol() -> f64 {
    1e-4
}
fn d_iters() -> usize {
    150
}
fn d_budget() -> Option<f64> {
    Some(33.0)
}
fn d_evaluations() -> Option<usize> {
    Some(60)
}
fn d_violation() -> f64 {
    5e-3
}
fn d_min_remaining() -> f64 {
    0.02
}
fn d_max_step() -> f64 {
    0.1
}
fn d_seeds() -> Vec<Seed> {
    vec![Seed::Nominal, Seed::CapturePoint, Seed::CrossedLeg]
}
fn d_true() -> bool {
    true
}

/// Solver and objective settings (JSON key `mpc`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    #[serde(default = "d_w_rho")]
    pub w_rho: f64,
    #[serde(default = "d_w_u")]
    pub w_u: f64,
    #[serde(default = "d_w_pen")]
    pub w_pen: f64,
    #[serde(default = "d_delta")]
    pub delta_col: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    /// Stop when the projected gradient's max-norm falls below this.
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_iters")]
    pub max_iters: usize,
    /// Soft wall-clock budget per solve in milliseconds; `null` disables it.
    #[serde(default = "d_budget")]
    pub budget_ms: Option<f64>,
    /// Objective evaluations (with or without gradient) allowed per start; a
    /// machine-independent counterpart of `budget_ms`. `null` disables it.
    #[serde(default = "d_evaluations")]
    pub max_evaluations: Option<usize>,
    /// Collision-margin shortfall tolerated in a feasible plan (m).
    #[serde(default = "d_violation")]
    pub violation_tol: f64,
    /// Formula horizon in seconds; the nominal step duration when absent.
    #[serde(default)]
    pub spec_horizon: Option<f64>,
    /// Minimum time left in the current step for any plan.
    #[serde(default = "d_min_remaining")]
    pub min_remaining: f64,
    /// Largest change of any decision entry in one line-search trial.
    #[serde(default = "d_max_step")]
    pub max_step: f64,
    /// Cold-start seeds, tried in order after the warm start.
    #[serde(default = "d_seeds")]
    pub seeds: Vec<Seed>,
    /// Skip the cold seeds when the warm start already yields a feasible plan.
    #[serde(default = "d_true")]
    pub warm_shortcut: bool,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            w_rho: d_w_rho(),
            w_u: d_w_u(),
            w_pen: d_w_pen(),
            delta_col: d_delta(),
            beta: d_beta(),
            tol: d_tol(),
            max_iters: d_iters(),
            budget_ms: d_budget(),
            max_evaluations: d_evaluations(),
            violation_tol: d_violation(),
            spec_horizon: None,
            min_remaining: d_min_remaining(),
            max_step: d_max_step(),
            seeds: d_seeds(),
            warm_shortcut: true,
        }
    }
}

pub type SolverConfig = MpcConfig;

/// Three footholds (belt frame) and three step durations. The first duration
/// is the total length of the current step, counted from its touchdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub footholds: [[f64; 2]; 3],
    pub durations: [f64; 3],
}

impl DecisionVector {
    pub fn to_array(&self) -> [f64; N_DECISION] {
        let p = &self.footholds;
        let t = &self.durations;
        [
            p[0][0], p[0][1], p[1][0], p[1][1], p[2][0], p[2][1], t[0], t[1], t[2],
        ]
    }

    pub fn from_array(z: &[f64; N_DECISION]) -> Self {
        Self {
            footholds: [[z[0], z[1]], [z[2], z[3]], [z[4], z[5]]],
            durations: [z[6], z[7], z[8]],
        }
    }

    pub fn controls(&self, apex: f64) -> Vec<ControlInput> {
        (0..3)
            .map(|j| ControlInput {
                next_foothold: self.footholds[j],
                step_duration: self.durations[j],
                swing_apex_height: apex,
            })
            .collect()
    }

    /// Drops the completed first step and appends a nominal one. `old_leg`
    /// is the stance leg the decision was planned for.
    pub fn shifted(&self, nominal: &NominalGait, old_leg: Leg) -> Self {
        let p = self.footholds;
        // the third foothold is a stance of the leg opposite to `old_leg`
        Self {
            footholds: [p[1], p[2], nominal.next_foothold(p[2], old_leg.other())],
            durations: [self.durations[1], self.durations[2], nominal.gait.nominal_t],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Accepted iterations of the start that produced the plan.
    pub iterations: usize,
    /// Accepted iterations summed over all starts.
    pub total_iterations: usize,
    pub objective: f64,
    pub max_violation: f64,
    pub wall_time_s: f64,
    /// The wall-clock budget expired before every start converged.
    pub timed_out: bool,
    /// Objective evaluations over all starts.
    pub evaluations: usize,
    /// Some start ran out of evaluations before converging.
    pub exhausted: bool,
    pub seed: Option<Seed>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanResult {
    pub decision: DecisionVector,
    #[serde(skip)]
    pub trace: Option<Trace>,
    /// Exact robustness of the formula at the first sample.
    pub robustness: f64,
    /// Exact robustness at the first sample and at both planned touchdowns,
    /// minimized.
    pub horizon_robustness: f64,
    /// Exact robustness at the two planned touchdowns, each over its own step.
    pub step_robustness: [f64; 2],
    pub eval_indices: [usize; 3],
    pub control_cost: f64,
    pub smooth_robustness: f64,
    pub stats: SolveStats,
    pub feasible: bool,
}

impl PlanResult {
    pub fn trace(&self) -> &Trace {
        self.trace.as_ref().expect("plan carries its trace")
    }
}

/// Everything a planner needs that does not change between replans.
#[derive(Debug, Clone)]
pub struct PlannerContext {
    pub params: ModelParams,
    pub gait: GaitParams,
    pub nominal: NominalGait,
    pub region: RiemannianRegion,
    pub bound: FootBound,
    pub geometry: LegGeometry,
    pub net: Arc<Mlp>,
    pub mpc: MpcConfig,
    pub spec: Formula,
}

impl PlannerContext {
    pub fn new(config: &Config, net: Arc<Mlp>) -> Result<Self, MpcError> {
        let nominal = nominal_gait(&config.gait, &config.model)?;
        let region = RiemannianRegion::calibrate(
            &nominal,
            config.riemannian.margin,
            config.riemannian.sync_lateral,
        )?;
        let bound = config.foot_bound();
        let horizon = config.mpc.spec_horizon.unwrap_or(config.gait.nominal_t);
        let spec = build_loco_spec(&bound, &region, &config.gait, horizon);
        net.validate()
            .map_err(|e| MpcError::Locomotion(LocomotionError::Infeasible(e.to_string())))?;
        Ok(Self {
            params: config.model,
            gait: config.gait,
            nominal,
            region,
            bound,
            geometry: config.collision.geometry,
            net,
            mpc: config.mpc.clone(),
            spec,
        })
    }

    /// Nominal three-step decision continuing from `state`.
    pub fn nominal_decision(&self, state: &ReducedState) -> DecisionVector {
        let p1 = self
            .nominal
            .next_foothold(state.stance_pos, state.stance_leg);
        let p2 = self.nominal.next_foothold(p1, state.stance_leg.other());
        let p3 = self.nominal.next_foothold(p2, state.stance_leg);
        let t = self.gait.nominal_t;
        DecisionVector {
            footholds: [p1, p2, p3],
            durations: [t, t, t],
        }
    }
}

/// Builds the problem for one replan from the measured `state`.
pub fn build_nlp(state: &ReducedState, ctx: &PlannerContext) -> NlpProblem {
    let p = &ctx.params;
    let cfg = &ctx.mpc;
    let t1_lo = p.t_min.max(state.elapsed + cfg.min_remaining).min(p.t_max);
    let nominal = ctx.nominal_decision(state);
    let mut land = state.time + (nominal.durations[0] - state.elapsed).max(cfg.min_remaining);
    let mut foothold_box = [[(0.0, 0.0); 2]; 3];
    for (j, b) in foothold_box.iter_mut().enumerate() {
        let shift = ctx.bound.belt_speed * land;
        *b = [
            (ctx.bound.x_min + shift, ctx.bound.x_max + shift),
            (ctx.bound.y_min, ctx.bound.y_max),
        ];
        land += nominal.durations[(j + 1).min(2)];
    }
    NlpProblem {
        initial: *state,
        spec: ctx.spec.clone(),
        weights: Weights {
            rho: cfg.w_rho,
            control: cfg.w_u,
            penalty: cfg.w_pen,
        },
        net: ctx.net.clone(),
        bound: ctx.bound,
        foothold_box,
        duration_bounds: [(t1_lo, p.t_max), (p.t_min, p.t_max), (p.t_min, p.t_max)],
        delta_col: cfg.delta_col,
        nominal,
        beta: cfg.beta,
        params: *p,
        apex: ctx.gait.swing_apex,
    }
}

/// Cold-start decision for `seed`.
pub fn seed_decision(seed: Seed, problem: &NlpProblem, ctx: &PlannerContext) -> DecisionVector {
    let state = &problem.initial;
    let leg = state.stance_leg;
    match seed {
        Seed::Nominal => problem.nominal,
        Seed::CapturePoint | Seed::CrossedLeg => {
            let w = ctx.params.omega();
            let t1 = problem.nominal.durations[0].max(problem.duration_bounds[0].0);
            let remaining = t1 - state.elapsed;
            let offset = ctx.nominal.capture_offset(leg, t1);
            let mut p1 = [0.0; 2];
            for a in 0..2 {
                let (x, v) = lipm_flow_omega(
                    state.com_pos[a],
                    state.com_vel[a],
                    state.stance_pos[a],
                    remaining,
                    w,
                );
                p1[a] = x + v / w + offset[a];
            }
            if seed == Seed::CrossedLeg {
                let ys = state.stance_pos[1];
                if leg.sign() * (p1[1] - ys) < 0.0 {
                    p1[1] = 2.0 * ys - p1[1];
                }
            }
            let p2 = ctx.nominal.next_foothold(p1, leg.other());
            let p3 = ctx.nominal.next_foothold(p2, leg);
            DecisionVector {
                footholds: [p1, p2, p3],
                durations: [
                    t1,
                    problem.nominal.durations[1],
                    problem.nominal.durations[2],
                ],
            }
        }
    }
}

/// Receding-horizon planner owning its warm start.
#[derive(Debug, Clone)]
pub struct Planner {
    ctx: Arc<PlannerContext>,
    /// Previous decision, the stance leg it was planned for, and the
    /// curvature the solver ended with.
    last: Option<(DecisionVector, Leg, Curvature)>,
}

impl Planner {
    pub fn new(ctx: Arc<PlannerContext>) -> Self {
        Self { ctx, last: None }
    }

    pub fn context(&self) -> &PlannerContext {
        &self.ctx
    }

    /// Warm start for `measured`: the previous decision, shifted by one step
    /// when a touchdown happened since the last call.
    pub fn warm_start(&self, measured: &ReducedState) -> Option<DecisionVector> {
        self.last.map(|(d, leg, _)| {
            if leg == measured.stance_leg {
                d
            } else {
                d.shifted(&self.ctx.nominal, leg)
            }
        })
    }

    pub fn replan(&mut self, measured: &ReducedState) -> Result<PlanResult, MpcError> {
        self.replan_with(measured, &self.ctx.mpc.clone())
    }

    pub fn replan_with(
        &mut self,
        measured: &ReducedState,
        cfg: &SolverConfig,
    ) -> Result<PlanResult, MpcError> {
        if !measured.is_finite() {
            return Err(MpcError::NonFiniteState);
        }
        let problem = build_nlp(measured, &self.ctx);
        let warm = self.warm_start(measured);
        // curvature carries over only while the variables keep their meaning
        let curvature = self
            .last
            .as_ref()
            .filter(|(_, leg, _)| *leg == measured.stance_leg)
            .map(|(_, _, c)| c);
        let (result, c) = solve_warm(
            &problem,
            warm.as_ref().map(|w| (w, curvature)),
            cfg,
            &self.ctx,
        )?;
        self.last = Some((result.decision, measured.stance_leg, c));
        Ok(result)
    }

    pub fn reset(&mut self) {
        self.last = None;
    }
}
