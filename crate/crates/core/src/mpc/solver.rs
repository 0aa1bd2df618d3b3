use std::time::{Duration, Instant};

use super::{
    seed_decision, DecisionVector, MpcError, NlpProblem, PlanResult, PlannerContext, Seed,
    SolveStats, SolverConfig, N_DECISION,
};

type Vec9 = [f64; N_DECISION];
/// Inverse-Hessian approximation of the quasi-Newton iteration.
pub(crate) type Curvature = [[f64; N_DECISION]; N_DECISION];

fn dot(a: &Vec9, b: &Vec9) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &Vec9) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Descent {
    z: Vec9,
    objective: f64,
    iterations: usize,
    curvature: Curvature,
}

/// Wall-clock limit shared by every start of one solve and the evaluation
/// limit of the current start.
struct Budget {
    deadline: Option<Instant>,
    evals_left: Option<usize>,
    used: usize,
    timed_out: bool,
    exhausted: bool,
}

impl Budget {
    /// Claims one objective evaluation; false once either limit is reached.
    fn spend(&mut self) -> bool {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out = true;
        }
        if self.timed_out {
            return false;
        }
        match &mut self.evals_left {
            Some(0) => {
                self.exhausted = true;
                return false;
            }
            Some(n) => *n -= 1,
            None => {}
        }
        self.used += 1;
        true
    }

    /// Counts an evaluation that happens regardless of the limits.
    fn charge(&mut self) {
        if let Some(n) = &mut self.evals_left {
            *n = n.saturating_sub(1);
        }
        self.used += 1;
    }
}

/// Projected quasi-Newton descent with Armijo backtracking, starting from
/// `curvature` when given and from a scaled identity otherwise. Accepted
/// iterates never increase the objective.
fn descend(
    problem: &NlpProblem,
    z0: &Vec9,
    curvature: Option<&Curvature>,
    cfg: &SolverConfig,
    budget: &mut Budget,
) -> Result<Descent, MpcError> {
    let mut z = problem.project(z0);
    let (ev, mut g) = problem.evaluate_with_grad(&z)?;
    budget.charge();
    let mut f = ev.objective;
    let mut h = [[0.0; N_DECISION]; N_DECISION];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let rescale = curvature.is_none();
    if let Some(c) = curvature {
        h = *c;
    }
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let mut trial = z;
        for i in 0..N_DECISION {
            trial[i] -= g[i];
        }
        let pg: Vec9 = {
            let p = problem.project(&trial);
            std::array::from_fn(|i| p[i] - z[i])
        };
        if inf_norm(&pg) <= cfg.tol {
            break;
        }
        // variables held at a bound by the gradient stay fixed this iteration
        let free: [bool; N_DECISION] =
            std::array::from_fn(|i| pg[i] != 0.0 || (trial[i] - z[i]).abs() < 1e-15);
        let mut d = [0.0; N_DECISION];
        for i in 0..N_DECISION {
            if free[i] {
                d[i] = -(0..N_DECISION)
                    .filter(|&j| free[j])
                    .map(|j| h[i][j] * g[j])
                    .sum::<f64>();
            }
        }
        let mut steepest = false;
        if dot(&d, &g) >= 0.0 {
            d = pg;
            steepest = true;
        }
        let mut accepted = None;
        'search: loop {
            let mut alpha = (cfg.max_step / inf_norm(&d).max(1e-300)).min(1.0);
            for _ in 0..40 {
                if !budget.spend() {
                    break 'search;
                }
                let zn = problem.project(&std::array::from_fn(|i| z[i] + alpha * d[i]));
                let s: Vec9 = std::array::from_fn(|i| zn[i] - z[i]);
                let fn_ = problem.evaluate(&zn)?.objective;
                if fn_ <= f + 1e-4 * dot(&g, &s).min(0.0) && fn_ <= f {
                    accepted = Some((zn, fn_));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() || steepest {
                break;
            }
            d = pg;
            steepest = true;
        }
        let Some((zn, fn_)) = accepted else { break };
        if !budget.spend() {
            // the accepted point is kept; its gradient is never needed
            z = zn;
            f = fn_;
            iterations += 1;
            break;
        }
        let (_, gn) = problem.evaluate_with_grad(&zn)?;
        iterations += 1;
        let s: Vec9 = std::array::from_fn(|i| zn[i] - z[i]);
        let y: Vec9 = std::array::from_fn(|i| gn[i] - g[i]);
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if iterations == 1 && rescale {
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    *row = [0.0; N_DECISION];
                    row[i] = scale;
                }
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        let change = f - fn_;
        z = zn;
        f = fn_;
        g = gn;
        if change <= 1e-12 * (1.0 + f.abs()) {
            break;
        }
    }
    Ok(Descent {
        z,
        objective: f,
        iterations,
        curvature: h,
    })
}

fn bfgs_update(h: &mut [[f64; N_DECISION]; N_DECISION], s: &Vec9, y: &Vec9, sy: f64) {
    let rho = 1.0 / sy;
    let hy: Vec9 = std::array::from_fn(|i| dot(&h[i], y));
    let yhy = dot(y, &hy);
    for i in 0..N_DECISION {
        for j in 0..N_DECISION {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Exact certification of a decision.
pub(crate) fn finalize(
    problem: &NlpProblem,
    z: &Vec9,
    cfg: &SolverConfig,
    stats: SolveStats,
) -> Result<PlanResult, MpcError> {
    let ev = problem.evaluate(z)?;
    let (rho, trace, starts) = problem.certify(z)?;
    let rho0 = rho[0];
    let horizon = rho.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PlanResult {
        decision: DecisionVector::from_array(z),
        trace: Some(trace),
        robustness: rho0,
        horizon_robustness: horizon,
        step_robustness: [rho[1], rho[2]],
        eval_indices: starts,
        control_cost: ev.control_cost,
        smooth_robustness: ev.smooth_robustness,
        stats: SolveStats {
            objective: ev.objective,
            max_violation: ev.violation,
            ..stats
        },
        feasible: horizon >= 0.0 && ev.violation <= cfg.violation_tol,
    })
}

fn better(a: &PlanResult, b: &PlanResult) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        _ => a.stats.objective < b.stats.objective,
    }
}

/// Multi-start solve: the warm start (if any) followed by the configured
/// seeds. Returns the best feasible plan, or the lowest-objective plan flagged
/// infeasible when no start is feasible.
pub fn solve(
    problem: &NlpProblem,
    warm: Option<&DecisionVector>,
    cfg: &SolverConfig,
    ctx: &PlannerContext,
) -> Result<PlanResult, MpcError> {
    solve_warm(problem, warm.map(|w| (w, None)), cfg, ctx).map(|(plan, _)| plan)
}

/// [`solve`] with the warm start's curvature; also returns the curvature of
/// the start that produced the plan.
pub(crate) fn solve_warm(
    problem: &NlpProblem,
    warm: Option<(&DecisionVector, Option<&Curvature>)>,
    cfg: &SolverConfig,
    ctx: &PlannerContext,
) -> Result<(PlanResult, Curvature), MpcError> {
    let start = Instant::now();
    let mut budget = Budget {
        deadline: cfg
            .budget_ms
            .map(|ms| start + Duration::from_secs_f64(ms.max(0.0) / 1e3)),
        evals_left: cfg.max_evaluations,
        used: 0,
        timed_out: false,
        exhausted: false,
    };
    let mut starts: Vec<(Option<Seed>, DecisionVector, Option<&Curvature>)> = Vec::new();
    if let Some((w, c)) = warm {
        starts.push((None, *w, c));
    }
    starts.extend(
        cfg.seeds
            .iter()
            .map(|&s| (Some(s), seed_decision(s, problem, ctx), None)),
    );

    let mut best: Option<(PlanResult, Curvature)> = None;
    let mut total_iters = 0;
    for (i, (seed, z0, curvature)) in starts.iter().enumerate() {
        // the first start always runs so that a plan exists
        if i > 0 && budget.timed_out {
            break;
        }
        budget.evals_left = cfg.max_evaluations;
        let z0 = problem.project(&z0.to_array());
        let descent = descend(problem, &z0, *curvature, cfg, &mut budget)?;
        total_iters += descent.iterations;
        let stats = SolveStats {
            iterations: descent.iterations,
            objective: descent.objective,
            total_iterations: 0,
            max_violation: 0.0,
            wall_time_s: 0.0,
            timed_out: false,
            evaluations: 0,
            exhausted: false,
            seed: *seed,
        };
        let result = finalize(problem, &descent.z, cfg, stats)?;
        let warm_done = seed.is_none() && result.feasible && cfg.warm_shortcut;
        if best.as_ref().is_none_or(|(b, _)| better(&result, b)) {
            best = Some((result, descent.curvature));
        }
        if warm_done || budget.timed_out {
            break;
        }
    }
    let (mut best, curvature) = best.expect("at least one start");
    best.stats.wall_time_s = start.elapsed().as_secs_f64();
    best.stats.timed_out = budget.timed_out;
    best.stats.exhausted = budget.exhausted;
    best.stats.evaluations = budget.used;
    best.stats.total_iterations = total_iters;
    Ok((best, curvature))
}
