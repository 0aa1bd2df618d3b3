//! Acceptance criteria 1-9. Runs as a plain binary so that every criterion
//! prints its result line; exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stlwalk::collision::{capsule_margin, sample_dataset, state_from_features};
use stlwalk::config::Config;
use stlwalk::harness::{run_episode, sweep, Controller, SpiderTable};
use stlwalk::model::{lipm_flow, orbital_energy};
use stlwalk::stl::{robustness, satisfies, smooth_robustness, Formula, Trace};

struct Report {
    failed: usize,
}

impl Report {
    fn record(&mut self, id: usize, pass: bool, detail: String) {
        println!(
            "criterion {id}: {} ({detail})",
            if pass { "PASS" } else { "FAIL" }
        );
        self.failed += usize::from(!pass);
    }
}

fn stl_soundness(suite: &[(Formula, Trace)]) -> (bool, String) {
    let start = Instant::now();
    let mut failures = 0;
    let mut decided = 0;
    for (f, t) in suite {
        let rho = robustness(f, t, 0).unwrap().value;
        if rho.abs() > 1e-9 {
            decided += 1;
            failures += usize::from((rho > 0.0) != satisfies(f, t, 0).unwrap());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        failures == 0 && secs < 10.0,
        format!(
            "{} pairs, {decided} with |rho| > 1e-9, {failures} sign mismatches, {secs:.2} s",
            suite.len()
        ),
    )
}

/// Gradient of the smooth robustness at sample 0 by central differences.
fn fd_gradient(f: &Formula, t: &Trace, beta: f64) -> Vec<Vec<f64>> {
    let h = 1e-6;
    let names: Vec<String> = t.channels().iter().map(|c| c.name.clone()).collect();
    names
        .iter()
        .map(|name| {
            (0..t.len())
                .map(|k| {
                    let eval = |d: f64| {
                        let mut u = t.clone();
                        u.channel_mut(name).unwrap()[k] += d;
                        smooth_robustness(f, &u, 0, beta).unwrap().value
                    };
                    (eval(h) - eval(-h)) / (2.0 * h)
                })
                .collect()
        })
        .collect()
}

fn smooth_bound(suite: &[(Formula, Trace)]) -> (bool, String) {
    let mut bound_failures = 0;
    for (f, t) in suite {
        let rho = robustness(f, t, 0).unwrap().value;
        let depth = f.smooth_depth(common::DT) as f64;
        let width = (f.max_arity(common::DT) as f64).ln();
        for beta in [10.0, 30.0, 100.0] {
            let smooth = smooth_robustness(f, t, 0, beta).unwrap().value;
            bound_failures += usize::from((smooth - rho).abs() > depth * width / beta + 1e-12);
        }
    }
    // relative error of the whole gradient per instance
    let mut worst: f64 = 0.0;
    for (f, t) in suite.iter().take(100) {
        let g = smooth_robustness(f, t, 0, 30.0).unwrap().gradient;
        let fd = fd_gradient(f, t, 30.0);
        let (mut diff, mut norm) = (0.0, 0.0);
        for (gc, fc) in g.iter().zip(&fd) {
            for (a, b) in gc.iter().zip(fc) {
                diff += (a - b) * (a - b);
                norm += b * b;
            }
        }
        worst = worst.max(diff.sqrt() / norm.sqrt().max(1e-12));
    }
    (
        bound_failures == 0 && worst <= 1e-4,
        format!("{bound_failures} bound violations over 3 betas, worst gradient relative error {worst:.2e} on 100 instances"),
    )
}

fn dynamics_oracle(cfg: &Config) -> (bool, String) {
    let params = cfg.model;
    let w = params.omega();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rk4_err: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for _ in 0..20 {
        let (x0, v0, p) = (
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-0.2..0.2),
        );
        let h = 1e-4;
        let ref_path = common::rk4_lipm(x0, v0, p, w, h, 10_000);
        for (i, (x, v)) in ref_path.iter().enumerate().step_by(100) {
            let (xc, vc) = lipm_flow(x0, v0, p, i as f64 * h, &params);
            rk4_err = rk4_err.max((xc - x).abs()).max((vc - v).abs());
        }
        // chained control-period steps over one second
        let e0 = orbital_energy(x0, v0, p, w);
        let (mut x, mut v, mut e) = (x0, v0, e0);
        let n = (1.0 / params.dt).round() as usize;
        for _ in 0..n {
            (x, v) = lipm_flow(x, v, p, params.dt, &params);
            let e1 = orbital_energy(x, v, p, w);
            drift = drift.max((e1 - e).abs() / e0.abs().max(1e-3));
            e = e1;
        }
    }
    let kf = common::nominal_keyframe_drift(cfg, 10);
    (
        rk4_err <= 1e-6 && drift <= 1e-9 && kf < 1e-6,
        format!("RK4 max error {rk4_err:.2e}, energy drift per step {drift:.2e}, keyframe drift {kf:.2e} over 10 steps"),
    )
}

fn collision_net(cfg: &Config) -> (bool, String) {
    let c = &cfg.collision;
    let start = Instant::now();
    let (net, _) = c.train().expect("training");
    let secs = start.elapsed().as_secs_f64();
    let held_out = sample_dataset(
        10_000,
        &c.geometry,
        &c.ranges,
        c.training.seed.wrapping_add(1_000_003),
    )
    .unwrap();
    let (mut sign, mut close) = (0, 0);
    for s in &held_out {
        let truth = capsule_margin(&state_from_features(&s.features), &c.geometry);
        let m = net.forward(&s.features);
        sign += usize::from((m >= 0.0) == (truth >= 0.0));
        close += usize::from((m - truth).abs() <= 0.02);
    }
    let n = held_out.len() as f64;
    let (sign, close) = (sign as f64 / n, close as f64 / n);
    (
        sign >= 0.97 && close >= 0.95 && secs <= 300.0,
        format!(
            "sign agreement {:.2}%, within 0.02 m {:.2}%, training {secs:.1} s",
            100.0 * sign,
            100.0 * close
        ),
    )
}

fn csv_bytes(table: &SpiderTable) -> Vec<u8> {
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    out
}

fn crossed_leg(cfg: &Config, table: &SpiderTable) -> (bool, String) {
    let (dir, phase) = (3, 0.25);
    let force = table
        .get(Controller::StlMpc, phase, dir)
        .map_or(0.0, |c| c.max_force());
    let sim = common::simulator(cfg);
    let steps = sim.push_step() + 1 + cfg.sweep.post_push_steps;
    let r = run_episode(
        &sim,
        Controller::StlMpc,
        Some(sim.push(dir, force, phase)),
        steps,
        false,
    );
    let crosses = r.first_post_push_foothold().is_some_and(|f| f.crosses());
    let margin = r.min_collision_margin;
    (
        r.recovered && crosses && margin >= 0.0,
        format!("{force:.0} N toward the stance side: recovered {}, first foothold crosses {crosses}, min capsule margin {margin:.4} m", r.recovered),
    )
}

fn replan_budget(cfg: &Config) -> (bool, String) {
    let mut cfg = cfg.clone();
    cfg.sweep.enforce_budget = true;
    let sim = common::simulator(&cfg);
    let r = run_episode(&sim, Controller::StlMpc, None, 10, false);
    // every replan after the first starts from the previous plan
    let mut ms: Vec<f64> = r
        .plans
        .iter()
        .skip(1)
        .map(|p| 1e3 * p.wall_time_s)
        .collect();
    ms.sort_by(f64::total_cmp);
    let pick = |q: f64| ms[((q * (ms.len() - 1) as f64).round() as usize).min(ms.len() - 1)];
    let (median, p95) = (pick(0.5), pick(0.95));
    let timeouts = r.plans.iter().filter(|p| p.timed_out).count();
    (
        median <= 33.0 && p95 <= 100.0,
        format!("{} warm-started solves, median {median:.1} ms, p95 {p95:.1} ms, {timeouts} hit the budget", ms.len()),
    )
}

fn main() -> ExitCode {
    let cfg = Config::default();
    let mut report = Report { failed: 0 };

    let suite = common::stl_suite(2024, 1000);
    let (ok, d) = stl_soundness(&suite);
    report.record(1, ok, d);
    let (ok, d) = smooth_bound(&suite);
    report.record(2, ok, d);
    let (ok, d) = dynamics_oracle(&cfg);
    report.record(3, ok, d);
    let (ok, d) = collision_net(&cfg);
    report.record(4, ok, d);

    let sim = common::simulator(&cfg);
    let start = Instant::now();
    let table = sweep(&sim);
    let secs = start.elapsed().as_secs_f64();
    let s = table.summary();
    report.record(
        5,
        s.gate_violations == 0 && s.feasible_plans > 0,
        format!(
            "{} feasible plans over {} episodes, {} violate the formula",
            s.feasible_plans, s.episodes, s.gate_violations
        ),
    );
    let (ok, d) = crossed_leg(&cfg, &table);
    report.record(6, ok, d);
    report.record(
        7,
        s.failed_cells == 0
            && s.at_least_fraction >= 0.75
            && s.strictly_greater_fraction >= 0.5
            && secs < 1800.0,
        format!(
            "{} cells, at least baseline {:.1}%, strictly greater {:.1}%, sweep {secs:.0} s",
            s.compared_cells,
            100.0 * s.at_least_fraction,
            100.0 * s.strictly_greater_fraction
        ),
    );
    let (ok, d) = replan_budget(&cfg);
    report.record(8, ok, d);
    let again = sweep(&common::simulator(&cfg));
    let (a, b) = (csv_bytes(&table), csv_bytes(&again));
    report.record(
        9,
        a == b,
        format!("two sweeps, {} CSV bytes, identical {}", a.len(), a == b),
    );

    println!("{} of 9 criteria passed", 9 - report.failed);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
