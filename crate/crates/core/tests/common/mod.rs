#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stlwalk::collision::Mlp;
use stlwalk::config::Config;
use stlwalk::harness::Simulator;
use stlwalk::mpc::PlannerContext;
use stlwalk::stl::{Formula, Predicate, Trace};

pub const CHANNELS: [&str; 3] = ["a", "b", "c"];
pub const DT: f64 = 0.1;

/// Default-config collision network, trained once per target directory.
pub fn network() -> Arc<Mlp> {
    static NET: OnceLock<Arc<Mlp>> = OnceLock::new();
    NET.get_or_init(|| {
        let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("collision_net_default.json");
        Arc::new(
            Config::default()
                .collision
                .load_or_train(&path)
                .expect("collision network"),
        )
    })
    .clone()
}

pub fn context(cfg: &Config) -> Arc<PlannerContext> {
    Arc::new(PlannerContext::new(cfg, network()).expect("planner context"))
}

pub fn simulator(cfg: &Config) -> Simulator {
    Simulator::new(context(cfg), cfg.sweep.clone())
}

fn random_predicate(rng: &mut ChaCha8Rng) -> Predicate {
    let n_terms = rng.gen_range(1..=2);
    let terms = CHANNELS
        .choose_multiple(rng, n_terms)
        .map(|c| {
            let a = if rng.gen_bool(0.5) {
                1.0
            } else {
                rng.gen_range(-2.0..2.0)
            };
            (c.to_string(), a)
        })
        .collect();
    let offset = if rng.gen_bool(0.3) {
        0.0
    } else {
        rng.gen_range(-1.0..1.0)
    };
    Predicate {
        terms,
        offset,
        scale: rng.gen_range(0.5..2.0),
    }
}

fn window(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let lo = rng.gen_range(0..=3);
    let hi = lo + rng.gen_range(0..=4);
    (lo as f64 * DT, hi as f64 * DT)
}

/// Random formula of at most `depth` operator levels over [`CHANNELS`].
pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.2) {
        return Formula::pred(random_predicate(rng));
    }
    match rng.gen_range(0..6) {
        0 => Formula::not(random_formula(rng, depth - 1)),
        1 => Formula::And(
            (0..rng.gen_range(2..=3))
                .map(|_| random_formula(rng, depth - 1))
                .collect(),
        ),
        2 => Formula::Or(
            (0..rng.gen_range(2..=3))
                .map(|_| random_formula(rng, depth - 1))
                .collect(),
        ),
        3 => {
            let (lo, hi) = window(rng);
            Formula::always(lo, hi, random_formula(rng, depth - 1))
        }
        4 => {
            let (lo, hi) = window(rng);
            Formula::eventually(lo, hi, random_formula(rng, depth - 1))
        }
        _ => {
            let (lo, hi) = window(rng);
            Formula::until(
                lo,
                hi,
                random_formula(rng, depth - 1),
                random_formula(rng, depth - 1),
            )
        }
    }
}

/// Random trace long enough for `f` at sample 0 and at most 50 samples when
/// the horizon allows. Half the traces are quantized so that exact ties occur.
pub fn random_trace(rng: &mut ChaCha8Rng, f: &Formula) -> Trace {
    let need = f.horizon_steps(DT) + 1;
    let len = rng.gen_range(need.min(50)..=50).max(need);
    let quantize = rng.gen_bool(0.5);
    let channels = CHANNELS.iter().map(|c| {
        let v = (0..len)
            .map(|_| {
                let x: f64 = rng.gen_range(-1.0..1.0);
                if quantize {
                    (x * 4.0).round() / 4.0
                } else {
                    x
                }
            })
            .collect();
        (*c, v)
    });
    Trace::from_channels(DT, 0.0, channels).expect("valid trace")
}

/// `n` (formula, trace) pairs of depth at most 4 from a fixed seed.
pub fn stl_suite(seed: u64, n: usize) -> Vec<(Formula, Trace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let f = random_formula(&mut rng, 4);
            let t = random_trace(&mut rng, &f);
            (f, t)
        })
        .collect()
}

/// RK4 integration of `x'' = omega^2 (x - p)` with fixed step `h`, sampled at
/// every multiple of `h`.
pub fn rk4_lipm(x0: f64, v0: f64, p: f64, omega: f64, h: f64, n: usize) -> Vec<(f64, f64)> {
    let w2 = omega * omega;
    let f = |x: f64, v: f64| (v, w2 * (x - p));
    let (mut x, mut v) = (x0, v0);
    let mut out = Vec::with_capacity(n + 1);
    out.push((x, v));
    for _ in 0..n {
        let k1 = f(x, v);
        let k2 = f(x + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
        let k3 = f(x + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
        let k4 = f(x + h * k3.0, v + h * k3.1);
        x += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        out.push((x, v));
    }
    out
}

/// Largest deviation of the keyframe (rel_x, rel_y, vx, vy) from the periodic
/// solution over `steps` nominal steps from a nominal touchdown.
pub fn nominal_keyframe_drift(cfg: &Config, steps: usize) -> f64 {
    use stlwalk::locomotion::nominal_gait;
    use stlwalk::model::{step_end_states, time_to_keyframe, Leg};
    let params = cfg.model;
    let n = nominal_gait(&cfg.gait, &params).expect("nominal gait");
    let start = n.touchdown_state([0.15, 0.1], Leg::Left, 0.0);
    let plan = n.plan(&start, steps, 0.02);
    let mut touchdowns = vec![start];
    touchdowns.extend(step_end_states(&start, &plan, &params).expect("rollout"));
    let mut worst: f64 = 0.0;
    for (i, td) in touchdowns.iter().take(steps).enumerate() {
        let rel = td.rel();
        let t = time_to_keyframe(rel[0], td.com_vel[0], params.omega()).expect("keyframe reached");
        let kf = td.advance(
            t,
            plan[i].next_foothold,
            plan[i].swing_apex_height,
            plan[i].step_duration,
            &params,
        );
        let expected = n.keyframe_rel(td.stance_leg);
        let got = [kf.rel()[0], kf.rel()[1], kf.com_vel[0], kf.com_vel[1]];
        for a in 0..4 {
            worst = worst.max((got[a] - expected[a]).abs());
        }
    }
    worst
}
