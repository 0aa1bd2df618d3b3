mod common;

use proptest::prelude::*;

use stlwalk::config::Config;
use stlwalk::model::{
    lipm_flow, orbital_energy, reset_map, swing_trajectory, Leg, ModelParams, ReducedState,
    LATERAL_ONSET,
};

fn state(com: [f64; 2], vel: [f64; 2], stance: [f64; 2], swing: [f64; 3]) -> ReducedState {
    ReducedState {
        com_pos: com,
        com_vel: vel,
        swing_pos: swing,
        stance_pos: stance,
        stance_leg: Leg::Left,
        phase: 0.3,
        elapsed: 0.12,
        time: 2.0,
    }
}

#[test]
fn closed_form_flow_matches_rk4() {
    let p = ModelParams::default();
    let w = p.omega();
    for (x0, v0, foot) in [(0.0, 0.5, 0.1), (-0.1, 0.8, 0.0), (0.05, -0.2, 0.02)] {
        let h = 1e-4;
        let oracle = common::rk4_lipm(x0, v0, foot, w, h, 10_000);
        for (i, (x, v)) in oracle.iter().enumerate().step_by(100) {
            let (xc, vc) = lipm_flow(x0, v0, foot, i as f64 * h, &p);
            assert!(
                (xc - x).abs() <= 1e-6 && (vc - v).abs() <= 1e-6,
                "t = {}",
                i as f64 * h
            );
        }
    }
}

#[test]
fn nominal_gait_keyframes_do_not_drift() {
    assert!(common::nominal_keyframe_drift(&Config::default(), 10) < 1e-6);
}

proptest! {
    #[test]
    fn orbital_energy_is_invariant(x0 in -0.3f64..0.3, v0 in -1.0f64..1.0, foot in -0.2f64..0.2, t in 0.0f64..0.6) {
        let p = ModelParams::default();
        let w = p.omega();
        let (x, v) = lipm_flow(x0, v0, foot, t, &p);
        let e0 = orbital_energy(x0, v0, foot, w);
        let e1 = orbital_energy(x, v, foot, w);
        prop_assert!((e1 - e0).abs() <= 1e-12 * (1.0 + e0.abs() + v0 * v0 + (w * (x0 - foot)).powi(2)));
    }

    #[test]
    fn flow_composes(x0 in -0.3f64..0.3, v0 in -1.0f64..1.0, t1 in 0.0f64..0.4, t2 in 0.0f64..0.4) {
        let p = ModelParams::default();
        let (xa, va) = lipm_flow(x0, v0, 0.0, t1, &p);
        let (xb, vb) = lipm_flow(xa, va, 0.0, t2, &p);
        let (xc, vc) = lipm_flow(x0, v0, 0.0, t1 + t2, &p);
        prop_assert!((xb - xc).abs() < 1e-12 && (vb - vc).abs() < 1e-12);
    }

    #[test]
    fn reset_map_keeps_com_and_swaps_legs(
        cx in -1.0f64..1.0, cy in -0.3f64..0.3, vx in -1.0f64..1.0, vy in -1.0f64..1.0,
        fx in -1.0f64..1.0, fy in -0.3f64..0.3,
    ) {
        let s = state([cx, cy], [vx, vy], [0.0, 0.1], [fx, fy, 0.0]);
        let r = reset_map(&s, [fx, fy]);
        prop_assert_eq!(r.com_pos, s.com_pos);
        prop_assert_eq!(r.com_vel, s.com_vel);
        prop_assert_eq!(r.stance_pos, [fx, fy]);
        prop_assert_eq!(r.stance_leg, Leg::Right);
        prop_assert_eq!(&r.swing_pos[..2], &[0.0, 0.1][..]);
        prop_assert_eq!(r.elapsed, 0.0);
        prop_assert_eq!(r.time, s.time);
    }

    #[test]
    fn swing_path_is_restart_consistent(
        fx in -0.5f64..0.0, fy in -0.3f64..0.3, tx in 0.0f64..0.5, ty in -0.3f64..0.3,
        a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, crossing in any::<bool>(),
    ) {
        let lateral = if crossing { (LATERAL_ONSET, 1.0) } else { (0.0, LATERAL_ONSET) };
        // re-anchoring at any intermediate phase reproduces the same path
        let mut s = [a, b, c];
        s.sort_by(f64::total_cmp);
        let from = [fx, fy, 0.0];
        let direct = swing_trajectory(from, [tx, ty], 0.08, 0.0, s[2], lateral);
        let mid = swing_trajectory(from, [tx, ty], 0.08, 0.0, s[1], lateral);
        let restarted = swing_trajectory(mid, [tx, ty], 0.08, s[1], s[2], lateral);
        for k in 0..3 {
            prop_assert!((direct[k] - restarted[k]).abs() < 1e-9, "{:?} vs {:?}", direct, restarted);
        }
        let end = swing_trajectory(from, [tx, ty], 0.08, 0.0, 1.0, lateral);
        prop_assert!((end[0] - tx).abs() < 1e-12 && (end[1] - ty).abs() < 1e-12 && end[2].abs() < 1e-12);
        prop_assert!(direct[2] >= 0.0);
    }
}
