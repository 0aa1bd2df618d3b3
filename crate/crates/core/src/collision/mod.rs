//! Leg self-collision: a capsule oracle over reduced states and a learned
//! approximation of it.

mod mlp;

pub use mlp::{mlp_margin, train_mlp, Mlp, TrainConfig, TrainReport};

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Leg, ReducedState};

#[derive(Debug, Error)]
pub enum CollisionError {
    #[error("dataset must contain at least one sample")]
    EmptyDataset,
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("training diverged: validation loss {final_loss} above initial {initial_loss}")]
    Diverged { initial_loss: f64, final_loss: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn d_hip() -> f64 {
    0.18
}
fn d_radius() -> f64 {
    0.04
}
fn d_pelvis() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegGeometry {
    /// Lateral distance between the hip joints.
    #[serde(default = "d_hip")]
    pub hip_offset: f64,
    #[serde(default = "d_radius")]
    pub leg_radius: f64,
    #[serde(default = "d_pelvis")]
    pub pelvis_height: f64,
}

impl Default for LegGeometry {
    fn default() -> Self {
        Self {
            hip_offset: d_hip(),
            leg_radius: d_radius(),
            pelvis_height: d_pelvis(),
        }
    }
}

impl LegGeometry {
    pub fn validate(&self) -> Result<(), CollisionError> {
        if !(self.hip_offset > 0.0 && self.leg_radius > 0.0 && self.pelvis_height > 0.0) {
            return Err(CollisionError::InvalidGeometry(
                "hip offset, radius and pelvis height must be positive".into(),
            ));
        }
        Ok(())
    }
}

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn lerp(a: V3, d: V3, t: f64) -> V3 {
    [a[0] + d[0] * t, a[1] + d[1] * t, a[2] + d[2] * t]
}

/// Distance between segments `[p1, q1]` and `[p2, q2]`.
pub fn segment_distance(p1: V3, q1: V3, p2: V3, q2: V3) -> f64 {
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let a = dot(d1, d1);
    let e = dot(d2, d2);
    let f = dot(d2, r);
    let eps = 1e-14;
    let (s, t) = if a <= eps && e <= eps {
        (0.0, 0.0)
    } else if a <= eps {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = dot(d1, r);
        if e <= eps {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let mut s = if denom > eps * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    let diff = sub(lerp(p1, d1, s), lerp(p2, d2, t));
    dot(diff, diff).sqrt()
}

/// Signed clearance between two capsules (negative when they overlap).
pub fn capsule_pair_margin(a: (V3, V3, f64), b: (V3, V3, f64)) -> f64 {
    segment_distance(a.0, a.1, b.0, b.1) - a.2 - b.2
}

/// Leg segments (hip, foot) of the stance and swing legs.
pub fn leg_segments(state: &ReducedState, geom: &LegGeometry) -> [(V3, V3); 2] {
    let sign = state.stance_leg.sign();
    let half = 0.5 * geom.hip_offset;
    let hip = |s: f64| {
        [
            state.com_pos[0],
            state.com_pos[1] + s * half,
            geom.pelvis_height,
        ]
    };
    [
        (hip(sign), [state.stance_pos[0], state.stance_pos[1], 0.0]),
        (hip(-sign), state.swing_pos),
    ]
}

/// Ground-truth self-collision margin of the two legs in meters.
pub fn capsule_margin(state: &ReducedState, geom: &LegGeometry) -> f64 {
    let [st, sw] = leg_segments(state, geom);
    capsule_pair_margin((st.0, st.1, geom.leg_radius), (sw.0, sw.1, geom.leg_radius))
}

pub const FEATURE_NAMES: [&str; 6] = [
    "rel_x",
    "rel_y",
    "swing_dx",
    "swing_dy",
    "swing_z",
    "stance_sign",
];

/// Translation-invariant collision features of a state: CoM relative to the
/// stance foot, swing foot relative to the stance foot, and the stance sign.
pub fn features(state: &ReducedState) -> [f64; 6] {
    let rel = state.rel();
    [
        rel[0],
        rel[1],
        state.swing_pos[0] - state.stance_pos[0],
        state.swing_pos[1] - state.stance_pos[1],
        state.swing_pos[2],
        state.stance_leg.sign(),
    ]
}

/// Canonical state with the stance foot at the origin for a feature vector.
pub fn state_from_features(f: &[f64; 6]) -> ReducedState {
    ReducedState {
        com_pos: [f[0], f[1]],
        com_vel: [0.0, 0.0],
        swing_pos: [f[2], f[3], f[4]],
        stance_pos: [0.0, 0.0],
        stance_leg: if f[5] >= 0.0 { Leg::Left } else { Leg::Right },
        phase: 0.0,
        elapsed: 0.0,
        time: 0.0,
    }
}

/// Per-feature uniform sampling bounds (the stance sign is drawn from ±1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRanges {
    pub rel_x: (f64, f64),
    pub rel_y: (f64, f64),
    pub swing_dx: (f64, f64),
    pub swing_dy: (f64, f64),
    pub swing_z: (f64, f64),
}

impl Default for SampleRanges {
    fn default() -> Self {
        Self {
            rel_x: (-0.35, 0.35),
            rel_y: (-0.3, 0.3),
            swing_dx: (-0.7, 0.7),
            swing_dy: (-0.5, 0.5),
            swing_z: (0.0, 0.15),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: [f64; 6],
    pub margin: f64,
}

/// Fraction of samples drawn by rejection near the zero-margin boundary.
pub const BOUNDARY_FRACTION: f64 = 0.25;
/// Half-width of the boundary band in meters.
pub const BOUNDARY_BAND: f64 = 0.05;

fn draw(rng: &mut ChaCha8Rng, r: &SampleRanges) -> [f64; 6] {
    let mut u = |(lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let f = [
        u(r.rel_x),
        u(r.rel_y),
        u(r.swing_dx),
        u(r.swing_dy),
        u(r.swing_z),
        0.0,
    ];
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    // lateral features are drawn for a left stance and mirrored for a right one
    [f[0], sign * f[1], f[2], sign * f[3], f[4], sign]
}

/// Labeled dataset of `n` samples. The first `n - n/4` samples are uniform in
/// `ranges`, the rest are rejection-sampled within [`BOUNDARY_BAND`] of zero.
pub fn sample_dataset(
    n: usize,
    geom: &LegGeometry,
    ranges: &SampleRanges,
    seed: u64,
) -> Result<Vec<Sample>, CollisionError> {
    if n == 0 {
        return Err(CollisionError::EmptyDataset);
    }
    geom.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_boundary = (n as f64 * BOUNDARY_FRACTION).round() as usize;
    let mut out = Vec::with_capacity(n);
    let label = |f: &[f64; 6]| capsule_margin(&state_from_features(f), geom);
    while out.len() < n - n_boundary {
        let f = draw(&mut rng, ranges);
        out.push(Sample {
            margin: label(&f),
            features: f,
        });
    }
    let mut attempts = 0usize;
    while out.len() < n {
        let f = draw(&mut rng, ranges);
        let m = label(&f);
        attempts += 1;
        // give up on the band after a large number of misses rather than spin
        if m.abs() <= BOUNDARY_BAND || attempts > 1000 * n {
            out.push(Sample {
                features: f,
                margin: m,
            });
        }
    }
    Ok(out)
}

pub fn write_dataset_csv<W: Write>(data: &[Sample], writer: W) -> Result<(), CollisionError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
    header.push("margin");
    w.write_record(&header)?;
    for s in data {
        let row: Vec<String> = s
            .features
            .iter()
            .chain([&s.margin])
            .map(|v| format!("{v:?}"))
            .collect();
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(reader: R) -> Result<Vec<Sample>, CollisionError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize::<[f64; 7]>() {
        let v = rec?;
        out.push(Sample {
            features: [v[0], v[1], v[2], v[3], v[4], v[5]],
            margin: v[6],
        });
    }
    Ok(out)
}
