//! Reduced-order bipedal push recovery driven by signal temporal logic.
//!
//! The crate is layered bottom-up:
//!
//! * [`stl`]: formulas, parsing, Boolean/robust/smooth semantics.
//! * [`model`]: linear inverted pendulum flow, swing-foot motion and the
//!   touchdown reset map, rolled out into STL traces.
//! * [`locomotion`]: the locomotion formula (foot bounds, keyframe and
//!   orbital-energy region) and its distance measure.
//! * [`collision`]: capsule leg self-collision oracle and the small
//!   perceptron trained to imitate it.
//! * [`mpc`]: the three-step shooting planner that maximizes smoothed
//!   robustness under collision penalties.
//! * [`harness`]: closed-loop episodes, the capture-point baseline and the
//!   push-force sweep.

pub mod collision;
pub mod config;
pub mod harness;
pub mod locomotion;
pub mod model;
pub mod mpc;
pub mod stl;
