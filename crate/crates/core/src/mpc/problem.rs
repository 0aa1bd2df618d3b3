use std::sync::Arc;

use crate::collision::Mlp;
use crate::locomotion::FootBound;
use crate::model::{
    rollout_samples, Dual, Leg, ModelParams, PlanStep, Real, ReducedState, RolloutSample,
    BASE_CHANNELS,
};
use crate::stl::{robustness, smooth_robustness, softmin, Formula, Trace};

use super::{DecisionVector, MpcError, N_DECISION};

/// Scalar that can seed the decision variables and report their sensitivities.
pub(crate) trait Var: Real {
    fn var(v: f64, i: usize) -> Self;
    fn grad(&self) -> [f64; N_DECISION];
}

impl Var for f64 {
    fn var(v: f64, _: usize) -> Self {
        v
    }
    fn grad(&self) -> [f64; N_DECISION] {
        [0.0; N_DECISION]
    }
}

impl Var for Dual<N_DECISION> {
    fn var(v: f64, i: usize) -> Self {
        Dual::variable(v, i)
    }
    fn grad(&self) -> [f64; N_DECISION] {
        self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub rho: f64,
    pub control: f64,
    pub penalty: f64,
}

/// One receding-horizon problem: the measured state and everything needed to
/// score a three-step decision.
#[derive(Debug, Clone)]
pub struct NlpProblem {
    pub initial: ReducedState,
    /// Locomotion formula evaluated at the current sample and at each planned
    /// touchdown.
    pub spec: Formula,
    pub weights: Weights,
    pub net: Arc<Mlp>,
    pub bound: FootBound,
    /// Belt-frame foothold boxes at the nominal landing times.
    pub foothold_box: [[(f64, f64); 2]; 3],
    pub duration_bounds: [(f64, f64); 3],
    pub delta_col: f64,
    pub nominal: DecisionVector,
    pub beta: f64,
    pub params: ModelParams,
    pub apex: f64,
}

/// Objective terms at one decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub smooth_robustness: f64,
    pub control_cost: f64,
    pub penalty: f64,
    /// Largest `delta_col - mlp_margin` over the rollout samples, floored at 0.
    pub violation: f64,
}

pub(crate) struct Rolled {
    pub trace: Trace,
    /// Sensitivities per channel (trace order) per sample.
    pub sens: Vec<Vec<[f64; N_DECISION]>>,
    /// Samples actually simulated; later samples hold the last one.
    pub n_samples: usize,
    /// First sample of each planned step.
    pub step_starts: [usize; 3],
    pub features: Vec<[([f64; N_DECISION], f64); 5]>,
    pub stance_sign: Vec<f64>,
}

pub const RIEM_CHANNELS: [(&str, &str); 2] = [("riem_sag", "m^2/s^2"), ("riem_lat", "m^2/s^2")];

impl NlpProblem {
    pub fn horizon_steps(&self) -> usize {
        self.spec.horizon_steps(self.params.dt)
    }

    /// Projection onto the duration and foothold boxes.
    pub fn project(&self, z: &[f64; N_DECISION]) -> [f64; N_DECISION] {
        let mut out = *z;
        for j in 0..3 {
            for a in 0..2 {
                let (lo, hi) = self.foothold_box[j][a];
                out[2 * j + a] = z[2 * j + a].clamp(lo, hi);
            }
            let (lo, hi) = self.duration_bounds[j];
            out[6 + j] = z[6 + j].clamp(lo, hi);
        }
        out
    }

    pub(crate) fn roll<S: Var>(&self, z: &[f64; N_DECISION]) -> Result<Rolled, MpcError> {
        let v: Vec<S> = z.iter().enumerate().map(|(i, x)| S::var(*x, i)).collect();
        let plan: Vec<PlanStep<S>> = (0..3)
            .map(|j| PlanStep {
                foothold: [v[2 * j], v[2 * j + 1]],
                duration: v[6 + j],
                apex: self.apex,
            })
            .collect();
        let samples = rollout_samples(&self.initial, &plan, &self.params)?;
        Ok(self.tabulate(&samples))
    }

    fn tabulate<S: Var>(&self, samples: &[RolloutSample<S>]) -> Rolled {
        let n = samples.len();
        let w2 = self.params.omega().powi(2);
        let n_ch = BASE_CHANNELS.len() + RIEM_CHANNELS.len();
        let mut vals: Vec<Vec<f64>> = vec![Vec::with_capacity(n); n_ch];
        let mut sens: Vec<Vec<[f64; N_DECISION]>> = vec![Vec::with_capacity(n); n_ch];
        let mut features = Vec::with_capacity(n);
        let mut stance_sign = Vec::with_capacity(n);
        let mut step_starts = [0usize; 3];
        for (k, s) in samples.iter().enumerate() {
            if k > 0 && s.step != samples[k - 1].step && s.step < 3 {
                step_starts[s.step] = k;
            }
            let rel = [
                s.com_pos[0] - s.stance_pos[0],
                s.com_pos[1] - s.stance_pos[1],
            ];
            let row = [
                S::cst(s.time),
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
                S::cst(if s.stance_leg == Leg::Left { 1.0 } else { 0.0 }),
                s.com_vel[0].sq() - rel[0].sq().scale(w2),
                s.com_vel[1].sq() - rel[1].sq().scale(w2),
            ];
            for (c, x) in row.iter().enumerate() {
                vals[c].push(x.value());
                sens[c].push(x.grad());
            }
            let f = [
                rel[0],
                rel[1],
                s.swing_pos[0] - s.stance_pos[0],
                s.swing_pos[1] - s.stance_pos[1],
                s.swing_pos[2],
            ];
            features.push(f.map(|x| (x.grad(), x.value())));
            stance_sign.push(s.stance_leg.sign());
        }
        let mut trace = Trace::new(self.params.dt, samples[0].time).expect("positive dt");
        for ((name, units), col) in BASE_CHANNELS.iter().chain(&RIEM_CHANNELS).zip(vals) {
            trace
                .push_channel(*name, *units, col)
                .expect("uniform channel lengths");
        }
        let needed = step_starts[2] + self.horizon_steps() + 1;
        trace.extend_hold(needed.max(self.horizon_steps() + 1));
        Rolled {
            trace,
            sens,
            n_samples: n,
            step_starts,
            features,
            stance_sign,
        }
    }

    /// Objective and, when `with_grad`, its gradient.
    pub(crate) fn evaluate_impl<S: Var>(
        &self,
        z: &[f64; N_DECISION],
        with_grad: bool,
    ) -> Result<(Evaluation, [f64; N_DECISION]), MpcError> {
        let rolled = self.roll::<S>(z)?;
        let mut grad = [0.0; N_DECISION];

        // robustness at the two planned touchdowns, combined by a soft minimum
        let mut parts = Vec::with_capacity(2);
        for (k, last, window) in self.step_windows(&rolled)? {
            parts.push((
                k,
                last,
                smooth_robustness(&self.spec, &window, 0, self.beta)?,
            ));
        }
        let values: Vec<f64> = parts.iter().map(|(_, _, s)| s.value).collect();
        let rho = softmin(&values, self.beta);
        if with_grad {
            for (k0, last, sr) in &parts {
                let w = (-self.beta * (sr.value - rho)).exp() * -self.weights.rho;
                for (c, gc) in sr.gradient.iter().enumerate() {
                    for (k, g) in gc.iter().enumerate() {
                        if *g == 0.0 {
                            continue;
                        }
                        let idx = (k0 + k).min(*last);
                        for (gi, si) in grad.iter_mut().zip(&rolled.sens[c][idx]) {
                            *gi += w * g * si;
                        }
                    }
                }
            }
        }

        let mut control = 0.0;
        let nominal = self.nominal.to_array();
        for i in 0..N_DECISION {
            let d = z[i] - nominal[i];
            control += d * d;
            grad[i] += self.weights.control * 2.0 * d;
        }

        let mut penalty = 0.0;
        let mut violation: f64 = 0.0;
        for (f, sign) in rolled.features.iter().zip(&rolled.stance_sign) {
            let x = [f[0].1, f[1].1, f[2].1, f[3].1, f[4].1, *sign];
            let m = self.net.forward(&x);
            let gap = self.delta_col - m;
            if gap <= 0.0 {
                continue;
            }
            violation = violation.max(gap);
            penalty += gap * gap;
            if with_grad {
                let (_, df) = self.net.forward_with_grad(&x);
                let coef = -2.0 * gap * self.weights.penalty;
                for (fi, dfi) in f.iter().zip(&df) {
                    for (gi, si) in grad.iter_mut().zip(&fi.0) {
                        *gi += coef * dfi * si;
                    }
                }
            }
        }
        let objective = -self.weights.rho * rho
            + self.weights.control * control
            + self.weights.penalty * penalty;
        Ok((
            Evaluation {
                objective,
                smooth_robustness: rho,
                control_cost: control,
                penalty,
                violation,
            },
            grad,
        ))
    }

    /// Trace seen by the formula at each planned touchdown: the samples of
    /// that step alone, held at its last sample out to the formula horizon, so
    /// the step must reach its own keyframe. Returns (first sample, last real
    /// sample, window) for planned steps two and three.
    pub(crate) fn step_windows(
        &self,
        rolled: &Rolled,
    ) -> Result<Vec<(usize, usize, Trace)>, MpcError> {
        let h = self.horizon_steps();
        let s = rolled.step_starts;
        [(s[1], s[2]), (s[2], rolled.n_samples)]
            .into_iter()
            .map(|(k, end)| {
                let stop = end.min(k + h + 1).max(k + 1);
                let mut w = rolled.trace.slice(k, stop)?;
                w.extend_hold(h + 1);
                Ok((k, stop - 1, w))
            })
            .collect()
    }

    pub fn evaluate(&self, z: &[f64; N_DECISION]) -> Result<Evaluation, MpcError> {
        Ok(self.evaluate_impl::<f64>(z, false)?.0)
    }

    pub fn evaluate_with_grad(
        &self,
        z: &[f64; N_DECISION],
    ) -> Result<(Evaluation, [f64; N_DECISION]), MpcError> {
        self.evaluate_impl::<Dual<N_DECISION>>(z, true)
    }

    /// Rollout trace (with orbital-energy channels, held at its last sample to
    /// cover the formula horizon) and the sample index of each planned step
    /// start.
    pub fn trace(&self, z: &[f64; N_DECISION]) -> Result<(Trace, [usize; 3]), MpcError> {
        let r = self.roll::<f64>(z)?;
        Ok((r.trace, r.step_starts))
    }

    /// Exact robustness at the current sample (on the whole trace) and at the
    /// two planned touchdowns (on their step windows), with the trace.
    pub fn certify(
        &self,
        z: &[f64; N_DECISION],
    ) -> Result<([f64; 3], Trace, [usize; 3]), MpcError> {
        let r = self.roll::<f64>(z)?;
        let mut rho = [robustness(&self.spec, &r.trace, 0)?.value, 0.0, 0.0];
        for (j, (_, _, w)) in self.step_windows(&r)?.into_iter().enumerate() {
            rho[j + 1] = robustness(&self.spec, &w, 0)?.value;
        }
        Ok((rho, r.trace, r.step_starts))
    }
}
