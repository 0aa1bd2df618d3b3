//! Log-sum-exp smoothed robustness with reverse-mode gradients.
//!
//! `softmin_b(v) = -(1/b) ln sum exp(-b v_i)` never exceeds `min(v)` and is at
//! least `min(v) - ln(n)/b`; `softmax_b` mirrors this from above.

use super::eval::{pred_value, prepare, Node};
use super::formula::Formula;
use super::trace::Trace;
use super::StlError;

/// Shifted log-sum-exp soft minimum.
pub fn softmin(values: &[f64], beta: f64) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (-beta * (v - m)).exp()).sum();
    m - s.ln() / beta
}

/// Shifted log-sum-exp soft maximum.
pub fn softmax(values: &[f64], beta: f64) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (beta * (v - m)).exp()).sum();
    m + s.ln() / beta
}

/// Smoothed robustness value and its gradient with respect to every sample of
/// every channel. `gradient[c][k]` is the partial for channel `c` (trace order)
/// at sample `k`.
#[derive(Debug, Clone)]
pub struct SmoothRobustness {
    pub value: f64,
    pub gradient: Vec<Vec<f64>>,
}

impl SmoothRobustness {
    pub fn channel_gradient<'a>(&'a self, trace: &Trace, name: &str) -> Option<&'a [f64]> {
        trace.index_of(name).map(|i| self.gradient[i].as_slice())
    }
}

/// Forward values kept for the backward sweep.
struct Tape {
    values: Vec<f64>,
    children: Vec<Tape>,
}

fn forward(node: &Node, trace: &Trace, beta: f64) -> Tape {
    let n = node.valid_len(trace.len());
    match node {
        Node::Pred {
            terms,
            offset,
            scale,
        } => Tape {
            values: (0..n)
                .map(|k| pred_value(terms, *offset, *scale, trace, k))
                .collect(),
            children: Vec::new(),
        },
        Node::Not(c) => {
            let child = forward(c, trace, beta);
            Tape {
                values: child.values.iter().take(n).map(|v| -v).collect(),
                children: vec![child],
            }
        }
        Node::And(cs) | Node::Or(cs) => {
            let children: Vec<Tape> = cs.iter().map(|c| forward(c, trace, beta)).collect();
            let is_and = matches!(node, Node::And(_));
            let mut buf = Vec::with_capacity(children.len());
            let values = (0..n)
                .map(|k| {
                    buf.clear();
                    buf.extend(children.iter().map(|c| c.values[k]));
                    if is_and {
                        softmin(&buf, beta)
                    } else {
                        softmax(&buf, beta)
                    }
                })
                .collect();
            Tape { values, children }
        }
        Node::Always(a, b, c) | Node::Eventually(a, b, c) => {
            let child = forward(c, trace, beta);
            let is_min = matches!(node, Node::Always(..));
            let values = (0..n)
                .map(|k| {
                    let w = &child.values[k + a..=k + b];
                    if is_min {
                        softmin(w, beta)
                    } else {
                        softmax(w, beta)
                    }
                })
                .collect();
            Tape {
                values,
                children: vec![child],
            }
        }
        Node::Until(a, b, l, r) => {
            let lt = forward(l, trace, beta);
            let rt = forward(r, trace, beta);
            let mut inner = Vec::new();
            let mut set = Vec::new();
            let values = (0..n)
                .map(|k| {
                    inner.clear();
                    for kp in k + a..=k + b {
                        set.clear();
                        set.push(rt.values[kp]);
                        set.extend_from_slice(&lt.values[k..kp]);
                        inner.push(softmin(&set, beta));
                    }
                    softmax(&inner, beta)
                })
                .collect();
            Tape {
                values,
                children: vec![lt, rt],
            }
        }
    }
}

fn backward(node: &Node, tape: &Tape, adj: &[f64], beta: f64, grad: &mut [Vec<f64>]) {
    match node {
        Node::Pred { terms, scale, .. } => {
            for (k, &g) in adj.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for &(i, a) in terms {
                    grad[i][k] += g * a / scale;
                }
            }
        }
        Node::Not(c) => {
            let child = &tape.children[0];
            let mut cadj = vec![0.0; child.values.len()];
            for (k, &g) in adj.iter().enumerate() {
                cadj[k] = -g;
            }
            backward(c, child, &cadj, beta, grad);
        }
        Node::And(cs) | Node::Or(cs) => {
            let sign = if matches!(node, Node::And(_)) {
                -1.0
            } else {
                1.0
            };
            for (c, child) in cs.iter().zip(&tape.children) {
                let mut cadj = vec![0.0; child.values.len()];
                for (k, &g) in adj.iter().enumerate() {
                    if g != 0.0 {
                        let w = (sign * beta * (child.values[k] - tape.values[k])).exp();
                        cadj[k] = g * w;
                    }
                }
                backward(c, child, &cadj, beta, grad);
            }
        }
        Node::Always(a, b, c) | Node::Eventually(a, b, c) => {
            let sign = if matches!(node, Node::Always(..)) {
                -1.0
            } else {
                1.0
            };
            let child = &tape.children[0];
            let mut cadj = vec![0.0; child.values.len()];
            for (k, &g) in adj.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let v = tape.values[k];
                for j in k + a..=k + b {
                    cadj[j] += g * (sign * beta * (child.values[j] - v)).exp();
                }
            }
            backward(c, child, &cadj, beta, grad);
        }
        Node::Until(a, b, l, r) => {
            let (lt, rt) = (&tape.children[0], &tape.children[1]);
            let mut ladj = vec![0.0; lt.values.len()];
            let mut radj = vec![0.0; rt.values.len()];
            let mut set = Vec::new();
            for (k, &g) in adj.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let v = tape.values[k];
                for kp in k + a..=k + b {
                    set.clear();
                    set.push(rt.values[kp]);
                    set.extend_from_slice(&lt.values[k..kp]);
                    let u = softmin(&set, beta);
                    let gu = g * (beta * (u - v)).exp();
                    radj[kp] += gu * (-beta * (rt.values[kp] - u)).exp();
                    for j in k..kp {
                        ladj[j] += gu * (-beta * (lt.values[j] - u)).exp();
                    }
                }
            }
            backward(l, lt, &ladj, beta, grad);
            backward(r, rt, &radj, beta, grad);
        }
    }
}

/// Smoothed robustness of `f` at sample `k` with inverse temperature `beta`,
/// plus its gradient with respect to all trace samples.
pub fn smooth_robustness(
    f: &Formula,
    trace: &Trace,
    k: usize,
    beta: f64,
) -> Result<SmoothRobustness, StlError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(StlError::InvalidBeta(beta));
    }
    let node = prepare(f, trace, k)?;
    let tape = forward(&node, trace, beta);
    let mut adj = vec![0.0; tape.values.len()];
    adj[k] = 1.0;
    let mut gradient: Vec<Vec<f64>> = trace
        .channels()
        .iter()
        .map(|_| vec![0.0; trace.len()])
        .collect();
    backward(&node, &tape, &adj, beta, &mut gradient);
    Ok(SmoothRobustness {
        value: tape.values[k],
        gradient,
    })
}
