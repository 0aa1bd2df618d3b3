//! Discrete-time Boolean and quantitative semantics.
//!
//! Every node is evaluated as a signal over the sample indices where it is
//! defined, i.e. `0..len - horizon(node)`. Windows are mapped to sample
//! offsets with `round(t / dt)`.

use serde::{Deserialize, Serialize};

use super::formula::{Formula, Predicate};
use super::trace::Trace;
use super::StlError;

/// Robustness value of a formula at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub value: f64,
    pub at_index: usize,
}

/// Formula with channel names resolved to trace column indices and windows
/// resolved to sample offsets.
#[derive(Debug, Clone)]
pub(crate) enum Node {
    Pred {
        terms: Vec<(usize, f64)>,
        offset: f64,
        scale: f64,
    },
    Not(Box<Node>),
    And(Vec<Node>),
    Or(Vec<Node>),
    Always(usize, usize, Box<Node>),
    Eventually(usize, usize, Box<Node>),
    Until(usize, usize, Box<Node>, Box<Node>),
}

impl Node {
    pub(crate) fn compile(f: &Formula, trace: &Trace) -> Result<Node, StlError> {
        let dt = trace.dt();
        Ok(match f {
            Formula::Predicate(p) => compile_pred(p, trace)?,
            Formula::Not(c) => Node::Not(Box::new(Node::compile(c, trace)?)),
            Formula::And(cs) | Formula::Or(cs) => {
                if cs.is_empty() {
                    return Err(StlError::InvalidFormula(
                        "empty conjunction or disjunction".into(),
                    ));
                }
                let nodes = cs
                    .iter()
                    .map(|c| Node::compile(c, trace))
                    .collect::<Result<Vec<_>, _>>()?;
                if matches!(f, Formula::And(_)) {
                    Node::And(nodes)
                } else {
                    Node::Or(nodes)
                }
            }
            Formula::Always(iv, c) | Formula::Eventually(iv, c) => {
                iv.validate()?;
                let (a, b) = iv.to_steps(dt);
                let child = Box::new(Node::compile(c, trace)?);
                if matches!(f, Formula::Always(..)) {
                    Node::Always(a, b, child)
                } else {
                    Node::Eventually(a, b, child)
                }
            }
            Formula::Until(iv, l, r) => {
                iv.validate()?;
                let (a, b) = iv.to_steps(dt);
                Node::Until(
                    a,
                    b,
                    Box::new(Node::compile(l, trace)?),
                    Box::new(Node::compile(r, trace)?),
                )
            }
        })
    }

    pub(crate) fn horizon(&self) -> usize {
        match self {
            Node::Pred { .. } => 0,
            Node::Not(c) => c.horizon(),
            Node::And(cs) | Node::Or(cs) => cs.iter().map(Node::horizon).max().unwrap_or(0),
            Node::Always(_, b, c) | Node::Eventually(_, b, c) => b + c.horizon(),
            Node::Until(_, b, l, r) => b + l.horizon().max(r.horizon()),
        }
    }

    /// Number of indices at which this node is defined on a trace of `n` samples.
    pub(crate) fn valid_len(&self, n: usize) -> usize {
        n.saturating_sub(self.horizon())
    }
}

fn compile_pred(p: &Predicate, trace: &Trace) -> Result<Node, StlError> {
    let terms = p
        .terms
        .iter()
        .map(|(name, a)| {
            trace
                .index_of(name)
                .map(|i| (i, *a))
                .ok_or_else(|| StlError::UnknownChannel(name.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Node::Pred {
        terms,
        offset: p.offset,
        scale: p.scale,
    })
}

pub(crate) fn pred_value(
    terms: &[(usize, f64)],
    offset: f64,
    scale: f64,
    trace: &Trace,
    k: usize,
) -> f64 {
    let ch = trace.channels();
    let mut acc = offset;
    for &(i, a) in terms {
        acc += a * ch[i].samples[k];
    }
    acc / scale
}

pub(crate) fn prepare(f: &Formula, trace: &Trace, k: usize) -> Result<Node, StlError> {
    let node = Node::compile(f, trace)?;
    let n = trace.len();
    if k >= node.valid_len(n) {
        return Err(StlError::HorizonOverflow {
            index: k,
            needed: k + node.horizon() + 1,
            available: n,
        });
    }
    Ok(node)
}

fn robust_signal(node: &Node, trace: &Trace) -> Vec<f64> {
    let n = node.valid_len(trace.len());
    match node {
        Node::Pred {
            terms,
            offset,
            scale,
        } => (0..n)
            .map(|k| pred_value(terms, *offset, *scale, trace, k))
            .collect(),
        Node::Not(c) => robust_signal(c, trace)
            .into_iter()
            .take(n)
            .map(|v| -v)
            .collect(),
        Node::And(cs) | Node::Or(cs) => {
            let is_and = matches!(node, Node::And(_));
            let init = if is_and {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            let mut out = vec![init; n];
            for c in cs {
                let s = robust_signal(c, trace);
                for (o, v) in out.iter_mut().zip(&s) {
                    *o = if is_and { o.min(*v) } else { o.max(*v) };
                }
            }
            out
        }
        Node::Always(a, b, c) | Node::Eventually(a, b, c) => {
            let s = robust_signal(c, trace);
            let is_min = matches!(node, Node::Always(..));
            (0..n)
                .map(|k| {
                    let w = s[k + a..=k + b].iter().copied();
                    if is_min {
                        w.fold(f64::INFINITY, f64::min)
                    } else {
                        w.fold(f64::NEG_INFINITY, f64::max)
                    }
                })
                .collect()
        }
        Node::Until(a, b, l, r) => {
            let ls = robust_signal(l, trace);
            let rs = robust_signal(r, trace);
            (0..n)
                .map(|k| {
                    let mut best = f64::NEG_INFINITY;
                    let mut left_min = f64::INFINITY;
                    for kp in k..=k + b {
                        if kp >= k + a {
                            best = best.max(rs[kp].min(left_min));
                        }
                        left_min = left_min.min(ls[kp]);
                    }
                    best
                })
                .collect()
        }
    }
}

fn bool_signal(node: &Node, trace: &Trace) -> Vec<bool> {
    let n = node.valid_len(trace.len());
    match node {
        Node::Pred {
            terms,
            offset,
            scale,
        } => (0..n)
            .map(|k| pred_value(terms, *offset, *scale, trace, k) >= 0.0)
            .collect(),
        Node::Not(c) => bool_signal(c, trace)
            .into_iter()
            .take(n)
            .map(|v| !v)
            .collect(),
        Node::And(cs) | Node::Or(cs) => {
            let is_and = matches!(node, Node::And(_));
            let mut out = vec![is_and; n];
            for c in cs {
                let s = bool_signal(c, trace);
                for (o, v) in out.iter_mut().zip(&s) {
                    *o = if is_and { *o && *v } else { *o || *v };
                }
            }
            out
        }
        Node::Always(a, b, c) => {
            let s = bool_signal(c, trace);
            (0..n)
                .map(|k| s[k + a..=k + b].iter().all(|&v| v))
                .collect()
        }
        Node::Eventually(a, b, c) => {
            let s = bool_signal(c, trace);
            (0..n)
                .map(|k| s[k + a..=k + b].iter().any(|&v| v))
                .collect()
        }
        Node::Until(a, b, l, r) => {
            let ls = bool_signal(l, trace);
            let rs = bool_signal(r, trace);
            (0..n)
                .map(|k| (k + a..=k + b).any(|kp| rs[kp] && ls[k..kp].iter().all(|&v| v)))
                .collect()
        }
    }
}

/// Boolean satisfaction `(y, k) |= f`.
pub fn satisfies(f: &Formula, trace: &Trace, k: usize) -> Result<bool, StlError> {
    let node = prepare(f, trace, k)?;
    Ok(bool_signal(&node, trace)[k])
}

/// Quantitative robustness of `f` on `trace` at sample `k`.
pub fn robustness(f: &Formula, trace: &Trace, k: usize) -> Result<Robustness, StlError> {
    let node = prepare(f, trace, k)?;
    Ok(Robustness {
        value: robust_signal(&node, trace)[k],
        at_index: k,
    })
}

/// Robustness signal for every index at which `f` is defined on `trace`.
pub fn robustness_signal(f: &Formula, trace: &Trace) -> Result<Vec<f64>, StlError> {
    let node = Node::compile(f, trace)?;
    Ok(robust_signal(&node, trace))
}
