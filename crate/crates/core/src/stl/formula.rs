use std::fmt;

use serde::{Deserialize, Serialize};

use super::StlError;

/// Closed time window `[lo, hi]` in seconds, relative to the evaluation instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, StlError> {
        let iv = Self { lo, hi };
        iv.validate()?;
        Ok(iv)
    }

    pub fn validate(&self) -> Result<(), StlError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo >= 0.0 && self.lo <= self.hi) {
            return Err(StlError::MalformedInterval {
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    /// Sample offsets covered by the window at sampling period `dt`.
    pub fn to_steps(&self, dt: f64) -> (usize, usize) {
        (
            (self.lo / dt).round() as usize,
            (self.hi / dt).round() as usize,
        )
    }
}

/// Affine atom `(sum_i a_i * y_i + offset) / scale >= 0`.
///
/// `scale` is a positive normalizer that keeps atoms of different physical
/// units at comparable magnitudes inside min/max nodes. It does not change
/// the Boolean meaning of the atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub terms: Vec<(String, f64)>,
    pub offset: f64,
    pub scale: f64,
}

impl Predicate {
    /// `channel >= threshold`
    pub fn ge(channel: impl Into<String>, threshold: f64) -> Self {
        Self {
            terms: vec![(channel.into(), 1.0)],
            offset: -threshold,
            scale: 1.0,
        }
    }

    /// `channel <= threshold`
    pub fn le(channel: impl Into<String>, threshold: f64) -> Self {
        Self {
            terms: vec![(channel.into(), -1.0)],
            offset: threshold,
            scale: 1.0,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn channels(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|(c, _)| c.as_str())
    }
}

/// Signal temporal logic formula over named trace channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    Predicate(Predicate),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Always(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn pred(p: Predicate) -> Self {
        Formula::Predicate(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn always(lo: f64, hi: f64, f: Formula) -> Self {
        Formula::Always(Interval { lo, hi }, Box::new(f))
    }

    pub fn eventually(lo: f64, hi: f64, f: Formula) -> Self {
        Formula::Eventually(Interval { lo, hi }, Box::new(f))
    }

    pub fn until(lo: f64, hi: f64, left: Formula, right: Formula) -> Self {
        Formula::Until(Interval { lo, hi }, Box::new(left), Box::new(right))
    }

    /// Checks structural invariants: well-formed intervals, non-empty
    /// conjunctions/disjunctions and positive finite predicate scales.
    pub fn validate(&self) -> Result<(), StlError> {
        match self {
            Formula::Predicate(p) => {
                if !(p.scale > 0.0 && p.scale.is_finite()) {
                    return Err(StlError::InvalidFormula(format!(
                        "predicate scale must be positive, got {}",
                        p.scale
                    )));
                }
                if !p.offset.is_finite() || p.terms.iter().any(|(_, a)| !a.is_finite()) {
                    return Err(StlError::InvalidFormula(
                        "non-finite predicate coefficient".into(),
                    ));
                }
                Ok(())
            }
            Formula::Not(f) => f.validate(),
            Formula::And(fs) | Formula::Or(fs) => {
                if fs.is_empty() {
                    return Err(StlError::InvalidFormula(
                        "empty conjunction or disjunction".into(),
                    ));
                }
                fs.iter().try_for_each(Formula::validate)
            }
            Formula::Always(iv, f) | Formula::Eventually(iv, f) => {
                iv.validate()?;
                f.validate()
            }
            Formula::Until(iv, l, r) => {
                iv.validate()?;
                l.validate()?;
                r.validate()
            }
        }
    }

    /// All channel names referenced by predicates, in first-use order.
    pub fn channels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.visit_predicates(&mut |p| {
            for c in p.channels() {
                if !out.iter().any(|o| o == c) {
                    out.push(c.to_string());
                }
            }
        });
        out
    }

    pub fn visit_predicates<'a>(&'a self, f: &mut impl FnMut(&'a Predicate)) {
        match self {
            Formula::Predicate(p) => f(p),
            Formula::Not(c) | Formula::Always(_, c) | Formula::Eventually(_, c) => {
                c.visit_predicates(f)
            }
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| c.visit_predicates(f)),
            Formula::Until(_, l, r) => {
                l.visit_predicates(f);
                r.visit_predicates(f);
            }
        }
    }

    /// Number of samples beyond the evaluation index the formula reads.
    pub fn horizon_steps(&self, dt: f64) -> usize {
        match self {
            Formula::Predicate(_) => 0,
            Formula::Not(f) => f.horizon_steps(dt),
            Formula::And(fs) | Formula::Or(fs) => {
                fs.iter().map(|f| f.horizon_steps(dt)).max().unwrap_or(0)
            }
            Formula::Always(iv, f) | Formula::Eventually(iv, f) => {
                iv.to_steps(dt).1 + f.horizon_steps(dt)
            }
            Formula::Until(iv, l, r) => {
                iv.to_steps(dt).1 + l.horizon_steps(dt).max(r.horizon_steps(dt))
            }
        }
    }

    /// Nesting depth counting only min/max nodes with more than one operand.
    /// Together with [`Formula::max_arity`] this bounds the log-sum-exp
    /// smoothing error by `depth * ln(arity) / beta`.
    pub fn smooth_depth(&self, dt: f64) -> usize {
        match self {
            Formula::Predicate(_) => 0,
            Formula::Not(f) => f.smooth_depth(dt),
            Formula::And(fs) | Formula::Or(fs) => {
                let inner = fs.iter().map(|f| f.smooth_depth(dt)).max().unwrap_or(0);
                inner + usize::from(fs.len() > 1)
            }
            Formula::Always(iv, f) | Formula::Eventually(iv, f) => {
                let (a, b) = iv.to_steps(dt);
                f.smooth_depth(dt) + usize::from(b > a)
            }
            Formula::Until(iv, l, r) => {
                let (a, b) = iv.to_steps(dt);
                // outer max over the window, inner min over right + left prefix
                l.smooth_depth(dt).max(r.smooth_depth(dt)) + usize::from(b > a) + usize::from(b > 0)
            }
        }
    }

    /// Largest operand count of any min/max node, windows included.
    pub fn max_arity(&self, dt: f64) -> usize {
        match self {
            Formula::Predicate(_) => 1,
            Formula::Not(f) => f.max_arity(dt),
            Formula::And(fs) | Formula::Or(fs) => fs
                .iter()
                .map(|f| f.max_arity(dt))
                .max()
                .unwrap_or(1)
                .max(fs.len()),
            Formula::Always(iv, f) | Formula::Eventually(iv, f) => {
                let (a, b) = iv.to_steps(dt);
                f.max_arity(dt).max(b - a + 1)
            }
            Formula::Until(iv, l, r) => {
                let (a, b) = iv.to_steps(dt);
                l.max_arity(dt)
                    .max(r.max_arity(dt))
                    .max(b - a + 1)
                    .max(b + 1)
            }
        }
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    // Display for f64 is shortest round-trip and never uses exponents.
    write!(f, "{x}")
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            f.write_str("0")?;
        }
        for (i, (name, a)) in self.terms.iter().enumerate() {
            let (neg, mag) = if a.is_sign_negative() {
                (true, -a)
            } else {
                (false, *a)
            };
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if mag != 1.0 {
                write_number(f, mag)?;
                f.write_str("*")?;
            }
            f.write_str(name)?;
        }
        f.write_str(" >= ")?;
        write_number(f, -self.offset)?;
        if self.scale != 1.0 {
            f.write_str(" @ ")?;
            write_number(f, self.scale)?;
        }
        Ok(())
    }
}

fn write_interval(f: &mut fmt::Formatter<'_>, op: &str, iv: &Interval) -> fmt::Result {
    write!(f, "{op}[")?;
    write_number(f, iv.lo)?;
    f.write_str(",")?;
    write_number(f, iv.hi)?;
    f.write_str("]")
}

/// Pretty-printer whose output parses back to an identical tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Predicate(p) => write!(f, "{p}"),
            Formula::Not(c) => write!(f, "!({c})"),
            Formula::And(cs) | Formula::Or(cs) => {
                let sep = if matches!(self, Formula::And(_)) {
                    " & "
                } else {
                    " | "
                };
                f.write_str("(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "({c})")?;
                }
                f.write_str(")")
            }
            Formula::Always(iv, c) => {
                write_interval(f, "G", iv)?;
                write!(f, "({c})")
            }
            Formula::Eventually(iv, c) => {
                write_interval(f, "F", iv)?;
                write!(f, "({c})")
            }
            Formula::Until(iv, l, r) => {
                write!(f, "(({l}) ")?;
                write_interval(f, "U", iv)?;
                write!(f, " ({r}))")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_validation() {
        assert!(Interval::new(0.0, 2.0).is_ok());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(-1.0, 1.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn horizon_and_depth() {
        let f = Formula::always(
            0.0,
            2.0,
            Formula::eventually(1.0, 3.0, Formula::pred(Predicate::ge("x", 0.0))),
        );
        assert_eq!(f.horizon_steps(1.0), 5);
        assert_eq!(f.smooth_depth(1.0), 2);
        assert_eq!(f.max_arity(1.0), 3);
    }

    #[test]
    fn printing() {
        let p = Predicate {
            terms: vec![("x".into(), 1.0), ("y".into(), -2.5)],
            offset: -0.5,
            scale: 1.0,
        };
        assert_eq!(p.to_string(), "x - 2.5*y >= 0.5");
        let f = Formula::always(0.0, 2.0, Formula::pred(Predicate::ge("x", 0.0)));
        assert_eq!(f.to_string(), "G[0,2](x >= 0)");
        assert_eq!(
            Predicate::le("z", 1.0).with_scale(0.25).to_string(),
            "-z >= -1 @ 0.25"
        );
    }
}
