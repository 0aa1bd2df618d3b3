//! Recursive-descent parser for the textual formula syntax.
//!
//! ```text
//! formula := conj ('|' conj)*
//! conj    := until ('&' until)*
//! until   := unary ('U' '[' num ',' num ']' until)?
//! unary   := '!' unary | 'G' interval unary | 'F' interval unary | '(' formula ')' | atom
//! atom    := linexpr (('>=' | '<=') linexpr)? ('@' num)?
//! linexpr := ('+'|'-')? term (('+'|'-') term)*
//! term    := num '*' ident | num | ident
//! ```
//!
//! A bare linear expression `e` means `e >= 0`. `G`, `F` and `U` are operators
//! only when directly followed by `[`; otherwise they are ordinary identifiers.

use super::formula::{Formula, Interval, Predicate};
use super::StlError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Amp,
    Pipe,
    Bang,
    Plus,
    Minus,
    Star,
    Ge,
    Le,
    At,
    Always,
    Eventually,
    Until,
    Ident(String),
    Num(f64),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, StlError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, message: String| StlError::Syntax { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '&' => Some(Tok::Amp),
            '|' => Some(Tok::Pipe),
            '!' => Some(Tok::Bang),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '@' => Some(Tok::At),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            });
            i += 1;
            col += 1;
            continue;
        }
        if c == '>' || c == '<' {
            if chars.get(i + 1) != Some(&'=') {
                return Err(err(tl, tc, format!("expected `{c}=`")));
            }
            let tok = if c == '>' { Tok::Ge } else { Tok::Le };
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            });
            i += 2;
            col += 2;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit: String = chars[start..i].iter().collect();
            let value: f64 = lit
                .parse()
                .map_err(|_| err(tl, tc, format!("invalid number `{lit}`")))?;
            col += i - start;
            out.push(Token {
                tok: Tok::Num(value),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let ident: String = chars[start..i].iter().collect();
            col += i - start;
            // operator keywords only when an interval follows
            let mut j = i;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            let bracket = chars.get(j) == Some(&'[');
            let tok = match ident.as_str() {
                "G" if bracket => Tok::Always,
                "F" if bracket => Tok::Eventually,
                "U" if bracket => Tok::Until,
                _ => Tok::Ident(ident),
            };
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            });
            continue;
        }
        return Err(err(tl, tc, format!("unexpected character `{c}`")));
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> StlError {
        let t = &self.toks[self.pos];
        StlError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), StlError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn formula(&mut self) -> Result<Formula, StlError> {
        let mut items = vec![self.conj()?];
        while *self.peek() == Tok::Pipe {
            self.next();
            items.push(self.conj()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Formula::Or(items)
        })
    }

    fn conj(&mut self) -> Result<Formula, StlError> {
        let mut items = vec![self.until()?];
        while *self.peek() == Tok::Amp {
            self.next();
            items.push(self.until()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Formula::And(items)
        })
    }

    fn until(&mut self) -> Result<Formula, StlError> {
        let left = self.unary()?;
        if *self.peek() == Tok::Until {
            self.next();
            let iv = self.interval()?;
            let right = self.until()?;
            return Ok(Formula::Until(iv, Box::new(left), Box::new(right)));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula, StlError> {
        match self.peek() {
            Tok::Bang => {
                self.next();
                Ok(Formula::Not(Box::new(self.unary()?)))
            }
            Tok::Always => {
                self.next();
                let iv = self.interval()?;
                Ok(Formula::Always(iv, Box::new(self.unary()?)))
            }
            Tok::Eventually => {
                self.next();
                let iv = self.interval()?;
                Ok(Formula::Eventually(iv, Box::new(self.unary()?)))
            }
            Tok::LParen => {
                self.next();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            _ => self.atom(),
        }
    }

    fn interval(&mut self) -> Result<Interval, StlError> {
        self.expect(Tok::LBracket, "`[`")?;
        let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
        let lo = self.number()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = self.number()?;
        self.expect(Tok::RBracket, "`]`")?;
        Interval::new(lo, hi).map_err(|_| StlError::Syntax {
            line,
            col,
            message: format!("malformed interval [{lo},{hi}]"),
        })
    }

    fn number(&mut self) -> Result<f64, StlError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.next();
                Ok(v)
            }
            _ => Err(self.error("expected number")),
        }
    }

    fn atom(&mut self) -> Result<Formula, StlError> {
        let (mut terms, mut offset) = self.linexpr()?;
        match self.peek() {
            Tok::Ge | Tok::Le => {
                let ge = *self.peek() == Tok::Ge;
                self.next();
                let (rterms, roffset) = self.linexpr()?;
                for (name, a) in rterms {
                    add_term(&mut terms, name, -a);
                }
                offset -= roffset;
                if !ge {
                    for (_, a) in terms.iter_mut() {
                        *a = -*a;
                    }
                    offset = -offset;
                }
            }
            _ => {}
        }
        let mut scale = 1.0;
        if *self.peek() == Tok::At {
            self.next();
            scale = self.number()?;
            if !(scale > 0.0) {
                return Err(self.error("predicate scale must be positive"));
            }
        }
        Ok(Formula::Predicate(Predicate {
            terms,
            offset,
            scale,
        }))
    }

    fn linexpr(&mut self) -> Result<(Vec<(String, f64)>, f64), StlError> {
        let mut terms = Vec::new();
        let mut offset = 0.0;
        let mut sign = match self.peek() {
            Tok::Minus => {
                self.next();
                -1.0
            }
            Tok::Plus => {
                self.next();
                1.0
            }
            _ => 1.0,
        };
        loop {
            match self.peek().clone() {
                Tok::Num(v) => {
                    self.next();
                    if *self.peek() == Tok::Star {
                        self.next();
                        match self.peek().clone() {
                            Tok::Ident(name) => {
                                self.next();
                                add_term(&mut terms, name, sign * v);
                            }
                            _ => return Err(self.error("expected channel name after `*`")),
                        }
                    } else {
                        offset += sign * v;
                    }
                }
                Tok::Ident(name) => {
                    self.next();
                    add_term(&mut terms, name, sign);
                }
                _ => return Err(self.error("expected number or channel name")),
            }
            sign = match self.peek() {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => break,
            };
            self.next();
        }
        Ok((terms, offset))
    }
}

fn add_term(terms: &mut Vec<(String, f64)>, name: String, a: f64) {
    match terms.iter_mut().find(|(n, _)| *n == name) {
        Some((_, c)) => *c += a,
        None => terms.push((name, a)),
    }
}

/// Parses formula text without checking channel names.
pub fn parse(text: &str) -> Result<Formula, StlError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(f)
}

/// Parses formula text and checks every referenced channel is in `channels`.
pub fn parse_formula<S: AsRef<str>>(text: &str, channels: &[S]) -> Result<Formula, StlError> {
    let f = parse(text)?;
    for name in f.channels() {
        if !channels.iter().any(|c| c.as_ref() == name) {
            return Err(StlError::UnknownChannel(name));
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ge(name: &str, c: f64) -> Formula {
        Formula::Predicate(Predicate::ge(name, c))
    }

    #[test]
    fn always_atom() {
        let f = parse_formula("G[0,2](x >= 0)", &["x"]).unwrap();
        assert_eq!(f, Formula::always(0.0, 2.0, ge("x", 0.0)));
    }

    #[test]
    fn locomotion_shape() {
        let f = parse("(G[0,10] foot_in) & F[0,3](kf & riem)").unwrap();
        let expected = Formula::And(vec![
            Formula::always(0.0, 10.0, ge("foot_in", 0.0)),
            Formula::eventually(0.0, 3.0, Formula::And(vec![ge("kf", 0.0), ge("riem", 0.0)])),
        ]);
        assert_eq!(f, expected);
    }

    #[test]
    fn malformed_interval() {
        match parse("G[2,1](x>=0)") {
            Err(StlError::Syntax { line, col, message }) => {
                assert_eq!((line, col), (1, 3));
                assert!(message.contains("interval"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_channel() {
        assert!(matches!(
            parse_formula("G[0,1](y >= 0)", &["x"]),
            Err(StlError::UnknownChannel(c)) if c == "y"
        ));
    }

    #[test]
    fn syntax_error_position() {
        match parse("x >= 0 &\n  & y >= 1") {
            Err(StlError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("x > 0").is_err());
        assert!(parse("(x >= 0").is_err());
    }

    #[test]
    fn linear_expressions() {
        let f = parse("2*x - y + 1 <= 3 - z").unwrap();
        // 3 - z - 2x + y - 1 >= 0
        let Formula::Predicate(p) = f else { panic!() };
        assert_eq!(
            p.terms,
            vec![("x".into(), -2.0), ("y".into(), 1.0), ("z".into(), -1.0)]
        );
        assert_eq!(p.offset, 2.0);
    }

    #[test]
    fn until_and_not() {
        let f = parse("!a >= 1 U[0,2] b >= 0").unwrap();
        assert_eq!(
            f,
            Formula::until(0.0, 2.0, Formula::not(ge("a", 1.0)), ge("b", 0.0))
        );
    }

    #[test]
    fn keyword_letters_as_channels() {
        let f = parse("G >= 1 & F[0,1](U >= 0)").unwrap();
        assert_eq!(
            f,
            Formula::And(vec![
                ge("G", 1.0),
                Formula::eventually(0.0, 1.0, ge("U", 0.0))
            ])
        );
    }

    #[test]
    fn scale_annotation() {
        let f = parse("x <= 0.5 @ 0.25").unwrap();
        assert_eq!(
            f,
            Formula::Predicate(Predicate::le("x", 0.5).with_scale(0.25))
        );
        assert!(parse("x >= 0 @ 0").is_err());
    }
}
