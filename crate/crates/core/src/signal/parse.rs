//! Parser for the signal expression grammar.
//!
//! ```text
//! signal    := component { ';' component }
//! component := [sign] term { sign term }
//! term      := factor { '*' factor }
//! factor    := '-' factor | number | 't' [ '^' int ]
//!            | ('exp' | 'sin' | 'cos') '(' [sign] [number ['*']] 't' ')'
//! ```
//!
//! Whitespace is insignificant. A term may carry at most one `sin`/`cos`
//! factor; powers of `t` and `exp` rates accumulate.

use std::fmt;

use thiserror::Error;

use super::{Signal, SignalTerm, Trig};

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
    pub expected: Vec<&'static str>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}: {}", self.position, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    T,
    Exp,
    Sin,
    Cos,
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    Semi,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::T => "'t'".into(),
            Tok::Exp => "'exp'".into(),
            Tok::Sin => "'sin'".into(),
            Tok::Cos => "'cos'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Semi => "';'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b';' => Some(Tok::Semi),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, start));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent only when followed by digits, so "2e" never eats an identifier
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ParseError {
                position: start,
                message: format!("invalid number '{lit}'"),
                expected: vec!["number"],
            })?;
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() {
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let tok = match &text[start..i] {
                "t" => Tok::T,
                "exp" => Tok::Exp,
                "sin" => Tok::Sin,
                "cos" => Tok::Cos,
                word => {
                    return Err(ParseError {
                        position: start,
                        message: format!("unknown identifier '{word}'"),
                        expected: vec!["t", "exp", "sin", "cos"],
                    })
                }
            };
            out.push((tok, start));
            continue;
        }
        let ch = text[start..].chars().next().unwrap();
        return Err(ParseError {
            position: start,
            message: format!("unexpected character '{ch}'"),
            expected: vec!["number", "t", "exp", "sin", "cos", "+", "-", "*", ";"],
        });
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

const FACTOR_START: &[&str] = &["number", "t", "exp", "sin", "cos", "-"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        ParseError {
            position: self.offset(),
            message: format!("unexpected {}", self.peek().describe()),
            expected: expected.to_vec(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[name]))
        }
    }

    fn component(&mut self) -> Result<Vec<SignalTerm>, ParseError> {
        let mut terms = Vec::new();
        let mut sign = match self.peek() {
            Tok::Plus => {
                self.bump();
                1.0
            }
            _ => 1.0,
        };
        loop {
            let mut term = self.term()?;
            term.coef *= sign;
            terms.push(term);
            sign = match self.peek() {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                Tok::Semi | Tok::End => return Ok(terms),
                _ => return Err(self.error(&["+", "-", "*", ";", "end of input"])),
            };
            self.bump();
        }
    }

    fn term(&mut self) -> Result<SignalTerm, ParseError> {
        let mut term = SignalTerm::constant(1.0);
        let mut has_trig = false;
        loop {
            self.factor(&mut term, &mut has_trig)?;
            if *self.peek() == Tok::Star {
                self.bump();
            } else {
                return Ok(term);
            }
        }
    }

    fn factor(&mut self, term: &mut SignalTerm, has_trig: &mut bool) -> Result<(), ParseError> {
        let start = self.offset();
        let saved = self.pos;
        match self.bump() {
            Tok::Minus => {
                term.coef = -term.coef;
                self.factor(term, has_trig)
            }
            Tok::Num(v) => {
                term.coef *= v;
                Ok(())
            }
            Tok::T => {
                let mut k = 1u32;
                if *self.peek() == Tok::Caret {
                    self.bump();
                    let at = self.offset();
                    match self.bump() {
                        Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                            k = v as u32
                        }
                        _ => {
                            return Err(ParseError {
                                position: at,
                                message: "exponent of t must be a non-negative integer".into(),
                                expected: vec!["integer"],
                            })
                        }
                    }
                }
                term.power += k;
                Ok(())
            }
            Tok::Exp => {
                term.exp_rate += self.rate_argument()?;
                Ok(())
            }
            tok @ (Tok::Sin | Tok::Cos) => {
                if *has_trig {
                    return Err(ParseError {
                        position: start,
                        message: "at most one sin/cos factor per term".into(),
                        expected: vec![],
                    });
                }
                *has_trig = true;
                let w = self.rate_argument()?;
                term.trig = if tok == Tok::Sin {
                    Trig::Sin(w)
                } else {
                    Trig::Cos(w)
                };
                Ok(())
            }
            _ => {
                self.pos = saved;
                Err(self.error(FACTOR_START))
            }
        }
    }

    /// `'(' [sign] [number ['*']] 't' ')'`, returning the rate.
    fn rate_argument(&mut self) -> Result<f64, ParseError> {
        self.expect(Tok::LParen, "(")?;
        let mut rate = 1.0;
        match self.peek() {
            Tok::Minus => {
                self.bump();
                rate = -1.0;
            }
            Tok::Plus => {
                self.bump();
            }
            _ => {}
        }
        if let Tok::Num(v) = *self.peek() {
            self.bump();
            rate *= v;
            if *self.peek() == Tok::Star {
                self.bump();
            }
        }
        self.expect(Tok::T, "t")?;
        self.expect(Tok::RParen, ")")?;
        Ok(rate)
    }
}

/// Parses `dim` components separated by `;`.
pub fn parse_signal(text: &str, dim: usize) -> Result<Signal, ParseError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut components = Vec::with_capacity(dim);
    loop {
        components.push(parser.component()?);
        match parser.bump() {
            Tok::Semi => continue,
            Tok::End => break,
            _ => unreachable!("component stops only at ';' or end"),
        }
    }
    if components.len() != dim {
        return Err(ParseError {
            position: text.len(),
            message: format!("expected {dim} components, found {}", components.len()),
            expected: vec![],
        });
    }
    Ok(Signal::new(components))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_components() {
        let f = parse_signal("t^2 ; 0", 2).unwrap();
        assert_eq!(f.components()[0], vec![SignalTerm::monomial(1.0, 2)]);
        assert!(f.components()[1].is_empty());
    }

    #[test]
    fn scaled_sine() {
        let f = parse_signal("3*sin(2*t)", 1).unwrap();
        assert_eq!(
            f.components()[0],
            vec![SignalTerm::constant(3.0).with_trig(Trig::Sin(2.0))]
        );
    }

    #[test]
    fn decaying_ramp_plus_constant() {
        let f = parse_signal("t*exp(-1*t) + 2", 1).unwrap();
        assert_eq!(f.components()[0].len(), 2);
        assert_eq!(f.value(0.0), vec![2.0]);
        assert!((f.value(1.0)[0] - ((-1.0f64).exp() + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn lenient_forms() {
        let f = parse_signal(" -t*t*exp(t) - 2.5e-1 * cos(-3t)", 1).unwrap();
        let t = 0.4f64;
        let expected = -t * t * t.exp() - 0.25 * (3.0 * t).cos();
        assert!((f.value(t)[0] - expected).abs() < 1e-15);
        let g = parse_signal("-(1)", 1);
        assert!(g.is_err());
    }

    #[test]
    fn errors_carry_position_and_expectations() {
        let err = parse_signal("t + * 2", 1).unwrap_err();
        assert_eq!(err.position, 4);
        assert!(err.expected.contains(&"t"));

        let err = parse_signal("sin(t)*cos(t)", 1).unwrap_err();
        assert_eq!(err.position, 7);

        let err = parse_signal("t^1.5", 1).unwrap_err();
        assert_eq!(err.position, 2);

        let err = parse_signal("log(t)", 1).unwrap_err();
        assert_eq!(err.position, 0);

        let err = parse_signal("t ; t", 1).unwrap_err();
        assert!(err.message.contains("expected 1 components"));

        let err = parse_signal("exp(2*x)", 1).unwrap_err();
        assert_eq!(err.position, 6);

        assert!(parse_signal("", 1).is_err());
        assert!(parse_signal("t ;", 2).is_err());
    }
}
