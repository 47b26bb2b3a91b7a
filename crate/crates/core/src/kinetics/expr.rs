//! Rational expressions in `u`, `v` and named parameters.
//!
//! Grammar, with the usual precedence and a right-associative `^`:
//!
//! ```text
//! expr    = term (("+" | "-") term)*
//! term    = unary (("*" | "/") unary)*
//! unary   = "-" unary | power
//! power   = primary ("^" exponent)?
//! exponent = "-"? integer ("^" exponent)?
//! primary = number | identifier | "(" expr ")"
//! ```

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    U,
    V,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Param(String),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        Parser::new(text, None)?.parse_all()
    }

    /// Parses and rejects identifiers other than `u`, `v` and `params`.
    pub fn parse_with_params(text: &str, params: &BTreeMap<String, f64>) -> Result<Expr> {
        Parser::new(text, Some(params))?.parse_all()
    }

    pub fn eval(&self, u: f64, v: f64, params: &BTreeMap<String, f64>) -> Result<f64> {
        Ok(match self {
            Expr::Num(x) => *x,
            Expr::Param(name) => *params.get(name).ok_or_else(|| Error::UnknownIdentifier {
                name: name.clone(),
                pos: 0,
            })?,
            Expr::Var(Var::U) => u,
            Expr::Var(Var::V) => v,
            Expr::Neg(a) => -a.eval(u, v, params)?,
            Expr::Add(a, b) => a.eval(u, v, params)? + b.eval(u, v, params)?,
            Expr::Sub(a, b) => a.eval(u, v, params)? - b.eval(u, v, params)?,
            Expr::Mul(a, b) => a.eval(u, v, params)? * b.eval(u, v, params)?,
            Expr::Div(a, b) => {
                let den = b.eval(u, v, params)?;
                if den == 0.0 {
                    return Err(Error::DivisionByZero);
                }
                a.eval(u, v, params)? / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval(u, v, params)?;
                if base == 0.0 && *k < 0 {
                    return Err(Error::DivisionByZero);
                }
                base.powi(*k)
            }
        })
    }

    /// Symbolic partial derivative, simplified.
    pub fn derivative(&self, var: Var) -> Expr {
        use Expr::*;
        let d = match self {
            Num(_) | Param(_) => Num(0.0),
            Var(w) => Num(if *w == var { 1.0 } else { 0.0 }),
            Neg(a) => Neg(Box::new(a.derivative(var))),
            Add(a, b) => Add(Box::new(a.derivative(var)), Box::new(b.derivative(var))),
            Sub(a, b) => Sub(Box::new(a.derivative(var)), Box::new(b.derivative(var))),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.derivative(var)), b.clone())),
                Box::new(Mul(a.clone(), Box::new(b.derivative(var)))),
            ),
            Div(a, b) => Div(
                Box::new(Sub(
                    Box::new(Mul(Box::new(a.derivative(var)), b.clone())),
                    Box::new(Mul(a.clone(), Box::new(b.derivative(var)))),
                )),
                Box::new(Pow(b.clone(), 2)),
            ),
            Pow(a, k) => Mul(
                Box::new(Mul(Box::new(Num(*k as f64)), Box::new(Pow(a.clone(), k - 1)))),
                Box::new(a.derivative(var)),
            ),
        };
        d.simplify()
    }

    /// Constant folding and removal of neutral elements.
    pub fn simplify(&self) -> Expr {
        use Expr::*;
        match self {
            Num(_) | Param(_) | Var(_) => self.clone(),
            Neg(a) => match a.simplify() {
                Num(x) => Num(-x),
                Neg(inner) => *inner,
                s => Neg(Box::new(s)),
            },
            Add(a, b) => match (a.simplify(), b.simplify()) {
                (Num(x), Num(y)) => Num(x + y),
                (Num(z), s) | (s, Num(z)) if z == 0.0 => s,
                (s, Neg(t)) => Sub(Box::new(s), t),
                (s, t) => Add(Box::new(s), Box::new(t)),
            },
            Sub(a, b) => match (a.simplify(), b.simplify()) {
                (Num(x), Num(y)) => Num(x - y),
                (s, Num(z)) if z == 0.0 => s,
                (Num(z), t) if z == 0.0 => Neg(Box::new(t)).simplify(),
                (s, t) => Sub(Box::new(s), Box::new(t)),
            },
            Mul(a, b) => match (a.simplify(), b.simplify()) {
                (Num(x), Num(y)) => Num(x * y),
                (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
                (Num(o), s) | (s, Num(o)) if o == 1.0 => s,
                (Num(m), s) | (s, Num(m)) if m == -1.0 => Neg(Box::new(s)),
                (s, Num(x)) => Mul(Box::new(Num(x)), Box::new(s)),
                (Num(x), Mul(c, t)) => match *c {
                    Num(y) => Mul(Box::new(Num(x * y)), t),
                    c => Mul(Box::new(Num(x)), Box::new(Mul(Box::new(c), t))),
                },
                (s, t) => Mul(Box::new(s), Box::new(t)),
            },
            Div(a, b) => match (a.simplify(), b.simplify()) {
                (Num(z), _) if z == 0.0 => Num(0.0),
                (Num(x), Num(y)) if y != 0.0 => Num(x / y),
                (s, Num(o)) if o == 1.0 => s,
                (s, t) => Div(Box::new(s), Box::new(t)),
            },
            Pow(a, k) => match (a.simplify(), *k) {
                (_, 0) => Num(1.0),
                (s, 1) => s,
                (Num(x), k) if x != 0.0 || k > 0 => Num(x.powi(k)),
                (s, k) => Pow(Box::new(s), k),
            },
        }
    }

    /// Parameter names referenced by the expression.
    pub fn params(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(name) => out.push(name.clone()),
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) => a.collect_params(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(x) if *x < 0.0 => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool| {
            if paren {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        let binary = |f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr, prec: u8| {
            wrap(f, a, a.precedence() < prec)?;
            f.write_str(op)?;
            wrap(f, b, b.precedence() <= prec)
        };
        match self {
            Expr::Num(x) if *x < 0.0 => write!(f, "-{}", -x),
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Param(name) => f.write_str(name),
            Expr::Var(Var::U) => f.write_str("u"),
            Expr::Var(Var::V) => f.write_str("v"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                wrap(f, a, a.precedence() < 3)
            }
            Expr::Add(a, b) => binary(f, a, " + ", b, 1),
            Expr::Sub(a, b) => binary(f, a, " - ", b, 1),
            Expr::Mul(a, b) => binary(f, a, "*", b, 2),
            Expr::Div(a, b) => binary(f, a, "/", b, 2),
            Expr::Pow(a, k) => {
                wrap(f, a, a.precedence() <= 4)?;
                write!(f, "^{k}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = match c {
            _ if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ if c.is_ascii_digit() || c == '.' => {
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
                let s: String = chars[start..i].iter().collect();
                let x = s.parse::<f64>().map_err(|_| Error::Syntax {
                    pos: start,
                    expected: "number".into(),
                    found: format!("'{s}'"),
                })?;
                out.push((Tok::Num(x), start));
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), start));
                continue;
            }
            _ => {
                return Err(Error::Syntax {
                    pos: start,
                    expected: "expression".into(),
                    found: format!("'{c}'"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    params: Option<&'a BTreeMap<String, f64>>,
}

impl<'a> Parser<'a> {
    fn new(text: &str, params: Option<&'a BTreeMap<String, f64>>) -> Result<Self> {
        Ok(Self {
            toks: tokenize(text)?,
            at: 0,
            params,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> Error {
        Error::Syntax {
            pos: self.pos(),
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn parse_all(mut self) -> Result<Expr> {
        let e = self.expr()?;
        if *self.peek() != Tok::End {
            return Err(self.unexpected("operator or end of input"));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            lhs = match self.peek() {
                Tok::Plus => {
                    self.bump();
                    Expr::Add(Box::new(lhs), Box::new(self.term()?))
                }
                Tok::Minus => {
                    self.bump();
                    Expr::Sub(Box::new(lhs), Box::new(self.term()?))
                }
                _ => return Ok(lhs),
            };
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            lhs = match self.peek() {
                Tok::Star => {
                    self.bump();
                    Expr::Mul(Box::new(lhs), Box::new(self.unary()?))
                }
                Tok::Slash => {
                    self.bump();
                    Expr::Div(Box::new(lhs), Box::new(self.unary()?))
                }
                _ => return Ok(lhs),
            };
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let k = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32> {
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
        }
        let pos = self.pos();
        let k = match self.peek() {
            Tok::Num(x) if x.fract() == 0.0 && x.abs() <= i32::MAX as f64 => *x as i32,
            _ => return Err(self.unexpected("integer exponent")),
        };
        self.bump();
        let k = if negative { -k } else { k };
        if *self.peek() == Tok::Caret {
            self.bump();
            let e = self.exponent()?;
            return u32::try_from(e)
                .ok()
                .and_then(|e| k.checked_pow(e))
                .ok_or(Error::Syntax {
                    pos,
                    expected: "integer exponent".into(),
                    found: "non-integer or overflowing power".into(),
                });
        }
        Ok(k)
    }

    fn primary(&mut self) -> Result<Expr> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(x) => Ok(Expr::Num(x)),
            Tok::Ident(name) => match name.as_str() {
                "u" => Ok(Expr::Var(Var::U)),
                "v" => Ok(Expr::Var(Var::V)),
                _ => match self.params {
                    Some(p) if !p.contains_key(&name) => Err(Error::UnknownIdentifier { name, pos }),
                    _ => Ok(Expr::Param(name)),
                },
            },
            Tok::LParen => {
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("')'"));
                }
                self.bump();
                Ok(e)
            }
            other => Err(Error::Syntax {
                pos,
                expected: "number, identifier or '('".into(),
                found: other.describe(),
            }),
        }
    }
}
