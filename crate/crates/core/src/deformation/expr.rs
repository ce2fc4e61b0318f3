//! Expression language for deformation functions.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" exponent ] ;
//! exponent = UINT [ "^" exponent ] ;        (* folded to one integer *)
//! atom    = NUMBER | "phi" | "s" | FUNC "(" expr ")" | "(" expr ")" ;
//! FUNC    = "sin" | "cos" ;
//! ```
//!
//! `^` binds tighter than unary minus, so `-phi^2` is `-(phi^2)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("expression `{expr}` evaluated to {value} at phi={phi}, s={s}")]
pub struct EvaluationError {
    pub expr: String,
    pub value: f64,
    pub phi: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Phi,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Evaluates at the given phase and distortion factor. Any non-finite
    /// intermediate (division by zero, overflow) is an error.
    pub fn eval(&self, phi: f64, s: f64) -> Result<f64, EvaluationError> {
        self.eval_raw(phi, s).map_err(|value| EvaluationError { expr: self.to_string(), value, phi, s })
    }

    fn eval_raw(&self, phi: f64, s: f64) -> Result<f64, f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::Phi) => phi,
            Expr::Var(Var::S) => s,
            Expr::Neg(e) => -e.eval_raw(phi, s)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval_raw(phi, s)?, b.eval_raw(phi, s)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div if b == 0.0 => f64::NAN,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(base, k) => {
                let b = base.eval_raw(phi, s)?;
                (0..*k).try_fold(1.0_f64, |acc, _| {
                    let next = acc * b;
                    if next.is_finite() {
                        Ok(next)
                    } else {
                        Err(next)
                    }
                })?
            }
            Expr::Call(Func::Sin, e) => e.eval_raw(phi, s)?.sin(),
            Expr::Call(Func::Cos, e) => e.eval_raw(phi, s)?.cos(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(v)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::Phi) => f.write_str("phi"),
            Expr::Var(Var::S) => f.write_str("s"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Pow(b, k) => write!(f, "({b})^{k}"),
            Expr::Call(Func::Sin, e) => write!(f, "sin({e})"),
            Expr::Call(Func::Cos, e) => write!(f, "cos({e})"),
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

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| ExprError::Syntax { pos: start, msg: format!("malformed number `{lit}`") })?;
                out.push((start, Tok::Num(v)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax { pos: start, msg: format!("unexpected character `{ch}`") });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let k = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<u32, ExprError> {
        let pos = self.pos();
        let k = match self.bump() {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => v as u32,
            _ => return Err(ExprError::Syntax { pos, msg: "exponent must be a non-negative integer literal".into() }),
        };
        if *self.peek() == Tok::Caret {
            self.bump();
            let rhs = self.exponent()?;
            return k.checked_pow(rhs).ok_or(ExprError::Syntax { pos, msg: "exponent overflow".into() });
        }
        Ok(k)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "phi" => Ok(Expr::Var(Var::Phi)),
                "s" => Ok(Expr::Var(Var::S)),
                "sin" | "cos" => {
                    let f = if name == "sin" { Func::Sin } else { Func::Cos };
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expr::Call(f, Box::new(arg)))
                }
                _ => Err(ExprError::UnknownIdentifier(name)),
            },
            Tok::End => {
                self.at = self.toks.len() - 1;
                self.err("unexpected end of input")
            }
            _ => {
                self.at -= 1;
                self.err("expected a number, variable, function call or `(`")
            }
        }
    }
}

pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}
