//! Seed-function expressions in one complex variable `z`.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' '-'? integer)*
//! primary := number | number 'i' | 'z' | 'i' | func '(' expr ')' | '(' expr ')'
//! func    := exp | sin | cos | sinh | cosh | log | conj
//! ```
//!
//! Exponents are integer literals. `log` is the principal branch.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::complex_grid::{ComplexField, DomainGrid, Field};

/// Nesting depth past which parsing gives up instead of recursing further.
pub const MAX_DEPTH: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Log,
    Conj,
}

impl Func {
    const ALL: [Func; 7] = [Func::Exp, Func::Sin, Func::Cos, Func::Sinh, Func::Cosh, Func::Log, Func::Conj];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Log => "log",
            Func::Conj => "conj",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }

    fn apply(self, w: Complex64) -> Complex64 {
        match self {
            Func::Exp => w.exp(),
            Func::Sin => w.sin(),
            Func::Cos => w.cos(),
            Func::Sinh => w.sinh(),
            Func::Cosh => w.cosh(),
            Func::Log => w.ln(),
            Func::Conj => w.conj(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Real(f64),
    /// An imaginary literal `b i`; bare `i` is `Imag(1.0)`.
    Imag(f64),
    Z,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {position}: expected {}, found {found}", expected.join(" or "))]
    Syntax { position: usize, expected: Vec<&'static str>, found: String },
    #[error("unknown identifier `{name}` at offset {position}")]
    UnknownIdentifier { position: usize, name: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. } | ParseError::UnknownIdentifier { position, .. } => *position,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    ImagNum(f64),
    Ident(String),
    Sym(char),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(x) => write!(f, "number {x}"),
            Tok::ImagNum(x) => write!(f, "number {x}i"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Sym(c) => write!(f, "`{c}`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

const OPERAND: [&str; 4] = ["number", "identifier", "`(`", "`-`"];

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut k = 0;
    while k < bytes.len() {
        let c = bytes[k];
        if c.is_ascii_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = k;
            while k < bytes.len() && (bytes[k].is_ascii_digit() || bytes[k] == b'.') {
                k += 1;
            }
            // exponent only when digits follow, so `2e` stays a syntax error
            if k < bytes.len() && (bytes[k] == b'e' || bytes[k] == b'E') {
                let mut m = k + 1;
                if m < bytes.len() && (bytes[m] == b'+' || bytes[m] == b'-') {
                    m += 1;
                }
                if m < bytes.len() && bytes[m].is_ascii_digit() {
                    while m < bytes.len() && bytes[m].is_ascii_digit() {
                        m += 1;
                    }
                    k = m;
                }
            }
            let lit = &text[start..k];
            let value = match lit.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    return Err(ParseError::Syntax {
                        position: start,
                        expected: vec!["finite number"],
                        found: format!("`{lit}`"),
                    })
                }
            };
            let imaginary = k < bytes.len()
                && bytes[k] == b'i'
                && !(k + 1 < bytes.len() && (bytes[k + 1].is_ascii_alphanumeric() || bytes[k + 1] == b'_'));
            if imaginary {
                k += 1;
                out.push((start, Tok::ImagNum(value)));
            } else {
                out.push((start, Tok::Num(value)));
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = k;
            while k < bytes.len() && (bytes[k].is_ascii_alphanumeric() || bytes[k] == b'_') {
                k += 1;
            }
            out.push((start, Tok::Ident(text[start..k].to_string())));
        } else if b"+-*/^()".contains(&c) {
            out.push((k, Tok::Sym(c as char)));
            k += 1;
        } else {
            let ch = text[k..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax { position: k, expected: OPERAND.to_vec(), found: format!("`{ch}`") });
        }
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn fail<T>(&self, expected: &[&'static str]) -> Result<T, ParseError> {
        Err(ParseError::Syntax { position: self.offset(), expected: expected.to_vec(), found: self.peek().to_string() })
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn nest(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.fail(&["shallower nesting"]);
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.nest()?;
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                break;
            };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                break;
            };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            self.nest()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.primary()?;
        while self.eat('^') {
            let negative = self.eat('-');
            let n = match *self.peek() {
                Tok::Num(x) if x.fract() == 0.0 && x <= i32::MAX as f64 => x as i32,
                _ => return self.fail(&["integer exponent"]),
            };
            self.pos += 1;
            base = Expr::Pow(Box::new(base), if negative { -n } else { n });
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.pos += 1;
                Ok(Expr::Real(x))
            }
            Tok::ImagNum(x) => {
                self.pos += 1;
                Ok(Expr::Imag(x))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return self.fail(&["`)`"]);
                }
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "z" => Ok(Expr::Z),
                    "i" => Ok(Expr::Imag(1.0)),
                    _ => match Func::from_name(&name) {
                        Some(f) => {
                            if !self.eat('(') {
                                return self.fail(&["`(`"]);
                            }
                            let arg = self.expr()?;
                            if !self.eat(')') {
                                return self.fail(&["`)`"]);
                            }
                            Ok(Expr::Call(f, Box::new(arg)))
                        }
                        None => Err(ParseError::UnknownIdentifier { position: at, name }),
                    },
                }
            }
            _ => self.fail(&OPERAND),
        }
    }
}

pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, depth: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

impl Expr {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            Expr::Real(x) => Complex64::new(*x, 0.0),
            Expr::Imag(y) => Complex64::new(0.0, *y),
            Expr::Z => z,
            Expr::Neg(a) => -a.eval(z),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(z), b.eval(z));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(a, n) => a.eval(z).powi(*n),
            Expr::Call(f, a) => f.apply(a.eval(z)),
        }
    }

    /// Samples the expression on every grid point.
    pub fn to_field(&self, grid: DomainGrid) -> ComplexField {
        Field::from_fn(grid, |_, _, z| self.eval(z))
    }

    /// True when `conj` appears anywhere.
    pub fn uses_conj(&self) -> bool {
        match self {
            Expr::Real(_) | Expr::Imag(_) | Expr::Z => false,
            Expr::Neg(a) | Expr::Pow(a, _) => a.uses_conj(),
            Expr::Binary(_, a, b) => a.uses_conj() || b.uses_conj(),
            Expr::Call(f, a) => *f == Func::Conj || a.uses_conj(),
        }
    }

    pub fn uses_z(&self) -> bool {
        match self {
            Expr::Real(_) | Expr::Imag(_) => false,
            Expr::Z => true,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.uses_z(),
            Expr::Binary(_, a, b) => a.uses_z() || b.uses_z(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.write_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Expr::Real(x) => write!(f, "{x}"),
            Expr::Imag(y) => write!(f, "{y}i"),
            Expr::Z => f.write_str("z"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_at(f, 3)
            }
            Expr::Binary(op, a, b) => {
                let (sym, level) = match op {
                    BinOp::Add => (" + ", 1),
                    BinOp::Sub => (" - ", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                };
                a.write_at(f, level)?;
                f.write_str(sym)?;
                b.write_at(f, level + 1)
            }
            Expr::Pow(a, n) => {
                a.write_at(f, 5)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_at(f, 0)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}
