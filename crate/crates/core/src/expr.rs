//! Small expression language over quotient coordinates `q1..qn`.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, decimal numbers, `pi`,
//! and the functions `abs sqrt sign sin cos exp min max`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Sign,
    Sin,
    Cos,
    Exp,
    Min,
    Max,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Sign => "sign",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Min => "min",
            Func::Max => "max",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based coordinate index (`q1` is `Var(0)`).
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Value and gradient.
#[derive(Clone, Debug)]
struct Dual {
    v: f64,
    d: Vec<f64>,
}

impl Dual {
    fn constant(v: f64, n: usize) -> Self {
        Dual { v, d: vec![0.0; n] }
    }

    fn map(self, v: f64, f: impl Fn(f64) -> f64) -> Self {
        Dual {
            v,
            d: self.d.into_iter().map(f).collect(),
        }
    }

    fn zip(a: &Dual, b: &Dual, v: f64, f: impl Fn(f64, f64) -> f64) -> Dual {
        Dual {
            v,
            d: a.d.iter().zip(&b.d).map(|(&x, &y)| f(x, y)).collect(),
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!(
                "unexpected `{}` in `{src}`",
                p.tokens[p.pos]
            )));
        }
        Ok(e)
    }

    /// Number of coordinates the expression reads, i.e. one past the largest index.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) => a.arity(),
            Expr::Bin(_, a, b) => a.arity().max(b.arity()),
            Expr::Call(_, args) => args.iter().map(Expr::arity).max().unwrap_or(0),
        }
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 0.0)
    }

    pub fn eval(&self, q: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(x) => *x,
            Expr::Var(i) => *q.get(*i).ok_or_else(|| {
                Error::Evaluation(format!("q{} used with {} coordinates", i + 1, q.len()))
            })?,
            Expr::Neg(a) => -a.eval(q)?,
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(q)?, b.eval(q)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].eval(q)?;
                match f {
                    Func::Abs => x.abs(),
                    Func::Sqrt => x.sqrt(),
                    Func::Sign => sign(x),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Min => x.min(args[1].eval(q)?),
                    Func::Max => x.max(args[1].eval(q)?),
                }
            }
        })
    }

    /// Value and gradient with respect to `q`.
    pub fn eval_grad(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.dual(q)?;
        Ok((d.v, d.d))
    }

    fn dual(&self, q: &[f64]) -> Result<Dual> {
        let n = q.len();
        Ok(match self {
            Expr::Num(x) => Dual::constant(*x, n),
            Expr::Var(i) => {
                let v = *q.get(*i).ok_or_else(|| {
                    Error::Evaluation(format!("q{} used with {} coordinates", i + 1, n))
                })?;
                let mut d = Dual::constant(v, n);
                d.d[*i] = 1.0;
                d
            }
            Expr::Neg(a) => {
                let a = a.dual(q)?;
                let v = -a.v;
                a.map(v, |x| -x)
            }
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.dual(q)?, b.dual(q)?);
                match op {
                    BinOp::Add => Dual::zip(&a, &b, a.v + b.v, |x, y| x + y),
                    BinOp::Sub => Dual::zip(&a, &b, a.v - b.v, |x, y| x - y),
                    BinOp::Mul => Dual::zip(&a, &b, a.v * b.v, |x, y| x * b.v + a.v * y),
                    BinOp::Div => {
                        let v = a.v / b.v;
                        Dual::zip(&a, &b, v, |x, y| (x * b.v - a.v * y) / (b.v * b.v))
                    }
                    BinOp::Pow => {
                        let v = a.v.powf(b.v);
                        let const_exp = b.d.iter().all(|&y| y == 0.0);
                        if const_exp {
                            let k = b.v * a.v.powf(b.v - 1.0);
                            a.map(v, |x| if x == 0.0 { 0.0 } else { k * x })
                        } else {
                            let ln = a.v.ln();
                            Dual::zip(&a, &b, v, |x, y| v * (y * ln + b.v * x / a.v))
                        }
                    }
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].dual(q)?;
                let x = a.v;
                match f {
                    Func::Abs => a.map(x.abs(), |d| sign(x) * d),
                    Func::Sqrt => {
                        let r = x.sqrt();
                        a.map(r, |d| if d == 0.0 { 0.0 } else { d / (2.0 * r) })
                    }
                    Func::Sign => a.map(sign(x), |_| 0.0),
                    Func::Sin => a.map(x.sin(), |d| x.cos() * d),
                    Func::Cos => a.map(x.cos(), |d| -x.sin() * d),
                    Func::Exp => {
                        let e = x.exp();
                        a.map(e, |d| e * d)
                    }
                    Func::Min | Func::Max => {
                        let b = args[1].dual(q)?;
                        let pick_a = if *f == Func::Min { a.v <= b.v } else { a.v >= b.v };
                        if pick_a {
                            a
                        } else {
                            b
                        }
                    }
                }
            }
        })
    }
}

impl FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(i) => write!(f, "q{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a}{s}{b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(x) => write!(f, "{x}"),
            Token::Ident(s) => write!(f, "{s}"),
            Token::Sym(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
            let s: String = chars[start..i].iter().collect();
            let x = s
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
            out.push(Token::Num(x));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Token::Sym(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek_sym(&self, c: char) -> bool {
        matches!(self.tokens.get(self.pos), Some(Token::Sym(x)) if *x == c)
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.peek_sym(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse(format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.peek_sym('+') {
                BinOp::Add
            } else if self.peek_sym('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.peek_sym('*') {
                BinOp::Mul
            } else if self.peek_sym('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_sym('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_sym('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_sym('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(x) => Ok(Expr::Num(x)),
            Token::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Token::Ident(name) => {
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                if let Some(rest) = name.strip_prefix('q') {
                    if let Ok(k) = rest.parse::<usize>() {
                        if k == 0 {
                            return Err(Error::Parse("coordinates start at q1".into()));
                        }
                        return Ok(Expr::Var(k - 1));
                    }
                }
                let func = match name.as_str() {
                    "abs" => Func::Abs,
                    "sqrt" => Func::Sqrt,
                    "sign" => Func::Sign,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "min" => Func::Min,
                    "max" => Func::Max,
                    _ => return Err(Error::Parse(format!("unknown identifier `{name}`"))),
                };
                self.expect_sym('(')?;
                let mut args = vec![self.expr()?];
                while self.peek_sym(',') {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.expect_sym(')')?;
                if args.len() != func.arity() {
                    return Err(Error::Parse(format!(
                        "`{}` takes {} argument(s)",
                        func.name(),
                        func.arity()
                    )));
                }
                Ok(Expr::Call(func, args))
            }
            Token::Sym(c) => Err(Error::Parse(format!("unexpected `{c}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("-2^2 + 3*q1 - q2/4").unwrap();
        assert_eq!(e.eval(&[1.0, 8.0]).unwrap(), -4.0 + 3.0 - 2.0);
        assert_eq!(e.arity(), 2);
    }

    #[test]
    fn functions() {
        let e = Expr::parse("sign(q1)*sqrt(abs(q1))").unwrap();
        assert_eq!(e.eval(&[-4.0]).unwrap(), -2.0);
        assert_eq!(e.eval(&[0.0]).unwrap(), 0.0);
        let m = Expr::parse("max(q1, 2) + min(q1, 2) + sin(0) + cos(0)").unwrap();
        assert_eq!(m.eval(&[5.0]).unwrap(), 8.0);
    }

    #[test]
    fn gradients() {
        let e = Expr::parse("q1^2*q2 + sin(q2)").unwrap();
        let (v, g) = e.eval_grad(&[3.0, 0.5]).unwrap();
        assert!((v - (4.5 + 0.5f64.sin())).abs() < 1e-15);
        assert!((g[0] - 3.0).abs() < 1e-15);
        assert!((g[1] - (9.0 + 0.5f64.cos())).abs() < 1e-15);
        let s = Expr::parse("sign(q1)*sqrt(abs(q1))").unwrap();
        let (_, g) = s.eval_grad(&[4.0]).unwrap();
        assert!((g[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("q0").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("min(1)").is_err());
        assert!(Expr::parse("(1+2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("q3").unwrap().eval(&[1.0]).is_err());
    }

    #[test]
    fn scientific_notation() {
        assert_eq!(Expr::parse("1.5e2*q1").unwrap().eval(&[2.0]).unwrap(), 300.0);
    }
}
