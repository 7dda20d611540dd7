//! A small arithmetic expression language for Hamiltonians and exact terms.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers in decimal or
//! scientific notation, the functions `sin cos exp sqrt ln`, the constant
//! `pi`, and the variables `x y r2` (disk charts), `s t` (annulus charts)
//! and `time`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Jet2, TimeField};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    R2,
    S,
    T,
    Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Ln,
}

/// Coordinates an expression is bound to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinates {
    /// Cartesian `(x, y)`; `r2 = x^2 + y^2` is available.
    Cartesian,
    /// Flat annulus `(s, t)`.
    Annulus,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected trailing input at token {} in `{src}`",
                p.pos
            )));
        }
        Ok(e)
    }

    fn visit_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.visit_vars(out),
            Expr::Bin(_, a, b) => {
                a.visit_vars(out);
                b.visit_vars(out);
            }
        }
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut v = Vec::new();
        self.visit_vars(&mut v);
        v
    }

    pub fn depends_on_time(&self) -> bool {
        self.variables().contains(&Var::Time)
    }

    fn eval(&self, time: f64, u: Jet2, v: Jet2, coords: Coordinates) -> Jet2 {
        match self {
            Expr::Num(c) => Jet2::constant(*c),
            Expr::Var(var) => match (var, coords) {
                (Var::Time, _) => Jet2::constant(time),
                (Var::X, _) | (Var::S, _) => u,
                (Var::Y, _) | (Var::T, _) => v,
                (Var::R2, _) => u * u + v * v,
            },
            Expr::Neg(a) => -a.eval(time, u, v, coords),
            Expr::Bin(op, a, b) => {
                let a = a.eval(time, u, v, coords);
                match (op, b.as_ref()) {
                    (Op::Pow, Expr::Num(p)) => a.powf(*p),
                    _ => {
                        let b = b.eval(time, u, v, coords);
                        match op {
                            Op::Add => a + b,
                            Op::Sub => a - b,
                            Op::Mul => a * b,
                            Op::Div => a / b,
                            Op::Pow => a.pow(b),
                        }
                    }
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(time, u, v, coords);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => a.sqrt(),
                    Func::Ln => a.ln(),
                }
            }
        }
    }

    /// Binds the expression to a chart, rejecting variables the chart does
    /// not provide.
    pub fn bind(&self, coords: Coordinates) -> Result<TimeField> {
        for var in self.variables() {
            let ok = match coords {
                Coordinates::Cartesian => matches!(var, Var::X | Var::Y | Var::R2 | Var::Time),
                Coordinates::Annulus => matches!(var, Var::S | Var::T | Var::Time),
            };
            if !ok {
                return Err(Error::Expression(format!(
                    "variable `{var}` is not available in {coords:?} coordinates"
                )));
            }
        }
        let e = Arc::new(self.clone());
        Ok(Arc::new(move |time, u, v| e.eval(time, u, v, coords)))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Var::X => "x",
            Var::Y => "y",
            Var::R2 => "r2",
            Var::S => "s",
            Var::T => "t",
            Var::Time => "time",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
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
            let text: String = chars[start..i].iter().collect();
            let n = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{text}`")))?;
            out.push(Tok::Num(n));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(n) => Ok(Expr::Num(n)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Expression("missing `)`".into()));
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "sqrt" => Some(Func::Sqrt),
                    "ln" | "log" => Some(Func::Ln),
                    _ => None,
                };
                if let Some(func) = func {
                    if !self.eat('(') {
                        return Err(Error::Expression(format!("`{name}` needs `(`")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(Error::Expression("missing `)`".into()));
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                let var = match name.as_str() {
                    "x" => Var::X,
                    "y" => Var::Y,
                    "r2" => Var::R2,
                    "s" => Var::S,
                    "t" => Var::T,
                    "time" => Var::Time,
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    _ => return Err(Error::Expression(format!("unknown identifier `{name}`"))),
                };
                Ok(Expr::Var(var))
            }
            Tok::Sym(c) => Err(Error::Expression(format!("unexpected `{c}`"))),
        }
    }
}
