//! Arithmetic expressions over `x<k>`, `w<k>` and `u<k>` for user-defined
//! dynamics.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric constants, `pi`,
//! and the functions `sin` and `cos`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X(usize),
    W(usize),
    U(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!("unexpected `{}` in `{src}`", p.tokens[p.pos])));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64], w: &[f64], u: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X(i)) => x[*i],
            Expr::Var(Var::W(i)) => w[*i],
            Expr::Var(Var::U(i)) => u[*i],
            Expr::Neg(a) => -a.eval(x, w, u),
            Expr::Add(a, b) => a.eval(x, w, u) + b.eval(x, w, u),
            Expr::Sub(a, b) => a.eval(x, w, u) - b.eval(x, w, u),
            Expr::Mul(a, b) => a.eval(x, w, u) * b.eval(x, w, u),
            Expr::Div(a, b) => a.eval(x, w, u) / b.eval(x, w, u),
            Expr::Pow(a, b) => a.eval(x, w, u).powf(b.eval(x, w, u)),
            Expr::Sin(a) => a.eval(x, w, u).sin(),
            Expr::Cos(a) => a.eval(x, w, u).cos(),
        }
    }

    /// Number of `x`, `w` and `u` components the expression reads
    /// (one past the largest index of each).
    pub fn arity(&self) -> (usize, usize, usize) {
        let mut out = (0, 0, 0);
        self.visit(&mut |v| match v {
            Var::X(i) => out.0 = out.0.max(i + 1),
            Var::W(i) => out.1 = out.1.max(i + 1),
            Var::U(i) => out.2 = out.2.max(i + 1),
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "{v}"),
            Token::Ident(s) => write!(f, "{s}"),
            Token::Op(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
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
            let v = text.parse::<f64>().map_err(|_| Error::Expression(format!("bad number `{text}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()×−".contains(c) {
            let op = match c {
                '×' => '*',
                '−' => '-',
                other => other,
            };
            out.push(Token::Op(op));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expression(format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                "sin" | "cos" => {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(if name == "sin" { Expr::Sin(Box::new(arg)) } else { Expr::Cos(Box::new(arg)) })
                }
                _ => parse_var(&name).map(Expr::Var),
            },
            Token::Op(c) => Err(Error::Expression(format!("unexpected `{c}`"))),
        }
    }
}

fn parse_var(name: &str) -> Result<Var> {
    let (head, idx) = name.split_at(1);
    let k: usize = idx.parse().map_err(|_| Error::Expression(format!("unknown symbol `{name}`")))?;
    match head {
        "x" => Ok(Var::X(k)),
        "w" => Ok(Var::W(k)),
        "u" => Ok(Var::U(k)),
        _ => Err(Error::Expression(format!("unknown symbol `{name}`"))),
    }
}
