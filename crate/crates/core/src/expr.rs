//! Small arithmetic expressions over coordinates, evaluated for any [`Real`].
//!
//! Grammar: `+ - * / ^`, parentheses, numbers, `pi`, variables `x1 … x4`
//! (also `x`, `y`, `z`, `w`), and the functions `sin cos exp log sqrt abs`.
//! The exponent of `^` must be a constant.

use crate::autodiff::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Pow(Box<Node>, f64),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    max_var: usize,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    max_var: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at offset {}", self.pos))
    }

    fn skip(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.unary()?;
            let k = constant(&e).ok_or_else(|| self.err("exponent must be a constant"))?;
            return Ok(Node::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
                    self.pos += 1;
                }
                if self.pos < self.s.len() && (self.s[self.pos] == b'e' || self.s[self.pos] == b'E') {
                    let save = self.pos;
                    self.pos += 1;
                    if self.pos < self.s.len() && (self.s[self.pos] == b'+' || self.s[self.pos] == b'-') {
                        self.pos += 1;
                    }
                    if self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    } else {
                        self.pos = save;
                    }
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                text.parse().map(Node::Num).map_err(|_| self.err(&format!("bad number `{text}`")))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                let var = match name {
                    "x" | "x1" => Some(0),
                    "y" | "x2" => Some(1),
                    "z" | "x3" => Some(2),
                    "w" | "x4" => Some(3),
                    _ => None,
                };
                if let Some(v) = var {
                    self.max_var = self.max_var.max(v + 1);
                    return Ok(Node::Var(v));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                let f = match name {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "log" | "ln" => Func::Log,
                    "sqrt" => Func::Sqrt,
                    "abs" => Func::Abs,
                    _ => return Err(self.err(&format!("unknown identifier `{name}`"))),
                };
                if self.peek() != Some(b'(') {
                    return Err(self.err("expected `(` after function name"));
                }
                Ok(Node::Call(f, Box::new(self.atom()?)))
            }
            Some(c) => Err(self.err(&format!("unexpected `{}`", c as char))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

fn constant(n: &Node) -> Option<f64> {
    match n {
        Node::Num(v) => Some(*v),
        Node::Neg(a) => constant(a).map(|v| -v),
        _ => None,
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { s: src.as_bytes(), pos: 0, max_var: 0 };
        let root = p.expr()?;
        if p.peek().is_some() {
            return Err(p.err("trailing input"));
        }
        Ok(Expr { source: src.to_string(), root, max_var: p.max_var })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of coordinates the expression refers to.
    pub fn arity(&self) -> usize {
        self.max_var
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        eval_node(&self.root, x)
    }
}

fn eval_node<T: Real>(n: &Node, x: &[T]) -> T {
    match n {
        Node::Num(v) => T::from_f64(*v),
        Node::Var(k) => x[*k],
        Node::Neg(a) => -eval_node(a, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval_node(a, x), eval_node(b, x));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                _ => a / b,
            }
        }
        Node::Pow(a, k) => {
            let a = eval_node(a, x);
            if k.fract() == 0.0 && k.abs() < 64.0 {
                a.powi(*k as i32)
            } else {
                a.powf(*k)
            }
        }
        Node::Call(f, a) => {
            let a = eval_node(a, x);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
            }
        }
    }
}
