//! Closed-form scalar fields of `(x, y)`, either native closures or parsed
//! from a small arithmetic grammar:
//!
//! ```text
//! expr    := sum (cmp sum)?          cmp: < <= > >= == !=   (yields 1 or 0)
//! sum     := product (('+'|'-') product)*
//! product := unary (('*'|'/') unary)*
//! unary   := ('-'|'+') unary | power
//! power   := atom ('^' unary)?
//! atom    := number | x | y | pi | e | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin cos tan exp ln sqrt abs min max if(c, a, b)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Point2;

/// Scalar function of position, cheap to clone and shareable across threads.
#[derive(Clone)]
pub struct ScalarFn {
    f: Arc<dyn Fn(Point2) -> f64 + Send + Sync>,
    label: Arc<str>,
}

impl ScalarFn {
    pub fn new(label: impl Into<String>, f: impl Fn(Point2) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), label: label.into().into() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c)
    }

    pub fn parse(source: &str) -> Result<Self> {
        let expr = Parser::new(source)?.parse()?;
        Ok(Self::new(source, move |p| expr.eval(p.x, p.y)))
    }

    pub fn eval(&self, p: Point2) -> f64 {
        (self.f)(p)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Min,
    Max,
    If,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "if" => (Func::If, 3),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    X,
    Y,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X => x,
            Node::Y => y,
            Node::Neg(a) => -a.eval(x, y),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y), b.eval(x, y));
                let truth = |c: bool| if c { 1.0 } else { 0.0 };
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                    BinOp::Lt => truth(a < b),
                    BinOp::Le => truth(a <= b),
                    BinOp::Gt => truth(a > b),
                    BinOp::Ge => truth(a >= b),
                    BinOp::Eq => truth(a == b),
                    BinOp::Ne => truth(a != b),
                }
            }
            Node::Call(f, args) => {
                let a = |i: usize| args[i].eval(x, y);
                match f {
                    Func::Sin => a(0).sin(),
                    Func::Cos => a(0).cos(),
                    Func::Tan => a(0).tan(),
                    Func::Exp => a(0).exp(),
                    Func::Ln => a(0).ln(),
                    Func::Sqrt => a(0).sqrt(),
                    Func::Abs => a(0).abs(),
                    Func::Min => a(0).min(a(1)),
                    Func::Max => a(0).max(a(1)),
                    Func::If => {
                        if a(0) != 0.0 {
                            a(1)
                        } else {
                            a(2)
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let err = |msg: String| Error::Config(format!("expression '{src}': {msg}"));
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
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
            let text = &src[start..i];
            out.push(Token::Num(text.parse().map_err(|_| err(format!("bad number '{text}'")))?));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token::Ident(src[start..i].to_string()));
        } else {
            let two = src.get(i..i + 2).unwrap_or("");
            let op: &'static str = match two {
                "<=" => "<=",
                ">=" => ">=",
                "==" => "==",
                "!=" => "!=",
                _ => match c {
                    '+' => "+",
                    '-' => "-",
                    '*' => "*",
                    '/' => "/",
                    '^' => "^",
                    '<' => "<",
                    '>' => ">",
                    '(' | ')' | ',' => "",
                    _ => return Err(err(format!("unexpected character '{c}'"))),
                },
            };
            match (op, c) {
                ("", '(') => out.push(Token::LParen),
                ("", ')') => out.push(Token::RParen),
                ("", _) => out.push(Token::Comma),
                _ => out.push(Token::Op(op)),
            }
            i += if op.len() == 2 { 2 } else { 1 };
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self> {
        Ok(Self { src, tokens: tokenize(src)?, pos: 0 })
    }

    fn err(&self, msg: &str) -> Error {
        Error::Config(format!("expression '{}': {msg}", self.src))
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn parse(mut self) -> Result<Node> {
        if self.tokens.is_empty() {
            return Err(self.err("empty expression"));
        }
        let node = self.comparison()?;
        if self.pos < self.tokens.len() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(node)
    }

    fn comparison(&mut self) -> Result<Node> {
        let lhs = self.sum()?;
        let op = match self.peek() {
            Some(Token::Op("<")) => BinOp::Lt,
            Some(Token::Op("<=")) => BinOp::Le,
            Some(Token::Op(">")) => BinOp::Gt,
            Some(Token::Op(">=")) => BinOp::Ge,
            Some(Token::Op("==")) => BinOp::Eq,
            Some(Token::Op("!=")) => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.sum()?;
        Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Token::Op("+")) => BinOp::Add,
                Some(Token::Op("-")) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Token::Op("*")) => BinOp::Mul,
                Some(Token::Op("/")) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Token::Op("-")) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op("+")) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Token::Op("^")) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Node::Num(v)),
            Some(Token::LParen) => {
                let inner = self.comparison()?;
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(self.err("missing ')'")),
                }
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Node::X),
                "y" => Ok(Node::Y),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "e" => Ok(Node::Num(std::f64::consts::E)),
                _ => {
                    let (func, arity) =
                        Func::lookup(&name).ok_or_else(|| self.err(&format!("unknown name '{name}'")))?;
                    if self.next() != Some(Token::LParen) {
                        return Err(self.err(&format!("expected '(' after '{name}'")));
                    }
                    let mut args = vec![self.comparison()?];
                    loop {
                        match self.next() {
                            Some(Token::Comma) => args.push(self.comparison()?),
                            Some(Token::RParen) => break,
                            _ => return Err(self.err(&format!("malformed arguments to '{name}'"))),
                        }
                    }
                    if args.len() != arity {
                        return Err(self.err(&format!("'{name}' takes {arity} argument(s), got {}", args.len())));
                    }
                    Ok(Node::Call(func, args))
                }
            },
            _ => Err(self.err("expected a value")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eval(src: &str, x: f64, y: f64) -> f64 {
        ScalarFn::parse(src).unwrap().eval(Point2::new(x, y))
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(eval("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(eval("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(eval("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(eval("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(eval("1.5e2 + 2E-1", 0.0, 0.0), 150.2);
    }

    #[test]
    fn variables_and_functions() {
        let v = eval("pi*(cos(pi*x) + cos(pi*y))", 0.25, 0.5);
        assert!((v - PI * ((PI * 0.25).cos() + (PI * 0.5).cos())).abs() < 1e-15);
        assert_eq!(eval("max(x, y) - min(x, y)", 3.0, 5.0), 2.0);
        assert_eq!(eval("abs(x) + sqrt(y)", -2.0, 9.0), 5.0);
        assert!((eval("ln(e)", 0.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn piecewise_permittivity() {
        assert_eq!(eval("if(x < 0.5, 1, 2)", 0.2, 0.0), 1.0);
        assert_eq!(eval("if(x < 0.5, 1, 2)", 0.5, 0.0), 2.0);
        assert_eq!(eval("1 + (x >= 0.5)", 0.7, 0.0), 2.0);
    }

    #[test]
    fn errors_are_reported() {
        for bad in ["", "1 +", "foo(1)", "sin(1, 2)", "(1", "x $ y", "1 2"] {
            assert!(ScalarFn::parse(bad).is_err(), "{bad}");
        }
    }
}
