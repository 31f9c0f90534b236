//! Small arithmetic expression language for boundary data and initial fields.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := or
//! or      := and ("or" and)*
//! and     := cmp ("and" cmp)*
//! cmp     := sum (("<" | "<=" | ">" | ">=" | "==" | "!=") sum)?
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := ("-" | "+" | "not") unary | power
//! power   := atom ("^" unary)?
//! atom    := number | variable | name "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Variables are `x`, `y` and `seg` (boundary segment label); `pi` is a
//! constant. Comparisons and logic evaluate to 1 or 0, and
//! `if(cond, a, b)` selects on `cond != 0`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Vars {
    pub x: f64,
    pub y: f64,
    pub seg: f64,
}

impl Vars {
    pub fn at(x: f64, y: f64) -> Self {
        Vars { x, y, seg: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    X,
    Y,
    Seg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Floor,
    Tanh,
    Cosh,
    Sinh,
    Min,
    Max,
    If,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "floor" => Func::Floor,
            "tanh" => Func::Tanh,
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            "min" => Func::Min,
            "max" => Func::Max,
            "if" => Func::If,
            _ => return None,
        })
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Func::Min | Func::Max => n >= 2,
            Func::If => n == 3,
            _ => n == 1,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Not(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with its source text.
#[derive(Clone)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, source };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr { source: source.to_string(), root })
    }

    pub fn constant(value: f64) -> Expr {
        Expr { source: format_number(value), root: Node::Num(value) }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, vars: Vars) -> f64 {
        eval(&self.root, &vars)
    }

    pub fn eval_xy(&self, x: f64, y: f64) -> f64 {
        self.eval(Vars::at(x, y))
    }

    /// Evaluates and rejects non-finite results.
    pub fn eval_checked(&self, vars: Vars) -> Result<f64> {
        let v = self.eval(vars);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!(
                "expression `{}` is not finite at (x={}, y={}, seg={})",
                self.source, vars.x, vars.y, vars.seg
            )))
        }
    }
}

fn format_number(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('e') || s.contains('.') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn truth(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn eval(node: &Node, v: &Vars) -> f64 {
    match node {
        Node::Num(c) => *c,
        Node::Var(Var::X) => v.x,
        Node::Var(Var::Y) => v.y,
        Node::Var(Var::Seg) => v.seg,
        Node::Neg(a) => -eval(a, v),
        Node::Not(a) => truth(eval(a, v) == 0.0),
        Node::Bin(op, a, b) => {
            let l = eval(a, v);
            // short-circuit logic
            match op {
                BinOp::And => return truth(l != 0.0 && eval(b, v) != 0.0),
                BinOp::Or => return truth(l != 0.0 || eval(b, v) != 0.0),
                _ => {}
            }
            let r = eval(b, v);
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => l / r,
                BinOp::Pow => pow(l, r),
                BinOp::Lt => truth(l < r),
                BinOp::Le => truth(l <= r),
                BinOp::Gt => truth(l > r),
                BinOp::Ge => truth(l >= r),
                BinOp::Eq => truth(l == r),
                BinOp::Ne => truth(l != r),
                BinOp::And | BinOp::Or => unreachable!(),
            }
        }
        Node::Call(Func::If, args) => {
            if eval(&args[0], v) != 0.0 {
                eval(&args[1], v)
            } else {
                eval(&args[2], v)
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], v);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Floor => a.floor(),
                Func::Tanh => a.tanh(),
                Func::Cosh => a.cosh(),
                Func::Sinh => a.sinh(),
                Func::Min => args[1..].iter().fold(a, |m, e| m.min(eval(e, v))),
                Func::Max => args[1..].iter().fold(a, |m, e| m.max(eval(e, v))),
                Func::If => unreachable!(),
            }
        }
    }
}

/// Integer exponents use repeated multiplication so that polynomial data is exact.
fn pow(base: f64, exp: f64) -> f64 {
    if exp.fract() == 0.0 && exp.abs() <= 64.0 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
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
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Config(format!("bad number `{text}` in expression `{src}`")))?;
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        let two = src.get(i..i + 2).unwrap_or("");
        let op: Option<&'static str> = match two {
            "<=" => Some("<="),
            ">=" => Some(">="),
            "==" => Some("=="),
            "!=" => Some("!="),
            "&&" => Some("and"),
            "||" => Some("or"),
            "**" => Some("^"),
            _ => None,
        };
        if let Some(op) = op {
            out.push((Tok::Op(op), start));
            i += 2;
            continue;
        }
        let tok = match c {
            '+' => Tok::Op("+"),
            '-' => Tok::Op("-"),
            '*' => Tok::Op("*"),
            '/' => Tok::Op("/"),
            '^' => Tok::Op("^"),
            '<' => Tok::Op("<"),
            '>' => Tok::Op(">"),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => return Err(Error::Config(format!("unexpected character `{c}` at offset {i} in `{src}`"))),
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    source: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let at = self.tokens.get(self.pos).map(|t| t.1).unwrap_or(self.source.len());
        Error::Config(format!("{msg} at offset {at} in expression `{}`", self.source))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn peek_op(&self) -> Option<&'static str> {
        match self.peek() {
            Some(Tok::Op(op)) => Some(op),
            Some(Tok::Ident(w)) if w == "and" => Some("and"),
            Some(Tok::Ident(w)) if w == "or" => Some("or"),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Node> {
        self.or()
    }

    fn or(&mut self) -> Result<Node> {
        let mut lhs = self.and()?;
        while self.peek_op() == Some("or") {
            self.pos += 1;
            lhs = Node::Bin(BinOp::Or, Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Node> {
        let mut lhs = self.cmp()?;
        while self.peek_op() == Some("and") {
            self.pos += 1;
            lhs = Node::Bin(BinOp::And, Box::new(lhs), Box::new(self.cmp()?));
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<Node> {
        let lhs = self.sum()?;
        let op = match self.peek_op() {
            Some("<") => BinOp::Lt,
            Some("<=") => BinOp::Le,
            Some(">") => BinOp::Gt,
            Some(">=") => BinOp::Ge,
            Some("==") => BinOp::Eq,
            Some("!=") => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        Ok(Node::Bin(op, Box::new(lhs), Box::new(self.sum()?)))
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek_op() {
                Some("+") => BinOp::Add,
                Some("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_op() {
                Some("*") => BinOp::Mul,
                Some("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op("-")) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op("+")) => {
                self.pos += 1;
                self.unary()
            }
            Some(Tok::Ident(w)) if w == "not" => {
                self.pos += 1;
                Ok(Node::Not(Box::new(self.unary()?)))
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_op() == Some("^") {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.peek().cloned().ok_or_else(|| self.error("unexpected end of expression"))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    let f = Func::lookup(&name).ok_or_else(|| {
                        self.pos -= 1;
                        self.error(&format!("unknown function `{name}`"))
                    })?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    if !f.arity_ok(args.len()) {
                        return Err(self.error(&format!("wrong number of arguments to `{name}`")));
                    }
                    return Ok(Node::Call(f, args));
                }
                match name.as_str() {
                    "x" => Ok(Node::Var(Var::X)),
                    "y" => Ok(Node::Var(Var::Y)),
                    "seg" => Ok(Node::Var(Var::Seg)),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    _ => {
                        self.pos -= 1;
                        Err(self.error(&format!("unknown variable `{name}`")))
                    }
                }
            }
            _ => {
                self.pos -= 1;
                Err(self.error("unexpected token"))
            }
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected {tok:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        Expr::parse(s).unwrap().eval_xy(x, y)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("8 / 2 / 2", 0.0, 0.0), 2.0);
        assert_eq!(ev("1 < 2 and 3 > 4 or 1", 0.0, 0.0), 1.0);
        assert_eq!(ev("not (x < 0.5)", 0.7, 0.0), 1.0);
    }

    #[test]
    fn benchmark_shapes() {
        let s = "if(x < 0.5 or x > 3.625, 1, 1 - (0.5*cos(4*pi*x)*cos(2*pi*y + pi/2) + 0.15))";
        assert_eq!(ev(s, 0.2, 0.3), 1.0);
        let v = ev(s, 1.0, 0.25);
        let expected = 1.0 - (0.5 * (4.0 * std::f64::consts::PI).cos() * (std::f64::consts::PI).cos() + 0.15);
        assert!((v - expected).abs() < 1e-15);
        assert!((ev("min(abs(y-0.35)-0.15, abs(y+0.35)-0.15)", 0.0, 0.0) - 0.2).abs() < 1e-15);
        assert_eq!(ev("if(y >= 0.5, 1, 0)", 0.0, 0.5), 1.0);
        assert!((ev("1.5e-3 * 2E2", 0.0, 0.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn errors_are_reported() {
        for bad in ["1 +", "foo(1)", "z + 1", "(1", "1 2", "max(1)", "if(1,2)", "3 $ 4"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
        let e = Expr::parse("log(x)").unwrap();
        assert!(e.eval_checked(Vars::at(-1.0, 0.0)).is_err());
    }
}
