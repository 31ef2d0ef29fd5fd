//! A small arithmetic language for sources and cost integrands.
//!
//! Precedence, tightest first: `^` (right associative), unary minus,
//! `* /`, `+ -` (left associative). Variables are `x`, `y`, `u`, `zx`,
//! `zy`; `pi` is a constant.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    /// `position` is the 1-based character column.
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0} produced a non-finite value")]
    Domain(&'static str),
    #[error("cannot differentiate {0}")]
    NotDifferentiable(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    U,
    Zx,
    Zy,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::U => "u",
            Var::Zx => "zx",
            Var::Zy => "zy",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "x" => Var::X,
            "y" => Var::Y,
            "u" => Var::U,
            "zx" => Var::Zx,
            "zy" => Var::Zy,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Values of the variables at one evaluation point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Env {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub zx: f64,
    pub zy: f64,
}

impl Env {
    fn get(&self, v: Var) -> f64 {
        match v {
            Var::X => self.x,
            Var::Y => self.y,
            Var::U => self.u,
            Var::Zx => self.zx,
            Var::Zy => self.zy,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
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
            let v = text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ExprError::Syntax {
                    position: pos,
                    message: format!("malformed number `{text}`"),
                })?;
            out.push((Tok::Num(v), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(ExprError::Syntax {
                        position: pos,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push((tok, pos));
            i += 1;
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            position: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(v) = Var::from_name(&name) {
                    return Ok(Expr::Var(v));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                let Some(f) = Func::from_name(&name) else {
                    return Err(ExprError::UnknownIdentifier {
                        name,
                        position: pos,
                    });
                };
                self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                let mut args = vec![self.sum()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.sum()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                if args.len() != f.arity() {
                    return Err(ExprError::Syntax {
                        position: pos,
                        message: format!(
                            "`{name}` takes {} argument(s), got {}",
                            f.arity(),
                            args.len()
                        ),
                    });
                }
                Ok(Expr::Call(f, args))
            }
            Tok::End => {
                self.at = self.toks.len() - 1;
                self.error("unexpected end of input")
            }
            other => {
                self.at -= 1;
                let shown = match other {
                    Tok::Op(c) => c.to_string(),
                    Tok::RParen => ")".into(),
                    Tok::Comma => ",".into(),
                    _ => "token".into(),
                };
                self.error(format!("unexpected `{shown}`"))
            }
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, at: 0 };
    if *p.peek() == Tok::End {
        return p.error("empty expression");
    }
    let e = p.sum()?;
    if *p.peek() != Tok::End {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

// Binding strength used by the printer; atoms bind tightest.
fn level(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
        _ => 5,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if level(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if v.is_sign_negative() {
                    write!(f, "-{}", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_at(f, a, 3)
            }
            Expr::Bin(op, a, b) => {
                let (sym, lhs_min, rhs_min) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                    BinOp::Pow => ("^", 5, 3),
                };
                write_at(f, a, lhs_min)?;
                f.write_str(sym)?;
                write_at(f, b, rhs_min)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn finite(v: f64, what: &'static str) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::Domain(what))
    }
}

impl Expr {
    pub fn eval(&self, env: &Env) -> Result<f64, ExprError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(v) => Ok(env.get(*v)),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div if b == 0.0 => Err(ExprError::DivisionByZero),
                    BinOp::Div => Ok(a / b),
                    BinOp::Pow => finite(a.powf(b), "^"),
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(env)?;
                match func {
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Exp => finite(a.exp(), "exp"),
                    Func::Abs => Ok(a.abs()),
                    Func::Sqrt => finite(a.sqrt(), "sqrt"),
                    Func::Min => Ok(a.min(args[1].eval(env)?)),
                    Func::Max => Ok(a.max(args[1].eval(env)?)),
                }
            }
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) => a.depends_on(var),
            Expr::Bin(_, a, b) => a.depends_on(var) || b.depends_on(var),
            Expr::Call(_, args) => args.iter().any(|a| a.depends_on(var)),
        }
    }

    /// Symbolic partial derivative, lightly simplified.
    pub fn derivative(&self, var: Var) -> Result<Expr, ExprError> {
        if !self.depends_on(var) {
            return Ok(num(0.0));
        }
        Ok(match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(v) => num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(var)?),
            Expr::Bin(op, a, b) => {
                let (da, db) = (a.derivative(var)?, b.derivative(var)?);
                let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b), mul(a, db)),
                    BinOp::Div => div(sub(mul(da, b.clone()), mul(a, db)), pow(b, num(2.0))),
                    BinOp::Pow => {
                        if b.depends_on(var) {
                            return Err(ExprError::NotDifferentiable(format!(
                                "`{self}`: the exponent depends on {}",
                                var.name()
                            )));
                        }
                        mul(mul(b.clone(), pow(a, sub(b, num(1.0)))), da)
                    }
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].clone();
                let da = a.derivative(var)?;
                match func {
                    Func::Sin => mul(call(Func::Cos, a), da),
                    Func::Cos => neg(mul(call(Func::Sin, a), da)),
                    Func::Exp => mul(call(Func::Exp, a), da),
                    Func::Abs => mul(div(a.clone(), call(Func::Abs, a)), da),
                    Func::Sqrt => div(da, mul(num(2.0), call(Func::Sqrt, a))),
                    // min(a, b) = (a + b − |a − b|)/2, max with a plus sign
                    Func::Min | Func::Max => {
                        let b = args[1].clone();
                        let d = Expr::Bin(BinOp::Sub, Box::new(a.clone()), Box::new(b.clone()));
                        let half =
                            Expr::Bin(BinOp::Div, Box::new(call(Func::Abs, d)), Box::new(num(2.0)));
                        let mid = Expr::Bin(
                            BinOp::Div,
                            Box::new(Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))),
                            Box::new(num(2.0)),
                        );
                        let op = if *func == Func::Min {
                            BinOp::Sub
                        } else {
                            BinOp::Add
                        };
                        Expr::Bin(op, Box::new(mid), Box::new(half)).derivative(var)?
                    }
                }
            }
        })
    }
}

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, vec![a])
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(0.0) => num(0.0),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        b
    } else if is_num(&b, 0.0) {
        a
    } else {
        Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        a
    } else if is_num(&a, 0.0) {
        neg(b)
    } else {
        Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        num(0.0)
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 1.0) {
        a
    } else if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
        let v = x.powf(*y);
        if v.is_finite() && v >= 0.0 {
            return num(v);
        }
        Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b))
    } else if let Expr::Bin(BinOp::Sub, c, one) = &b {
        // fold the constant exponent of a power rule
        if let (Expr::Num(c), Expr::Num(o)) = (c.as_ref(), one.as_ref()) {
            let e = c - o;
            if e == 0.0 {
                return num(1.0);
            }
            if e == 1.0 {
                return a;
            }
            if e > 0.0 {
                return Expr::Bin(BinOp::Pow, Box::new(a), Box::new(num(e)));
            }
            return Expr::Bin(BinOp::Pow, Box::new(a), Box::new(neg(num(-e))));
        }
        Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b))
    } else {
        Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64) -> Env {
        Env {
            x,
            y,
            ..Env::default()
        }
    }

    #[test]
    fn constant_and_arithmetic() {
        assert_eq!(parse("1").unwrap().eval(&at(0.3, 0.7)).unwrap(), 1.0);
        let e = parse("x*x + y*y").unwrap();
        assert_eq!(e.eval(&at(0.5, 0.5)).unwrap(), 0.5);
    }

    #[test]
    fn dangling_operator_reports_position() {
        assert_eq!(
            parse("2*x + -"),
            Err(ExprError::Syntax {
                position: 8,
                message: "unexpected end of input".into()
            })
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let e = |s: &str| parse(s).unwrap().eval(&at(2.0, 3.0)).unwrap();
        assert_eq!(e("-x^2"), -4.0);
        assert_eq!(e("2^3^2"), 512.0);
        assert_eq!(e("8 - 3 - 2"), 3.0);
        assert_eq!(e("8/4/2"), 1.0);
        assert_eq!(e("x + y*2"), 8.0);
        assert_eq!(e("x^-1"), 0.5);
        assert_eq!(e("-x*y"), -6.0);
        assert_eq!(e("min(x, y) + max(x, y)"), 5.0);
    }

    #[test]
    fn unknown_identifier() {
        assert_eq!(
            parse("x + w"),
            Err(ExprError::UnknownIdentifier {
                name: "w".into(),
                position: 5
            })
        );
        assert!(matches!(
            parse("foo(x)"),
            Err(ExprError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn malformed_inputs() {
        for s in ["", "(x", "x)", "sin x", "min(x)", "2 3", "x $ y", "1..2"] {
            assert!(matches!(parse(s), Err(ExprError::Syntax { .. })), "{s}");
        }
    }

    #[test]
    fn division_by_zero_fails_at_evaluation() {
        let e = parse("1/(x - 2)").unwrap();
        assert_eq!(e.eval(&at(2.0, 0.0)), Err(ExprError::DivisionByZero));
        assert_eq!(e.eval(&at(3.0, 0.0)), Ok(1.0));
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "-x^2",
            "(-x)^2",
            "2^3^2",
            "(2^3)^2",
            "x - (y - u)",
            "x/(y*u)",
            "-(x + y)",
            "--x",
            "sin(x)^2 + cos(-y)*exp(zx/zy)",
            "x^-u^2",
            "min(x, 1e-3)*2.5e10",
        ] {
            let e = parse(s).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{s} -> {printed}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let env = Env {
            x: 0.3,
            y: -0.7,
            u: 1.3,
            zx: 0.4,
            zy: -0.2,
        };
        for s in [
            "u*x^2",
            "(zx^2 + zy^2)^1.5/3",
            "sin(u*y) - cos(zx)/exp(x)",
            "sqrt(1 + u^2)*abs(zy)",
            "min(u, zx) + max(x*u, 2)",
            "u/(1 + x^2)",
            "-u^3",
        ] {
            let e = parse(s).unwrap();
            for var in [Var::X, Var::U, Var::Zx, Var::Zy] {
                let d = e.derivative(var).unwrap().eval(&env).unwrap();
                let h = 1e-6;
                let mut plus = env;
                let mut minus = env;
                let bump = |env: &mut Env, dv: f64| match var {
                    Var::X => env.x += dv,
                    Var::Y => env.y += dv,
                    Var::U => env.u += dv,
                    Var::Zx => env.zx += dv,
                    Var::Zy => env.zy += dv,
                };
                bump(&mut plus, h);
                bump(&mut minus, -h);
                let fd = (e.eval(&plus).unwrap() - e.eval(&minus).unwrap()) / (2.0 * h);
                assert!(
                    (d - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                    "{s} d/{var:?}: {d} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn variable_exponent_is_rejected() {
        let e = parse("x^u").unwrap();
        assert!(e.derivative(Var::X).is_ok());
        assert!(matches!(
            e.derivative(Var::U),
            Err(ExprError::NotDifferentiable(_))
        ));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn expr() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                (0.0f64..1e6).prop_map(Expr::Num),
                prop_oneof![
                    Just(Var::X),
                    Just(Var::Y),
                    Just(Var::U),
                    Just(Var::Zx),
                    Just(Var::Zy)
                ]
                .prop_map(Expr::Var),
            ];
            leaf.prop_recursive(5, 48, 2, |inner| {
                let op = prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow)
                ];
                let unary = prop_oneof![
                    Just(Func::Sin),
                    Just(Func::Cos),
                    Just(Func::Exp),
                    Just(Func::Abs),
                    Just(Func::Sqrt)
                ];
                let binary = prop_oneof![Just(Func::Min), Just(Func::Max)];
                prop_oneof![
                    inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                    (op, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::Bin(
                        op,
                        Box::new(a),
                        Box::new(b)
                    )),
                    (unary, inner.clone()).prop_map(|(f, a)| Expr::Call(f, vec![a])),
                    (binary, inner.clone(), inner).prop_map(|(f, a, b)| Expr::Call(f, vec![a, b])),
                ]
            })
        }

        proptest! {
            #[test]
            fn parse_inverts_print(e in expr()) {
                let printed = e.to_string();
                prop_assert_eq!(parse(&printed).unwrap(), e, "{}", printed);
            }
        }
    }
}
