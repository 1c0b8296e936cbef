//! A small arithmetic expression language for coefficient functions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | variable | func '(' sum (',' sum)* ')' | '(' sum ')'
//! ```
//!
//! Variables are `rho` (= |X|), the ambient coordinates `x1`, `x2`, `x3`,
//! and `u` (= x3/rho). Functions: `exp log sqrt sin cos abs` (one argument)
//! and `min max` (two arguments).

use std::fmt;

use thiserror::Error;

/// Byte range of a node in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Rho,
    X1,
    X2,
    X3,
    U,
}

impl Var {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "rho" => Var::Rho,
            "x1" => Var::X1,
            "x2" => Var::X2,
            "x3" => Var::X3,
            "u" => Var::U,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::Rho => "rho",
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::X3 => "x3",
            Var::U => "u",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Parsed expression. Equality is structural and ignores source spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Const(a), ExprKind::Const(b)) => a.to_bits() == b.to_bits(),
            (ExprKind::Var(a), ExprKind::Var(b)) => a == b,
            (ExprKind::Neg(a), ExprKind::Neg(b)) => a == b,
            (ExprKind::Binary(o1, l1, r1), ExprKind::Binary(o2, l2, r2)) => o1 == o2 && l1 == l2 && r1 == r2,
            (ExprKind::Call(f1, a1), ExprKind::Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

impl Expr {
    fn new(kind: ExprKind, span: Span) -> Self {
        Self { kind, span }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(ExprKind::Const(value), Span::default())
    }

    pub fn var(var: Var) -> Self {
        Self::new(ExprKind::Var(var), Span::default())
    }

    pub fn neg(inner: Expr) -> Self {
        Self::new(ExprKind::Neg(Box::new(inner)), Span::default())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Self::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), Span::default())
    }

    pub fn call(func: Func, args: Vec<Expr>) -> Self {
        Self::new(ExprKind::Call(func, args), Span::default())
    }

    /// Whether `var` occurs anywhere in the tree.
    pub fn uses(&self, var: Var) -> bool {
        match &self.kind {
            ExprKind::Const(_) => false,
            ExprKind::Var(v) => *v == var,
            ExprKind::Neg(e) => e.uses(var),
            ExprKind::Binary(_, l, r) => l.uses(var) || r.uses(var),
            ExprKind::Call(_, args) => args.iter().any(|a| a.uses(var)),
        }
    }
}

/// Canonical, fully parenthesized form; re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Const(c) => write!(f, "{c:?}"),
            ExprKind::Var(v) => f.write_str(v.name()),
            ExprKind::Neg(e) => write!(f, "(-{e})"),
            ExprKind::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            ExprKind::Call(func, args) => {
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

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable '{name}' at byte {offset}")]
    UnknownVariable { name: String, offset: usize },
    #[error("unknown function '{name}' at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("function '{name}' at byte {offset} takes {expected} argument(s), got {found}")]
    Arity {
        name: &'static str,
        offset: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogOfNonPositive,
    NonFinite,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{kind:?} in expression at bytes {}..{}", span.start, span.end)]
    Node { kind: EvalErrorKind, span: Span },
    #[error("inconsistent evaluation point: {0}")]
    Env(String),
}

/// Evaluation point X in R^3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalEnv {
    rho: f64,
    x: [f64; 3],
}

impl EvalEnv {
    /// Builds an environment from explicit values; requires rho > 0 and
    /// |x| = rho to 1e-12 relative.
    pub fn new(rho: f64, x: [f64; 3]) -> Result<Self, EvalError> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(EvalError::Env(format!("rho must be positive, got {rho}")));
        }
        let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if !((norm - rho).abs() <= 1e-12 * rho) {
            return Err(EvalError::Env(format!("|x| = {norm} differs from rho = {rho}")));
        }
        Ok(Self { rho, x })
    }

    /// X = rho·direction for a unit direction vector.
    pub fn on_ray(rho: f64, direction: [f64; 3]) -> Result<Self, EvalError> {
        Self::new(rho, direction.map(|d| rho * d))
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn position(&self) -> [f64; 3] {
        self.x
    }

    pub fn u(&self) -> f64 {
        self.x[2] / self.rho
    }

    /// Same direction, new radius.
    pub fn rescaled(&self, rho: f64) -> Result<Self, EvalError> {
        if !(rho > 0.0) {
            return Err(EvalError::Env(format!("rho must be positive, got {rho}")));
        }
        let s = rho / self.rho;
        Ok(Self {
            rho,
            x: self.x.map(|c| c * s),
        })
    }

    fn get(&self, var: Var) -> f64 {
        match var {
            Var::Rho => self.rho,
            Var::X1 => self.x[0],
            Var::X2 => self.x[1],
            Var::X3 => self.x[2],
            Var::U => self.u(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Ident,
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone, Copy)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal = &text[start..i];
            let value: f64 = literal.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number '{literal}'"),
            })?;
            if !value.is_finite() {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("number '{literal}' is not finite"),
                });
            }
            Tok::Num(value)
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident
        } else {
            i += 1;
            match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b',' => Tok::Comma,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or('?');
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("unexpected character '{ch}'"),
                    });
                }
            }
        };
        out.push(Token {
            tok,
            span: Span { start, end: i },
        });
    }
    out.push(Token {
        tok: Tok::End,
        span: Span {
            start: text.len(),
            end: text.len(),
        },
    });
    Ok(out)
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Token {
        self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos];
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, tok: Token, wanted: &str) -> ParseError {
        let found = match tok.tok {
            Tok::End => "end of input".to_string(),
            _ => format!("'{}'", &self.text[tok.span.start..tok.span.end]),
        };
        ParseError::Syntax {
            offset: tok.span.start,
            message: format!("expected {wanted}, found {found}"),
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            let span = Span {
                start: lhs.span.start,
                end: rhs.span.end,
            };
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            let span = Span {
                start: lhs.span.start,
                end: rhs.span.end,
            };
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek();
        if t.tok == Tok::Op('-') {
            self.bump();
            let inner = self.unary()?;
            let span = Span {
                start: t.span.start,
                end: inner.span.end,
            };
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            let span = Span {
                start: base.span.start,
                end: exponent.span.end,
            };
            return Ok(Expr::new(
                ExprKind::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)),
                span,
            ));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::new(ExprKind::Const(v), t.span)),
            Tok::LParen => {
                let inner = self.sum()?;
                let close = self.bump();
                if close.tok != Tok::RParen {
                    return Err(self.unexpected(close, "')'"));
                }
                Ok(Expr::new(
                    inner.kind,
                    Span {
                        start: t.span.start,
                        end: close.span.end,
                    },
                ))
            }
            Tok::Ident => {
                let name = &self.text[t.span.start..t.span.end];
                if self.peek().tok == Tok::LParen {
                    let func = Func::from_name(name).ok_or_else(|| ParseError::UnknownFunction {
                        name: name.to_string(),
                        offset: t.span.start,
                    })?;
                    self.bump();
                    let mut args = vec![self.sum()?];
                    loop {
                        let sep = self.bump();
                        match sep.tok {
                            Tok::Comma => args.push(self.sum()?),
                            Tok::RParen => {
                                if args.len() != func.arity() {
                                    return Err(ParseError::Arity {
                                        name: func.name(),
                                        offset: t.span.start,
                                        expected: func.arity(),
                                        found: args.len(),
                                    });
                                }
                                let span = Span {
                                    start: t.span.start,
                                    end: sep.span.end,
                                };
                                return Ok(Expr::new(ExprKind::Call(func, args), span));
                            }
                            _ => return Err(self.unexpected(sep, "',' or ')'")),
                        }
                    }
                }
                match Var::from_name(name) {
                    Some(v) => Ok(Expr::new(ExprKind::Var(v), t.span)),
                    None if Func::from_name(name).is_some() => Err(ParseError::Syntax {
                        offset: t.span.end,
                        message: format!("function '{name}' must be called with '('"),
                    }),
                    None => Err(ParseError::UnknownVariable {
                        name: name.to_string(),
                        offset: t.span.start,
                    }),
                }
            }
            _ => Err(self.unexpected(t, "a number, variable, function or '('")),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let tokens = lex(text)?;
    let mut parser = Parser { text, tokens, pos: 0 };
    let expr = parser.sum()?;
    let rest = parser.peek();
    if rest.tok != Tok::End {
        return Err(parser.unexpected(rest, "an operator or end of input"));
    }
    Ok(expr)
}

fn node_err(kind: EvalErrorKind, span: Span) -> EvalError {
    EvalError::Node { kind, span }
}

fn finite(value: f64, span: Span) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(node_err(EvalErrorKind::NonFinite, span))
    }
}

pub fn evaluate(expr: &Expr, env: &EvalEnv) -> Result<f64, EvalError> {
    let span = expr.span;
    match &expr.kind {
        ExprKind::Const(c) => Ok(*c),
        ExprKind::Var(v) => Ok(env.get(*v)),
        ExprKind::Neg(e) => Ok(-evaluate(e, env)?),
        ExprKind::Binary(op, l, r) => {
            let a = evaluate(l, env)?;
            let b = evaluate(r, env)?;
            let value = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(node_err(EvalErrorKind::DivisionByZero, span));
                    }
                    a / b
                }
                BinOp::Pow => {
                    // integer exponents stay exact for negative bases
                    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            };
            finite(value, span)
        }
        ExprKind::Call(func, args) => {
            let a = evaluate(&args[0], env)?;
            let value = match func {
                Func::Exp => a.exp(),
                Func::Log => {
                    if a <= 0.0 {
                        return Err(node_err(EvalErrorKind::LogOfNonPositive, span));
                    }
                    a.ln()
                }
                Func::Sqrt => a.sqrt(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Abs => a.abs(),
                Func::Min => a.min(evaluate(&args[1], env)?),
                Func::Max => a.max(evaluate(&args[1], env)?),
            };
            finite(value, span)
        }
    }
}

/// Central difference of `expr` along the ray through `env`:
/// (f(ρ+h) - f(ρ-h)) / 2h with the direction held fixed.
pub fn radial_derivative(expr: &Expr, env: &EvalEnv, h: f64) -> Result<f64, EvalError> {
    if !(h > 0.0) || env.rho() - h <= 0.0 {
        return Err(EvalError::Env(format!(
            "step h = {h} must be positive and smaller than rho = {}",
            env.rho()
        )));
    }
    let up = env.rescaled(env.rho() + h)?;
    let down = env.rescaled(env.rho() - h)?;
    Ok((evaluate(expr, &up)? - evaluate(expr, &down)?) / (2.0 * h))
}
