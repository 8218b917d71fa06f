//! A small arithmetic expression language for bound functions and test functions.
//!
//! Grammar (standard precedence, unary minus binds tightest):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers are `t1, t2, ...` (earlier weight coordinates), `d1, d2, ...`
//! (rectangle coordinates of a transform), `x` and `y` (test-function
//! arguments), `m` and `i` (sequence index and state index), and the constant
//! `pi`. Functions: `sqrt`, `abs`, `sin`, `cos` (one argument), `min`, `max`
//! (two or more). Which variables are legal depends on the [`Scope`] the text
//! is parsed under.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// `tk`, the k-th weight coordinate (1-based).
    Theta(usize),
    /// `dk`, the k-th rectangle coordinate of a transform (1-based).
    Delta(usize),
    X,
    Y,
    M,
    I,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Abs,
    Sin,
    Cos,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Func::Min | Func::Max => n >= 2,
            _ => n == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Which variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Scope {
    /// `tk` is legal iff `k < theta_limit`.
    pub theta_limit: usize,
    /// `dk` is legal iff `k <= delta_limit`.
    pub delta_limit: usize,
    pub x: bool,
    pub y: bool,
    pub m: bool,
    pub i: bool,
}

impl Scope {
    /// Bound expressions for coordinate `index`: may read `t1 .. t{index-1}`.
    pub fn bound(max_prefix_index: usize) -> Self {
        Scope {
            theta_limit: max_prefix_index,
            ..Scope::default()
        }
    }

    /// Forward maps of a transform over a `dims`-dimensional rectangle.
    pub fn transform(dims: usize) -> Self {
        Scope {
            delta_limit: dims,
            ..Scope::default()
        }
    }

    pub fn univariate() -> Self {
        Scope {
            x: true,
            ..Scope::default()
        }
    }

    pub fn bivariate() -> Self {
        Scope {
            x: true,
            y: true,
            ..Scope::default()
        }
    }

    /// Sequence rules: `m` (index), `i` (state), `x` (limit value at the state).
    pub fn sequence() -> Self {
        Scope {
            x: true,
            m: true,
            i: true,
            ..Scope::default()
        }
    }

    fn allows(&self, v: Var) -> bool {
        match v {
            Var::Theta(k) => k >= 1 && k < self.theta_limit,
            Var::Delta(k) => k >= 1 && k <= self.delta_limit,
            Var::X => self.x,
            Var::Y => self.y,
            Var::M => self.m,
            Var::I => self.i,
        }
    }
}

/// Variable bindings for evaluation. Indexed variables (`tk` or `dk`) read
/// `indexed[k - 1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub indexed: &'a [f64],
    pub x: f64,
    pub y: f64,
    pub m: f64,
    pub i: f64,
}

/// A parsed, immutable expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

/// Affine form `constant + sum_k coeffs[k] * t{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl Affine {
    fn constant(dims: usize, c: f64) -> Self {
        Affine {
            coeffs: vec![0.0; dims],
            constant: c,
        }
    }

    fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn scale(mut self, s: f64) -> Self {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
        self.constant *= s;
        self
    }

    fn combine(mut self, other: &Affine, sign: f64) -> Self {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += sign * o;
        }
        self.constant += sign * other.constant;
        self
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.constant
            + self
                .coeffs
                .iter()
                .zip(theta)
                .map(|(c, t)| c * t)
                .sum::<f64>()
    }
}

/// Parses `text` as a bound expression that may reference `t1 .. t{max_prefix_index-1}`.
pub fn parse_expr(text: &str, max_prefix_index: usize) -> Result<Expr> {
    Expr::parse(text, Scope::bound(max_prefix_index))
}

/// Evaluates a bound expression on the given prefix of weights.
pub fn eval_expr(e: &Expr, prefix: &[f64]) -> Result<f64> {
    e.eval_prefix(prefix)
}

impl Expr {
    pub fn parse(text: &str, scope: Scope) -> Result<Expr> {
        if text.trim().is_empty() {
            return Err(Error::Syntax {
                pos: 0,
                message: "empty expression".into(),
            });
        }
        let tokens = lex(text)?;
        let mut p = Parser {
            tokens,
            at: 0,
            scope,
            end: text.len(),
        };
        let root = p.expr()?;
        if let Some(tok) = p.peek() {
            return Err(Error::Syntax {
                pos: tok.pos,
                message: format!("unexpected {}", tok.kind.describe()),
            });
        }
        Ok(Expr {
            root,
            source: text.to_string(),
        })
    }

    pub fn constant(c: f64) -> Expr {
        let root = Node::Num(c);
        let source = render(&root, 0);
        Expr { root, source }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// The text this expression was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, env: &Env<'_>) -> Result<f64> {
        let v = eval_node(&self.root, env)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("`{}` evaluated to {v}", self.source)))
        }
    }

    pub fn eval_prefix(&self, prefix: &[f64]) -> Result<f64> {
        self.eval(&Env {
            indexed: prefix,
            ..Env::default()
        })
    }

    pub fn eval_x(&self, x: f64) -> Result<f64> {
        self.eval(&Env {
            x,
            ..Env::default()
        })
    }

    pub fn eval_xy(&self, x: f64, y: f64) -> Result<f64> {
        self.eval(&Env {
            x,
            y,
            ..Env::default()
        })
    }

    /// Largest `k` among referenced `tk` (0 if none).
    pub fn max_theta_index(&self) -> usize {
        let mut best = 0;
        visit_vars(&self.root, &mut |v| {
            if let Var::Theta(k) = v {
                best = best.max(k);
            }
        });
        best
    }

    /// Largest `k` among referenced `dk` (0 if none).
    pub fn max_delta_index(&self) -> usize {
        let mut best = 0;
        visit_vars(&self.root, &mut |v| {
            if let Var::Delta(k) = v {
                best = best.max(k);
            }
        });
        best
    }

    pub fn references(&self, var: Var) -> bool {
        let mut found = false;
        visit_vars(&self.root, &mut |v| found |= v == var);
        found
    }

    pub fn is_constant(&self) -> bool {
        let mut any = false;
        visit_vars(&self.root, &mut |_| any = true);
        !any
    }

    /// Affine form over `t1 .. t{dims}` if the expression is affine in the
    /// weight variables, `None` otherwise.
    pub fn affine_form(&self, dims: usize) -> Option<Affine> {
        affine(&self.root, dims)
    }
}

impl fmt::Display for Expr {
    /// Canonical form: minimal parentheses, shortest round-trip literals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(&self.root, 0))
    }
}

fn visit_vars(node: &Node, f: &mut impl FnMut(Var)) {
    match node {
        Node::Num(_) | Node::Pi => {}
        Node::Var(v) => f(*v),
        Node::Neg(a) => visit_vars(a, f),
        Node::Bin(_, a, b) => {
            visit_vars(a, f);
            visit_vars(b, f);
        }
        Node::Call(_, args) => args.iter().for_each(|a| visit_vars(a, f)),
    }
}

fn eval_node(node: &Node, env: &Env<'_>) -> Result<f64> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Pi => std::f64::consts::PI,
        Node::Var(v) => match *v {
            Var::Theta(k) | Var::Delta(k) => *env.indexed.get(k - 1).ok_or_else(|| {
                Error::Domain(format!(
                    "variable index {k} not bound (only {} values supplied)",
                    env.indexed.len()
                ))
            })?,
            Var::X => env.x,
            Var::Y => env.y,
            Var::M => env.m,
            Var::I => env.i,
        },
        Node::Neg(a) => -eval_node(a, env)?,
        Node::Bin(op, a, b) => {
            let l = eval_node(a, env)?;
            let r = eval_node(b, env)?;
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r == 0.0 {
                        return Err(Error::Domain("division by zero".into()));
                    }
                    l / r
                }
            }
        }
        Node::Call(func, args) => {
            let first = eval_node(&args[0], env)?;
            match func {
                Func::Sqrt => {
                    if first < 0.0 {
                        return Err(Error::Domain(format!("sqrt of negative value {first}")));
                    }
                    first.sqrt()
                }
                Func::Abs => first.abs(),
                Func::Sin => first.sin(),
                Func::Cos => first.cos(),
                Func::Min | Func::Max => {
                    let mut acc = first;
                    for a in &args[1..] {
                        let v = eval_node(a, env)?;
                        acc = if *func == Func::Min { acc.min(v) } else { acc.max(v) };
                    }
                    acc
                }
            }
        }
    })
}

fn affine(node: &Node, dims: usize) -> Option<Affine> {
    match node {
        Node::Num(v) => Some(Affine::constant(dims, *v)),
        Node::Pi => Some(Affine::constant(dims, std::f64::consts::PI)),
        Node::Var(Var::Theta(k)) => {
            if *k > dims {
                return None;
            }
            let mut a = Affine::constant(dims, 0.0);
            a.coeffs[k - 1] = 1.0;
            Some(a)
        }
        Node::Var(_) => None,
        Node::Neg(a) => Some(affine(a, dims)?.scale(-1.0)),
        Node::Bin(op, a, b) => {
            let l = affine(a, dims)?;
            let r = affine(b, dims)?;
            match op {
                BinOp::Add => Some(l.combine(&r, 1.0)),
                BinOp::Sub => Some(l.combine(&r, -1.0)),
                BinOp::Mul if l.is_constant() => Some(r.scale(l.constant)),
                BinOp::Mul if r.is_constant() => Some(l.scale(r.constant)),
                BinOp::Div if r.is_constant() && r.constant != 0.0 => {
                    Some(l.scale(1.0 / r.constant))
                }
                _ => None,
            }
        }
        Node::Call(..) => {
            let mut has_var = false;
            visit_vars(node, &mut |_| has_var = true);
            if has_var {
                return None;
            }
            let v = eval_node(node, &Env::default()).ok()?;
            v.is_finite().then(|| Affine::constant(dims, v))
        }
    }
}

// Printing precedence levels.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 4;

fn prec(node: &Node) -> u8 {
    match node {
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
        Node::Neg(_) => PREC_UNARY,
        _ => PREC_ATOM,
    }
}

fn render(node: &Node, min_prec: u8) -> String {
    let s = match node {
        Node::Num(v) => format!("{v}"),
        Node::Pi => "pi".to_string(),
        Node::Var(v) => match v {
            Var::Theta(k) => format!("t{k}"),
            Var::Delta(k) => format!("d{k}"),
            Var::X => "x".into(),
            Var::Y => "y".into(),
            Var::M => "m".into(),
            Var::I => "i".into(),
        },
        Node::Neg(a) => format!("-{}", render(a, PREC_UNARY)),
        Node::Bin(op, a, b) => {
            let p = prec(node);
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
            };
            // Left-associative: the right operand needs parentheses at equal precedence.
            format!("{} {sym} {}", render(a, p), render(b, p + 1))
        }
        Node::Call(f, args) => {
            let inner: Vec<String> = args.iter().map(|a| render(a, 0)).collect();
            format!("{}({})", f.name(), inner.join(", "))
        }
    };
    if prec(node) < min_prec {
        format!("({s})")
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Num(v) => format!("number {v}"),
            TokKind::Ident(s) => format!("identifier `{s}`"),
            TokKind::Plus => "'+'".into(),
            TokKind::Minus => "'-'".into(),
            TokKind::Star => "'*'".into(),
            TokKind::Slash => "'/'".into(),
            TokKind::LParen => "'('".into(),
            TokKind::RParen => "')'".into(),
            TokKind::Comma => "','".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => TokKind::Plus,
            b'-' => TokKind::Minus,
            b'*' => TokKind::Star,
            b'/' => TokKind::Slash,
            b'(' => TokKind::LParen,
            b')' => TokKind::RParen,
            b',' => TokKind::Comma,
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
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| Error::Syntax {
                    pos: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Syntax {
                        pos: start,
                        message: format!("number `{lit}` out of range"),
                    });
                }
                out.push(Token {
                    kind: TokKind::Num(v),
                    pos: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: TokKind::Ident(text[start..i].to_string()),
                    pos: start,
                });
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    pos: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push(Token { kind, pos: start });
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    scope: Scope,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn eat(&mut self, kind: &TokKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokKind) -> Result<()> {
        match self.next() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => Err(Error::Syntax {
                pos: t.pos,
                message: format!("expected {}, found {}", kind.describe(), t.kind.describe()),
            }),
            None => Err(Error::Syntax {
                pos: self.end,
                message: format!("expected {}, found end of input", kind.describe()),
            }),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokKind::Plus) => BinOp::Add,
                Some(TokKind::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.at += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokKind::Star) => BinOp::Mul,
                Some(TokKind::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.at += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(&TokKind::Minus) {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node> {
        let tok = self.next().ok_or_else(|| Error::Syntax {
            pos: self.end,
            message: "unexpected end of input".into(),
        })?;
        match tok.kind {
            TokKind::Num(v) => Ok(Node::Num(v)),
            TokKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokKind::RParen)?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                if self.peek().map(|t| &t.kind) == Some(&TokKind::LParen) {
                    let func = Func::from_name(&name).ok_or_else(|| Error::Syntax {
                        pos: tok.pos,
                        message: format!("unknown function `{name}`"),
                    })?;
                    self.at += 1;
                    let mut args = vec![self.expr()?];
                    while self.eat(&TokKind::Comma) {
                        args.push(self.expr()?);
                    }
                    self.expect(TokKind::RParen)?;
                    if !func.arity_ok(args.len()) {
                        return Err(Error::Syntax {
                            pos: tok.pos,
                            message: format!("wrong number of arguments to `{name}`"),
                        });
                    }
                    return Ok(Node::Call(func, args));
                }
                if name == "pi" {
                    return Ok(Node::Pi);
                }
                let var = parse_var(&name).ok_or_else(|| Error::Syntax {
                    pos: tok.pos,
                    message: format!("unknown identifier `{name}`"),
                })?;
                if !self.scope.allows(var) {
                    return Err(Error::VariableOutOfScope {
                        name,
                        pos: tok.pos,
                    });
                }
                Ok(Node::Var(var))
            }
            other => Err(Error::Syntax {
                pos: tok.pos,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }
}

fn parse_var(name: &str) -> Option<Var> {
    match name {
        "x" => return Some(Var::X),
        "y" => return Some(Var::Y),
        "m" => return Some(Var::M),
        "i" => return Some(Var::I),
        _ => {}
    }
    let (head, digits) = name.split_at(1);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let k: usize = digits.parse().ok()?;
    match head {
        "t" => Some(Var::Theta(k)),
        "d" => Some(Var::Delta(k)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_affine_bound() {
        let e = parse_expr("0.5 - t1", 2).unwrap();
        assert_eq!(
            e.root(),
            &Node::Bin(
                BinOp::Sub,
                Box::new(Node::Num(0.5)),
                Box::new(Node::Var(Var::Theta(1)))
            )
        );
        assert_eq!(eval_expr(&e, &[0.3]).unwrap(), 0.5 - 0.3);
    }

    #[test]
    fn parses_circle_bound() {
        let e = parse_expr("sqrt(t1*(0.5-t1)) + 0.25", 2).unwrap();
        let v = e.eval_prefix(&[0.25]).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(e.to_string(), "sqrt(t1 * (0.5 - t1)) + 0.25");
    }

    #[test]
    fn rejects_double_plus_at_second_operator() {
        match parse_expr("0.5 + + t1", 2) {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 6),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_scope_variables() {
        assert!(matches!(
            parse_expr("t2 + 1", 2),
            Err(Error::VariableOutOfScope { pos: 0, .. })
        ));
        assert!(matches!(
            parse_expr("x", 3),
            Err(Error::VariableOutOfScope { .. })
        ));
        assert!(parse_expr("t1", 1).is_err());
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", "   ", "(1", "1)", "sqrt()", "min(1)", "foo(1)", "t0", "q", "1 $ 2", "2 3"] {
            assert!(parse_expr(bad, 3).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn sqrt_domain() {
        let e = parse_expr("sqrt(t1)", 2).unwrap();
        assert_eq!(e.eval_prefix(&[0.25]).unwrap(), 0.5);
        assert!(matches!(e.eval_prefix(&[-0.1]), Err(Error::Domain(_))));
    }

    #[test]
    fn division_by_zero_is_domain_error() {
        let e = parse_expr("1 / t1", 2).unwrap();
        assert!(matches!(e.eval_prefix(&[0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("-x*2 + 3 - 4/2/2", Scope::univariate()).unwrap();
        assert_eq!(e.eval_x(1.5).unwrap(), -3.0 + 3.0 - 1.0);
        let e = Expr::parse("-(x - 0.35)*(x - 0.35)", Scope::univariate()).unwrap();
        assert!((e.eval_x(0.5).unwrap() + 0.0225).abs() < 1e-15);
        assert_eq!(e.to_string(), "-(x - 0.35) * (x - 0.35)");
    }

    #[test]
    fn canonical_printer_keeps_needed_parens() {
        let cases = [
            ("1 - (2 - 3)", "1 - (2 - 3)"),
            ("(1 - 2) - 3", "1 - 2 - 3"),
            ("8 / (4 / 2)", "8 / (4 / 2)"),
            ("-(t1 * t2)", "-(t1 * t2)"),
            ("--t1", "--t1"),
            ("max(t1, 0.2, 1e-3)", "max(t1, 0.2, 0.001)"),
        ];
        for (src, want) in cases {
            let e = parse_expr(src, 3).unwrap();
            assert_eq!(e.to_string(), want);
            let again = parse_expr(&e.to_string(), 3).unwrap();
            assert_eq!(again.root(), e.root());
        }
    }

    #[test]
    fn affine_detection() {
        let e = parse_expr("0.5 - 2*t1 + t2/4 + sqrt(4)", 3).unwrap();
        let a = e.affine_form(2).unwrap();
        assert_eq!(a.coeffs, vec![-2.0, 0.25]);
        assert_eq!(a.constant, 2.5);
        assert!(parse_expr("sqrt(t1)", 2).unwrap().affine_form(1).is_none());
        assert!(parse_expr("t1*t1", 2).unwrap().affine_form(1).is_none());
        assert!(parse_expr("1/t1", 2).unwrap().affine_form(1).is_none());
        assert!(parse_expr("min(t1, 0.3)", 2).unwrap().affine_form(1).is_none());
    }

    #[test]
    fn transform_and_sequence_scopes() {
        let e = Expr::parse("d1*cos(d2) + 0.25", Scope::transform(2)).unwrap();
        assert!((e.eval_prefix(&[0.25, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(e.max_delta_index(), 2);
        assert!(Expr::parse("d3", Scope::transform(2)).is_err());
        let s = Expr::parse("x*(1 - 1/m) + i", Scope::sequence()).unwrap();
        let v = s
            .eval(&Env {
                x: 3.0,
                m: 4.0,
                i: 1.0,
                ..Env::default()
            })
            .unwrap();
        assert_eq!(v, 3.25);
        assert!(Expr::parse("sin(pi/2)", Scope::default()).unwrap().is_constant());
    }
}
