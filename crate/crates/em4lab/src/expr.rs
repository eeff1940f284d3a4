//! Scalar expression language for manifold specs.
//!
//! Grammar (loosest to tightest binding): `+ -`, `* /`, unary `-`, `^`
//! (right-associative), atoms. Atoms are real literals, `pi`, named
//! variables, parenthesized expressions and single-argument calls to the
//! closed function set `sin cos tan atan sinh cosh tanh exp log sqrt abs`.
//! Whitespace is insignificant. Parsed trees round-trip through
//! [`Expression::to_canonical_string`].
//!
//! Evaluation is plain IEEE double arithmetic. `log` of a nonpositive value,
//! `sqrt` of a negative value, division by zero and `x^y` with `x < 0` and
//! non-integer `y` are domain errors reported with the offending
//! subexpression.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "atan" => Func::Atan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(&self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Atan => x.atan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Pi,
    Var(String),
    Neg(Box<Expression>),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    map: HashMap<String, f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, value: f64) -> &mut Self {
        self.map.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.map.get(name).copied()
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'^' => {
                self.pos += 1;
                Tok::Caret
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_digit() || self.src[end] == b'.')
                {
                    end += 1;
                }
                // exponent part
                if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
                    let mut e = end + 1;
                    if e < self.src.len() && (self.src[e] == b'+' || self.src[e] == b'-') {
                        e += 1;
                    }
                    if e < self.src.len() && self.src[e].is_ascii_digit() {
                        while e < self.src.len() && self.src[e].is_ascii_digit() {
                            e += 1;
                        }
                        end = e;
                    }
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                let value: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("invalid number literal `{text}`"),
                })?;
                self.pos = end;
                Tok::Num(value)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                self.pos = end;
                Tok::Ident(text.to_string())
            }
            other => {
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        };
        Ok((tok, start))
    }
}

// ---------------------------------------------------------------------------
// Parser (recursive descent)
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.idx]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let (tok, off) = self.bump();
        if tok == want {
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: off,
                message: format!("expected {what}, found {}", tok_name(&tok)),
            })
        }
    }

    fn expr(&mut self) -> Result<Expression> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expression::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expression::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expression::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expression> {
        if self.peek().0 == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expression::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression> {
        let base = self.atom()?;
        if self.peek().0 == Tok::Caret {
            self.bump();
            // right-associative; the exponent may carry a unary minus
            let exp = self.unary()?;
            return Ok(Expression::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression> {
        let (tok, off) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expression::Num(v)),
            Tok::Ident(name) => {
                if self.peek().0 == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| Error::UnknownFunction { name: name.clone(), offset: off })?;
                    self.bump(); // (
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expression::Call(func, Box::new(arg)))
                } else if name == "pi" {
                    Ok(Expression::Pi)
                } else {
                    Ok(Expression::Var(name))
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            other => Err(Error::Syntax {
                offset: off,
                message: format!("expected a value, found {}", tok_name(&other)),
            }),
        }
    }
}

fn tok_name(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parse `text` into an [`Expression`].
pub fn parse(text: &str) -> Result<Expression> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut lx = Lexer::new(text);
    let mut toks = Vec::new();
    loop {
        let (t, off) = lx.next()?;
        let end = t == Tok::End;
        toks.push((t, off));
        if end {
            break;
        }
    }
    let mut p = Parser { toks, idx: 0 };
    let e = p.expr()?;
    let (tok, off) = p.bump();
    if tok != Tok::End {
        return Err(Error::Syntax {
            offset: off,
            message: format!("trailing input starting with {}", tok_name(&tok)),
        });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Canonical printing
// ---------------------------------------------------------------------------

impl Expression {
    fn precedence(&self) -> u8 {
        match self {
            Expression::Add(..) | Expression::Sub(..) => 1,
            Expression::Mul(..) | Expression::Div(..) => 2,
            Expression::Neg(..) => 3,
            Expression::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, rhs_of_same: bool) -> fmt::Result {
        let me = self.precedence();
        let needs_paren = me < parent || (me == parent && rhs_of_same);
        if needs_paren {
            write!(f, "(")?;
        }
        match self {
            Expression::Num(v) => {
                if *v == v.trunc() && v.abs() < 1e15 {
                    write!(f, "{}", *v as i64)?;
                } else {
                    write!(f, "{v}")?;
                }
            }
            Expression::Pi => write!(f, "pi")?,
            Expression::Var(n) => write!(f, "{n}")?,
            Expression::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 3, false)?;
            }
            Expression::Add(a, b) => {
                a.fmt_prec(f, 1, false)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 1, true)?;
            }
            Expression::Sub(a, b) => {
                a.fmt_prec(f, 1, false)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 1, true)?;
            }
            Expression::Mul(a, b) => {
                a.fmt_prec(f, 2, false)?;
                write!(f, "*")?;
                b.fmt_prec(f, 2, true)?;
            }
            Expression::Div(a, b) => {
                a.fmt_prec(f, 2, false)?;
                write!(f, "/")?;
                b.fmt_prec(f, 2, true)?;
            }
            Expression::Pow(a, b) => {
                // base binds tighter than `^`, exponent is printed as the
                // right operand of a right-associative operator
                a.fmt_prec(f, 5, false)?;
                write!(f, "^")?;
                b.fmt_prec(f, 4, false)?;
            }
            Expression::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0, false)?;
                write!(f, ")")?;
            }
        }
        if needs_paren {
            write!(f, ")")?;
        }
        Ok(())
    }

    /// Canonical text form; `parse(print(parse(s)))` equals `parse(s)`.
    pub fn to_canonical_string(&self) -> String {
        format!("{self}")
    }

    /// Every variable name referenced by the tree, deduplicated, sorted.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expression::Var(n) => out.push(n.clone()),
            Expression::Neg(a) | Expression::Call(_, a) => a.collect_vars(out),
            Expression::Add(a, b)
            | Expression::Sub(a, b)
            | Expression::Mul(a, b)
            | Expression::Div(a, b)
            | Expression::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            _ => {}
        }
    }

    /// Substitute whole expressions for variables. Names absent from `subs`
    /// are left untouched.
    pub fn substitute(&self, subs: &HashMap<String, Expression>) -> Expression {
        match self {
            Expression::Var(n) => subs.get(n).cloned().unwrap_or_else(|| self.clone()),
            Expression::Num(_) | Expression::Pi => self.clone(),
            Expression::Neg(a) => Expression::Neg(Box::new(a.substitute(subs))),
            Expression::Call(f, a) => Expression::Call(*f, Box::new(a.substitute(subs))),
            Expression::Add(a, b) => Expression::Add(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expression::Sub(a, b) => Expression::Sub(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expression::Mul(a, b) => Expression::Mul(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expression::Div(a, b) => Expression::Div(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
            Expression::Pow(a, b) => Expression::Pow(
                Box::new(a.substitute(subs)),
                Box::new(b.substitute(subs)),
            ),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

// ---------------------------------------------------------------------------
// Tree-walking evaluation
// ---------------------------------------------------------------------------

fn pow_checked(base: f64, exp: f64, ctx: &Expression) -> Result<f64> {
    if base < 0.0 && exp != exp.trunc() {
        return Err(Error::EvalDomain {
            expr: ctx.to_canonical_string(),
            message: format!("negative base {base} raised to non-integer exponent {exp}"),
        });
    }
    Ok(base.powf(exp))
}

/// Evaluate `e` under `b`. All variables must be bound and every
/// intermediate value must stay inside the real domain of its operation.
pub fn eval(e: &Expression, b: &Bindings) -> Result<f64> {
    match e {
        Expression::Num(v) => Ok(*v),
        Expression::Pi => Ok(std::f64::consts::PI),
        Expression::Var(n) => b
            .get(n)
            .ok_or_else(|| Error::UnboundVariable { name: n.clone() }),
        Expression::Neg(a) => Ok(-eval(a, b)?),
        Expression::Add(x, y) => Ok(eval(x, b)? + eval(y, b)?),
        Expression::Sub(x, y) => Ok(eval(x, b)? - eval(y, b)?),
        Expression::Mul(x, y) => Ok(eval(x, b)? * eval(y, b)?),
        Expression::Div(x, y) => {
            let d = eval(y, b)?;
            if d == 0.0 {
                return Err(Error::EvalDomain {
                    expr: e.to_canonical_string(),
                    message: "division by zero".into(),
                });
            }
            Ok(eval(x, b)? / d)
        }
        Expression::Pow(x, y) => {
            let bv = eval(x, b)?;
            let ev = eval(y, b)?;
            pow_checked(bv, ev, e)
        }
        Expression::Call(f, a) => {
            let x = eval(a, b)?;
            match f {
                Func::Log if x <= 0.0 => Err(Error::EvalDomain {
                    expr: e.to_canonical_string(),
                    message: format!("log of nonpositive value {x}"),
                }),
                Func::Sqrt if x < 0.0 => Err(Error::EvalDomain {
                    expr: e.to_canonical_string(),
                    message: format!("sqrt of negative value {x}"),
                }),
                _ => Ok(f.apply(x)),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Compiled programs
// ---------------------------------------------------------------------------

/// Register-machine instruction; operands are register indices.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Inst {
    Const(f64),
    Var(u16),
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    /// Integer power by repeated squaring; the common case in metric entries.
    PowI(u32, i32),
    Pow(u32, u32),
    Call(Func, u32),
}

/// Hash-consing key (f64 bits keyed to allow Eq/Hash).
#[derive(PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Var(u16),
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    PowI(u32, i32),
    Pow(u32, u32),
    Call(Func, u32),
}

/// A forest of expressions compiled to a flat instruction list with common
/// subexpressions shared across all outputs. Evaluating all metric entries
/// of a chart in one pass this way is what keeps grid scans and quadrature
/// affordable.
#[derive(Debug, Clone)]
pub struct Program {
    insts: Vec<Inst>,
    outputs: Vec<u32>,
    /// canonical text per instruction, for domain-error reporting
    spans: Vec<String>,
    n_slots: usize,
}

/// Reusable evaluation scratch (one per thread of execution).
#[derive(Debug, Default, Clone)]
pub struct EvalScratch {
    regs: Vec<f64>,
}

pub struct ProgramBuilder<'a> {
    slots: &'a [String],
    insts: Vec<Inst>,
    spans: Vec<String>,
    cache: HashMap<Key, u32>,
    outputs: Vec<u32>,
}

impl<'a> ProgramBuilder<'a> {
    /// `slots` lists the variable names, in slot order, that compiled
    /// programs will read from the input vector.
    pub fn new(slots: &'a [String]) -> Self {
        ProgramBuilder {
            slots,
            insts: Vec::new(),
            spans: Vec::new(),
            cache: HashMap::new(),
            outputs: Vec::new(),
        }
    }

    fn push(&mut self, key: Key, inst: Inst, span: String) -> u32 {
        if let Some(&r) = self.cache.get(&key) {
            return r;
        }
        let r = self.insts.len() as u32;
        self.insts.push(inst);
        self.spans.push(span);
        self.cache.insert(key, r);
        r
    }

    fn lower(&mut self, e: &Expression) -> Result<u32> {
        let r = match e {
            Expression::Num(v) => self.push(
                Key::Const(v.to_bits()),
                Inst::Const(*v),
                e.to_canonical_string(),
            ),
            Expression::Pi => {
                let v = std::f64::consts::PI;
                self.push(Key::Const(v.to_bits()), Inst::Const(v), "pi".into())
            }
            Expression::Var(n) => {
                let slot = self
                    .slots
                    .iter()
                    .position(|s| s == n)
                    .ok_or_else(|| Error::UnboundVariable { name: n.clone() })?
                    as u16;
                self.push(Key::Var(slot), Inst::Var(slot), n.clone())
            }
            Expression::Neg(a) => {
                let ra = self.lower(a)?;
                self.push(Key::Neg(ra), Inst::Neg(ra), e.to_canonical_string())
            }
            Expression::Add(a, b) => {
                let (ra, rb) = (self.lower(a)?, self.lower(b)?);
                // addition commutes; normalize operand order for sharing
                let (ra, rb) = if ra <= rb { (ra, rb) } else { (rb, ra) };
                self.push(Key::Add(ra, rb), Inst::Add(ra, rb), e.to_canonical_string())
            }
            Expression::Sub(a, b) => {
                let (ra, rb) = (self.lower(a)?, self.lower(b)?);
                self.push(Key::Sub(ra, rb), Inst::Sub(ra, rb), e.to_canonical_string())
            }
            Expression::Mul(a, b) => {
                let (ra, rb) = (self.lower(a)?, self.lower(b)?);
                let (ra, rb) = if ra <= rb { (ra, rb) } else { (rb, ra) };
                self.push(Key::Mul(ra, rb), Inst::Mul(ra, rb), e.to_canonical_string())
            }
            Expression::Div(a, b) => {
                let (ra, rb) = (self.lower(a)?, self.lower(b)?);
                self.push(Key::Div(ra, rb), Inst::Div(ra, rb), e.to_canonical_string())
            }
            Expression::Pow(a, b) => {
                let ra = self.lower(a)?;
                if let Expression::Num(v) = **b {
                    if v == v.trunc() && v.abs() <= 64.0 {
                        let k = v as i32;
                        return Ok(self.push(
                            Key::PowI(ra, k),
                            Inst::PowI(ra, k),
                            e.to_canonical_string(),
                        ));
                    }
                }
                let rb = self.lower(b)?;
                self.push(Key::Pow(ra, rb), Inst::Pow(ra, rb), e.to_canonical_string())
            }
            Expression::Call(f, a) => {
                let ra = self.lower(a)?;
                self.push(Key::Call(*f, ra), Inst::Call(*f, ra), e.to_canonical_string())
            }
        };
        Ok(r)
    }

    /// Add `e` as the next program output. Returns its output index.
    pub fn add_output(&mut self, e: &Expression) -> Result<usize> {
        let r = self.lower(e)?;
        self.outputs.push(r);
        Ok(self.outputs.len() - 1)
    }

    pub fn build(self) -> Program {
        Program {
            insts: self.insts,
            outputs: self.outputs,
            spans: self.spans,
            n_slots: self.slots.len(),
        }
    }
}

impl Program {
    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// Evaluate all outputs at `slots` into `out`.
    pub fn eval_into(&self, slots: &[f64], scratch: &mut EvalScratch, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(slots.len(), self.n_slots);
        debug_assert_eq!(out.len(), self.outputs.len());
        let regs = &mut scratch.regs;
        regs.clear();
        regs.resize(self.insts.len(), 0.0);
        for (i, inst) in self.insts.iter().enumerate() {
            let v = match *inst {
                Inst::Const(c) => c,
                Inst::Var(s) => slots[s as usize],
                Inst::Neg(a) => -regs[a as usize],
                Inst::Add(a, b) => regs[a as usize] + regs[b as usize],
                Inst::Sub(a, b) => regs[a as usize] - regs[b as usize],
                Inst::Mul(a, b) => regs[a as usize] * regs[b as usize],
                Inst::Div(a, b) => {
                    let d = regs[b as usize];
                    if d == 0.0 {
                        return Err(Error::EvalDomain {
                            expr: self.spans[i].clone(),
                            message: "division by zero".into(),
                        });
                    }
                    regs[a as usize] / d
                }
                Inst::PowI(a, k) => powi(regs[a as usize], k),
                Inst::Pow(a, b) => {
                    let (x, y) = (regs[a as usize], regs[b as usize]);
                    if x < 0.0 && y != y.trunc() {
                        return Err(Error::EvalDomain {
                            expr: self.spans[i].clone(),
                            message: format!(
                                "negative base {x} raised to non-integer exponent {y}"
                            ),
                        });
                    }
                    x.powf(y)
                }
                Inst::Call(f, a) => {
                    let x = regs[a as usize];
                    match f {
                        Func::Log if x <= 0.0 => {
                            return Err(Error::EvalDomain {
                                expr: self.spans[i].clone(),
                                message: format!("log of nonpositive value {x}"),
                            })
                        }
                        Func::Sqrt if x < 0.0 => {
                            return Err(Error::EvalDomain {
                                expr: self.spans[i].clone(),
                                message: format!("sqrt of negative value {x}"),
                            })
                        }
                        _ => f.apply(x),
                    }
                }
            };
            regs[i] = v;
        }
        for (o, &r) in out.iter_mut().zip(&self.outputs) {
            *o = regs[r as usize];
        }
        Ok(())
    }
}

fn powi(mut base: f64, exp: i32) -> f64 {
    let neg = exp < 0;
    let mut e = exp.unsigned_abs();
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    if neg {
        1.0 / acc
    } else {
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(pairs: &[(&str, f64)]) -> Bindings {
        let mut bd = Bindings::new();
        for (k, v) in pairs {
            bd.set(k, *v);
        }
        bd
    }

    #[test]
    fn grammar_forced_shapes() {
        let e = parse("a^2*sin(x)^2").unwrap();
        match e {
            Expression::Mul(l, r) => {
                assert!(matches!(*l, Expression::Pow(..)));
                match *r {
                    Expression::Pow(base, _) => assert!(matches!(*base, Expression::Call(Func::Sin, _))),
                    other => panic!("expected Pow, got {other:?}"),
                }
            }
            other => panic!("expected Mul, got {other:?}"),
        }
    }

    #[test]
    fn fubini_study_factor_parses() {
        parse("1/(1+x^2+y^2)^2").unwrap();
    }

    #[test]
    fn syntax_error_carries_offset() {
        match parse("2*+x") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_function_rejected() {
        match parse("foo(x)") {
            Err(Error::UnknownFunction { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 0);
            }
            other => panic!("expected unknown function, got {other:?}"),
        }
    }

    #[test]
    fn eval_examples() {
        let e = parse("sin(x)^2+cos(x)^2").unwrap();
        let v = eval(&e, &b(&[("x", 0.7)])).unwrap();
        assert!((v - 1.0).abs() < 1e-15);

        let e = parse("pi").unwrap();
        assert_eq!(eval(&e, &Bindings::new()).unwrap(), 3.141592653589793);

        let e = parse("sqrt(x)").unwrap();
        assert!(matches!(
            eval(&e, &b(&[("x", -1.0)])),
            Err(Error::EvalDomain { .. })
        ));
    }

    #[test]
    fn unary_minus_binds_looser_than_pow() {
        // -x^2 must be -(x^2)
        let e = parse("-x^2").unwrap();
        assert_eq!(eval(&e, &b(&[("x", 3.0)])).unwrap(), -9.0);
        // and ^ is right-associative: 2^3^2 = 2^9
        let e = parse("2^3^2").unwrap();
        assert_eq!(eval(&e, &Bindings::new()).unwrap(), 512.0);
    }

    #[test]
    fn negative_base_non_integer_exponent_is_domain_error() {
        let e = parse("x^0.5").unwrap();
        assert!(matches!(
            eval(&e, &b(&[("x", -2.0)])),
            Err(Error::EvalDomain { .. })
        ));
        // integer exponent of a negative base is fine
        let e = parse("x^3").unwrap();
        assert_eq!(eval(&e, &b(&[("x", -2.0)])).unwrap(), -8.0);
    }

    #[test]
    fn unbound_variable_reported() {
        let e = parse("x+y").unwrap();
        match eval(&e, &b(&[("x", 1.0)])) {
            Err(Error::UnboundVariable { name }) => assert_eq!(name, "y"),
            other => panic!("expected unbound variable, got {other:?}"),
        }
    }

    #[test]
    fn division_by_zero_names_subexpression() {
        let e = parse("1/(x-1)").unwrap();
        match eval(&e, &b(&[("x", 1.0)])) {
            Err(Error::EvalDomain { expr, .. }) => assert!(expr.contains("x - 1")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn compiled_program_matches_tree_eval() {
        let slots = vec!["x".to_string(), "y".to_string()];
        let exprs = [
            "sin(x)*cos(y) + x^2*y",
            "1/(1+x^2+y^2)^2",
            "exp(-x)*tanh(y) - atan(x/(y+2))",
        ];
        let mut builder = ProgramBuilder::new(&slots);
        let parsed: Vec<_> = exprs.iter().map(|s| parse(s).unwrap()).collect();
        for e in &parsed {
            builder.add_output(e).unwrap();
        }
        let prog = builder.build();
        let mut scratch = EvalScratch::default();
        let mut out = vec![0.0; prog.n_outputs()];
        for &(x, y) in &[(0.3, -0.7), (1.5, 2.25), (-0.1, 0.0)] {
            prog.eval_into(&[x, y], &mut scratch, &mut out).unwrap();
            let bd = b(&[("x", x), ("y", y)]);
            for (i, e) in parsed.iter().enumerate() {
                let want = eval(e, &bd).unwrap();
                assert!(
                    (out[i] - want).abs() <= 1e-15 * (1.0 + want.abs()),
                    "output {i} mismatch: {} vs {want}",
                    out[i]
                );
            }
        }
    }

    #[test]
    fn cse_shares_subtrees() {
        let slots = vec!["x".to_string()];
        let mut builder = ProgramBuilder::new(&slots);
        builder.add_output(&parse("sin(x)^2").unwrap()).unwrap();
        builder.add_output(&parse("sin(x)^2 + 1").unwrap()).unwrap();
        let prog = builder.build();
        // sin(x) and sin(x)^2 each appear once: Var, Call, PowI, Const, Add
        assert_eq!(prog.insts.len(), 5);
    }

    // random expression generator for the round-trip property; literals are
    // nonnegative because the lexer never produces signed numbers (a leading
    // minus always parses as unary negation)
    fn arb_expr() -> impl Strategy<Value = Expression> {
        let leaf = prop_oneof![
            (0.0..100.0f64).prop_map(|v| Expression::Num((v * 8.0).round() / 8.0)),
            Just(Expression::Pi),
            prop_oneof![Just("x"), Just("y"), Just("alpha_2")]
                .prop_map(|s| Expression::Var(s.to_string())),
        ];
        leaf.prop_recursive(5, 64, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expression::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expression::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expression::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expression::Div(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expression::Pow(Box::new(a), Box::new(b))),
                inner.clone().prop_map(|a| Expression::Neg(Box::new(a))),
                (prop_oneof![Just(Func::Sin), Just(Func::Exp), Just(Func::Abs)], inner)
                    .prop_map(|(f, a)| Expression::Call(f, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_roundtrip(e in arb_expr()) {
            let printed = e.to_canonical_string();
            let reparsed = parse(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e, "printed: {}", printed);
            // canonical-form idempotence: printing again is a fixed point
            prop_assert_eq!(reparsed.to_canonical_string(), printed);
        }
    }
}
