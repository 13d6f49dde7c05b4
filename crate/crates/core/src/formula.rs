//! The scoring-formula language.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := factor (("*" | "/") factor)*
//! factor  := number | item-ref | fn "(" ref-list ")" | "(" expr ")"
//! fn      := sum | mean | min | max | count_answered
//! ref-list:= ref-item ("," ref-item)*
//! ref-item:= item-ref (".." item-ref)?
//! ```
//!
//! `Q1..Q10` is shorthand for `Q1, Q2, ..., Q10` and is expanded at parse
//! time. Parsed formulas are compiled into a small stack program which is what
//! [`ScoringFormula::evaluate`] runs.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Func {
    Sum,
    Mean,
    Min,
    Max,
    CountAnswered,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sum, Func::Mean, Func::Min, Func::Max, Func::CountAnswered];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sum => "sum",
            Func::Mean => "mean",
            Func::Min => "min",
            Func::Max => "max",
            Func::CountAnswered => "count_answered",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Number(BigRational),
    Ref(String),
    Call(Func, Vec<String>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Number(_) => {}
            Expr::Ref(id) => out.push(id),
            Expr::Call(_, ids) => out.extend(ids.iter().map(String::as_str)),
            Expr::Binary(_, l, r) => {
                l.collect_refs(out);
                r.collect_refs(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
            _ => 1,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, right_side: bool) -> fmt::Result {
        match self {
            Expr::Number(n) => f.write_str(&decimal_literal(n)),
            Expr::Ref(id) => f.write_str(id),
            Expr::Call(func, ids) => write!(f, "{}({})", func.name(), ids.join(",")),
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let wrap = p < parent || (right_side && p == parent);
                if wrap {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, p, false)?;
                write!(f, "{}", op.symbol())?;
                r.fmt_prec(f, p, true)?;
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

/// Writes a non-negative terminating rational as a decimal literal.
fn decimal_literal(n: &BigRational) -> String {
    if n.denom().is_one() {
        return n.numer().to_string();
    }
    // literals come from decimal text, so the denominator is 2^a * 5^b
    let mut scale = 0usize;
    let mut scaled = n.clone();
    let ten = BigRational::from_integer(BigInt::from(10));
    while !scaled.denom().is_one() && scale < 64 {
        scaled *= ten.clone();
        scale += 1;
    }
    if !scaled.denom().is_one() {
        return format!("({}/{})", n.numer(), n.denom());
    }
    let digits = scaled.numer().abs().to_string();
    let digits = format!("{digits:0>width$}", width = scale + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - scale);
    format!("{int_part}.{frac_part}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at line {line}, column {column} (offset {offset}): {message}")]
    Syntax {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown function `{name}` at line {line}, column {column}")]
    UnknownFunction {
        name: String,
        offset: usize,
        line: usize,
        column: usize,
    },
}

impl FormulaError {
    pub fn offset(&self) -> usize {
        match self {
            FormulaError::Syntax { offset, .. } | FormulaError::UnknownFunction { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("missing answer for item `{0}`")]
    MissingAnswer(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("literal {0} is not representable in the score type")]
    Unrepresentable(String),
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    DotDot,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(n) => format!("number {}", decimal_literal(n)),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::End => "end of formula".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Tok, usize)>, FormulaError> {
        let mut lx = Lexer { src, bytes: src.as_bytes(), pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn err(&self, offset: usize, message: impl Into<String>) -> FormulaError {
        let (line, column) = line_col(self.src, offset);
        FormulaError::Syntax { offset, line, column, message: message.into() }
    }

    fn next(&mut self) -> Result<(Tok, usize), FormulaError> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((tok, start));
        }
        if c == b'.' && self.bytes.get(self.pos + 1) == Some(&b'.') {
            self.pos += 2;
            return Ok((Tok::DotDot, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'.') && self.bytes.get(self.pos + 1) != Some(&b'.') {
                self.pos += 1;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
            let text = &self.src[start..self.pos];
            return match crate::scalar::parse_rational(text) {
                Some(n) => Ok((Tok::Num(n), start)),
                None => Err(self.err(start, format!("malformed number `{text}`"))),
            };
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while let Some(&b) = self.bytes.get(self.pos) {
                let dot_continues = b == b'.'
                    && self.bytes.get(self.pos + 1).is_some_and(|n| n.is_ascii_alphanumeric() || *n == b'_');
                if b.is_ascii_alphanumeric() || b == b'_' || dot_continues {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(self.err(start, format!("unexpected character `{ch}`")))
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> FormulaError {
        let offset = self.offset();
        let (line, column) = line_col(self.src, offset);
        FormulaError::Syntax { offset, line, column, message: message.into() }
    }

    fn expect(&mut self, want: Tok) -> Result<(), FormulaError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.err_here(format!("expected {}, found {}", want.describe(), self.peek().describe())))
        }
    }

    fn expr(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, FormulaError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Number(n))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let (_, at) = self.bump();
                if *self.peek() != Tok::LParen {
                    return Ok(Expr::Ref(name));
                }
                let Some(func) = Func::from_name(&name) else {
                    let (line, column) = line_col(self.src, at);
                    return Err(FormulaError::UnknownFunction { name, offset: at, line, column });
                };
                self.bump();
                let refs = self.ref_list()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Call(func, refs))
            }
            other => Err(self.err_here(format!("expected a number, item or `(`, found {}", other.describe()))),
        }
    }

    fn ident(&mut self) -> Result<(String, usize), FormulaError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let (_, at) = self.bump();
                Ok((name, at))
            }
            other => Err(self.err_here(format!("expected an item id, found {}", other.describe()))),
        }
    }

    fn ref_list(&mut self) -> Result<Vec<String>, FormulaError> {
        let mut refs = Vec::new();
        loop {
            let (first, at) = self.ident()?;
            if *self.peek() == Tok::DotDot {
                self.bump();
                let (last, _) = self.ident()?;
                match expand_range(&first, &last) {
                    Some(ids) => refs.extend(ids),
                    None => {
                        let (line, column) = line_col(self.src, at);
                        return Err(FormulaError::Syntax {
                            offset: at,
                            line,
                            column,
                            message: format!("invalid item range `{first}..{last}`"),
                        });
                    }
                }
            } else {
                refs.push(first);
            }
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                return Ok(refs);
            }
        }
    }
}

fn split_numeric_suffix(id: &str) -> Option<(&str, &str)> {
    let idx = id.rfind(|c: char| !c.is_ascii_digit()).map_or(0, |i| i + 1);
    if idx == id.len() {
        None
    } else {
        Some((&id[..idx], &id[idx..]))
    }
}

/// `Q1..Q3` → `[Q1, Q2, Q3]`; `S01..S03` keeps zero padding.
fn expand_range(first: &str, last: &str) -> Option<Vec<String>> {
    let (p1, n1) = split_numeric_suffix(first)?;
    let (p2, n2) = split_numeric_suffix(last)?;
    if p1 != p2 || p1.is_empty() {
        return None;
    }
    let a: u64 = n1.parse().ok()?;
    let b: u64 = n2.parse().ok()?;
    if a > b || b - a > 10_000 {
        return None;
    }
    let width = if n1.starts_with('0') && n1.len() > 1 { n1.len() } else { 0 };
    Some((a..=b).map(|i| format!("{p1}{i:0width$}")).collect())
}

/// Parses `source` into an expression tree.
pub fn parse_expr(source: &str) -> Result<Expr, FormulaError> {
    let toks = Lexer::tokenize(source)?;
    let mut p = Parser { src: source, toks, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.err_here(format!("unexpected {}", p.peek().describe())));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Instr {
    Const(usize),
    Load(usize),
    Aggregate { func: Func, start: usize, len: usize },
    Op(BinOp),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Program {
    consts: Vec<BigRational>,
    slots: Vec<String>,
    code: Vec<Instr>,
}

impl Program {
    fn compile(expr: &Expr) -> Program {
        let mut p = Program::default();
        p.emit(expr);
        p
    }

    fn emit(&mut self, expr: &Expr) {
        match expr {
            Expr::Number(n) => {
                self.consts.push(n.clone());
                self.code.push(Instr::Const(self.consts.len() - 1));
            }
            Expr::Ref(id) => {
                self.slots.push(id.clone());
                self.code.push(Instr::Load(self.slots.len() - 1));
            }
            Expr::Call(func, ids) => {
                let start = self.slots.len();
                self.slots.extend(ids.iter().cloned());
                self.code.push(Instr::Aggregate { func: *func, start, len: ids.len() });
            }
            Expr::Binary(op, l, r) => {
                self.emit(l);
                self.emit(r);
                self.code.push(Instr::Op(*op));
            }
        }
    }

    fn run<S: Scalar>(&self, lookup: &dyn Fn(&str) -> Option<S>) -> Result<S, EvalError> {
        let mut stack: Vec<S> = Vec::with_capacity(8);
        for instr in &self.code {
            let v = match instr {
                Instr::Const(i) => {
                    let c = &self.consts[*i];
                    S::from_rational(c).ok_or_else(|| EvalError::Unrepresentable(c.to_string()))?
                }
                Instr::Load(i) => {
                    let id = &self.slots[*i];
                    lookup(id).ok_or_else(|| EvalError::MissingAnswer(id.clone()))?
                }
                Instr::Aggregate { func, start, len } => aggregate(*func, &self.slots[*start..start + len], lookup)?,
                Instr::Op(op) => {
                    let r = stack.pop().expect("stack underflow");
                    let l = stack.pop().expect("stack underflow");
                    match op {
                        BinOp::Add => l + r,
                        BinOp::Sub => l - r,
                        BinOp::Mul => l * r,
                        BinOp::Div => {
                            if r.is_zero() {
                                return Err(EvalError::DivisionByZero);
                            }
                            l / r
                        }
                    }
                }
            };
            stack.push(v);
        }
        Ok(stack.pop().expect("empty program"))
    }
}

fn aggregate<S: Scalar>(func: Func, ids: &[String], lookup: &dyn Fn(&str) -> Option<S>) -> Result<S, EvalError> {
    match func {
        Func::Sum | Func::Min | Func::Max => {
            let mut acc: Option<S> = None;
            for id in ids {
                let v = lookup(id).ok_or_else(|| EvalError::MissingAnswer(id.clone()))?;
                acc = Some(match acc {
                    None => v,
                    Some(a) => match func {
                        Func::Sum => a + v,
                        Func::Min if v < a => v,
                        Func::Max if v > a => v,
                        _ => a,
                    },
                });
            }
            Ok(acc.unwrap_or_else(S::zero))
        }
        Func::Mean => {
            let mut total = S::zero();
            let mut n = 0usize;
            for v in ids.iter().filter_map(|id| lookup(id)) {
                total = total + v;
                n += 1;
            }
            if n == 0 {
                return Err(EvalError::MissingAnswer(ids.first().cloned().unwrap_or_default()));
            }
            Ok(total / S::from_count(n))
        }
        Func::CountAnswered => Ok(S::from_count(ids.iter().filter(|id| lookup(id).is_some()).count())),
    }
}

/// A parsed, compiled scoring formula. Serializes as its source text.
#[derive(Debug, Clone)]
pub struct ScoringFormula {
    source: String,
    expr: Expr,
    program: Program,
}

impl PartialEq for ScoringFormula {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr
    }
}

impl Eq for ScoringFormula {}

impl ScoringFormula {
    pub fn parse(source: &str) -> Result<Self, FormulaError> {
        let expr = parse_expr(source)?;
        let program = Program::compile(&expr);
        Ok(ScoringFormula { source: source.to_string(), expr, program })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Canonical source text; reparses to an identical tree.
    pub fn unparse(&self) -> String {
        self.expr.to_string()
    }

    /// Item ids referenced, in order of first appearance.
    pub fn references(&self) -> Vec<&str> {
        let mut all = Vec::new();
        self.expr.collect_refs(&mut all);
        let mut seen = std::collections::HashSet::new();
        all.retain(|id| seen.insert(*id));
        all
    }

    pub fn evaluate<S: Scalar>(&self, answers: &BTreeMap<String, S>) -> Result<S, EvalError> {
        self.program.run(&|id: &str| answers.get(id).cloned())
    }

    pub fn evaluate_with<S: Scalar>(&self, lookup: &dyn Fn(&str) -> Option<S>) -> Result<S, EvalError> {
        self.program.run(lookup)
    }

    /// Interval bounds of the formula given per-item `[lo, hi]` bounds. `None`
    /// when an item is unbounded or a divisor interval contains zero.
    pub fn bounds<S: Scalar>(&self, item_bounds: &dyn Fn(&str) -> Option<(S, S)>) -> Option<(S, S)> {
        interval(&self.expr, item_bounds)
    }
}

fn interval<S: Scalar>(e: &Expr, items: &dyn Fn(&str) -> Option<(S, S)>) -> Option<(S, S)> {
    fn lo_hi<S: Scalar>(vals: [S; 4]) -> (S, S) {
        let mut lo = vals[0].clone();
        let mut hi = vals[0].clone();
        for v in vals.into_iter().skip(1) {
            if v < lo {
                lo = v.clone();
            }
            if v > hi {
                hi = v;
            }
        }
        (lo, hi)
    }
    match e {
        Expr::Number(n) => {
            let v = S::from_rational(n)?;
            Some((v.clone(), v))
        }
        Expr::Ref(id) => items(id),
        Expr::Call(func, ids) => {
            let bounds: Option<Vec<(S, S)>> = ids.iter().map(|id| items(id)).collect();
            let bounds = bounds?;
            match func {
                Func::Sum => Some(bounds.into_iter().fold((S::zero(), S::zero()), |(a, b), (l, h)| (a + l, b + h))),
                Func::Min | Func::Max | Func::Mean => {
                    let lo = bounds.iter().map(|b| b.0.clone()).reduce(|a, b| if b < a { b } else { a })?;
                    let hi = bounds.iter().map(|b| b.1.clone()).reduce(|a, b| if b > a { b } else { a })?;
                    Some((lo, hi))
                }
                Func::CountAnswered => Some((S::zero(), S::from_count(ids.len()))),
            }
        }
        Expr::Binary(op, l, r) => {
            let (a, b) = interval(l, items)?;
            let (c, d) = interval(r, items)?;
            match op {
                BinOp::Add => Some((a + c, b + d)),
                BinOp::Sub => Some((a - d, b - c)),
                BinOp::Mul => Some(lo_hi([a.clone() * c.clone(), a * d.clone(), b.clone() * c, b * d])),
                BinOp::Div => {
                    if c <= S::zero() && d >= S::zero() {
                        return None;
                    }
                    Some(lo_hi([a.clone() / c.clone(), a / d.clone(), b.clone() / c, b / d]))
                }
            }
        }
    }
}

impl Serialize for ScoringFormula {
    fn serialize<Ser: Serializer>(&self, ser: Ser) -> Result<Ser::Ok, Ser::Error> {
        ser.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for ScoringFormula {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        ScoringFormula::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for ScoringFormula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScoringFormula::parse(s)
    }
}
