//! A tiny deterministic subject language for exercising the differential
//! harness without the full Python runner.
//!
//! Toy programs are a strict subset of Python, so they also parse for surface
//! similarity and mutation:
//!
//! ```text
//! def f(n):
//!     total = 0
//!     for i in range(1, n + 1):
//!         total += i
//!     return total
//! ```
//!
//! Supported statements: assignment and `+= -= *= %=`, `return`, `pass`,
//! `if`/`elif`/`else`, `for NAME in range(..)`, `while COND:`, `break`,
//! `continue`, `raise NAME(...)` and `time.sleep(seconds)`. Expressions cover
//! integers (64-bit, overflow raises `OverflowError`), floats, booleans, strings,
//! `None`, arithmetic, comparisons, `and`/`or`/`not`, conditional expressions and
//! the builtins `abs`, `min`, `max`, `int`, `float`, `bool`, `len` and `str`.
//!
//! Binding programs are assignment sequences whose right-hand sides may call
//! the provider as `fdp.ConsumeIntInRange(lo, hi)`, `fdp.ConsumeBool()`,
//! `fdp.ConsumeProbability()`, `fdp.ConsumeAsciiString(max_len)` or
//! `fdp.ConsumeIntList(count, lo, hi)` (the latter yields the list's sum, the
//! toy language having no lists). Assigned names become the entry point's
//! arguments in order of first assignment.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::time::Duration;

use base64::Engine;

use crate::fuzz::provider::FuzzedDataProvider;
use crate::fuzz::vectors::format_real;
use crate::harness::protocol::{ExecReply, Request, Response};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    None,
}

impl Value {
    fn truthy(&self) -> bool {
        match self {
            Value::Int(i) => *i != 0,
            Value::Float(f) => *f != 0.0,
            Value::Bool(b) => *b,
            Value::Str(s) => !s.is_empty(),
            Value::None => false,
        }
    }

    fn as_number(&self) -> Option<Num> {
        match self {
            Value::Int(i) => Some(Num::Int(*i)),
            Value::Bool(b) => Some(Num::Int(i64::from(*b))),
            Value::Float(f) => Some(Num::Float(*f)),
            _ => None,
        }
    }

    /// Canonical text: Python `repr`-style.
    pub fn canonical(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format_real(*f),
            Value::Bool(true) => "True".into(),
            Value::Bool(false) => "False".into(),
            Value::Str(s) => format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'")),
            Value::None => "None".into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Num {
    Int(i64),
    Float(f64),
}

impl Num {
    fn float(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Float(f) => f,
        }
    }
}

/// Why evaluation stopped without a value.
#[derive(Debug, Clone, PartialEq)]
pub enum Fault {
    /// A raised exception, by class name.
    Raise(String),
    /// The simulated clock or step budget ran out.
    Timeout,
}

impl Fault {
    fn raise(class: &str) -> Self {
        Fault::Raise(class.to_string())
    }
}

// ---------------------------------------------------------------- lexing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Float(f64),
    Str(String),
    Name(String),
    Op(&'static str),
}

const OPS: &[&str] = &[
    "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "%=", "(", ")", ",", ":", ".", "+", "-", "*", "/", "%",
    "<", ">", "=", "[", "]",
];

fn lex(line: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            if text.contains('.') || text.contains('e') && !text.starts_with("0x") {
                out.push(Tok::Float(text.parse().map_err(|_| format!("bad number {text}"))?));
            } else {
                out.push(Tok::Int(parse_int(&text).ok_or_else(|| format!("bad integer {text}"))?));
            }
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Name(chars[start..i].iter().collect()));
        } else if c == '\'' || c == '"' {
            let quote = c;
            i += 1;
            let mut s = String::new();
            while i < chars.len() && chars[i] != quote {
                if chars[i] == '\\' && i + 1 < chars.len() {
                    i += 1;
                }
                s.push(chars[i]);
                i += 1;
            }
            if i >= chars.len() {
                return Err("unterminated string".into());
            }
            i += 1;
            out.push(Tok::Str(s));
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let op = OPS
                .iter()
                .find(|op| rest.starts_with(**op))
                .ok_or_else(|| format!("unexpected character {c:?}"))?;
            i += op.chars().count();
            out.push(Tok::Op(op));
        }
    }
    Ok(out)
}

fn parse_int(text: &str) -> Option<i64> {
    let t = text.to_ascii_lowercase();
    if let Some(h) = t.strip_prefix("0x") {
        i64::from_str_radix(h, 16).ok()
    } else if let Some(o) = t.strip_prefix("0o") {
        i64::from_str_radix(o, 8).ok()
    } else if let Some(b) = t.strip_prefix("0b") {
        i64::from_str_radix(b, 2).ok()
    } else {
        t.parse().ok()
    }
}

// ---------------------------------------------------------------- syntax

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Lit(Value),
    Name(String),
    Unary(&'static str, Box<Expr>),
    Binary(&'static str, Box<Expr>, Box<Expr>),
    Compare(Vec<&'static str>, Vec<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    IfElse(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Stmt {
    Assign(String, Expr),
    AugAssign(String, &'static str, Expr),
    Return(Expr),
    Expr(Expr),
    Pass,
    Break,
    Continue,
    Raise(String),
    If(Vec<(Expr, Vec<Stmt>)>, Vec<Stmt>),
    For(String, Expr, Expr, Vec<Stmt>),
    While(Expr, Vec<Stmt>),
}

struct ExprParser {
    toks: Vec<Tok>,
    pos: usize,
}

impl ExprParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Some(Tok::Op(o)) if *o == op)
    }

    fn is_name(&self, name: &str) -> bool {
        matches!(self.peek(), Some(Tok::Name(n)) if n == name)
    }

    fn expect_op(&mut self, op: &str) -> Result<(), String> {
        if self.is_op(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected {op:?}"))
        }
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let body = self.or()?;
        if self.is_name("if") {
            self.pos += 1;
            let cond = self.or()?;
            if !self.is_name("else") {
                return Err("expected 'else'".into());
            }
            self.pos += 1;
            let other = self.expr()?;
            return Ok(Expr::IfElse(Box::new(cond), Box::new(body), Box::new(other)));
        }
        Ok(body)
    }

    fn or(&mut self) -> Result<Expr, String> {
        let mut lhs = self.and()?;
        while self.is_name("or") {
            self.pos += 1;
            lhs = Expr::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, String> {
        let mut lhs = self.not()?;
        while self.is_name("and") {
            self.pos += 1;
            lhs = Expr::And(Box::new(lhs), Box::new(self.not()?));
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, String> {
        if self.is_name("not") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, String> {
        let first = self.arith()?;
        let mut ops = Vec::new();
        let mut operands = vec![first];
        while let Some(Tok::Op(op @ ("<" | ">" | "<=" | ">=" | "==" | "!="))) = self.peek() {
            ops.push(*op);
            self.pos += 1;
            operands.push(self.arith()?);
        }
        if ops.is_empty() {
            Ok(operands.pop().expect("one operand"))
        } else {
            Ok(Expr::Compare(ops, operands))
        }
    }

    fn arith(&mut self) -> Result<Expr, String> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ("+" | "-"))) = self.peek() {
            let op = *op;
            self.pos += 1;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ("*" | "/" | "//" | "%"))) = self.peek() {
            let op = *op;
            self.pos += 1;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if let Some(Tok::Op(op @ ("-" | "+"))) = self.peek() {
            let op = *op;
            self.pos += 1;
            return Ok(Expr::Unary(op, Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, String> {
        let base = self.atom()?;
        if self.is_op("**") {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Binary("**", Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, String> {
        let tok = self.peek().cloned().ok_or("unexpected end of expression")?;
        self.pos += 1;
        match tok {
            Tok::Int(i) => Ok(Expr::Lit(Value::Int(i))),
            Tok::Float(f) => Ok(Expr::Lit(Value::Float(f))),
            Tok::Str(s) => Ok(Expr::Lit(Value::Str(s))),
            Tok::Op("(") => {
                let e = self.expr()?;
                self.expect_op(")")?;
                Ok(e)
            }
            Tok::Name(n) => match n.as_str() {
                "True" => Ok(Expr::Lit(Value::Bool(true))),
                "False" => Ok(Expr::Lit(Value::Bool(false))),
                "None" => Ok(Expr::Lit(Value::None)),
                _ => {
                    let mut name = n;
                    while self.is_op(".") {
                        self.pos += 1;
                        match self.peek().cloned() {
                            Some(Tok::Name(attr)) => {
                                self.pos += 1;
                                name = format!("{name}.{attr}");
                            }
                            _ => return Err("expected attribute name".into()),
                        }
                    }
                    if self.is_op("(") {
                        self.pos += 1;
                        let mut args = Vec::new();
                        while !self.is_op(")") {
                            args.push(self.expr()?);
                            if !self.is_op(")") {
                                self.expect_op(",")?;
                            }
                        }
                        self.pos += 1;
                        Ok(Expr::Call(name, args))
                    } else {
                        Ok(Expr::Name(name))
                    }
                }
            },
            other => Err(format!("unexpected token {other:?}")),
        }
    }
}

fn parse_expr(toks: Vec<Tok>) -> Result<Expr, String> {
    let mut p = ExprParser { toks, pos: 0 };
    let e = p.expr()?;
    if !p.done() {
        return Err("trailing tokens in expression".into());
    }
    Ok(e)
}

struct Line {
    indent: usize,
    text: String,
}

fn logical_lines(src: &str) -> Vec<Line> {
    src.lines()
        .filter_map(|raw| {
            let trimmed = raw.trim_end();
            let body = trimmed.trim_start();
            if body.is_empty() || body.starts_with('#') {
                return None;
            }
            Some(Line {
                indent: trimmed.len() - body.len(),
                text: body.to_string(),
            })
        })
        .collect()
}

fn parse_block(lines: &[Line], pos: &mut usize, indent: usize) -> Result<Vec<Stmt>, String> {
    let mut out = Vec::new();
    while *pos < lines.len() && lines[*pos].indent == indent {
        out.push(parse_stmt(lines, pos, indent)?);
    }
    if *pos < lines.len() && lines[*pos].indent > indent {
        return Err(format!("unexpected indent at {:?}", lines[*pos].text));
    }
    Ok(out)
}

fn parse_body(lines: &[Line], pos: &mut usize, indent: usize) -> Result<Vec<Stmt>, String> {
    match lines.get(*pos) {
        Some(l) if l.indent > indent => {
            let inner = l.indent;
            parse_block(lines, pos, inner)
        }
        _ => Err("expected an indented block".into()),
    }
}

fn header(text: &str, keyword: &str) -> Option<String> {
    let rest = text.strip_prefix(keyword)?;
    if !rest.starts_with([' ', '(']) && !rest.starts_with(':') {
        return None;
    }
    Some(rest.trim().strip_suffix(':')?.trim().to_string())
}

fn parse_stmt(lines: &[Line], pos: &mut usize, indent: usize) -> Result<Stmt, String> {
    let text = lines[*pos].text.clone();
    *pos += 1;
    if let Some(cond) = header(&text, "if") {
        let mut arms = vec![(parse_expr(lex(&cond)?)?, parse_body(lines, pos, indent)?)];
        let mut other = Vec::new();
        while *pos < lines.len() && lines[*pos].indent == indent {
            let t = lines[*pos].text.clone();
            if let Some(c) = header(&t, "elif") {
                *pos += 1;
                arms.push((parse_expr(lex(&c)?)?, parse_body(lines, pos, indent)?));
            } else if header(&t, "else").is_some_and(|h| h.is_empty()) {
                *pos += 1;
                other = parse_body(lines, pos, indent)?;
                break;
            } else {
                break;
            }
        }
        return Ok(Stmt::If(arms, other));
    }
    if let Some(h) = header(&text, "for") {
        let (var, iter) = h.split_once(" in ").ok_or("expected 'for NAME in range(...)'")?;
        let body = parse_body(lines, pos, indent)?;
        // an empty list literal is what zero-iteration mutants produce
        let (lo, hi) = if iter.trim() == "[]" {
            (Expr::Lit(Value::Int(0)), Expr::Lit(Value::Int(0)))
        } else {
            match parse_expr(lex(iter)?)? {
                Expr::Call(f, mut args) if f == "range" && (1..=2).contains(&args.len()) => {
                    if args.len() == 1 {
                        (Expr::Lit(Value::Int(0)), args.remove(0))
                    } else {
                        let hi = args.remove(1);
                        (args.remove(0), hi)
                    }
                }
                _ => return Err("for loops must iterate over range(...)".into()),
            }
        };
        return Ok(Stmt::For(var.trim().to_string(), lo, hi, body));
    }
    if let Some(cond) = header(&text, "while") {
        let c = parse_expr(lex(&cond)?)?;
        return Ok(Stmt::While(c, parse_body(lines, pos, indent)?));
    }
    let toks = lex(&text)?;
    match toks.first() {
        Some(Tok::Name(n)) if n == "return" => {
            if toks.len() == 1 {
                return Ok(Stmt::Return(Expr::Lit(Value::None)));
            }
            return Ok(Stmt::Return(parse_expr(toks[1..].to_vec())?));
        }
        Some(Tok::Name(n)) if n == "pass" && toks.len() == 1 => return Ok(Stmt::Pass),
        Some(Tok::Name(n)) if n == "break" && toks.len() == 1 => return Ok(Stmt::Break),
        Some(Tok::Name(n)) if n == "continue" && toks.len() == 1 => return Ok(Stmt::Continue),
        Some(Tok::Name(n)) if n == "raise" => {
            return match toks.get(1) {
                Some(Tok::Name(class)) => Ok(Stmt::Raise(class.clone())),
                _ => Err("expected exception class after raise".into()),
            }
        }
        _ => {}
    }
    if let (Some(Tok::Name(target)), Some(Tok::Op(op))) = (toks.first(), toks.get(1)) {
        let value = || parse_expr(toks[2..].to_vec());
        match *op {
            "=" => return Ok(Stmt::Assign(target.clone(), value()?)),
            "+=" | "-=" | "*=" | "%=" => {
                return Ok(Stmt::AugAssign(target.clone(), &op[..1], value()?));
            }
            _ => {}
        }
    }
    Ok(Stmt::Expr(parse_expr(toks)?))
}

/// A parsed toy function.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyFunction {
    pub name: String,
    pub params: Vec<String>,
    body: Vec<Stmt>,
}

impl ToyFunction {
    /// Parses the first `def` in `src` (lines outside it are ignored).
    pub fn parse(src: &str) -> Result<Self, String> {
        let lines = logical_lines(src);
        let start = lines
            .iter()
            .position(|l| l.text.starts_with("def "))
            .ok_or("no function definition")?;
        let head = &lines[start];
        let sig = head.text["def ".len()..]
            .trim()
            .strip_suffix(':')
            .ok_or("function header must end with ':'")?;
        let (name, params) = sig.split_once('(').ok_or("expected parameter list")?;
        let params = params.trim_end().strip_suffix(')').ok_or("expected ')'")?;
        let params = params
            .split(',')
            .map(|p| p.split(':').next().unwrap_or("").trim().to_string())
            .filter(|p| !p.is_empty())
            .collect();
        let mut pos = start + 1;
        let body = parse_body(&lines, &mut pos, head.indent)?;
        Ok(ToyFunction {
            name: name.trim().to_string(),
            params,
            body,
        })
    }
}

/// A parsed binding program.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBinding {
    body: Vec<Stmt>,
    outputs: Vec<String>,
}

impl ToyBinding {
    pub fn parse(src: &str) -> Result<Self, String> {
        let lines = logical_lines(src);
        let mut pos = 0;
        let body = parse_block(&lines, &mut pos, lines.first().map_or(0, |l| l.indent))?;
        let mut outputs: Vec<String> = Vec::new();
        for stmt in &body {
            match stmt {
                Stmt::Assign(name, _) => {
                    if !outputs.contains(name) {
                        outputs.push(name.clone());
                    }
                }
                _ => return Err("binding programs may only contain assignments".into()),
            }
        }
        Ok(ToyBinding { body, outputs })
    }

    /// Runs the binding against a fresh provider over `buf`.
    pub fn arguments(&self, buf: &[u8]) -> Result<Vec<Value>, Fault> {
        let mut provider = FuzzedDataProvider::new(buf);
        let mut interp = Interp {
            env: HashMap::new(),
            provider: Some(&mut provider),
            clock: &mut NoClock,
        };
        for stmt in &self.body {
            interp.exec(stmt)?;
        }
        Ok(self.outputs.iter().map(|n| interp.env[n].clone()).collect())
    }
}

/// Receives `time.sleep` requests; returns `Err(Fault::Timeout)` to abort.
pub trait Clock {
    fn sleep(&mut self, seconds: f64) -> Result<(), Fault>;
    /// Called on every loop iteration; used to stop runaway loops.
    fn tick(&mut self) -> Result<(), Fault> {
        Ok(())
    }
}

struct NoClock;

impl Clock for NoClock {
    fn sleep(&mut self, _seconds: f64) -> Result<(), Fault> {
        Ok(())
    }
}

/// Really sleeps; loops run until killed.
pub struct WallClock;

impl Clock for WallClock {
    fn sleep(&mut self, seconds: f64) -> Result<(), Fault> {
        if seconds.is_finite() && seconds > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(seconds));
        }
        Ok(())
    }
}

/// Simulated clock: time passes through `time.sleep` and at
/// [`VirtualClock::STEP_SECONDS`] per loop iteration; passing the limit is a
/// timeout.
pub struct VirtualClock {
    pub elapsed: f64,
    pub limit: f64,
}

impl VirtualClock {
    pub const STEP_SECONDS: f64 = 1e-5;

    pub fn new(limit: Duration) -> Self {
        VirtualClock {
            elapsed: 0.0,
            limit: limit.as_secs_f64(),
        }
    }

    fn advance(&mut self, seconds: f64) -> Result<(), Fault> {
        self.elapsed += seconds.max(0.0);
        if self.elapsed > self.limit {
            Err(Fault::Timeout)
        } else {
            Ok(())
        }
    }
}

impl Clock for VirtualClock {
    fn sleep(&mut self, seconds: f64) -> Result<(), Fault> {
        self.advance(seconds)
    }

    fn tick(&mut self) -> Result<(), Fault> {
        self.advance(Self::STEP_SECONDS)
    }
}

enum Flow {
    Next,
    Return(Value),
    Break,
    Continue,
}

struct Interp<'p, 'b, 'c> {
    env: HashMap<String, Value>,
    provider: Option<&'p mut FuzzedDataProvider<'b>>,
    clock: &'c mut dyn Clock,
}

impl Interp<'_, '_, '_> {
    fn block(&mut self, body: &[Stmt]) -> Result<Flow, Fault> {
        for stmt in body {
            match self.exec(stmt)? {
                Flow::Next => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Next)
    }

    fn tick(&mut self) -> Result<(), Fault> {
        self.clock.tick()
    }

    fn exec(&mut self, stmt: &Stmt) -> Result<Flow, Fault> {
        match stmt {
            Stmt::Assign(name, e) => {
                let v = self.eval(e)?;
                self.env.insert(name.clone(), v);
            }
            Stmt::AugAssign(name, op, e) => {
                let cur = self.lookup(name)?;
                let rhs = self.eval(e)?;
                let v = binary(op, cur, rhs)?;
                self.env.insert(name.clone(), v);
            }
            Stmt::Return(e) => return Ok(Flow::Return(self.eval(e)?)),
            Stmt::Expr(e) => {
                self.eval(e)?;
            }
            Stmt::Pass => {}
            Stmt::Break => return Ok(Flow::Break),
            Stmt::Continue => return Ok(Flow::Continue),
            Stmt::Raise(class) => return Err(Fault::Raise(class.clone())),
            Stmt::If(arms, other) => {
                for (cond, body) in arms {
                    if self.eval(cond)?.truthy() {
                        return self.block(body);
                    }
                }
                return self.block(other);
            }
            Stmt::For(var, lo, hi, body) => {
                let lo = int_arg(self.eval(lo)?)?;
                let hi = int_arg(self.eval(hi)?)?;
                let mut i = lo;
                while i < hi {
                    self.tick()?;
                    self.env.insert(var.clone(), Value::Int(i));
                    match self.block(body)? {
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Break => break,
                        Flow::Next | Flow::Continue => {}
                    }
                    i += 1;
                }
            }
            Stmt::While(cond, body) => {
                while self.eval(cond)?.truthy() {
                    self.tick()?;
                    match self.block(body)? {
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Break => break,
                        Flow::Next | Flow::Continue => {}
                    }
                }
            }
        }
        Ok(Flow::Next)
    }

    fn lookup(&self, name: &str) -> Result<Value, Fault> {
        self.env.get(name).cloned().ok_or_else(|| Fault::raise("NameError"))
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, Fault> {
        Ok(match e {
            Expr::Lit(v) => v.clone(),
            Expr::Name(n) => self.lookup(n)?,
            Expr::Unary(op, inner) => {
                let v = self.eval(inner)?;
                match (op, v.as_number()) {
                    (&"+", Some(n)) => num_value(n),
                    (_, Some(Num::Int(i))) => Value::Int(i.checked_neg().ok_or_else(|| Fault::raise("OverflowError"))?),
                    (_, Some(Num::Float(f))) => Value::Float(-f),
                    _ => return Err(Fault::raise("TypeError")),
                }
            }
            Expr::Binary(op, l, r) => {
                let l = self.eval(l)?;
                let r = self.eval(r)?;
                binary(op, l, r)?
            }
            Expr::Compare(ops, operands) => {
                let mut left = self.eval(&operands[0])?;
                for (op, rhs) in ops.iter().zip(&operands[1..]) {
                    let right = self.eval(rhs)?;
                    if !compare(op, &left, &right)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Value::Bool(true)
            }
            Expr::And(l, r) => {
                let l = self.eval(l)?;
                if !l.truthy() {
                    l
                } else {
                    self.eval(r)?
                }
            }
            Expr::Or(l, r) => {
                let l = self.eval(l)?;
                if l.truthy() {
                    l
                } else {
                    self.eval(r)?
                }
            }
            Expr::Not(inner) => Value::Bool(!self.eval(inner)?.truthy()),
            Expr::IfElse(cond, body, other) => {
                if self.eval(cond)?.truthy() {
                    self.eval(body)?
                } else {
                    self.eval(other)?
                }
            }
            Expr::Call(name, args) => {
                let args = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>, _>>()?;
                self.call(name, args)?
            }
        })
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, Fault> {
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(Fault::raise("TypeError"))
            }
        };
        if let Some(method) = name.strip_prefix("fdp.") {
            let provider = self.provider.as_deref_mut().ok_or_else(|| Fault::raise("NameError"))?;
            let ints = args.iter().cloned().map(int_arg).collect::<Result<Vec<_>, _>>()?;
            let value_err = |_| Fault::raise("ValueError");
            return match (method, ints.as_slice()) {
                ("ConsumeIntInRange", [lo, hi]) => provider.consume_int_in_range(*lo, *hi).map(Value::Int).map_err(value_err),
                ("ConsumeBool", []) => Ok(Value::Bool(provider.consume_bool())),
                ("ConsumeProbability", []) => Ok(Value::Float(provider.consume_probability())),
                ("ConsumeAsciiString", [n]) if *n >= 0 => Ok(Value::Str(provider.consume_ascii_string(*n as usize))),
                ("ConsumeIntList", [count, lo, hi]) if *count >= 0 => provider
                    .consume_int_list(*count as usize, *lo, *hi)
                    .map_err(value_err)
                    .and_then(|v| {
                        v.iter()
                            .try_fold(0i64, |acc, x| acc.checked_add(*x))
                            .map(Value::Int)
                            .ok_or_else(|| Fault::raise("OverflowError"))
                    }),
                _ => Err(Fault::raise("AttributeError")),
            };
        }
        match name {
            "time.sleep" => {
                arity(1)?;
                let secs = args[0].as_number().ok_or_else(|| Fault::raise("TypeError"))?.float();
                self.clock.sleep(secs)?;
                Ok(Value::None)
            }
            "abs" => {
                arity(1)?;
                match args[0].as_number() {
                    Some(Num::Int(i)) => i.checked_abs().map(Value::Int).ok_or_else(|| Fault::raise("OverflowError")),
                    Some(Num::Float(f)) => Ok(Value::Float(f.abs())),
                    None => Err(Fault::raise("TypeError")),
                }
            }
            "min" | "max" => {
                if args.is_empty() {
                    return Err(Fault::raise("TypeError"));
                }
                let want = if name == "min" { "<" } else { ">" };
                let mut best = args[0].clone();
                for v in &args[1..] {
                    if compare(want, v, &best)? {
                        best = v.clone();
                    }
                }
                Ok(best)
            }
            "int" => {
                arity(1)?;
                match &args[0] {
                    Value::Str(s) => s.trim().parse().map(Value::Int).map_err(|_| Fault::raise("ValueError")),
                    v => match v.as_number() {
                        Some(Num::Int(i)) => Ok(Value::Int(i)),
                        Some(Num::Float(f)) if f.is_finite() => Ok(Value::Int(f.trunc() as i64)),
                        Some(Num::Float(_)) => Err(Fault::raise("OverflowError")),
                        None => Err(Fault::raise("TypeError")),
                    },
                }
            }
            "float" => {
                arity(1)?;
                args[0]
                    .as_number()
                    .map(|n| Value::Float(n.float()))
                    .ok_or_else(|| Fault::raise("TypeError"))
            }
            "bool" => {
                arity(1)?;
                Ok(Value::Bool(args[0].truthy()))
            }
            "len" => {
                arity(1)?;
                match &args[0] {
                    Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
                    _ => Err(Fault::raise("TypeError")),
                }
            }
            "str" => {
                arity(1)?;
                Ok(Value::Str(match &args[0] {
                    Value::Str(s) => s.clone(),
                    v => v.canonical(),
                }))
            }
            _ => Err(Fault::raise("NameError")),
        }
    }
}

fn int_arg(v: Value) -> Result<i64, Fault> {
    match v.as_number() {
        Some(Num::Int(i)) => Ok(i),
        _ => Err(Fault::raise("TypeError")),
    }
}

fn num_value(n: Num) -> Value {
    match n {
        Num::Int(i) => Value::Int(i),
        Num::Float(f) => Value::Float(f),
    }
}

fn overflow() -> Fault {
    Fault::raise("OverflowError")
}

fn binary(op: &str, l: Value, r: Value) -> Result<Value, Fault> {
    if let (Value::Str(a), Value::Str(b)) = (&l, &r) {
        return match op {
            "+" => Ok(Value::Str(format!("{a}{b}"))),
            _ => Err(Fault::raise("TypeError")),
        };
    }
    let (a, b) = match (l.as_number(), r.as_number()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Fault::raise("TypeError")),
    };
    if let (Num::Int(x), Num::Int(y)) = (a, b) {
        return Ok(match op {
            "+" => Value::Int(x.checked_add(y).ok_or_else(overflow)?),
            "-" => Value::Int(x.checked_sub(y).ok_or_else(overflow)?),
            "*" => Value::Int(x.checked_mul(y).ok_or_else(overflow)?),
            "/" => {
                if y == 0 {
                    return Err(Fault::raise("ZeroDivisionError"));
                }
                Value::Float(x as f64 / y as f64)
            }
            "//" | "%" => {
                if y == 0 {
                    return Err(Fault::raise("ZeroDivisionError"));
                }
                let mut q = x.checked_div(y).ok_or_else(overflow)?;
                let mut m = x.checked_rem(y).ok_or_else(overflow)?;
                if m != 0 && ((m < 0) != (y < 0)) {
                    q -= 1;
                    m += y;
                }
                Value::Int(if op == "//" { q } else { m })
            }
            "**" => {
                if y < 0 {
                    Value::Float((x as f64).powf(y as f64))
                } else {
                    let e = u32::try_from(y).map_err(|_| overflow())?;
                    Value::Int(x.checked_pow(e).ok_or_else(overflow)?)
                }
            }
            _ => return Err(Fault::raise("TypeError")),
        });
    }
    let (x, y) = (a.float(), b.float());
    Ok(Value::Float(match op {
        "+" => x + y,
        "-" => x - y,
        "*" => x * y,
        "/" | "//" | "%" if y == 0.0 => return Err(Fault::raise("ZeroDivisionError")),
        "/" => x / y,
        "//" => (x / y).floor(),
        "%" => x - y * (x / y).floor(),
        "**" => x.powf(y),
        _ => return Err(Fault::raise("TypeError")),
    }))
}

fn compare(op: &str, l: &Value, r: &Value) -> Result<bool, Fault> {
    let ord = match (l.as_number(), r.as_number()) {
        (Some(Num::Int(a)), Some(Num::Int(b))) => Some(a.cmp(&b)),
        (Some(a), Some(b)) => a.float().partial_cmp(&b.float()),
        _ => match (l, r) {
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::None, Value::None) => Some(std::cmp::Ordering::Equal),
            _ => None,
        },
    };
    use std::cmp::Ordering::*;
    match (op, ord) {
        ("==", o) => Ok(o == Some(Equal)),
        ("!=", o) => Ok(o != Some(Equal)),
        (_, None) if matches!((l, r), (Value::Float(_), _) | (_, Value::Float(_))) => Ok(false),
        (_, None) => Err(Fault::raise("TypeError")),
        ("<", Some(o)) => Ok(o == Less),
        ("<=", Some(o)) => Ok(o != Greater),
        (">", Some(o)) => Ok(o == Greater),
        (">=", Some(o)) => Ok(o != Less),
        _ => Err(Fault::raise("TypeError")),
    }
}

/// Calls `f` with `args` under `clock`.
pub fn call_function(f: &ToyFunction, args: &[Value], clock: &mut dyn Clock) -> Result<Value, Fault> {
    if args.len() != f.params.len() {
        return Err(Fault::raise("TypeError"));
    }
    let mut interp = Interp {
        env: f.params.iter().cloned().zip(args.iter().cloned()).collect(),
        provider: None,
        clock,
    };
    match interp.block(&f.body)? {
        Flow::Return(v) => Ok(v),
        _ => Ok(Value::None),
    }
}

/// Renders one side's result in runner-protocol form.
pub fn protocol_output(result: &Result<Value, Fault>) -> Option<String> {
    match result {
        Ok(v) => Some(format!("OUT:{}", v.canonical())),
        Err(Fault::Raise(class)) => Some(format!("ERROR:{class}")),
        Err(Fault::Timeout) => None,
    }
}

/// A loaded pair with its binding.
#[derive(Debug, Clone)]
pub struct ToySession {
    pub a: ToyFunction,
    pub b: ToyFunction,
    pub binding: ToyBinding,
}

impl ToySession {
    /// Loads a function-mode session; errors follow the runner's `err` format.
    pub fn load(mode: &str, code_a: &str, code_b: &str, binding: &str, entry: Option<&str>) -> Result<Self, String> {
        if mode != "function" {
            return Err(format!("unsupported mode {mode:?}: the toy runner only hosts functions"));
        }
        let entry = entry.ok_or("function mode needs an entry point")?;
        let a = ToyFunction::parse(code_a).map_err(|e| format!("compile:a:{e}"))?;
        let b = ToyFunction::parse(code_b).map_err(|e| format!("compile:b:{e}"))?;
        for (side, f) in [("a", &a), ("b", &b)] {
            if f.name != entry {
                return Err(format!("compile:{side}:entry point {entry:?} not defined"));
            }
        }
        let binding = ToyBinding::parse(binding).map_err(|e| format!("compile:binding:{e}"))?;
        Ok(ToySession { a, b, binding })
    }

    /// Executes both sides on one buffer. `clock` is built fresh per side.
    pub fn exec(&self, buf: &[u8], mut clock: impl FnMut() -> Box<dyn Clock>) -> ExecReplyOrTimeout {
        let args = match self.binding.arguments(buf) {
            Ok(args) => args,
            Err(Fault::Raise(class)) => {
                let token = format!("BINDERR:{class}");
                return ExecReplyOrTimeout::Reply(ExecReply {
                    out_a: token.clone(),
                    out_b: token,
                });
            }
            Err(Fault::Timeout) => return ExecReplyOrTimeout::Timeout,
        };
        let Some(out_a) = protocol_output(&call_function(&self.a, &args, clock().as_mut())) else {
            return ExecReplyOrTimeout::Timeout;
        };
        match protocol_output(&call_function(&self.b, &args, clock().as_mut())) {
            Some(out_b) => ExecReplyOrTimeout::Reply(ExecReply { out_a, out_b }),
            None => ExecReplyOrTimeout::Timeout,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExecReplyOrTimeout {
    Reply(ExecReply),
    Timeout,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fault::Raise(c) => write!(f, "raised {c}"),
            Fault::Timeout => f.write_str("timed out"),
        }
    }
}

/// Serves the runner protocol over line-delimited JSON until `shutdown` or EOF.
/// Subjects run on the wall clock, so hangs are real and left to the harness.
pub fn serve(input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    let mut session: Option<ToySession> = None;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Err(e) => Response::error(format!("bad request: {e}")),
            Ok(Request::Shutdown) => return Ok(()),
            Ok(Request::Init(init)) => match ToySession::load(
                init.mode.as_str(),
                &init.code_a,
                &init.code_b,
                &init.binding,
                init.entry.as_deref(),
            ) {
                Ok(s) => {
                    session = Some(s);
                    Response::ok()
                }
                Err(e) => {
                    session = None;
                    Response::error(e)
                }
            },
            Ok(Request::Exec { buf }) => match (&session, base64::engine::general_purpose::STANDARD.decode(buf)) {
                (None, _) => Response::error("exec before init"),
                (_, Err(e)) => Response::error(format!("bad buffer: {e}")),
                (Some(s), Ok(bytes)) => match s.exec(&bytes, || Box::new(WallClock)) {
                    ExecReplyOrTimeout::Reply(r) => Response::exec(r),
                    // wall-clock subjects never report timeouts themselves
                    ExecReplyOrTimeout::Timeout => Response::error("subject timed out"),
                },
            },
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str, args: &[Value]) -> Result<Value, Fault> {
        let f = ToyFunction::parse(src).unwrap();
        call_function(&f, args, &mut VirtualClock::new(Duration::from_secs(1)))
    }

    #[test]
    fn arithmetic_follows_python() {
        assert_eq!(run("def f(a, b):\n    return a // b\n", &[Value::Int(-7), Value::Int(2)]), Ok(Value::Int(-4)));
        assert_eq!(run("def f(a, b):\n    return a % b\n", &[Value::Int(-7), Value::Int(2)]), Ok(Value::Int(1)));
        assert_eq!(run("def f(a, b):\n    return a / b\n", &[Value::Int(6), Value::Int(2)]), Ok(Value::Float(3.0)));
        assert_eq!(run("def f(a):\n    return -a ** 2\n", &[Value::Int(3)]), Ok(Value::Int(-9)));
        assert_eq!(
            run("def f(a):\n    return a // 0\n", &[Value::Int(3)]),
            Err(Fault::Raise("ZeroDivisionError".into()))
        );
        assert_eq!(run("def f(a):\n    return 1 < a <= 3\n", &[Value::Int(3)]), Ok(Value::Bool(true)));
    }

    #[test]
    fn loops_and_branches() {
        let slow = "def f(n):\n    total = 0\n    for i in range(1, n + 1):\n        total += i\n    return total\n";
        let fast = "def f(n):\n    return n * (n + 1) // 2\n";
        for n in [0, 1, 5, 100] {
            assert_eq!(run(slow, &[Value::Int(n)]), run(fast, &[Value::Int(n)]));
        }
        let branchy = "def f(x):\n    if x < 0:\n        return 'neg'\n    elif x == 0:\n        return 'zero'\n    else:\n        return 'pos'\n";
        assert_eq!(run(branchy, &[Value::Int(0)]).unwrap().canonical(), "'zero'");
        let early = "def f(n):\n    i = 0\n    while True:\n        i += 1\n        if i > n:\n            break\n    return i\n";
        assert_eq!(run(early, &[Value::Int(4)]), Ok(Value::Int(5)));
        let zil = "def f(n):\n    total = 0\n    for i in []:\n        total += i\n    return total\n";
        assert_eq!(run(zil, &[Value::Int(9)]), Ok(Value::Int(0)));
    }

    #[test]
    fn faults() {
        assert_eq!(run("def f(x):\n    raise ValueError('bad')\n", &[Value::Int(1)]), Err(Fault::Raise("ValueError".into())));
        assert_eq!(run("def f(x):\n    time.sleep(5)\n    return x\n", &[Value::Int(1)]), Err(Fault::Timeout));
        assert_eq!(run("def f(x):\n    while True:\n        pass\n", &[Value::Int(1)]), Err(Fault::Timeout));
        assert_eq!(run("def f(x):\n    return y\n", &[Value::Int(1)]), Err(Fault::Raise("NameError".into())));
    }

    #[test]
    fn binding_feeds_arguments_in_order() {
        let b = ToyBinding::parse("n = fdp.ConsumeIntInRange(1, 6)\nm = fdp.ConsumeIntInRange(1, n)\n").unwrap();
        assert_eq!(b.arguments(&[0x07, 0x01]).unwrap(), vec![Value::Int(2), Value::Int(2)]);
        assert_eq!(b.arguments(&[]).unwrap(), vec![Value::Int(1), Value::Int(1)]);
        let bad = ToyBinding::parse("n = fdp.ConsumeIntInRange(5, 1)\n").unwrap();
        assert_eq!(bad.arguments(&[]), Err(Fault::Raise("ValueError".into())));
        assert!(ToyBinding::parse("return 1\n").is_err());
    }

    #[test]
    fn session_reports_compile_errors_by_side() {
        let ok = "def f(x):\n    return x\n";
        let err = ToySession::load("function", ok, "def f(x):\n    return x +\n", "x = fdp.ConsumeBool()", Some("f"))
            .unwrap_err();
        assert!(err.starts_with("compile:b:"), "{err}");
        assert!(ToySession::load("function", ok, ok, "x = fdp.ConsumeBool()", None).is_err());
        assert!(ToySession::load("program", ok, ok, "x = fdp.ConsumeBool()", Some("f")).is_err());
    }

    #[test]
    fn serve_answers_protocol() {
        let init = r#"{"op":"init","mode":"function","code_a":"def f(x):\n    return x * 2\n","code_b":"def f(x):\n    return x + x\n","binding":"x = fdp.ConsumeIntInRange(0, 9)","entry":"f"}"#;
        let exec = r#"{"op":"exec","buf":"Bw=="}"#;
        let input = format!("{init}\n{exec}\n{{\"op\":\"shutdown\"}}\n{exec}\n");
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, vec![r#"{"ok":true}"#, r#"{"ok":true,"out_a":"OUT:14","out_b":"OUT:14"}"#]);
    }
}
