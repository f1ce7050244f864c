//! Reads emitted units back: a line-based parser for the C subset the
//! generator produces, an interpreter that replays copy functions for one
//! tile, and the burst lint.
//!
//! The lint checks, for every copy loop that touches an off-chip pointer:
//! the trip count is a constant, the pointer advances by exactly one per
//! iteration, the loop is pipelined with II=1, and the accessed range stays
//! inside the facet's declared interface depth for every tile coordinate
//! that reaches the loop.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::cexpr::{Expr, ExprError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Expr {
        line: usize,
        #[source]
        source: ExprError,
    },
    #[error("function `{0}` not found")]
    NoFunction(String),
    #[error("line {line}: pointer access outside a copy block")]
    NoPointer { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    If { cond: Expr, body: Body },
    Guarded { cond: Expr, stmt: Box<Stmt> },
    Block(Body),
    PtrInit { facet: String, start: Expr },
    For { var: String, init: Expr, bound: Expr, step: Expr, body: Body },
    Pragma(String),
    Let { name: String, value: Expr },
    /// `buf[idx] = *offChipAddr;`
    PtrLoad { buf: String, index: Expr },
    /// `*offChipAddr = buf[idx];`
    PtrStore { buf: String, index: Expr },
    /// `buf[idx] = facet[offset];`
    ElemLoad { buf: String, index: Expr, facet: String, offset: Expr },
    /// `facet[offset] = buf[idx];`
    ElemStore { buf: String, index: Expr, facet: String, offset: Expr },
    PtrAdvance(Expr),
    Other(String),
}

/// Statements with their 1-based source lines.
pub type Body = Vec<(usize, Stmt)>;

#[derive(Debug, Clone, Default)]
pub struct ParsedUnit {
    pub defines: HashMap<String, i64>,
    /// Declared `depth=` of each `m_axi` port.
    pub depths: HashMap<String, i64>,
    pub functions: Vec<ParsedFunction>,
}

#[derive(Debug, Clone)]
pub struct ParsedFunction {
    pub name: String,
    pub params: Vec<String>,
    pub body: Body,
}

fn expr(line: usize, text: &str) -> Result<Expr, CParseError> {
    Expr::parse(text).map_err(|source| CParseError::Expr { line, source })
}

fn syntax(line: usize, message: impl Into<String>) -> CParseError {
    CParseError::Syntax {
        line,
        message: message.into(),
    }
}

/// `name[index]` split into its parts.
fn subscript(text: &str) -> Option<(&str, &str)> {
    let open = text.find('[')?;
    let inner = text.strip_suffix(']')?;
    let name = &text[..open];
    name.chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_')
        .then_some((name, &inner[open + 1..]))
}

fn parse_stmt(line: usize, text: &str) -> Result<Stmt, CParseError> {
    if let Some(rest) = text.strip_prefix("#pragma ") {
        return Ok(Stmt::Pragma(rest.trim().to_string()));
    }
    let Some(body) = text.strip_suffix(';') else {
        return Ok(Stmt::Other(text.to_string()));
    };
    if let Some(rest) = body.strip_prefix("data_t *offChipAddr = ") {
        let (facet, start) = rest
            .split_once(" + ")
            .ok_or_else(|| syntax(line, "expected `facet + (start)`"))?;
        return Ok(Stmt::PtrInit {
            facet: facet.trim().to_string(),
            start: expr(line, start)?,
        });
    }
    if let Some(rest) = body.strip_prefix("offChipAddr = offChipAddr + ") {
        return Ok(Stmt::PtrAdvance(expr(line, rest)?));
    }
    if let Some(rest) = body.strip_prefix("int ") {
        let (name, value) = rest.split_once(" = ").ok_or_else(|| syntax(line, "expected `int name = value`"))?;
        return Ok(Stmt::Let {
            name: name.trim().to_string(),
            value: expr(line, value)?,
        });
    }
    let Some((lhs, rhs)) = body.split_once(" = ") else {
        return Ok(Stmt::Other(text.to_string()));
    };
    let (lhs, rhs) = (lhs.trim(), rhs.trim());
    if rhs == "*offChipAddr" {
        let (buf, index) = subscript(lhs).ok_or_else(|| syntax(line, "expected `buf[index]`"))?;
        return Ok(Stmt::PtrLoad {
            buf: buf.to_string(),
            index: expr(line, index)?,
        });
    }
    if lhs == "*offChipAddr" {
        let (buf, index) = subscript(rhs).ok_or_else(|| syntax(line, "expected `buf[index]`"))?;
        return Ok(Stmt::PtrStore {
            buf: buf.to_string(),
            index: expr(line, index)?,
        });
    }
    match (subscript(lhs), subscript(rhs)) {
        (Some((l, li)), Some((r, ri))) if l.starts_with("facet_") => Ok(Stmt::ElemStore {
            buf: r.to_string(),
            index: expr(line, ri)?,
            facet: l.to_string(),
            offset: expr(line, li)?,
        }),
        (Some((l, li)), Some((r, ri))) if r.starts_with("facet_") => Ok(Stmt::ElemLoad {
            buf: l.to_string(),
            index: expr(line, li)?,
            facet: r.to_string(),
            offset: expr(line, ri)?,
        }),
        _ => Ok(Stmt::Other(text.to_string())),
    }
}

/// Text between the outermost parentheses of `if (...)`-like headers.
fn parenthesized(text: &str) -> Option<&str> {
    let open = text.find('(')?;
    let close = text.rfind(')')?;
    (close > open).then(|| &text[open + 1..close])
}

fn parse_for(line: usize, header: &str) -> Result<(String, Expr, Expr, Expr), CParseError> {
    let inner = parenthesized(header).ok_or_else(|| syntax(line, "malformed for header"))?;
    let parts: Vec<&str> = inner.split(';').map(str::trim).collect();
    let [init, cond, step] = parts.as_slice() else {
        return Err(syntax(line, "for header needs three clauses"));
    };
    let (var, init) = init
        .strip_prefix("int ")
        .and_then(|r| r.split_once(" = "))
        .ok_or_else(|| syntax(line, "expected `int I = init`"))?;
    let var = var.trim().to_string();
    let bound = cond
        .strip_prefix(&format!("{var} <= "))
        .ok_or_else(|| syntax(line, format!("expected `{var} <= bound`")))?;
    let step = step
        .strip_prefix(&format!("{var} = {var} + "))
        .ok_or_else(|| syntax(line, format!("expected `{var} = {var} + step`")))?;
    Ok((var, expr(line, init)?, expr(line, bound)?, expr(line, step)?))
}

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        let l = self.lines.get(self.pos).copied();
        self.pos += 1;
        l
    }

    /// Statements until the closing `}` of the current block.
    fn block(&mut self) -> Result<Vec<(usize, Stmt)>, CParseError> {
        let mut out = Vec::new();
        while let Some((line, text)) = self.next() {
            if text == "}" {
                return Ok(out);
            }
            out.push((line, self.stmt(line, text)?));
        }
        Err(syntax(self.lines.last().map_or(0, |l| l.0), "unbalanced braces"))
    }

    fn stmt(&mut self, line: usize, text: &str) -> Result<Stmt, CParseError> {
        if text == "{" {
            return Ok(Stmt::Block(self.block()?));
        }
        if text.starts_with("for ") || text.starts_with("for(") {
            let (var, init, bound, step) = parse_for(line, text)?;
            let body = if text.ends_with('{') {
                self.block()?
            } else {
                let (l, t) = self.next().ok_or_else(|| syntax(line, "missing loop body"))?;
                vec![(l, self.stmt(l, t)?)]
            };
            return Ok(Stmt::For { var, init, bound, step, body });
        }
        if text.starts_with("if (") {
            let braced = text.ends_with('{');
            let header = text.trim_end_matches('{').trim();
            let cond = expr(line, parenthesized(header).ok_or_else(|| syntax(line, "malformed if"))?)?;
            if braced {
                let body = self.block()?;
                return Ok(Stmt::If { cond, body });
            }
            let (l, t) = self.next().ok_or_else(|| syntax(line, "missing guarded statement"))?;
            return Ok(Stmt::Guarded {
                cond,
                stmt: Box::new(self.stmt(l, t)?),
            });
        }
        parse_stmt(line, text)
    }
}

impl ParsedUnit {
    pub fn parse(source: &str) -> Result<Self, CParseError> {
        let mut unit = ParsedUnit::default();
        let all: Vec<(usize, &str)> = source
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        for &(line, text) in &all {
            if let Some(rest) = text.strip_prefix("#define ") {
                let mut parts = rest.split_whitespace();
                if let (Some(name), Some(value)) = (parts.next(), parts.next()) {
                    if let Ok(v) = value.parse() {
                        unit.defines.insert(name.to_string(), v);
                    }
                }
            }
            if let Some(rest) = text.strip_prefix("#pragma HLS INTERFACE m_axi ") {
                let mut port = None;
                let mut depth = None;
                for kv in rest.split_whitespace() {
                    if let Some(p) = kv.strip_prefix("port=") {
                        port = Some(p.to_string());
                    }
                    if let Some(d) = kv.strip_prefix("depth=") {
                        depth = Some(d.parse().map_err(|_| syntax(line, "bad depth"))?);
                    }
                }
                if let (Some(p), Some(d)) = (port, depth) {
                    unit.depths.insert(p, d);
                }
            }
        }
        let mut idx = 0;
        while idx < all.len() {
            let (line, text) = all[idx];
            let is_header = !text.starts_with('#')
                && !text.starts_with('/')
                && !text.starts_with('*')
                && text.contains('(')
                && text.ends_with(')')
                && all.get(idx + 1).map(|l| l.1) == Some("{");
            if !is_header {
                idx += 1;
                continue;
            }
            let name = text[..text.find('(').unwrap()]
                .split_whitespace()
                .last()
                .unwrap_or_default()
                .to_string();
            let params = parenthesized(text)
                .unwrap_or_default()
                .split(',')
                .filter_map(|p| p.trim().split([' ', '*', '[']).filter(|w| !w.is_empty()).nth(1))
                .map(str::to_string)
                .collect();
            let mut lines = Lines {
                lines: all[idx + 2..].to_vec(),
                pos: 0,
            };
            let body = lines.block().map_err(|e| match e {
                CParseError::Syntax { message, .. } if message == "unbalanced braces" => syntax(line, "unterminated function"),
                e => e,
            })?;
            idx += 2 + lines.pos;
            unit.functions.push(ParsedFunction { name, params, body });
        }
        Ok(unit)
    }

    pub fn function(&self, name: &str) -> Result<&ParsedFunction, CParseError> {
        self.functions
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| CParseError::NoFunction(name.to_string()))
    }
}

/// One element moved by a replayed copy function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Access {
    pub facet: String,
    /// Offset inside the facet array.
    pub offset: i64,
    pub buf_index: i64,
    /// False when a read guard rejects the element (it is still fetched).
    pub stored: bool,
    pub write: bool,
}

struct Interp<'a> {
    env: HashMap<String, i64>,
    pointer: Option<(String, i64)>,
    out: &'a mut Vec<Access>,
}

impl Interp<'_> {
    fn eval(&self, e: &Expr, line: usize) -> Result<i64, CParseError> {
        e.eval(&self.env).map_err(|source| CParseError::Expr { line, source })
    }

    fn run(&mut self, stmts: &[(usize, Stmt)]) -> Result<(), CParseError> {
        for (line, s) in stmts {
            self.exec(s, *line, true)?;
        }
        Ok(())
    }

    fn exec(&mut self, s: &Stmt, line: usize, enabled: bool) -> Result<(), CParseError> {
        match s {
            Stmt::If { cond, body } => {
                if self.eval(cond, line)? != 0 {
                    self.run(body)?;
                }
            }
            Stmt::Guarded { cond, stmt } => {
                let on = self.eval(cond, line)? != 0;
                self.exec(stmt, line, on)?;
            }
            Stmt::Block(body) => {
                let saved = self.pointer.clone();
                self.run(body)?;
                self.pointer = saved;
            }
            Stmt::PtrInit { facet, start } => {
                self.pointer = Some((facet.clone(), self.eval(start, line)?));
            }
            Stmt::For { var, init, bound, step, body } => {
                let mut v = self.eval(init, line)?;
                loop {
                    self.env.insert(var.clone(), v);
                    if v > self.eval(bound, line)? {
                        break;
                    }
                    self.run(body)?;
                    v += self.eval(step, line)?;
                }
                self.env.remove(var);
            }
            Stmt::Let { name, value } => {
                let v = self.eval(value, line)?;
                self.env.insert(name.clone(), v);
            }
            Stmt::PtrLoad { index, .. } | Stmt::PtrStore { index, .. } => {
                let (facet, offset) = self.pointer.clone().ok_or(CParseError::NoPointer { line })?;
                self.out.push(Access {
                    facet,
                    offset,
                    buf_index: self.eval(index, line)?,
                    stored: enabled,
                    write: matches!(s, Stmt::PtrStore { .. }),
                });
            }
            Stmt::ElemLoad { index, facet, offset, .. } | Stmt::ElemStore { index, facet, offset, .. } => {
                self.out.push(Access {
                    facet: facet.clone(),
                    offset: self.eval(offset, line)?,
                    buf_index: self.eval(index, line)?,
                    stored: enabled,
                    write: matches!(s, Stmt::ElemStore { .. }),
                });
            }
            Stmt::PtrAdvance(step) => {
                let step = self.eval(step, line)?;
                let p = self.pointer.as_mut().ok_or(CParseError::NoPointer { line })?;
                p.1 += step;
            }
            Stmt::Pragma(_) | Stmt::Other(_) => {}
        }
        Ok(())
    }
}

/// Replays `function` for the tile whose coordinates are `args` (bound to
/// the function's leading parameters) and returns every element moved.
pub fn replay(unit: &ParsedUnit, function: &str, args: &[i64]) -> Result<Vec<Access>, CParseError> {
    let f = unit.function(function)?;
    let mut env = unit.defines.clone();
    for (p, v) in f.params.iter().zip(args) {
        env.insert(p.clone(), *v);
    }
    let mut out = Vec::new();
    let mut interp = Interp {
        env,
        pointer: None,
        out: &mut out,
    };
    for (line, s) in &f.body {
        interp.exec(s, *line, true)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    NonConstantTrip,
    OutOfBounds,
    NonConsecutive,
    NotPipelined,
    Unparsable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub function: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {:?}: {}", self.function, self.line, self.kind, self.message)
    }
}

struct Linter<'a> {
    unit: &'a ParsedUnit,
    function: String,
    coords: Vec<String>,
    conds: Vec<Expr>,
    pointer: Option<(String, Expr)>,
    out: Vec<Violation>,
}

impl Linter<'_> {
    fn report(&mut self, kind: ViolationKind, line: usize, message: String) {
        self.out.push(Violation {
            kind,
            function: self.function.clone(),
            line,
            message,
        });
    }

    /// Every binding of the tile coordinates that satisfies the enclosing
    /// conditions. Coordinates range over `CFA_TILES_*` when defined.
    fn tiles(&self) -> Vec<HashMap<String, i64>> {
        let mut envs = vec![self.unit.defines.clone()];
        for c in &self.coords {
            let n = self.unit.defines.get(&format!("CFA_TILES_{}", c.to_uppercase())).copied().unwrap_or(1);
            envs = envs
                .into_iter()
                .flat_map(|env| {
                    (0..n).map(move |v| {
                        let mut e = env.clone();
                        e.insert(c.clone(), v);
                        e
                    })
                })
                .collect();
        }
        envs.retain(|env| self.conds.iter().all(|c| c.eval(env).is_ok_and(|v| v != 0)));
        envs
    }

    fn check_range(&mut self, line: usize, facet: &str, start: &Expr, len: i64) {
        let Some(&depth) = self.unit.depths.get(facet) else {
            self.report(ViolationKind::OutOfBounds, line, format!("{facet} has no declared depth"));
            return;
        };
        for env in self.tiles() {
            match start.eval(&env) {
                Ok(s) if s >= 0 && s + len <= depth => {}
                Ok(s) => {
                    let tile: Vec<String> = self.coords.iter().map(|c| env[c].to_string()).collect();
                    self.report(
                        ViolationKind::OutOfBounds,
                        line,
                        format!("{facet}[{s}..{}] exceeds depth {depth} for tile ({})", s + len, tile.join(",")),
                    );
                    return;
                }
                Err(e) => {
                    self.report(ViolationKind::Unparsable, line, format!("start address: {e}"));
                    return;
                }
            }
        }
    }

    fn walk(&mut self, stmts: &[(usize, Stmt)]) {
        for (line, s) in stmts {
            self.stmt(*line, s);
        }
    }

    fn stmt(&mut self, line: usize, s: &Stmt) {
        match s {
            Stmt::If { cond, body } => {
                self.conds.push(cond.clone());
                self.walk(body);
                self.conds.pop();
            }
            Stmt::Block(body) => {
                let saved = self.pointer.take();
                self.walk(body);
                self.pointer = saved;
            }
            Stmt::Guarded { stmt, .. } => self.stmt(line, stmt),
            Stmt::PtrInit { facet, start } => self.pointer = Some((facet.clone(), start.clone())),
            Stmt::For { var, init, bound, step, body } => self.copy_loop(line, var, init, bound, step, body),
            Stmt::ElemLoad { facet, offset, .. } | Stmt::ElemStore { facet, offset, .. } => {
                let (facet, offset) = (facet.clone(), offset.clone());
                self.check_range(line, &facet, &offset, 1);
            }
            _ => {}
        }
    }

    fn copy_loop(&mut self, line: usize, var: &str, init: &Expr, bound: &Expr, step: &Expr, body: &[(usize, Stmt)]) {
        let touches = |s: &Stmt| matches!(s, Stmt::PtrLoad { .. } | Stmt::PtrStore { .. });
        let accesses = body.iter().any(|(_, s)| touches(s) || matches!(s, Stmt::Guarded { stmt, .. } if touches(stmt)));
        if !accesses {
            return;
        }
        let trip = match (init.as_const(), bound.as_const(), step.as_const()) {
            (Some(0), Some(b), Some(1)) => Some(b + 1),
            (Some(i), Some(b), Some(st)) if st > 0 => {
                self.report(
                    ViolationKind::NonConsecutive,
                    line,
                    format!("loop over `{var}` starts at {i} with step {st}"),
                );
                Some((b - i) / st + 1)
            }
            _ => {
                self.report(
                    ViolationKind::NonConstantTrip,
                    line,
                    format!("trip count of the loop over `{var}` is not a constant"),
                );
                None
            }
        };
        if !body.iter().any(|(_, s)| matches!(s, Stmt::Pragma(p) if p.replace(' ', "") == "HLSPIPELINEII=1")) {
            self.report(ViolationKind::NotPipelined, line, "copy loop lacks `#pragma HLS PIPELINE II=1`".into());
        }
        let advances: Vec<&Expr> = body
            .iter()
            .filter_map(|(_, s)| match s {
                Stmt::PtrAdvance(e) => Some(e),
                _ => None,
            })
            .collect();
        match advances.as_slice() {
            [e] if e.as_const() == Some(1) => {}
            [e] => self.report(
                ViolationKind::NonConsecutive,
                line,
                format!("pointer advances by `{e:?}` per iteration instead of 1"),
            ),
            _ => self.report(
                ViolationKind::NonConsecutive,
                line,
                format!("pointer advanced {} times per iteration", advances.len()),
            ),
        }
        match (self.pointer.clone(), trip) {
            (Some((facet, start)), Some(trip)) => self.check_range(line, &facet, &start, trip),
            (None, _) => self.report(ViolationKind::Unparsable, line, "copy loop without a pointer".into()),
            _ => {}
        }
    }
}

/// Burst-inference violations of every copy loop in `source`; empty means
/// every loop is burst capable.
pub fn burst_lint(source: &str) -> Vec<Violation> {
    let unit = match ParsedUnit::parse(source) {
        Ok(u) => u,
        Err(e) => {
            return vec![Violation {
                kind: ViolationKind::Unparsable,
                function: String::new(),
                line: 0,
                message: e.to_string(),
            }]
        }
    };
    let mut out = Vec::new();
    for f in &unit.functions {
        let coords: Vec<String> = f
            .params
            .iter()
            .take_while(|p| unit.defines.contains_key(&format!("CFA_TILES_{}", p.to_uppercase())))
            .cloned()
            .collect();
        let mut linter = Linter {
            unit: &unit,
            function: f.name.clone(),
            coords,
            conds: Vec::new(),
            pointer: None,
            out: Vec::new(),
        };
        linter.walk(&f.body);
        out.extend(linter.out);
    }
    out
}
