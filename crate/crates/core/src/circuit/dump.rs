//! Plain-text circuit dump.
//!
//! ```text
//! ac v1 nodes <count> edges <count> root <id>
//! var <id> <cardinality> <name>
//! units <id>...
//! <id> ind <var> <value>
//! <id> par <value> <label>          label: k | c<table>:<index> | f<n>
//! <id> sum <dvar|-> {<vars>} <children>...
//! <id> prod {<vars>} <children>...
//! ```
//!
//! Nodes are listed bottom-up with ids `0..count`; `{<vars>}` is the cached
//! variable set, comma separated.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{AcBuilder, DecisionAC, NodeId, NodeKind, ParamLabel};
use crate::network::{VarId, Variable};
use crate::{Error, Result};

pub fn write_dump(ac: &DecisionAC) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ac v1 nodes {} edges {} root {}", ac.node_count(), ac.edge_count(), ac.root().0);
    for v in ac.variables() {
        let _ = writeln!(out, "var {} {} {}", v.id.0, v.cardinality, v.name);
    }
    out.push_str("units");
    for u in ac.units() {
        let _ = write!(out, " {}", u.0);
    }
    out.push('\n');
    for id in ac.ids() {
        let _ = write!(out, "{} ", id.0);
        match ac.kind(id) {
            NodeKind::Indicator { var, value } => {
                let _ = write!(out, "ind {} {}", var.0, value);
            }
            NodeKind::Parameter { value, label } => {
                let _ = write!(out, "par {value:.16e} ");
                let _ = match label {
                    ParamLabel::Constant => write!(out, "k"),
                    ParamLabel::Cell { table, index } => write!(out, "c{table}:{index}"),
                    ParamLabel::Free(n) => write!(out, "f{n}"),
                };
            }
            NodeKind::Sum { dvar } => {
                match dvar {
                    Some(d) => write!(out, "sum {} ", d.0),
                    None => write!(out, "sum - "),
                }
                .ok();
                write_set(&mut out, ac.vars(id));
            }
            NodeKind::Product => {
                out.push_str("prod ");
                write_set(&mut out, ac.vars(id));
            }
        }
        for c in ac.children(id) {
            let _ = write!(out, " {}", c.0);
        }
        out.push('\n');
    }
    out
}

fn write_set(out: &mut String, vars: &[VarId]) {
    out.push('{');
    for (i, v) in vars.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{}", v.0);
    }
    out.push('}');
}

struct Lines<'a> {
    inner: core::iter::Enumerate<core::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            if !l.trim().is_empty() {
                return Some(l);
            }
        }
        None
    }

    fn err(&self, message: &'static str) -> Error {
        Error::Parse { line: self.line, message }
    }
}

fn num<T: core::str::FromStr>(tok: Option<&str>, lines: &Lines<'_>, what: &'static str) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| lines.err(what))
}

fn parse_set(tok: Option<&str>, lines: &Lines<'_>) -> Result<Vec<VarId>> {
    let inner = tok
        .and_then(|t| t.strip_prefix('{'))
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| lines.err("expected a variable set"))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|v| num(Some(v), lines, "bad variable id").map(VarId)).collect()
}

fn parse_label(tok: &str) -> Option<ParamLabel> {
    if tok == "k" {
        return Some(ParamLabel::Constant);
    }
    if let Some(rest) = tok.strip_prefix('c') {
        let (t, i) = rest.split_once(':')?;
        return Some(ParamLabel::Cell { table: t.parse().ok()?, index: i.parse().ok()? });
    }
    tok.strip_prefix('f')?.parse().ok().map(ParamLabel::Free)
}

/// Parses a dump written by [`write_dump`] and re-certifies it. Duplicate
/// nodes are merged, so ids may shift for hand-written input.
pub fn read_dump(text: &str) -> Result<DecisionAC> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    let header = lines.next().ok_or_else(|| lines.err("empty input"))?;
    let mut h = header.split_whitespace();
    if h.next() != Some("ac") || h.next() != Some("v1") || h.next() != Some("nodes") {
        return Err(lines.err("expected header `ac v1 nodes <n> edges <m> root <r>`"));
    }
    let count: usize = num(h.next(), &lines, "bad node count")?;
    if h.next() != Some("edges") {
        return Err(lines.err("expected `edges`"));
    }
    let _edges: usize = num(h.next(), &lines, "bad edge count")?;
    if h.next() != Some("root") {
        return Err(lines.err("expected `root`"));
    }
    let root: usize = num(h.next(), &lines, "bad root id")?;
    if root >= count {
        return Err(lines.err("root out of range"));
    }

    let mut variables = Vec::new();
    let mut units = Vec::new();
    let mut b = AcBuilder::new();
    let mut map: Vec<NodeId> = Vec::with_capacity(count);
    let mut kids = Vec::new();
    while let Some(l) = lines.next() {
        let mut t = l.split_whitespace();
        match t.next() {
            Some("var") => {
                if !map.is_empty() {
                    return Err(lines.err("variable after nodes"));
                }
                let id: u32 = num(t.next(), &lines, "bad variable id")?;
                let card: usize = num(t.next(), &lines, "bad cardinality")?;
                if id as usize != variables.len() || card == 0 {
                    return Err(lines.err("variables must be numbered 0.. with positive cardinality"));
                }
                // The name is the rest of the line.
                let name = l.trim().splitn(4, ' ').nth(3).unwrap_or("");
                variables.push(Variable { id: VarId(id), name: name.to_string(), cardinality: card });
            }
            Some("units") => {
                for tok in t {
                    units.push(VarId(num(Some(tok), &lines, "bad unit id")?));
                }
            }
            Some(tok) => {
                let id: usize = num(Some(tok), &lines, "bad node id")?;
                if id != map.len() || id >= count {
                    return Err(lines.err("node ids must be consecutive from 0"));
                }
                let check_var = |v: VarId, lines: &Lines<'_>| {
                    if v.index() < variables.len() {
                        Ok(v)
                    } else {
                        Err(lines.err("unknown variable"))
                    }
                };
                let node = match t.next() {
                    Some("ind") => {
                        let var = check_var(VarId(num(t.next(), &lines, "bad variable")?), &lines)?;
                        let value: usize = num(t.next(), &lines, "bad value")?;
                        if value >= variables[var.index()].cardinality {
                            return Err(lines.err("indicator value out of range"));
                        }
                        b.indicator(var, value)
                    }
                    Some("par") => {
                        let value: f64 = num(t.next(), &lines, "bad parameter value")?;
                        if !value.is_finite() || value < 0.0 {
                            return Err(lines.err("parameters must be finite and non-negative"));
                        }
                        let label = t.next().and_then(parse_label).ok_or_else(|| lines.err("bad label"))?;
                        b.parameter(value, label)
                    }
                    Some(kind @ ("sum" | "prod")) => {
                        let dvar = if kind == "sum" {
                            match t.next() {
                                Some("-") => None,
                                tok => Some(check_var(VarId(num(tok, &lines, "bad decision variable")?), &lines)?),
                            }
                        } else {
                            None
                        };
                        let vars = parse_set(t.next(), &lines)?;
                        for &v in &vars {
                            check_var(v, &lines)?;
                        }
                        let set = b.intern_vars(&vars);
                        kids.clear();
                        for tok in t.by_ref() {
                            let c: usize = num(Some(tok), &lines, "bad child id")?;
                            if c >= map.len() {
                                return Err(lines.err("child must precede its parent"));
                            }
                            kids.push(map[c]);
                        }
                        if kind == "sum" {
                            b.sum_inner(dvar, &kids, Some(set))
                        } else {
                            b.product_inner(&kids, Some(set))
                        }
                    }
                    _ => return Err(lines.err("unknown node kind")),
                };
                if t.next().is_some() {
                    return Err(lines.err("trailing tokens"));
                }
                map.push(node);
            }
            None => {}
        }
    }
    if map.len() != count {
        return Err(Error::Parse { line: lines.line, message: "fewer nodes than declared" });
    }
    for &u in &units {
        if u.index() >= variables.len() {
            return Err(Error::UnknownVariable(u));
        }
    }
    Ok(b.finish(map[root], variables, &units))
}
