//! Text formats for algebras and subpower membership instances.
//!
//! ```text
//! # comment
//! universe: 2
//! op meet/2:
//! 0 0
//! 0 1
//! ```
//!
//! ```text
//! m: 2
//! generators:
//! 0 1
//! 1 0
//! target:
//! 0 0
//! ```

use thiserror::Error;

use super::{Element, FiniteAlgebra, Operation, SmpInstance};
use crate::terms::OperationSymbol;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError {
        line,
        message: message.into(),
    }
}

/// Non-empty lines with comments removed, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let body = l.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

fn numbers(line: usize, body: &str) -> Result<Vec<Element>, FormatError> {
    body.split(|c: char| c.is_whitespace() || c == ',' || c == '(' || c == ')')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<Element>()
                .map_err(|_| err(line, format!("`{t}` is not an element")))
        })
        .collect()
}

fn header<'a>(body: &'a str, word: &str) -> Option<&'a str> {
    body.strip_prefix(word)?.trim_start().strip_prefix(':').map(str::trim)
}

fn parse_symbol(line: usize, decl: &str) -> Result<OperationSymbol, FormatError> {
    let (name, arity) = decl
        .split_once('/')
        .ok_or_else(|| err(line, format!("expected `name/arity`, found `{decl}`")))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return Err(err(line, format!("bad operation name `{name}`")));
    }
    let arity = arity
        .trim()
        .parse()
        .map_err(|_| err(line, format!("bad arity `{}`", arity.trim())))?;
    Ok(OperationSymbol::new(name, arity))
}

pub fn parse_algebra(text: &str) -> Result<FiniteAlgebra, FormatError> {
    let mut size: Option<usize> = None;
    let mut ops: Vec<(usize, OperationSymbol, Vec<Element>)> = Vec::new();
    for (line, body) in content_lines(text) {
        if let Some(rest) = header(body, "universe") {
            if size.is_some() {
                return Err(err(line, "duplicate `universe:`"));
            }
            size = Some(
                rest.parse()
                    .map_err(|_| err(line, format!("bad universe size `{rest}`")))?,
            );
        } else if let Some(rest) = body.strip_prefix("op ") {
            if size.is_none() {
                return Err(err(line, "`op` before `universe:`"));
            }
            let decl = rest
                .trim()
                .strip_suffix(':')
                .ok_or_else(|| err(line, "expected `op name/arity:`"))?;
            ops.push((line, parse_symbol(line, decl)?, Vec::new()));
        } else {
            let (_, _, table) = ops
                .last_mut()
                .ok_or_else(|| err(line, "table entries before any `op` line"))?;
            table.extend(numbers(line, body)?);
        }
    }
    let size = size.ok_or_else(|| err(1, "missing `universe:`"))?;
    let mut operations = Vec::with_capacity(ops.len());
    for (line, symbol, table) in ops {
        let expected = size.pow(symbol.arity as u32);
        if table.len() != expected {
            return Err(err(
                line,
                format!("operation {symbol}: {} table entries, expected {expected}", table.len()),
            ));
        }
        operations.push(Operation { symbol, table });
    }
    FiniteAlgebra::new(size, operations).map_err(|e| err(1, e.to_string()))
}

/// Renders `a`; `comments` become leading `#` lines.
pub fn render_algebra(a: &FiniteAlgebra, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(&format!("universe: {}\n", a.size()));
    for op in a.operations() {
        out.push_str(&format!("op {}:\n", op.symbol));
        let width = if op.symbol.arity == 0 { 1 } else { a.size() };
        for row in op.table.chunks(width) {
            let row: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn parse_instance(text: &str) -> Result<SmpInstance, FormatError> {
    #[derive(PartialEq)]
    enum Section {
        Start,
        Generators,
        Target,
    }
    let mut m: Option<usize> = None;
    let mut section = Section::Start;
    let mut generators = Vec::new();
    let mut target: Option<Vec<Element>> = None;
    for (line, body) in content_lines(text) {
        if let Some(rest) = header(body, "m") {
            if m.is_some() {
                return Err(err(line, "duplicate `m:`"));
            }
            m = Some(rest.parse().map_err(|_| err(line, format!("bad power `{rest}`")))?);
            continue;
        }
        if let Some(rest) = header(body, "generators") {
            if !rest.is_empty() {
                return Err(err(line, "unexpected text after `generators:`"));
            }
            section = Section::Generators;
            continue;
        }
        if let Some(rest) = header(body, "target") {
            section = Section::Target;
            if rest.is_empty() {
                continue;
            }
            if target.is_some() {
                return Err(err(line, "more than one target"));
            }
            target = Some(numbers(line, rest)?);
            continue;
        }
        let width = m.ok_or_else(|| err(line, "tuple before `m:`"))?;
        let tuple = numbers(line, body)?;
        if tuple.len() != width {
            return Err(err(line, format!("tuple has {} entries, expected {width}", tuple.len())));
        }
        match section {
            Section::Start => return Err(err(line, "tuple outside `generators:`/`target:`")),
            Section::Generators => generators.push(tuple),
            Section::Target => {
                if target.is_some() {
                    return Err(err(line, "more than one target"));
                }
                target = Some(tuple);
            }
        }
    }
    let m = m.ok_or_else(|| err(1, "missing `m:`"))?;
    let target = target.ok_or_else(|| err(1, "missing target"))?;
    if target.len() != m {
        return Err(err(1, format!("target has {} entries, expected {m}", target.len())));
    }
    Ok(SmpInstance {
        m,
        generators,
        target,
    })
}

pub fn render_instance(inst: &SmpInstance) -> String {
    let row = |t: &[Element]| t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    let mut out = format!("m: {}\ngenerators:\n", inst.m);
    for g in &inst.generators {
        out.push_str(&row(g));
        out.push('\n');
    }
    out.push_str("target:\n");
    out.push_str(&row(&inst.target));
    out.push('\n');
    out
}
