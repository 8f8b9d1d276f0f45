use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::{Identity, LinearTerm, MaltsevCondition, OperationSymbol, SymbolId, TermError, Variable};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: `{symbol}(...)` used as an argument; identities must be linear")]
    NestedTerm {
        line: usize,
        column: usize,
        symbol: String,
    },
    #[error("line {line}, column {column}: `{symbol}` has arity {expected} but is applied to {found} arguments")]
    ArityMismatch {
        line: usize,
        column: usize,
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: unknown operation symbol `{symbol}`")]
    UnknownSymbol {
        line: usize,
        column: usize,
        symbol: String,
    },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: TermError },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Ident(&'a str),
    Punct(char),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    /// Byte offset of `src` within its line, for column reporting.
    base: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize, base: usize) -> Self {
        Lexer {
            src,
            pos: 0,
            line,
            base,
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn column(&self) -> usize {
        self.base + self.src[..self.pos].chars().count() + 1
    }

    fn peek(&mut self) -> Option<(usize, Tok<'a>)> {
        self.skip_ws();
        let col = self.column();
        let rest = &self.src[self.pos..];
        let c = rest.chars().next()?;
        if c.is_alphanumeric() || c == '_' {
            let len = rest
                .char_indices()
                .find(|(_, c)| !(c.is_alphanumeric() || *c == '_'))
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            Some((col, Tok::Ident(&rest[..len])))
        } else {
            Some((col, Tok::Punct(c)))
        }
    }

    fn next(&mut self) -> Option<(usize, Tok<'a>)> {
        let t = self.peek()?;
        self.pos += match t.1 {
            Tok::Ident(s) => s.len(),
            Tok::Punct(c) => c.len_utf8(),
        };
        Some(t)
    }

    fn error(&self, column: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn expect_punct(&mut self, want: char) -> Result<(), ParseError> {
        match self.next() {
            Some((_, Tok::Punct(c))) if c == want => Ok(()),
            Some((col, t)) => Err(self.error(col, format!("expected `{want}`, found {}", describe(&t)))),
            None => Err(self.error(self.column(), format!("expected `{want}`, found end of line"))),
        }
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
}

fn describe(t: &Tok<'_>) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Punct(c) => format!("`{c}`"),
    }
}

enum RawTerm {
    Var(String),
    App(SymbolId, Vec<String>),
}

struct Signature {
    symbols: Vec<OperationSymbol>,
    by_name: HashMap<String, usize>,
}

fn parse_term(lx: &mut Lexer<'_>, sig: &Signature) -> Result<RawTerm, ParseError> {
    let (col, tok) = lx
        .next()
        .ok_or_else(|| lx.error(lx.column(), "expected a term, found end of line"))?;
    let name = match tok {
        Tok::Ident(s) => s,
        t => return Err(lx.error(col, format!("expected a term, found {}", describe(&t)))),
    };
    let is_app = matches!(lx.peek(), Some((_, Tok::Punct('('))));
    if !is_app {
        if let Some(&i) = sig.by_name.get(name) {
            let s = &sig.symbols[i];
            if s.arity != 0 {
                return Err(ParseError::ArityMismatch {
                    line: lx.line,
                    column: col,
                    symbol: name.to_string(),
                    expected: s.arity,
                    found: 0,
                });
            }
            return Ok(RawTerm::App(SymbolId(i), Vec::new()));
        }
        return Ok(RawTerm::Var(name.to_string()));
    }
    let sym = *sig.by_name.get(name).ok_or_else(|| ParseError::UnknownSymbol {
        line: lx.line,
        column: col,
        symbol: name.to_string(),
    })?;
    lx.expect_punct('(')?;
    let mut args = Vec::new();
    if matches!(lx.peek(), Some((_, Tok::Punct(')')))) {
        lx.next();
    } else {
        loop {
            let (acol, tok) = lx
                .next()
                .ok_or_else(|| lx.error(lx.column(), "unterminated argument list"))?;
            let arg = match tok {
                Tok::Ident(s) => s,
                t => return Err(lx.error(acol, format!("expected a variable, found {}", describe(&t)))),
            };
            if matches!(lx.peek(), Some((_, Tok::Punct('(')))) || sig.by_name.contains_key(arg) {
                return Err(ParseError::NestedTerm {
                    line: lx.line,
                    column: acol,
                    symbol: arg.to_string(),
                });
            }
            args.push(arg.to_string());
            match lx.next() {
                Some((_, Tok::Punct(','))) => continue,
                Some((_, Tok::Punct(')'))) => break,
                Some((c, t)) => {
                    return Err(lx.error(c, format!("expected `,` or `)`, found {}", describe(&t))))
                }
                None => return Err(lx.error(lx.column(), "unterminated argument list")),
            }
        }
    }
    let expected = sig.symbols[sym].arity;
    if args.len() != expected {
        return Err(ParseError::ArityMismatch {
            line: lx.line,
            column: col,
            symbol: name.to_string(),
            expected,
            found: args.len(),
        });
    }
    Ok(RawTerm::App(SymbolId(sym), args))
}

fn parse_signature(rest: &str, line: usize, base: usize) -> Result<Signature, ParseError> {
    let mut lx = Lexer::new(rest, line, base);
    let mut sig = Signature {
        symbols: Vec::new(),
        by_name: HashMap::new(),
    };
    if lx.at_end() {
        return Ok(sig);
    }
    loop {
        let (col, tok) = lx.next().expect("not at end");
        let name = match tok {
            Tok::Ident(s) => s,
            t => return Err(lx.error(col, format!("expected a symbol name, found {}", describe(&t)))),
        };
        lx.expect_punct('/')?;
        let arity = match lx.next() {
            Some((c, Tok::Ident(s))) => s
                .parse::<usize>()
                .map_err(|_| lx.error(c, format!("arity `{s}` is not a non-negative integer")))?,
            Some((c, t)) => return Err(lx.error(c, format!("expected an arity, found {}", describe(&t)))),
            None => return Err(lx.error(lx.column(), "expected an arity, found end of line")),
        };
        if sig.by_name.insert(name.to_string(), sig.symbols.len()).is_some() {
            return Err(ParseError::Invalid {
                line,
                source: TermError::DuplicateSymbol(name.to_string()),
            });
        }
        sig.symbols.push(OperationSymbol::new(name, arity));
        match lx.next() {
            None => break,
            Some((_, Tok::Punct(','))) => continue,
            Some((c, t)) => return Err(lx.error(c, format!("expected `,`, found {}", describe(&t)))),
        }
    }
    Ok(sig)
}

/// Parses the condition text format:
///
/// ```text
/// signature: p/3
/// identities:
///   p(x,y,y) = x   # comment
///   p(y,y,x) = x
/// ```
pub fn parse_condition(text: &str) -> Result<MaltsevCondition, ParseError> {
    let mut sig: Option<Signature> = None;
    let mut in_identities = false;
    let mut raw: Vec<(usize, RawTerm, RawTerm)> = Vec::new();

    for (n, full) in text.lines().enumerate() {
        let line = n + 1;
        let body = full.split('#').next().unwrap_or("");
        let trimmed = body.trim_start();
        let indent = body.chars().count() - trimmed.chars().count();
        let trimmed = trimmed.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = header(trimmed, "signature") {
            if sig.is_some() {
                return Err(syntax(line, indent + 1, "duplicate `signature:` header"));
            }
            let base = indent + (trimmed.chars().count() - rest.chars().count());
            sig = Some(parse_signature(rest, line, base)?);
            continue;
        }
        if let Some(rest) = header(trimmed, "identities") {
            if sig.is_none() {
                return Err(syntax(line, indent + 1, "`identities:` before `signature:`"));
            }
            if !rest.trim().is_empty() {
                return Err(syntax(line, indent + 1, "unexpected text after `identities:`"));
            }
            in_identities = true;
            continue;
        }
        let Some(signature) = sig.as_ref() else {
            return Err(syntax(line, indent + 1, "expected `signature:` header"));
        };
        if !in_identities {
            return Err(syntax(line, indent + 1, "expected `identities:` header"));
        }
        let mut lx = Lexer::new(trimmed, line, indent);
        let lhs = parse_term(&mut lx, signature)?;
        lx.expect_punct('=')?;
        let rhs = parse_term(&mut lx, signature)?;
        if let Some((c, t)) = lx.next() {
            return Err(lx.error(c, format!("unexpected {} after identity", describe(&t))));
        }
        raw.push((line, lhs, rhs));
    }

    let sig = sig.ok_or_else(|| syntax(1, 1, "missing `signature:` header"))?;

    // Canonical names keep their index; any other name takes the lowest free
    // index in order of first occurrence.
    let mut names: Vec<&str> = Vec::new();
    for (_, l, r) in &raw {
        for t in [l, r] {
            match t {
                RawTerm::Var(v) => names.push(v),
                RawTerm::App(_, args) => names.extend(args.iter().map(String::as_str)),
            }
        }
    }
    let mut index: HashMap<&str, Variable> = HashMap::new();
    let mut taken: HashSet<usize> = HashSet::new();
    for &n in &names {
        if let Some(v) = Variable::from_canonical_name(n) {
            index.insert(n, v);
            taken.insert(v.0);
        }
    }
    let mut next = 0;
    for &n in &names {
        if index.contains_key(n) {
            continue;
        }
        while taken.contains(&next) {
            next += 1;
        }
        index.insert(n, Variable(next));
        taken.insert(next);
    }

    let lower = |t: &RawTerm| match t {
        RawTerm::Var(v) => LinearTerm::Var(index[v.as_str()]),
        RawTerm::App(s, args) => LinearTerm::app(*s, args.iter().map(|a| index[a.as_str()])),
    };
    let identities = raw
        .iter()
        .map(|(_, l, r)| Identity::new(lower(l), lower(r)))
        .collect();
    MaltsevCondition::new(sig.symbols, identities).map_err(|source| ParseError::Invalid {
        line: 1,
        source,
    })
}

fn header<'a>(line: &'a str, word: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(word)?;
    rest.trim_start().strip_prefix(':')
}

fn syntax(line: usize, column: usize, message: &str) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.to_string(),
    }
}
