//! Concrete syntax for process terms and definition files.
//!
//! ```text
//! process    := par
//! par        := sum ( '|' sum )*                  (left associative)
//! sum        := branch ( '+' branch )*
//! branch     := [ '[' prob ']' ] prefix '.' atom  |  atom
//! prefix     := 'tau'
//!             | '\'' ident [ '(' vexpr ')' ]      (output on the co-name)
//!             | ident '(' ident ')'               (input, binds the variable)
//!             | ident                             (bare output, no payload)
//! atom       := 'Nil'
//!             | 'if' bool 'then' process 'else' process
//!             | '(' process ')' [ restriction ]
//!             | prefix '.' atom                   (nested prefix chain)
//!             | ident [ '(' vexpr ( ',' vexpr )* ')' ]   (identifier call)
//! restriction:= '\' '{' ident ( ',' ident )* '}'
//! prob       := number | number '/' number
//! vexpr      := ident | number | '(' vexpr ',' vexpr ')'
//! bool       := 'true' | 'false' | vexpr '=' vexpr | '(' bool ',' bool ')'
//! ```
//!
//! Adjacent branches sharing a prefix form one action group; re-using a
//! prefix of an earlier, non-adjacent group is rejected. An identifier in a
//! value position denotes a variable when some enclosing input prefix or
//! definition parameter binds it, and a symbolic constant otherwise.
//!
//! A definitions file is a sequence of `Name(params) = process` items
//! separated by newlines or `;`.

use std::collections::BTreeSet;

use super::error::{ParseError, ProcessError};
use super::process::{DefinitionEnv, Prefix, Process, SumGroup};
use super::value::{BoolExpr, Value, ValueExpr};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Tick,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Dot,
    Plus,
    Bar,
    Backslash,
    Comma,
    Equals,
    Semi,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

impl Lexer {
    fn lex(src: &str) -> Result<Self, ParseError> {
        let bytes = src.as_bytes();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            match c {
                ' ' | '\t' | '\r' => i += 1,
                '\n' => {
                    toks.push((Tok::Semi, i));
                    i += 1;
                }
                '#' => {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                }
                '\'' => {
                    toks.push((Tok::Tick, i));
                    i += 1;
                }
                '(' => {
                    toks.push((Tok::LParen, i));
                    i += 1;
                }
                ')' => {
                    toks.push((Tok::RParen, i));
                    i += 1;
                }
                '[' => {
                    toks.push((Tok::LBracket, i));
                    i += 1;
                }
                ']' => {
                    toks.push((Tok::RBracket, i));
                    i += 1;
                }
                '{' => {
                    toks.push((Tok::LBrace, i));
                    i += 1;
                }
                '}' => {
                    toks.push((Tok::RBrace, i));
                    i += 1;
                }
                '.' => {
                    toks.push((Tok::Dot, i));
                    i += 1;
                }
                '+' => {
                    toks.push((Tok::Plus, i));
                    i += 1;
                }
                '|' => {
                    toks.push((Tok::Bar, i));
                    i += 1;
                }
                '\\' => {
                    toks.push((Tok::Backslash, i));
                    i += 1;
                }
                ',' => {
                    toks.push((Tok::Comma, i));
                    i += 1;
                }
                '=' => {
                    toks.push((Tok::Equals, i));
                    i += 1;
                }
                ';' => {
                    toks.push((Tok::Semi, i));
                    i += 1;
                }
                _ if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < bytes.len()
                        && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                    {
                        i += 1;
                    }
                    toks.push((Tok::Ident(src[start..i].to_string()), start));
                }
                _ if c.is_ascii_digit() || c == '-' => {
                    let start = i;
                    if c == '-' {
                        i += 1;
                    }
                    while i < bytes.len()
                        && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.')
                    {
                        i += 1;
                    }
                    let text = &src[start..i];
                    let n: f64 = text.parse().map_err(|_| {
                        syntax_error(src, start, format!("malformed number `{text}`"))
                    })?;
                    toks.push((Tok::Number(n), start));
                }
                _ => {
                    return Err(syntax_error(src, i, format!("unexpected character `{c}`")));
                }
            }
        }
        Ok(Lexer { toks })
    }
}

fn line_col(src: &str, pos: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, c) in src.char_indices() {
        if i >= pos {
            break;
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

fn syntax_error(src: &str, pos: usize, msg: String) -> ParseError {
    let (line, col) = line_col(src, pos);
    ParseError::Syntax { line, col, msg }
}

struct Parser<'a> {
    src: &'a str,
    toks: &'a [(Tok, usize)],
    pos: usize,
    bound: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.src.len())
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        let at = self.here();
        match self.bump() {
            Some(t) if t == tok => Ok(()),
            got => Err(syntax_error(
                self.src,
                at,
                format!("expected {what}, found {got:?}"),
            )),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let at = self.here();
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(s),
            got => Err(syntax_error(
                self.src,
                at,
                format!("expected {what}, found {got:?}"),
            )),
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        syntax_error(self.src, self.here(), msg.into())
    }

    fn invalid(&self, at: usize, source: ProcessError) -> ParseError {
        let (line, col) = line_col(self.src, at);
        ParseError::Invalid { line, col, source }
    }

    fn process(&mut self) -> Result<Process, ParseError> {
        let mut acc = self.sum()?;
        while self.peek() == Some(&Tok::Bar) {
            self.bump();
            let rhs = self.sum()?;
            acc = Process::par(acc, rhs);
        }
        Ok(acc)
    }

    fn sum(&mut self) -> Result<Process, ParseError> {
        let at = self.here();
        let first = self.branch()?;
        if self.peek() != Some(&Tok::Plus) {
            return match first {
                Branch::Plain(p) => Ok(p),
                Branch::Prefixed(prob, prefix, cont) => {
                    self.groups_to_sum(at, vec![(prob, prefix, cont)])
                }
            };
        }
        let mut branches = match first {
            Branch::Prefixed(prob, prefix, cont) => vec![(prob, prefix, cont)],
            Branch::Plain(_) => {
                return Err(self.err("only prefixed branches may appear in a summation"))
            }
        };
        while self.peek() == Some(&Tok::Plus) {
            self.bump();
            match self.branch()? {
                Branch::Prefixed(prob, prefix, cont) => branches.push((prob, prefix, cont)),
                Branch::Plain(_) => {
                    return Err(self.err("only prefixed branches may appear in a summation"))
                }
            }
        }
        self.groups_to_sum(at, branches)
    }

    fn groups_to_sum(
        &self,
        at: usize,
        branches: Vec<(f64, Prefix, Process)>,
    ) -> Result<Process, ParseError> {
        // Adjacent equal prefixes form one group; a prefix returning after a
        // different group intervened is a duplicate.
        let mut groups: Vec<(Prefix, Vec<(f64, Process)>)> = Vec::new();
        for (prob, prefix, cont) in branches {
            match groups.last_mut() {
                Some((last, items)) if *last == prefix => items.push((prob, cont)),
                _ => {
                    if groups.iter().any(|(p, _)| *p == prefix) {
                        return Err(self.invalid(
                            at,
                            ProcessError::DuplicatePrefix(format!("{prefix}")),
                        ));
                    }
                    groups.push((prefix, vec![(prob, cont)]));
                }
            }
        }
        let mut built = Vec::with_capacity(groups.len());
        for (prefix, items) in groups {
            built.push(SumGroup::new(prefix, items).map_err(|e| self.invalid(at, e))?);
        }
        Process::sum(built).map_err(|e| self.invalid(at, e))
    }

    fn branch(&mut self) -> Result<Branch, ParseError> {
        let prob = if self.peek() == Some(&Tok::LBracket) {
            self.bump();
            let p = self.probability()?;
            self.expect(Tok::RBracket, "`]`")?;
            Some(p)
        } else {
            None
        };
        if let Some((prefix, cont)) = self.try_prefixed()? {
            return Ok(Branch::Prefixed(prob.unwrap_or(1.0), prefix, cont));
        }
        if prob.is_some() {
            return Err(self.err("probability bracket must be followed by a prefixed branch"));
        }
        Ok(Branch::Plain(self.atom()?))
    }

    // Fractions like `1/3` are rewritten to decimals before lexing, so a
    // probability is always a single number token here.
    fn probability(&mut self) -> Result<f64, ParseError> {
        let at = self.here();
        match self.bump() {
            Some(Tok::Number(n)) => Ok(n),
            got => Err(syntax_error(
                self.src,
                at,
                format!("expected probability, found {got:?}"),
            )),
        }
    }

    /// Attempt to parse `prefix '.' atom`; rolls back when the input is not
    /// a prefixed branch (e.g. an identifier call).
    fn try_prefixed(&mut self) -> Result<Option<(Prefix, Process)>, ParseError> {
        let save = self.pos;
        let prefix = match self.peek() {
            Some(Tok::Ident(s)) if s == "tau" => {
                self.bump();
                Some(Prefix::Tau)
            }
            Some(Tok::Tick) => {
                self.bump();
                let chan = self.ident("channel name after `'`")?;
                let arg = if self.peek() == Some(&Tok::LParen) {
                    self.bump();
                    let e = self.vexpr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Some(e)
                } else {
                    None
                };
                Some(Prefix::Output { chan, arg })
            }
            Some(Tok::Ident(s))
                if !matches!(s.as_str(), "Nil" | "if" | "then" | "else" | "true" | "false") =>
            {
                let chan = s.clone();
                // `name(ident).` is an input prefix; `name.` a bare output.
                if self.peek2() == Some(&Tok::LParen) {
                    let save_inner = self.pos;
                    self.bump();
                    self.bump();
                    let var = match self.bump() {
                        Some(Tok::Ident(v)) => v,
                        _ => {
                            self.pos = save_inner;
                            return Ok(None);
                        }
                    };
                    if self.bump() != Some(Tok::RParen) {
                        self.pos = save_inner;
                        return Ok(None);
                    }
                    if self.peek() != Some(&Tok::Dot) {
                        self.pos = save_inner;
                        return Ok(None);
                    }
                    Some(Prefix::Input { chan, var })
                } else if self.peek2() == Some(&Tok::Dot) {
                    self.bump();
                    Some(Prefix::Output { chan, arg: None })
                } else {
                    None
                }
            }
            _ => None,
        };
        let Some(prefix) = prefix else {
            self.pos = save;
            return Ok(None);
        };
        if self.peek() != Some(&Tok::Dot) {
            self.pos = save;
            return Ok(None);
        }
        self.bump();
        let binder = match &prefix {
            Prefix::Input { var, .. } => {
                self.bound.push(var.clone());
                true
            }
            _ => false,
        };
        let cont = self.atom();
        if binder {
            self.bound.pop();
        }
        Ok(Some((prefix, cont?)))
    }

    fn atom(&mut self) -> Result<Process, ParseError> {
        if let Some((prefix, cont)) = self.try_prefixed()? {
            return Ok(Process::prefix(prefix, cont));
        }
        let at = self.here();
        let base = match self.bump() {
            Some(Tok::Ident(s)) if s == "Nil" => Process::Nil,
            Some(Tok::Ident(s)) if s == "if" => {
                let guard = self.bool_expr()?;
                let kw = self.ident("`then`")?;
                if kw != "then" {
                    return Err(syntax_error(self.src, at, "expected `then`".to_string()));
                }
                let then = self.process()?;
                let kw = self.ident("`else`")?;
                if kw != "else" {
                    return Err(syntax_error(self.src, at, "expected `else`".to_string()));
                }
                let els = self.process()?;
                Process::cond(guard, then, els)
            }
            Some(Tok::LParen) => {
                let inner = self.process()?;
                self.expect(Tok::RParen, "`)`")?;
                inner
            }
            Some(Tok::Ident(name)) => {
                let args = if self.peek() == Some(&Tok::LParen) {
                    self.bump();
                    let mut args = vec![self.vexpr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.bump();
                        args.push(self.vexpr()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    args
                } else {
                    Vec::new()
                };
                Process::Call(name, args)
            }
            got => {
                return Err(syntax_error(
                    self.src,
                    at,
                    format!("expected a process, found {got:?}"),
                ))
            }
        };
        self.postfix(base)
    }

    fn postfix(&mut self, mut base: Process) -> Result<Process, ParseError> {
        while self.peek() == Some(&Tok::Backslash) {
            self.bump();
            self.expect(Tok::LBrace, "`{`")?;
            let mut chans = BTreeSet::new();
            chans.insert(self.ident("channel name")?);
            while self.peek() == Some(&Tok::Comma) {
                self.bump();
                chans.insert(self.ident("channel name")?);
            }
            self.expect(Tok::RBrace, "`}`")?;
            base = Process::Restrict(Box::new(base), chans);
        }
        Ok(base)
    }

    fn vexpr(&mut self) -> Result<ValueExpr, ParseError> {
        let at = self.here();
        match self.bump() {
            Some(Tok::Ident(s)) => {
                if self.bound.contains(&s) {
                    Ok(ValueExpr::Var(s))
                } else {
                    Ok(ValueExpr::Lit(Value::Name(s)))
                }
            }
            Some(Tok::Number(n)) => {
                if n.fract() == 0.0 && n.abs() < 9.0e15 {
                    Ok(ValueExpr::Lit(Value::Int(n as i64)))
                } else {
                    Ok(ValueExpr::Lit(Value::real(n)))
                }
            }
            Some(Tok::LParen) => {
                let a = self.vexpr()?;
                self.expect(Tok::Comma, "`,`")?;
                let b = self.vexpr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(ValueExpr::pair(a, b))
            }
            got => Err(syntax_error(
                self.src,
                at,
                format!("expected a value expression, found {got:?}"),
            )),
        }
    }

    fn bool_expr(&mut self) -> Result<BoolExpr, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == "true" => {
                self.bump();
                Ok(BoolExpr::Const(true))
            }
            Some(Tok::Ident(s)) if s == "false" => {
                self.bump();
                Ok(BoolExpr::Const(false))
            }
            Some(Tok::LParen) => {
                // Either `(a, b)` conjunction of guards or a pair-typed
                // equality; try the conjunction form first.
                let save = self.pos;
                self.bump();
                if let Ok(a) = self.bool_expr() {
                    if self.peek() == Some(&Tok::Comma) {
                        self.bump();
                        let b = self.bool_expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        return Ok(BoolExpr::and(a, b));
                    }
                }
                self.pos = save;
                self.equality()
            }
            _ => self.equality(),
        }
    }

    fn equality(&mut self) -> Result<BoolExpr, ParseError> {
        let a = self.vexpr()?;
        self.expect(Tok::Equals, "`=`")?;
        let b = self.vexpr()?;
        Ok(BoolExpr::Eq(a, b))
    }
}

enum Branch {
    Plain(Process),
    Prefixed(f64, Prefix, Process),
}

/// Pre-process fraction literals `a/b` into their decimal value, because the
/// lexer has no token for `/`. Applied to probability brackets only.
fn expand_fractions(src: &str) -> String {
    let re_src = src.as_bytes();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    while i < re_src.len() {
        if re_src[i] == b'[' {
            // scan to the matching ']'
            let start = i;
            let mut j = i + 1;
            while j < re_src.len() && re_src[j] != b']' {
                j += 1;
            }
            let inside = &src[start + 1..j.min(src.len())];
            if let Some((num, den)) = inside.split_once('/') {
                if let (Ok(n), Ok(d)) = (num.trim().parse::<f64>(), den.trim().parse::<f64>()) {
                    out.push('[');
                    out.push_str(&format!("{}", n / d));
                    out.push(']');
                    i = j + 1;
                    continue;
                }
            }
            out.push('[');
            i += 1;
        } else {
            out.push(re_src[i] as char);
            i += 1;
        }
    }
    out
}

/// Parse a single process term. Definition parameters of `env` do not scope
/// into the term; only input prefixes inside the text bind variables.
pub fn parse_process(text: &str, _env: &DefinitionEnv) -> Result<Process, ParseError> {
    let expanded = expand_fractions(text);
    let lexer = Lexer::lex(&expanded)?;
    let toks: Vec<(Tok, usize)> = lexer
        .toks
        .into_iter()
        .filter(|(t, _)| *t != Tok::Semi)
        .collect();
    let mut parser = Parser {
        src: &expanded,
        toks: &toks,
        pos: 0,
        bound: Vec::new(),
    };
    let term = parser.process()?;
    if parser.pos != toks.len() {
        return Err(parser.err("trailing input after process"));
    }
    Ok(term)
}

/// Parse a definitions file: `Name(x,y) = process` items separated by
/// newlines or semicolons.
pub fn parse_definitions(text: &str) -> Result<DefinitionEnv, ParseError> {
    let expanded = expand_fractions(text);
    let lexer = Lexer::lex(&expanded)?;
    let toks = lexer.toks;
    let mut env = DefinitionEnv::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].0 == Tok::Semi {
            i += 1;
            continue;
        }
        // header: Ident [ '(' params ')' ] '='
        let at = toks[i].1;
        let name = match &toks[i].0 {
            Tok::Ident(s) => s.clone(),
            _ => {
                return Err(syntax_error(
                    &expanded,
                    at,
                    "expected definition name".to_string(),
                ))
            }
        };
        i += 1;
        let mut params = Vec::new();
        if i < toks.len() && toks[i].0 == Tok::LParen {
            i += 1;
            loop {
                match &toks[i].0 {
                    Tok::Ident(s) => {
                        params.push(s.clone());
                        i += 1;
                    }
                    _ => {
                        return Err(syntax_error(
                            &expanded,
                            toks[i].1,
                            "expected parameter name".to_string(),
                        ))
                    }
                }
                match &toks[i].0 {
                    Tok::Comma => i += 1,
                    Tok::RParen => {
                        i += 1;
                        break;
                    }
                    _ => {
                        return Err(syntax_error(
                            &expanded,
                            toks[i].1,
                            "expected `,` or `)` in parameter list".to_string(),
                        ))
                    }
                }
            }
        }
        if i >= toks.len() || toks[i].0 != Tok::Equals {
            return Err(syntax_error(
                &expanded,
                toks.get(i).map(|(_, p)| *p).unwrap_or(expanded.len()),
                "expected `=` after definition head".to_string(),
            ));
        }
        i += 1;
        // body: tokens until a Semi at nesting depth zero
        let body_start = i;
        let mut depth = 0i32;
        while i < toks.len() {
            match toks[i].0 {
                Tok::LParen | Tok::LBrace | Tok::LBracket => depth += 1,
                Tok::RParen | Tok::RBrace | Tok::RBracket => depth -= 1,
                Tok::Semi if depth == 0 => break,
                _ => {}
            }
            i += 1;
        }
        let body_toks: Vec<(Tok, usize)> = toks[body_start..i]
            .iter()
            .filter(|(t, _)| *t != Tok::Semi)
            .cloned()
            .collect();
        let mut parser = Parser {
            src: &expanded,
            toks: &body_toks,
            pos: 0,
            bound: params.clone(),
        };
        let body = parser.process()?;
        if parser.pos != body_toks.len() {
            return Err(parser.err("trailing input after definition body"));
        }
        let (line, col) = line_col(&expanded, at);
        env.define(name, params, body)
            .map_err(|e| ParseError::Invalid { line, col, source: e })?;
    }
    Ok(env)
}
