//! Reader and printer for the source language.
//!
//! The printer output is stable: variables are named `A`, `B`, ... in
//! first-occurrence order, arguments are separated by bare commas, goals in a
//! conjunction by `", "`, and every clause sits on one line.

use std::fmt::Write as _;

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::program::{
    as_handler, is_continue, is_control, localize, Clause, HandlerSpec, OpClause, SourceProgram,
};
use crate::term::{Functor, Sym, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: {msg}")]
    Invalid { line: usize, col: usize, msg: String },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept forms the optimizer produces but users may not write:
    /// empty `with ()` parts and `sharing (...)` lists.
    pub internal: bool,
}

#[derive(Debug, Clone)]
pub struct Query {
    pub goal: Term,
    /// Named (non-anonymous) variables in order of first appearance.
    pub vars: Vec<(String, Var)>,
}

pub fn parse(source: &str) -> Result<SourceProgram, ParseError> {
    parse_with(source, ParseOptions::default())
}

pub fn parse_with(source: &str, opts: ParseOptions) -> Result<SourceProgram, ParseError> {
    let toks = tokenize(source)?;
    let mut p = Parser::new(toks, opts);
    let mut program = SourceProgram::default();
    let mut defined_at: FxHashMap<Functor, (usize, usize)> = FxHashMap::default();
    while !p.at_eof() {
        let (line, col) = p.position();
        p.vars.clear();
        let term = p.read_clause_term()?;
        if let Some(args) = term.match_app(Sym::NECK, 1) {
            let directive = &args[0];
            if let Some(spec) = directive.match_app(Sym::EFFECT, 1) {
                for decl in spec[0].conjuncts() {
                    let f = effect_functor(&decl).ok_or_else(|| ParseError::Invalid {
                        line,
                        col,
                        msg: format!("malformed effect declaration `{}`", print_term(&decl)),
                    })?;
                    if program.effects.contains(&f) {
                        return Err(ParseError::Invalid {
                            line,
                            col,
                            msg: format!("duplicate effect declaration {f}"),
                        });
                    }
                    program.effects.push(f);
                }
            } else {
                program.directives.push(directive.clone());
            }
            continue;
        }
        let clause = Clause::from_term(&term);
        let f = match &clause.head {
            Term::Atom(_) | Term::Compound(..) => clause.head.functor().unwrap(),
            _ => {
                return Err(ParseError::Invalid {
                    line,
                    col,
                    msg: format!("clause head `{}` is not callable", print_term(&clause.head)),
                })
            }
        };
        if is_control(f) || f.name == Sym::HANDLE || f.name == Sym::NECK {
            return Err(ParseError::Invalid {
                line,
                col,
                msg: format!("cannot define control construct {f}"),
            });
        }
        check_goal(&clause.body, None, opts, line, col)?;
        defined_at.entry(f).or_insert((line, col));
        program.clauses.push(Clause::new(clause.head, localize(&clause.body)));
    }
    for f in &program.effects {
        if let Some(&(line, col)) = defined_at.get(f) {
            return Err(ParseError::Invalid {
                line,
                col,
                msg: format!("{f} is declared as an effect and also defined by clauses"),
            });
        }
    }
    Ok(program)
}

/// Parses a single goal (a trailing `.` is optional).
pub fn parse_query(source: &str) -> Result<Query, ParseError> {
    parse_query_with(source, ParseOptions::default())
}

pub fn parse_query_with(source: &str, opts: ParseOptions) -> Result<Query, ParseError> {
    let mut toks = tokenize(source)?;
    let eof = toks.pop().expect("token stream ends with EOF");
    if !matches!(toks.last(), Some(Token { tok: Tok::End, .. })) {
        toks.push(Token {
            tok: Tok::End,
            line: eof.line,
            col: eof.col,
            ws_before: true,
        });
    }
    toks.push(eof);
    let mut p = Parser::new(toks, opts);
    let (line, col) = p.position();
    let goal = p.read_clause_term()?;
    if !p.at_eof() {
        let (line, col) = p.position();
        return Err(ParseError::Syntax {
            line,
            col,
            msg: "unexpected input after query".into(),
        });
    }
    check_goal(&goal, None, opts, line, col)?;
    let vars = p.var_order.clone();
    Ok(Query {
        goal: localize(&goal),
        vars,
    })
}

/// Parses one term without goal validation (used for test fixtures).
pub fn parse_term(source: &str) -> Result<Term, ParseError> {
    Ok(parse_query_with(source, ParseOptions { internal: true })?.goal)
}

fn effect_functor(t: &Term) -> Option<Functor> {
    let args = t.match_app(Sym::SLASH, 2)?;
    match (&args[0], &args[1]) {
        (Term::Atom(name), Term::Int(n)) if *n >= 0 => Some(Functor {
            name: *name,
            arity: *n as usize,
        }),
        _ => None,
    }
}

fn invalid(line: usize, col: usize, msg: String) -> ParseError {
    ParseError::Invalid { line, col, msg }
}

/// `continue_arity` is the parameter count of the handler owning the innermost
/// enclosing operation clause, if any.
fn check_goal(
    goal: &Term,
    continue_arity: Option<usize>,
    opts: ParseOptions,
    line: usize,
    col: usize,
) -> Result<(), ParseError> {
    if is_continue(goal) {
        let k = goal.args().len();
        return match continue_arity {
            None => Err(invalid(line, col, "`continue` outside of a handler operation clause".into())),
            Some(n) if n != k => Err(invalid(
                line,
                col,
                format!("continue/{k} does not match the handler's {n} parameter(s)"),
            )),
            Some(_) => Ok(()),
        };
    }
    if let Some(spec) = as_handler(goal) {
        if spec.clauses.is_empty() && !opts.internal {
            return Err(invalid(line, col, "handler with an empty `with` part".into()));
        }
        let mut seen = FxHashSet::default();
        for c in &spec.clauses {
            let f = match c.head.functor() {
                Some(f) => f,
                None => return Err(invalid(line, col, "operation clause head must be callable".into())),
            };
            if !seen.insert(f) {
                return Err(invalid(line, col, format!("duplicate operation clause for {f}")));
            }
            check_goal(&c.body, Some(spec.params.len()), opts, line, col)?;
        }
        for (formal, _) in &spec.params {
            if !formal.is_var() {
                return Err(invalid(line, col, "`for` formals must be variables".into()));
            }
        }
        check_goal(&spec.goal, continue_arity, opts, line, col)?;
        return check_goal(&spec.finally, continue_arity, opts, line, col);
    }
    if let Some(f) = goal.functor() {
        if is_control(f) {
            for a in goal.args() {
                check_goal(a, continue_arity, opts, line, col)?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tokenizer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Quoted(String),
    Var(String),
    Int(i64),
    Punct(char),
    End,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    ws_before: bool,
}

const SYMBOL_CHARS: &str = "+-*/\\^<>=~:.?@#&$";

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut ws = true;
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            ws = true;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            ws = true;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                bump!();
            }
            if i >= chars.len() {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    msg: "unterminated block comment".into(),
                });
            }
            bump!();
            bump!();
            ws = true;
            continue;
        }
        let (tl, tc) = (line, col);
        let tok = if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            Tok::Int(text.parse().map_err(|_| ParseError::Syntax {
                line: tl,
                col: tc,
                msg: format!("integer literal `{text}` out of range"),
            })?)
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            if c.is_uppercase() || c == '_' {
                Tok::Var(text)
            } else {
                Tok::Name(text)
            }
        } else if c == '\'' {
            bump!();
            let mut text = String::new();
            loop {
                if i >= chars.len() {
                    return Err(ParseError::Syntax {
                        line: tl,
                        col: tc,
                        msg: "unterminated quoted atom".into(),
                    });
                }
                let d = chars[i];
                if d == '\'' {
                    if chars.get(i + 1) == Some(&'\'') {
                        text.push('\'');
                        bump!();
                        bump!();
                        continue;
                    }
                    bump!();
                    break;
                }
                if d == '\\' && i + 1 < chars.len() {
                    let e = chars[i + 1];
                    text.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        other => other,
                    });
                    bump!();
                    bump!();
                    continue;
                }
                text.push(d);
                bump!();
            }
            Tok::Quoted(text)
        } else if c == '.'
            && chars
                .get(i + 1)
                .map_or(true, |n| n.is_whitespace() || *n == '%')
        {
            bump!();
            Tok::End
        } else if "()[],|{}".contains(c) {
            bump!();
            Tok::Punct(c)
        } else if c == ';' || c == '!' {
            bump!();
            Tok::Name(c.to_string())
        } else if SYMBOL_CHARS.contains(c) {
            let start = i;
            while i < chars.len() && SYMBOL_CHARS.contains(chars[i]) {
                bump!();
            }
            Tok::Name(chars[start..i].iter().collect())
        } else {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: format!("unexpected character `{c}`"),
            });
        };
        toks.push(Token {
            tok,
            line: tl,
            col: tc,
            ws_before: ws,
        });
        ws = false;
    }
    toks.push(Token {
        tok: Tok::Eof,
        line,
        col,
        ws_before: true,
    });
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Operators

#[derive(Clone, Copy, PartialEq, Eq)]
enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

fn infix_op(name: &str) -> Option<(u32, Assoc)> {
    Some(match name {
        ":-" => (1200, Assoc::Xfx),
        ";" => (1100, Assoc::Xfy),
        "->" => (1050, Assoc::Xfy),
        "," => (1000, Assoc::Xfy),
        "=" | "\\=" | "==" | "\\==" | "is" | "<" | ">" | "=<" | ">=" | "=:=" | "=\\=" => {
            (700, Assoc::Xfx)
        }
        "+" | "-" => (500, Assoc::Yfx),
        "*" | "//" | "/" | "mod" => (400, Assoc::Yfx),
        _ => return None,
    })
}

fn prefix_op(name: &str) -> Option<(u32, bool)> {
    // (priority, operand may have the same priority)
    Some(match name {
        ":-" | "?-" => (1200, false),
        "effect" => (1150, false),
        "-" => (200, true),
        _ => return None,
    })
}

fn infix_args(p: u32, a: Assoc) -> (u32, u32) {
    match a {
        Assoc::Xfx => (p - 1, p - 1),
        Assoc::Xfy => (p - 1, p),
        Assoc::Yfx => (p, p - 1),
    }
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    opts: ParseOptions,
    vars: FxHashMap<String, Var>,
    var_order: Vec<(String, Var)>,
}

impl Parser {
    fn new(toks: Vec<Token>, opts: ParseOptions) -> Self {
        Parser {
            toks,
            pos: 0,
            opts,
            vars: FxHashMap::default(),
            var_order: Vec::new(),
        }
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().tok, Tok::Eof)
    }

    fn position(&self) -> (usize, usize) {
        (self.peek().line, self.peek().col)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.position();
        Err(ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek().tok == Tok::Punct(c) {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected `{c}`, found {}", describe(&self.peek().tok)))
        }
    }

    fn is_name(&self, name: &str) -> bool {
        matches!(&self.peek().tok, Tok::Name(n) if n == name)
    }

    fn read_clause_term(&mut self) -> Result<Term, ParseError> {
        let (t, _) = self.expr(1200)?;
        if self.peek().tok != Tok::End {
            return self.error(format!(
                "operator expected, found {}",
                describe(&self.peek().tok)
            ));
        }
        self.next();
        Ok(t)
    }

    fn starts_term(tok: &Tok) -> bool {
        match tok {
            Tok::Name(n) => infix_op(n).is_none() || prefix_op(n).is_some(),
            Tok::Quoted(_) | Tok::Var(_) | Tok::Int(_) => true,
            Tok::Punct(c) => *c == '(' || *c == '[',
            Tok::End | Tok::Eof => false,
        }
    }

    fn expr(&mut self, max: u32) -> Result<(Term, u32), ParseError> {
        let (mut left, mut left_prec) = self.primary(max)?;
        loop {
            let name = match &self.peek().tok {
                Tok::Name(n) => n.clone(),
                Tok::Punct(',') => ",".to_string(),
                _ => break,
            };
            let Some((p, assoc)) = infix_op(&name) else { break };
            let (lmax, rmax) = infix_args(p, assoc);
            if p > max || left_prec > lmax {
                break;
            }
            self.next();
            let (right, _) = self.expr(rmax)?;
            left = Term::app(Sym::new(&name), vec![left, right]);
            left_prec = p;
        }
        Ok((left, left_prec))
    }

    fn primary(&mut self, max: u32) -> Result<(Term, u32), ParseError> {
        let tok = self.next();
        match tok.tok {
            Tok::Int(n) => Ok((Term::Int(n), 0)),
            Tok::Var(name) => Ok((self.variable(&name), 0)),
            Tok::Punct('(') => {
                let (t, _) = self.expr(1200)?;
                self.expect_punct(')')?;
                Ok((t, 0))
            }
            Tok::Punct('[') => {
                if self.peek().tok == Tok::Punct(']') {
                    self.next();
                    return self.after_name("[]".into(), false, max);
                }
                let mut items = vec![self.expr(999)?.0];
                while self.peek().tok == Tok::Punct(',') {
                    self.next();
                    items.push(self.expr(999)?.0);
                }
                let tail = if self.peek().tok == Tok::Punct('|') {
                    self.next();
                    self.expr(999)?.0
                } else {
                    Term::nil()
                };
                self.expect_punct(']')?;
                Ok((Term::list(items, tail), 0))
            }
            Tok::Name(name) => self.after_name(name, false, max),
            Tok::Quoted(name) => self.after_name(name, true, max),
            other => {
                self.pos -= 1;
                self.error(format!("unexpected {}", describe(&other)))
            }
        }
    }

    fn variable(&mut self, name: &str) -> Term {
        if name == "_" {
            return Term::var();
        }
        if let Some(v) = self.vars.get(name) {
            return Term::Var(*v);
        }
        let v = Var::fresh();
        self.vars.insert(name.to_string(), v);
        self.var_order.push((name.to_string(), v));
        Term::Var(v)
    }

    fn after_name(&mut self, name: String, quoted: bool, max: u32) -> Result<(Term, u32), ParseError> {
        let next = self.peek().clone();
        if next.tok == Tok::Punct('(') && !next.ws_before {
            self.next();
            let mut args = vec![self.expr(999)?.0];
            while self.peek().tok == Tok::Punct(',') {
                self.next();
                args.push(self.expr(999)?.0);
            }
            self.expect_punct(')')?;
            return Ok((Term::app(Sym::new(&name), args), 0));
        }
        if !quoted && name == "handle" && Self::starts_term(&next.tok) {
            return self.handler();
        }
        if !quoted {
            if name == "-" {
                if let Tok::Int(n) = next.tok {
                    if !next.ws_before {
                        self.next();
                        return Ok((Term::Int(-n), 0));
                    }
                }
            }
            if let Some((p, same)) = prefix_op(&name) {
                let operand_ok = Self::starts_term(&next.tok)
                    && !matches!(&next.tok, Tok::Name(n) if infix_op(n).is_some() && prefix_op(n).is_none());
                if operand_ok {
                    let p = p.min(max.max(p.min(999)));
                    let arg_max = if same { p } else { p - 1 };
                    let (arg, _) = self.expr(arg_max)?;
                    return Ok((Term::app(Sym::new(&name), vec![arg]), p));
                }
            }
        }
        let prec = if !quoted && (infix_op(&name).is_some() || prefix_op(&name).is_some()) {
            max.min(1201)
        } else {
            0
        };
        Ok((Term::Atom(Sym::new(&name)), if prec > max { 0 } else { prec.min(0) }))
    }

    fn handler(&mut self) -> Result<(Term, u32), ParseError> {
        let (goal, _) = self.expr(999)?;
        if !self.is_name("with") {
            return self.error(format!(
                "expected `with` in handler, found {}",
                describe(&self.peek().tok)
            ));
        }
        self.next();
        let clauses_term = if self.peek().tok == Tok::Punct('(') {
            self.next();
            if self.peek().tok == Tok::Punct(')') {
                if !self.opts.internal {
                    return self.error("empty `with` part is not allowed in source programs");
                }
                self.next();
                None
            } else {
                let (t, _) = self.expr(1200)?;
                self.expect_punct(')')?;
                Some(t)
            }
        } else {
            Some(self.expr(1050)?.0)
        };
        let mut clauses = Vec::new();
        if let Some(mut t) = clauses_term {
            loop {
                let (item, rest) = match t.match_app(Sym::SEMI, 2) {
                    Some(args) => (args[0].clone(), Some(args[1].clone())),
                    None => (t.clone(), None),
                };
                let Some(parts) = item.match_app(Sym::ARROW, 2) else {
                    return self.error(format!(
                        "operation clause must have the form `Op -> Goal`, found `{}`",
                        print_term(&item)
                    ));
                };
                clauses.push(OpClause {
                    head: parts[0].clone(),
                    body: parts[1].clone(),
                });
                match rest {
                    Some(r) => t = r,
                    None => break,
                }
            }
        }
        let mut spec = HandlerSpec::new(goal, clauses);
        if self.is_name("finally") && Self::starts_term(&self.peek_at(1).tok) {
            self.next();
            spec.finally = self.expr(999)?.0;
        }
        if self.is_name("for") && Self::starts_term(&self.peek_at(1).tok) {
            self.next();
            let (bindings, _) = self.expr(999)?;
            for b in bindings.conjuncts() {
                match b.match_app(Sym::EQ, 2) {
                    Some(args) if args[0].is_var() => {
                        spec.params.push((args[0].clone(), args[1].clone()))
                    }
                    _ => {
                        return self.error(format!(
                            "`for` expects `Var = Term` pairs, found `{}`",
                            print_term(&b)
                        ))
                    }
                }
            }
        }
        if self.opts.internal && self.is_name("sharing") && Self::starts_term(&self.peek_at(1).tok) {
            self.next();
            let (vars, _) = self.expr(999)?;
            for v in vars.conjuncts() {
                match v.as_var() {
                    Some(v) => spec.shared.push(v),
                    None => return self.error("`sharing` expects variables"),
                }
            }
        }
        Ok((spec.to_term(), 0))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Name(n) | Tok::Quoted(n) => format!("`{n}`"),
        Tok::Var(v) => format!("variable `{v}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Punct(c) => format!("`{c}`"),
        Tok::End => "end of clause".into(),
        Tok::Eof => "end of input".into(),
    }
}

// ---------------------------------------------------------------------------
// Printer

/// How unbound variables are rendered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarStyle {
    /// `A`, `B`, ..., `Z`, `A1`, ... in first-occurrence order.
    Canonical,
    /// `_A`, `_B`, ... (for answers, where plain names would look like query variables).
    Anonymous,
    /// Every variable prints as `_`.
    Underscore,
}

pub struct Printer {
    style: VarStyle,
    names: FxHashMap<Var, String>,
}

fn canonical_name(n: usize) -> String {
    let letter = (b'A' + (n % 26) as u8) as char;
    match n / 26 {
        0 => letter.to_string(),
        k => format!("{letter}{k}"),
    }
}

impl Printer {
    pub fn new(style: VarStyle) -> Self {
        Printer {
            style,
            names: FxHashMap::default(),
        }
    }

    /// Reserves names for variables that already have one (e.g. query variables).
    pub fn name_var(&mut self, v: Var, name: &str) {
        self.names.insert(v, name.to_string());
    }

    fn var_name(&mut self, v: Var) -> String {
        if self.style == VarStyle::Underscore {
            return "_".into();
        }
        if let Some(n) = self.names.get(&v) {
            return n.clone();
        }
        let mut k = self.names.len();
        let name = loop {
            let base = canonical_name(k);
            let candidate = if self.style == VarStyle::Anonymous {
                format!("_{base}")
            } else {
                base
            };
            if !self.names.values().any(|n| *n == candidate) {
                break candidate;
            }
            k += 1;
        };
        self.names.insert(v, name.clone());
        name
    }

    pub fn term(&mut self, t: &Term) -> String {
        let mut out = String::new();
        self.write(&mut out, t, 1200);
        out
    }

    pub fn clause(&mut self, c: &Clause) -> String {
        let mut out = String::new();
        self.write(&mut out, &c.to_term(), 1200);
        out.push('.');
        out
    }

    fn write(&mut self, out: &mut String, t: &Term, max: u32) {
        match t {
            Term::Var(v) => {
                let n = self.var_name(*v);
                out.push_str(&n);
            }
            Term::Int(n) => {
                let _ = write!(out, "{n}");
            }
            Term::Atom(s) => {
                let name = s.name();
                let is_op = infix_op(&name).is_some() || prefix_op(&name).is_some();
                if is_op && max < 1200 && &*name != "[]" {
                    out.push('(');
                    out.push_str(&quote_atom(&name));
                    out.push(')');
                } else {
                    out.push_str(&quote_atom(&name));
                }
            }
            Term::Compound(name, args) => self.write_compound(out, *name, args, max),
        }
    }

    fn write_compound(&mut self, out: &mut String, name: Sym, args: &[Term], max: u32) {
        if name == Sym::DOT && args.len() == 2 {
            return self.write_list(out, args);
        }
        if name == Sym::HANDLE && args.len() == 5 {
            if let Some(spec) = HandlerSpec::from_term(&Term::Compound(name, args.to_vec().into())) {
                return self.write_handler(out, &spec, max);
            }
        }
        let text = name.name();
        if args.len() == 2 {
            if let Some((p, assoc)) = infix_op(&text) {
                let (lmax, rmax) = infix_args(p, assoc);
                let paren = p > max;
                if paren {
                    out.push('(');
                }
                self.write(out, &args[0], lmax);
                let sep = match &*text {
                    "," => ", ".to_string(),
                    "+" | "-" | "*" | "//" | "/" => text.to_string(),
                    other => format!(" {other} "),
                };
                out.push_str(&sep);
                let mut right = String::new();
                self.write(&mut right, &args[1], rmax);
                if sep.ends_with(|c: char| SYMBOL_CHARS.contains(c))
                    && right.starts_with(|c: char| SYMBOL_CHARS.contains(c))
                {
                    out.push(' ');
                }
                out.push_str(&right);
                if paren {
                    out.push(')');
                }
                return;
            }
        }
        if args.len() == 1 && matches!(&*text, ":-" | "?-" | "effect") {
            let (p, _) = prefix_op(&text).unwrap();
            let paren = p > max;
            if paren {
                out.push('(');
            }
            out.push_str(&text);
            out.push(' ');
            self.write(out, &args[0], p - 1);
            if paren {
                out.push(')');
            }
            return;
        }
        out.push_str(&quote_atom(&text));
        out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            self.write(out, a, 999);
        }
        out.push(')');
    }

    fn write_list(&mut self, out: &mut String, args: &[Term]) {
        out.push('[');
        self.write(out, &args[0], 999);
        let mut tail = &args[1];
        loop {
            match tail {
                Term::Compound(s, a) if *s == Sym::DOT && a.len() == 2 => {
                    out.push(',');
                    self.write(out, &a[0], 999);
                    tail = &a[1];
                }
                Term::Atom(s) if *s == Sym::NIL => break,
                other => {
                    out.push('|');
                    self.write(out, other, 999);
                    break;
                }
            }
        }
        out.push(']');
    }

    fn write_handler(&mut self, out: &mut String, spec: &HandlerSpec, max: u32) {
        let paren = max < 999;
        if paren {
            out.push('(');
        }
        out.push_str("handle ");
        self.write(out, &spec.goal, 999);
        out.push_str(" with (");
        for (i, c) in spec.clauses.iter().enumerate() {
            if i > 0 {
                out.push_str(" ; ");
            }
            self.write(out, &c.head, 1049);
            out.push_str(" -> ");
            self.write(out, &c.body, 1050);
        }
        out.push(')');
        if !spec.finally.is_atom(Sym::TRUE) {
            out.push_str(" finally ");
            self.write(out, &spec.finally, 999);
        }
        if !spec.params.is_empty() {
            out.push_str(" for (");
            for (i, (f, a)) in spec.params.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                self.write(out, f, 699);
                out.push_str(" = ");
                self.write(out, a, 699);
            }
            out.push(')');
        }
        if !spec.shared.is_empty() {
            out.push_str(" sharing (");
            for (i, v) in spec.shared.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                self.write(out, &Term::Var(*v), 999);
            }
            out.push(')');
        }
        if paren {
            out.push(')');
        }
    }
}

pub fn quote_atom(name: &str) -> String {
    let plain = match name.chars().next() {
        None => false,
        Some(c) if c.is_lowercase() => name.chars().all(|c| c.is_alphanumeric() || c == '_'),
        Some(_) => {
            matches!(name, "[]" | ";" | "!")
                || name.chars().all(|c| SYMBOL_CHARS.contains(c)) && name != "."
        }
    };
    if plain {
        return name.to_string();
    }
    let mut out = String::from("'");
    for c in name.chars() {
        match c {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// Prints a term with canonical variable names.
pub fn print_term(t: &Term) -> String {
    Printer::new(VarStyle::Canonical).term(t)
}

pub fn print_clause(c: &Clause) -> String {
    Printer::new(VarStyle::Canonical).clause(c)
}

/// One line per effect declaration, directive and clause.
pub fn print_program(p: &SourceProgram) -> String {
    let mut out = String::new();
    for f in &p.effects {
        let _ = writeln!(out, ":- effect {f}.");
    }
    for d in &p.directives {
        let _ = writeln!(out, ":- {}.", Printer::new(VarStyle::Canonical).term(d));
    }
    for c in &p.clauses {
        out.push_str(&print_clause(c));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::is_variant;

    #[test]
    fn parses_effect_declaration_and_clause() {
        let p = parse(":- effect out/1.\nhw :- out(hello), out(world).").unwrap();
        assert_eq!(p.effects, vec![Functor::new("out", 1)]);
        assert_eq!(p.clauses.len(), 1);
        assert_eq!(
            p.clauses[0].body,
            Term::conj(
                Term::compound("out", vec![Term::atom("hello")]),
                Term::compound("out", vec![Term::atom("world")])
            )
        );
    }

    #[test]
    fn parses_handler_with_defaults() {
        let q = parse_query("handle hw with (out(X) -> true).").unwrap();
        let spec = as_handler(&q.goal).unwrap();
        assert_eq!(spec.goal, Term::atom("hw"));
        assert_eq!(spec.clauses.len(), 1);
        assert_eq!(spec.clauses[0].op(), Functor::new("out", 1));
        assert_eq!(spec.clauses[0].body, Term::truth());
        assert_eq!(spec.finally, Term::truth());
        assert!(spec.params.is_empty());
    }

    #[test]
    fn continue_outside_handler_is_rejected() {
        let err = parse("p :- continue.").unwrap_err();
        assert!(matches!(err, ParseError::Invalid { line: 1, .. }), "{err}");
        assert!(err.to_string().contains("outside"));
    }

    #[test]
    fn continue_arity_must_match_parameters() {
        let err = parse("p(L) :- handle q with (c(X) -> continue(X)) for (A = L, B = []).").unwrap_err();
        assert!(err.to_string().contains("continue/1"), "{err}");
    }

    #[test]
    fn empty_with_only_internally() {
        assert!(parse_query("handle true with ()").is_err());
        let t = parse_term("handle true with () finally (A = B) for (A = x, B = y)").unwrap();
        assert!(as_handler(&t).unwrap().clauses.is_empty());
    }

    #[test]
    fn effect_and_definition_conflict() {
        let err = parse(":- effect c/1.\nc(x).").unwrap_err();
        assert!(err.to_string().contains("c/1"));
    }

    #[test]
    fn syntax_errors_carry_location() {
        let err = parse("p :- q(.\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, .. }), "{err}");
        let err = parse("p.\nq :- r s.").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn canonical_printing() {
        let p = parse("ab0(L,L).").unwrap();
        assert_eq!(print_clause(&p.clauses[0]), "ab0(A,A).");
        assert_eq!(print_term(&Term::nil()), "[]");
    }

    #[test]
    fn list_sugar_round_trip() {
        let t = parse_term("[a,b|T]").unwrap();
        let args = t.match_app(Sym::DOT, 2).unwrap();
        assert_eq!(args[0], Term::atom("a"));
        assert_eq!(print_term(&t), "[a,b|A]");
        assert_eq!(print_term(&parse_term("'.'(a, '.'(b, []))").unwrap()), "[a,b]");
    }

    #[test]
    fn operators_print_and_reparse() {
        for src in [
            "(a :- b, (c ; d -> e ; f))",
            "X is A+1*2-(3-4)",
            "X = -1",
            "Y is X- -1",
            "(a, b), c",
            "p :- (a ; b), c",
            "f((a, b))",
            "handle (c(a), ab) with (c(X) -> L = [X|M], continue(M, O) ; d -> (x ; y)) finally (L = O) for (L = In, O = [])",
            "q :- handle (handle g with (a(X) -> continue)) with (b -> true), r",
            "'$handler0'(A, 'hello world', [])",
        ] {
            let t = parse_term(src).unwrap();
            let printed = print_term(&t);
            let back = parse_term(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
            assert!(is_variant(&t, &back), "{src} => {printed}");
        }
    }

    #[test]
    fn unparenthesized_finally_stops_at_for() {
        let src = "p(A,B) :- handle abinc with (get_state(Q) -> Q = S, continue(S, T)) finally T = S for (S = A, T = B).";
        let p = parse(src).unwrap();
        let spec = as_handler(&p.clauses[0].body).unwrap();
        assert_eq!(spec.params.len(), 2);
        assert!(spec.finally.match_app(Sym::EQ, 2).is_some());
    }

    #[test]
    fn query_keeps_variable_names() {
        let q = parse_query("chooseAny(or(X = 1, X = 2))").unwrap();
        assert_eq!(q.vars.len(), 1);
        assert_eq!(q.vars[0].0, "X");
    }
}
