//! Source text to runnable program: parse, optimize, elaborate.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::elaborate::{elaborate_program, Elaborated};
use crate::engine::{solve, Answer, Database, EngineError, Machine, Sink, SolveOptions};
use crate::optimize::{optimize, OptimizeOptions, Optimized};
use crate::program::{Clause, SourceProgram};
use crate::reader::{parse, parse_query, ParseError, Printer, Query, VarStyle};
use crate::term::{Sym, Term, Var};

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum OptLevel {
    /// Plain elaboration.
    #[default]
    None,
    /// Handler rewrite rules, then elaboration.
    Rewrite,
    /// Rewrite rules plus partial evaluation, then elaboration.
    Full,
}

impl OptLevel {
    pub const ALL: [OptLevel; 3] = [OptLevel::None, OptLevel::Rewrite, OptLevel::Full];

    pub fn name(self) -> &'static str {
        match self {
            OptLevel::None => "none",
            OptLevel::Rewrite => "rewrite",
            OptLevel::Full => "full",
        }
    }
}

impl fmt::Display for OptLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(OptLevel::None),
            "rewrite" => Ok(OptLevel::Rewrite),
            "full" => Ok(OptLevel::Full),
            other => Err(format!("unknown optimization level `{other}` (expected none, rewrite or full)")),
        }
    }
}

pub const QUERY_PRED: &str = "$query";

/// Adds `'$query'(V1,...,Vn) :- Goal` so the query goes through the same
/// pipeline as the program. Returns the call to run.
pub fn wrap_query(program: &SourceProgram, query: &Query) -> (SourceProgram, Term) {
    let vars: Vec<Term> = query.vars.iter().map(|(_, v)| Term::Var(*v)).collect();
    let head = Term::app(Sym::new(QUERY_PRED), vars);
    let mut p = program.clone();
    p.clauses.push(Clause::new(head.clone(), query.goal.clone()));
    (p, head)
}

/// A program ready to run, with every intermediate stage kept for inspection.
pub struct Compiled {
    pub level: OptLevel,
    pub source: SourceProgram,
    pub optimized: Option<Optimized>,
    pub elaborated: Elaborated,
    pub db: Database,
    pub goal: Term,
    pub vars: Vec<(String, Var)>,
}

pub fn compile(program: &SourceProgram, query: &Query, level: OptLevel) -> Compiled {
    compile_with(program, query, level, &OptimizeOptions::default())
}

pub fn compile_with(
    program: &SourceProgram,
    query: &Query,
    level: OptLevel,
    opts: &OptimizeOptions,
) -> Compiled {
    let (source, goal) = wrap_query(program, query);
    let optimized = match level {
        OptLevel::None => None,
        OptLevel::Rewrite => Some(optimize(&source, false, opts)),
        OptLevel::Full => Some(optimize(&source, true, opts)),
    };
    let elaborated = elaborate_program(optimized.as_ref().map_or(&source, |o| &o.program));
    let db = Database::new(&elaborated.program);
    Compiled {
        level,
        source,
        optimized,
        elaborated,
        db,
        goal,
        vars: query.vars.clone(),
    }
}

/// Parses program text and a query and compiles them.
pub fn compile_text(program: &str, query: &str, level: OptLevel) -> Result<Compiled, Error> {
    let p = parse(program)?;
    let q = parse_query(query)?;
    Ok(compile(&p, &q, level))
}

impl Compiled {
    pub fn solve(&self, opts: SolveOptions) -> Machine<'_> {
        solve(&self.db, &self.goal, opts)
    }

    /// `X = t, Y = u` for named query variables, `true` when there are none.
    pub fn format_answer(&self, answer: &Answer) -> String {
        format_answer(&self.vars, answer)
    }

    /// Toplevel-style transcript: output lines interleaved with answers
    /// separated by `;`, ending in `.`, or `false.` when there are none.
    pub fn transcript(&self, max_answers: usize, max_steps: Option<u64>) -> Result<String, EngineError> {
        let (sink, buf) = Sink::buffer();
        let opts = SolveOptions {
            sink,
            max_steps,
            ..Default::default()
        };
        let mut text = String::new();
        let mut answers = 0;
        let drain = |text: &mut String| {
            let mut b = buf.lock().unwrap();
            text.push_str(&b);
            b.clear();
        };
        for r in self.solve(opts).take(max_answers) {
            let answer = r?;
            if answers > 0 {
                text.push_str(";\n");
            }
            drain(&mut text);
            text.push_str(&self.format_answer(&answer));
            answers += 1;
        }
        if answers == 0 {
            drain(&mut text);
            text.push_str("false");
        }
        text.push_str(".\n");
        Ok(text)
    }
}

/// `X = t, Y = u` for the bound named variables, `true` when there are none.
pub fn format_answer(vars: &[(String, Var)], answer: &Answer) -> String {
    let mut printer = Printer::new(VarStyle::Anonymous);
    for (name, v) in vars {
        printer.name_var(*v, name);
    }
    let parts: Vec<String> = vars
        .iter()
        .filter(|(name, _)| !name.starts_with('_'))
        .filter_map(|(name, v)| {
            let value = answer.get(*v).cloned().unwrap_or(Term::Var(*v));
            (!value.is_var()).then(|| format!("{name} = {}", printer.term(&value)))
        })
        .collect();
    if parts.is_empty() {
        "true".into()
    } else {
        parts.join(", ")
    }
}
