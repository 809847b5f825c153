//! SLD resolution with backtracking and multi-shot delimited control.
//!
//! The continuation is a persistent list of frames. `shift/1` walks it up to
//! the nearest reset frame and rebuilds the skipped goals as a conjunction
//! `((true, G1), G2)...`, which becomes the resumption bound to `Cont`.

use std::io::Write as _;
use std::rc::Rc;
use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::program::SourceProgram;
use crate::reader::{Printer, VarStyle};
use crate::term::{canonical, rename_offset, Functor, Substitution, Sym, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("shift({0}) without an enclosing reset")]
    ShiftWithoutReset(String),
    #[error("unknown predicate {0}")]
    UnknownPredicate(Functor),
    #[error("instantiation error in {0}")]
    Instantiation(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("step budget of {0} exhausted")]
    StepLimit(u64),
}

/// Where `writeln/1` output goes.
#[derive(Clone, Default)]
pub enum Sink {
    #[default]
    Stdout,
    Buffer(Arc<Mutex<String>>),
    Null,
}

impl Sink {
    pub fn buffer() -> (Sink, Arc<Mutex<String>>) {
        let buf = Arc::new(Mutex::new(String::new()));
        (Sink::Buffer(buf.clone()), buf)
    }

    pub(crate) fn write_line(&self, line: &str) {
        match self {
            Sink::Stdout => {
                let mut out = std::io::stdout().lock();
                let _ = writeln!(out, "{line}");
            }
            Sink::Buffer(buf) => {
                let mut b = buf.lock().unwrap();
                b.push_str(line);
                b.push('\n');
            }
            Sink::Null => {}
        }
    }
}

/// What happens when a shift reaches the top level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UnhandledShift {
    #[default]
    Error,
    /// Record the signal and carry on as if the shift had succeeded.
    Record,
}

#[derive(Clone, Default)]
pub struct SolveOptions {
    pub sink: Sink,
    pub max_steps: Option<u64>,
    pub unhandled: UnhandledShift,
}

/// One answer: the query variables and their resolved values.
#[derive(Clone, Debug, PartialEq)]
pub struct Answer {
    pub bindings: Vec<(Var, Term)>,
}

impl Answer {
    pub fn get(&self, v: Var) -> Option<&Term> {
        self.bindings.iter().find(|(w, _)| *w == v).map(|(_, t)| t)
    }

    /// The answer as a single term, for variant comparison.
    pub fn as_term(&self) -> Term {
        Term::app(Sym::new("answer"), self.bindings.iter().map(|(_, t)| t.clone()).collect())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Key {
    Atom(Sym),
    Int(i64),
    Functor(Sym, usize),
}

fn key_of(t: &Term) -> Option<Key> {
    match t {
        Term::Var(_) => None,
        Term::Atom(s) => Some(Key::Atom(*s)),
        Term::Int(n) => Some(Key::Int(*n)),
        Term::Compound(s, a) => Some(Key::Functor(*s, a.len())),
    }
}

/// Principal functor of the first argument and of that argument's first
/// argument (so `[push(_)|_]` and `[add|_]` are told apart).
#[derive(Clone, Copy, PartialEq, Eq)]
struct Index {
    outer: Option<Key>,
    inner: Option<Key>,
}

impl Index {
    fn of(first: Option<&Term>, s: &Substitution) -> Index {
        let walk = |t| s.walk(t);
        let outer_term = first.map(walk);
        let inner = match outer_term {
            Some(Term::Compound(_, a)) => key_of(walk(&a[0])),
            _ => None,
        };
        Index {
            outer: outer_term.and_then(key_of),
            inner,
        }
    }

    fn compatible(self, other: Index) -> bool {
        let ok = |a: Option<Key>, b: Option<Key>| match (a, b) {
            (Some(x), Some(y)) => x == y,
            _ => true,
        };
        ok(self.outer, other.outer) && ok(self.inner, other.inner)
    }
}

pub(crate) struct Template {
    pub(crate) args: Vec<Term>,
    pub(crate) body: Term,
    pub(crate) nvars: usize,
    key: Index,
}

/// Clause store with templates numbered from `Var(0)`.
pub struct Database {
    preds: FxHashMap<Functor, Vec<Template>>,
}

impl Database {
    pub fn new(program: &SourceProgram) -> Self {
        let mut preds: FxHashMap<Functor, Vec<Template>> = FxHashMap::default();
        for c in &program.clauses {
            let t = canonical(&c.to_term());
            let (head, body) = match t.match_app(Sym::NECK, 2) {
                Some(a) => (a[0].clone(), a[1].clone()),
                None => (t.clone(), Term::truth()),
            };
            let nvars = t.vars().iter().map(|v| v.0 as usize + 1).max().unwrap_or(0);
            let args = head.args().to_vec();
            let key = Index::of(args.first(), &Substitution::new());
            preds.entry(c.functor()).or_default().push(Template {
                args,
                body,
                nvars,
                key,
            });
        }
        for f in &program.effects {
            preds.entry(*f).or_default();
        }
        Database { preds }
    }

    pub fn defines(&self, f: Functor) -> bool {
        self.preds.contains_key(&f)
    }

    pub(crate) fn clauses(&self, f: Functor) -> Option<&[Template]> {
        self.preds.get(&f).map(|v| &v[..])
    }
}

pub(crate) fn rename(t: &Term, base: u64) -> Term {
    rename_offset(t, base)
}

/// A goal is a term plus a variable offset: with `base != 0` the term is a
/// clause-body template whose variables are shifted by `base` when used.
enum Frame {
    Goal(Term, u64),
    /// Commit point of an if-then-else: cut back to this choicepoint height.
    IteCommit(usize),
    ResetExit { cont: Term, signal: Term },
}

struct Node {
    frame: Frame,
    next: Cont,
}

type Cont = Option<Rc<Node>>;

fn push(frame: Frame, next: Cont) -> Cont {
    Some(Rc::new(Node { frame, next }))
}

enum Alt {
    Goal(Term, u64, Cont),
    Clauses {
        goal: Term,
        pred: Functor,
        idx: usize,
        cont: Cont,
    },
}

struct ChoicePoint {
    mark: usize,
    alt: Alt,
}

enum Step {
    Continue,
    Solution,
    Fail,
}

/// One query execution; iterate to enumerate answers.
pub struct Machine<'d> {
    db: &'d Database,
    subst: Substitution,
    current: Option<(Term, u64, Cont)>,
    choicepoints: Vec<ChoicePoint>,
    query_vars: Vec<Var>,
    opts: SolveOptions,
    steps: u64,
    done: bool,
    escaped: Vec<Term>,
}

pub fn solve<'d>(db: &'d Database, goal: &Term, opts: SolveOptions) -> Machine<'d> {
    Machine {
        db,
        subst: Substitution::new(),
        current: Some((goal.clone(), 0, None)),
        choicepoints: Vec::new(),
        query_vars: goal.vars(),
        opts,
        steps: 0,
        done: false,
        escaped: Vec::new(),
    }
}

impl<'d> Machine<'d> {
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Signals that reached the top level under [`UnhandledShift::Record`].
    pub fn escaped(&self) -> &[Term] {
        &self.escaped
    }

    fn backtrack(&mut self) -> bool {
        while let Some(cp) = self.choicepoints.pop() {
            self.subst.undo_to(cp.mark);
            match cp.alt {
                Alt::Goal(g, base, k) => {
                    self.current = Some((g, base, k));
                    return true;
                }
                Alt::Clauses {
                    goal,
                    pred,
                    idx,
                    cont,
                } => {
                    if self.try_clauses(goal, pred, idx, cont) {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn next_match(&self, clauses: &[Template], from: usize, key: Index) -> Option<usize> {
        (from..clauses.len()).find(|&i| key.compatible(clauses[i].key))
    }

    /// Tries clauses of `pred` from index `idx` on; sets `current` on success.
    fn try_clauses(&mut self, goal: Term, pred: Functor, idx: usize, cont: Cont) -> bool {
        let db = self.db;
        let clauses = &db.preds[&pred];
        let args = goal.args();
        let key = Index::of(args.first(), &self.subst);
        let mut i = match self.next_match(clauses, idx, key) {
            Some(i) => i,
            None => return false,
        };
        loop {
            let next = self.next_match(clauses, i + 1, key);
            let tpl = &clauses[i];
            let mark = self.subst.mark();
            let base = Var::fresh_block(tpl.nvars);
            let ok = tpl
                .args
                .iter()
                .zip(args)
                .all(|(h, a)| self.subst.unify_template(h, base, a));
            if ok {
                if let Some(n) = next {
                    self.choicepoints.push(ChoicePoint {
                        mark,
                        alt: Alt::Clauses {
                            goal: goal.clone(),
                            pred,
                            idx: n,
                            cont: cont.clone(),
                        },
                    });
                }
                self.current = Some((tpl.body.clone(), base, cont));
                return true;
            }
            self.subst.undo_to(mark);
            match next {
                Some(n) => i = n,
                None => return false,
            }
        }
    }

    fn cut_to(&mut self, height: usize) {
        self.choicepoints.truncate(height);
    }

    /// Pops frames after a goal succeeds.
    fn proceed(&mut self, mut k: Cont) -> Step {
        loop {
            let Some(node) = k else { return Step::Solution };
            match &node.frame {
                Frame::Goal(g, base) => {
                    self.current = Some((g.clone(), *base, node.next.clone()));
                    return Step::Continue;
                }
                Frame::IteCommit(h) => self.cut_to(*h),
                Frame::ResetExit { cont, signal } => {
                    let mark = self.subst.mark();
                    if !(self.subst.unify(cont, &Term::Int(0)) && self.subst.unify(signal, &Term::Int(0))) {
                        self.subst.undo_to(mark);
                        return Step::Fail;
                    }
                }
            }
            k = node.next.clone();
        }
    }

    fn shift(&mut self, signal: Term, k: Cont) -> Result<Step, EngineError> {
        let mut captured = Term::truth();
        let mut cur = k.clone();
        while let Some(node) = cur {
            match &node.frame {
                Frame::Goal(g, base) => captured = Term::conj(captured, rename(g, *base)),
                Frame::IteCommit(h) => {
                    self.cut_to(*h);
                    return Ok(Step::Fail);
                }
                Frame::ResetExit { cont, signal: s } => {
                    let mark = self.subst.mark();
                    if self.subst.unify(s, &signal) && self.subst.unify(cont, &captured) {
                        return Ok(self.proceed(node.next.clone()));
                    }
                    self.subst.undo_to(mark);
                    return Ok(Step::Fail);
                }
            }
            cur = node.next.clone();
        }
        match self.opts.unhandled {
            UnhandledShift::Error => Err(EngineError::ShiftWithoutReset(
                Printer::new(VarStyle::Underscore).term(&self.subst.resolve(&signal)),
            )),
            UnhandledShift::Record => {
                self.escaped.push(self.subst.resolve(&signal));
                Ok(self.proceed(k))
            }
        }
    }

    fn show(&self, t: &Term) -> String {
        Printer::new(VarStyle::Underscore).term(&self.subst.resolve(t))
    }

    fn eval_arith(&self, t: &Term) -> Result<i64, EngineError> {
        match self.subst.walk(t) {
            Term::Int(n) => Ok(*n),
            Term::Var(_) => Err(EngineError::Instantiation(format!("arithmetic: {}", self.show(t)))),
            Term::Compound(f, args) if args.len() == 2 => {
                let a = self.eval_arith(&args[0])?;
                let b = self.eval_arith(&args[1])?;
                let overflow = || EngineError::Type(format!("integer overflow in {}", self.show(t)));
                match *f {
                    Sym::PLUS => a.checked_add(b).ok_or_else(overflow),
                    Sym::MINUS => a.checked_sub(b).ok_or_else(overflow),
                    Sym::STAR => a.checked_mul(b).ok_or_else(overflow),
                    Sym::INTDIV | Sym::SLASH | Sym::MOD if b == 0 => {
                        Err(EngineError::Type("division by zero".into()))
                    }
                    Sym::INTDIV | Sym::SLASH => a.checked_div(b).ok_or_else(overflow),
                    Sym::MOD => Ok(a.rem_euclid(b)),
                    _ => Err(EngineError::Type(format!("not evaluable: {}", self.show(t)))),
                }
            }
            Term::Compound(f, args) if args.len() == 1 && *f == Sym::MINUS => {
                Ok(-self.eval_arith(&args[0])?)
            }
            other => Err(EngineError::Type(format!("not evaluable: {}", self.show(other)))),
        }
    }

    fn unify_step(&mut self, a: &Term, b: &Term, k: Cont) -> Step {
        if self.subst.unify(a, b) {
            self.proceed(k)
        } else {
            Step::Fail
        }
    }

    fn bool_step(&mut self, ok: bool, k: Cont) -> Step {
        if ok {
            self.proceed(k)
        } else {
            Step::Fail
        }
    }

    /// `t` under offset `base`, dereferenced when it is a variable.
    fn view(&self, t: &Term, base: u64) -> (Term, u64) {
        match t {
            Term::Var(_) => (self.subst.walk(&rename(t, base)).clone(), 0),
            _ => (t.clone(), base),
        }
    }

    fn step(&mut self, goal: Term, base: u64, k: Cont) -> Result<Step, EngineError> {
        let (goal, base) = self.view(&goal, base);
        let lazy = |t: &Term| (t.clone(), base);
        let name = match &goal {
            Term::Atom(s) | Term::Compound(s, _) => *s,
            _ => Sym::TRUE,
        };
        let args = goal.args();
        match (name, args.len()) {
            (Sym::COMMA, 2) => {
                let (a, b) = (lazy(&args[0]), lazy(&args[1]));
                self.current = Some((a.0, a.1, push(Frame::Goal(b.0, b.1), k)));
                return Ok(Step::Continue);
            }
            (Sym::SEMI, 2) => {
                let (cond, cb) = self.view(&args[0], base);
                if let Some(ct) = cond.match_app(Sym::ARROW, 2) {
                    let (c, t) = ((ct[0].clone(), cb), (ct[1].clone(), cb));
                    return Ok(self.ite(c, t, lazy(&args[1]), k));
                }
                self.choicepoints.push(ChoicePoint {
                    mark: self.subst.mark(),
                    alt: Alt::Goal(args[1].clone(), base, k.clone()),
                });
                self.current = Some((args[0].clone(), base, k));
                return Ok(Step::Continue);
            }
            (Sym::ARROW, 2) => {
                return Ok(self.ite(lazy(&args[0]), lazy(&args[1]), (Term::atom("fail"), 0), k));
            }
            (Sym::CALL, 1) => {
                self.current = Some((args[0].clone(), base, k));
                return Ok(Step::Continue);
            }
            (Sym::RESET, 3) => {
                let exit = Frame::ResetExit {
                    cont: rename(&args[1], base),
                    signal: rename(&args[2], base),
                };
                self.current = Some((args[0].clone(), base, push(exit, k)));
                return Ok(Step::Continue);
            }
            _ => {}
        }
        let goal = if base == 0 { goal } else { rename(&goal, base) };
        let (name, args): (Sym, &[Term]) = match &goal {
            Term::Var(_) => return Err(EngineError::Instantiation("call of an unbound goal".into())),
            Term::Int(n) => return Err(EngineError::Type(format!("callable expected, found {n}"))),
            Term::Atom(s) => (*s, &[]),
            Term::Compound(s, a) => (*s, &a[..]),
        };
        Ok(match (name, args.len()) {
            (Sym::TRUE, 0) => self.proceed(k),
            (Sym::FAIL, 0) | (Sym::FALSE, 0) => Step::Fail,
            (Sym::SHIFT, 1) => self.shift(args[0].clone(), k)?,
            (Sym::EQ, 2) => self.unify_step(&args[0], &args[1], k),
            (Sym::NUNIFY, 2) => {
                let mark = self.subst.mark();
                let unifiable = self.subst.unify(&args[0], &args[1]);
                self.subst.undo_to(mark);
                self.bool_step(!unifiable, k)
            }
            (Sym::EQEQ, 2) => {
                let same = self.subst.identical(&args[0], &args[1]);
                self.bool_step(same, k)
            }
            (Sym::NEQ, 2) => {
                let same = self.subst.identical(&args[0], &args[1]);
                self.bool_step(!same, k)
            }
            (Sym::IS, 2) => {
                let v = self.eval_arith(&args[1])?;
                self.unify_step(&args[0], &Term::Int(v), k)
            }
            (Sym::LT | Sym::GT | Sym::LE | Sym::GE | Sym::ARITH_EQ | Sym::ARITH_NE, 2) => {
                let a = self.eval_arith(&args[0])?;
                let b = self.eval_arith(&args[1])?;
                let ok = match name {
                    Sym::LT => a < b,
                    Sym::GT => a > b,
                    Sym::LE => a <= b,
                    Sym::GE => a >= b,
                    Sym::ARITH_EQ => a == b,
                    _ => a != b,
                };
                self.bool_step(ok, k)
            }
            (Sym::WRITELN, 1) => {
                let line = self.show(&args[0]);
                self.opts.sink.write_line(&line);
                self.proceed(k)
            }
            _ => {
                let f = Functor {
                    name,
                    arity: args.len(),
                };
                if !self.db.defines(f) {
                    return Err(EngineError::UnknownPredicate(f));
                }
                if self.try_clauses(goal.clone(), f, 0, k) {
                    Step::Continue
                } else {
                    Step::Fail
                }
            }
        })
    }

    /// Decides a unification or identity test without a choicepoint.
    fn inline_test(&mut self, c: &(Term, u64)) -> Option<bool> {
        let (c, base) = self.view(&c.0, c.1);
        let (name, args) = match &c {
            Term::Compound(s, a) if a.len() == 2 => (*s, a),
            _ => return None,
        };
        let arg = |i: usize| rename(&args[i], base);
        match name {
            Sym::EQ => Some(self.subst.unify(&arg(0), &arg(1))),
            Sym::EQEQ => Some(self.subst.identical(&arg(0), &arg(1))),
            _ => None,
        }
    }

    fn ite(&mut self, c: (Term, u64), t: (Term, u64), e: (Term, u64), k: Cont) -> Step {
        if let Some(ok) = self.inline_test(&c) {
            let next = if ok { t } else { e };
            self.current = Some((next.0, next.1, k));
            return Step::Continue;
        }
        let height = self.choicepoints.len();
        self.choicepoints.push(ChoicePoint {
            mark: self.subst.mark(),
            alt: Alt::Goal(e.0, e.1, k.clone()),
        });
        let then = push(Frame::IteCommit(height), push(Frame::Goal(t.0, t.1), k));
        self.current = Some((c.0, c.1, then));
        Step::Continue
    }

    fn answer(&self) -> Answer {
        Answer {
            bindings: self
                .query_vars
                .iter()
                .map(|v| (*v, self.subst.resolve(&Term::Var(*v))))
                .collect(),
        }
    }

    fn run(&mut self) -> Option<Result<Answer, EngineError>> {
        loop {
            let (goal, base, k) = match self.current.take() {
                Some(x) => x,
                None => {
                    if !self.backtrack() {
                        return None;
                    }
                    continue;
                }
            };
            self.steps += 1;
            if let Some(max) = self.opts.max_steps {
                if self.steps > max {
                    return Some(Err(EngineError::StepLimit(max)));
                }
            }
            match self.step(goal, base, k) {
                Err(e) => return Some(Err(e)),
                Ok(Step::Continue) => {}
                Ok(Step::Fail) => self.current = None,
                Ok(Step::Solution) => {
                    self.current = None;
                    return Some(Ok(self.answer()));
                }
            }
        }
    }
}

impl Iterator for Machine<'_> {
    type Item = Result<Answer, EngineError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let r = self.run();
        if !matches!(r, Some(Ok(_))) {
            self.done = true;
        }
        r
    }
}

/// Outcome of running a query to a bounded number of answers.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub answers: Vec<Answer>,
    pub error: Option<EngineError>,
    pub output: String,
}

/// Collects up to `max_answers` answers with output captured in a buffer.
pub fn run_collect(db: &Database, goal: &Term, max_answers: usize, max_steps: Option<u64>) -> RunResult {
    let (sink, buf) = Sink::buffer();
    let opts = SolveOptions {
        sink,
        max_steps,
        unhandled: UnhandledShift::Error,
    };
    let mut answers = Vec::new();
    let mut error = None;
    for r in solve(db, goal, opts).take(max_answers) {
        match r {
            Ok(a) => answers.push(a),
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    let output = buf.lock().unwrap().clone();
    RunResult {
        answers,
        error,
        output,
    }
}
