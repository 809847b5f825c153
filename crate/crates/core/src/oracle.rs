//! Reference evaluator: a direct transcription of the delimited-control
//! meta-interpreter, written with success continuations.
//!
//! `eval(G, Signal)` calls its continuation once per solution of `G`, with
//! `Signal` either `ok` or `shift(Term, Cont)`. Backtracking is the return
//! from the continuation. Only used to cross-check [`crate::engine`].

use crate::engine::{rename, Answer, Database, EngineError, RunResult, Sink};
use crate::reader::{Printer, VarStyle};
use crate::term::{Functor, Substitution, Sym, Term, Var};

enum Signal {
    Ok,
    Shift(Term, Term),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Flow {
    /// Keep enumerating.
    More,
    /// Enough answers; unwind everything.
    Stop,
    /// Commit of the if-then-else with this id: stop enumerating its condition.
    Cut(u64),
}

type K<'a> = &'a mut dyn FnMut(&mut Oracle<'_>, Signal) -> Result<Flow, EngineError>;

struct Oracle<'d> {
    db: &'d Database,
    subst: Substitution,
    steps: u64,
    max_steps: Option<u64>,
    next_cut: u64,
    sink: Sink,
}

impl<'d> Oracle<'d> {
    fn show(&self, t: &Term) -> String {
        Printer::new(VarStyle::Underscore).term(&self.subst.resolve(t))
    }

    fn arith(&self, t: &Term) -> Result<i64, EngineError> {
        match self.subst.walk(t) {
            Term::Int(n) => Ok(*n),
            Term::Var(_) => Err(EngineError::Instantiation(format!("arithmetic: {}", self.show(t)))),
            Term::Compound(f, a) if a.len() == 2 => {
                let (x, y) = (self.arith(&a[0])?, self.arith(&a[1])?);
                let overflow = || EngineError::Type(format!("integer overflow in {}", self.show(t)));
                match *f {
                    Sym::PLUS => x.checked_add(y).ok_or_else(overflow),
                    Sym::MINUS => x.checked_sub(y).ok_or_else(overflow),
                    Sym::STAR => x.checked_mul(y).ok_or_else(overflow),
                    Sym::INTDIV | Sym::SLASH | Sym::MOD if y == 0 => {
                        Err(EngineError::Type("division by zero".into()))
                    }
                    Sym::INTDIV | Sym::SLASH => x.checked_div(y).ok_or_else(overflow),
                    Sym::MOD => Ok(x.rem_euclid(y)),
                    _ => Err(EngineError::Type(format!("not evaluable: {}", self.show(t)))),
                }
            }
            Term::Compound(f, a) if a.len() == 1 && *f == Sym::MINUS => Ok(-self.arith(&a[0])?),
            other => Err(EngineError::Type(format!("not evaluable: {}", self.show(other)))),
        }
    }

    /// Runs `k(ok)` if `ok`, undoing bindings made since `mark` afterwards.
    fn then(&mut self, mark: usize, ok: bool, k: K) -> Result<Flow, EngineError> {
        let r = if ok { k(self, Signal::Ok) } else { Ok(Flow::More) };
        self.subst.undo_to(mark);
        r
    }

    fn builtin(&mut self, name: Sym, args: &[Term], k: K) -> Option<Result<Flow, EngineError>> {
        let mark = self.subst.mark();
        let ok = match (name, args.len()) {
            (Sym::TRUE, 0) => true,
            (Sym::FAIL, 0) | (Sym::FALSE, 0) => false,
            (Sym::EQ, 2) => self.subst.unify(&args[0], &args[1]),
            (Sym::NUNIFY, 2) => {
                let u = self.subst.unify(&args[0], &args[1]);
                self.subst.undo_to(mark);
                !u
            }
            (Sym::EQEQ, 2) => self.subst.identical(&args[0], &args[1]),
            (Sym::NEQ, 2) => !self.subst.identical(&args[0], &args[1]),
            (Sym::IS, 2) => match self.arith(&args[1]) {
                Ok(v) => self.subst.unify(&args[0], &Term::Int(v)),
                Err(e) => return Some(Err(e)),
            },
            (Sym::LT | Sym::GT | Sym::LE | Sym::GE | Sym::ARITH_EQ | Sym::ARITH_NE, 2) => {
                let (a, b) = match (self.arith(&args[0]), self.arith(&args[1])) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => return Some(Err(e)),
                };
                match name {
                    Sym::LT => a < b,
                    Sym::GT => a > b,
                    Sym::LE => a <= b,
                    Sym::GE => a >= b,
                    Sym::ARITH_EQ => a == b,
                    _ => a != b,
                }
            }
            (Sym::WRITELN, 1) => {
                let line = self.show(&args[0]);
                self.sink.write_line(&line);
                true
            }
            _ => return None,
        };
        Some(self.then(mark, ok, k))
    }

    fn eval(&mut self, goal: &Term, k: K) -> Result<Flow, EngineError> {
        self.steps += 1;
        if let Some(max) = self.max_steps {
            if self.steps > max {
                return Err(EngineError::StepLimit(max));
            }
        }
        let goal = self.subst.walk(goal).clone();
        let (name, args): (Sym, Vec<Term>) = match &goal {
            Term::Var(_) => return Err(EngineError::Instantiation("call of an unbound goal".into())),
            Term::Int(n) => return Err(EngineError::Type(format!("callable expected, found {n}"))),
            Term::Atom(s) => (*s, vec![]),
            Term::Compound(s, a) => (*s, a.to_vec()),
        };
        match (name, args.len()) {
            // eval(shift(Term),Signal) :- !, Signal = shift(Term,true).
            (Sym::SHIFT, 1) => k(self, Signal::Shift(args[0].clone(), Term::truth())),
            // eval(reset(G,Cont,Term),Signal) :- !, eval(G,Signal1),
            //     (Signal1 = ok -> Cont = 0, Term = 0 ; Signal1 = shift(Term,Cont)), Signal = ok.
            (Sym::RESET, 3) => {
                let (cont, term) = (args[1].clone(), args[2].clone());
                self.eval(&args[0], &mut |o: &mut Oracle, s1| {
                    let mark = o.subst.mark();
                    let ok = match s1 {
                        Signal::Ok => o.subst.unify(&cont, &Term::Int(0)) && o.subst.unify(&term, &Term::Int(0)),
                        Signal::Shift(t, c) => o.subst.unify(&term, &t) && o.subst.unify(&cont, &c),
                    };
                    o.then(mark, ok, k)
                })
            }
            // eval((G1,G2),Signal) :- !, eval(G1,Signal1),
            //     (Signal1 = ok -> eval(G2,Signal) ; Signal1 = shift(Term,Cont), Signal = shift(Term,(Cont,G2))).
            (Sym::COMMA, 2) => {
                let g2 = args[1].clone();
                self.eval(&args[0], &mut |o: &mut Oracle, s1| match s1 {
                    Signal::Ok => o.eval(&g2, k),
                    Signal::Shift(t, c) => k(o, Signal::Shift(t, Term::conj(c, g2.clone()))),
                })
            }
            (Sym::SEMI, 2) => {
                if let Some(ct) = self.subst.walk(&args[0]).match_app(Sym::ARROW, 2) {
                    let (c, t) = (ct[0].clone(), ct[1].clone());
                    return self.ite(&c, &t, &args[1], k);
                }
                // eval((G1;G2),Signal) :- !, (eval(G1,Signal) ; eval(G2,Signal)).
                match self.eval(&args[0], k)? {
                    Flow::More => self.eval(&args[1], k),
                    other => Ok(other),
                }
            }
            (Sym::ARROW, 2) => self.ite(&args[0], &args[1], &Term::atom("fail"), k),
            (Sym::CALL, 1) => self.eval(&args[0], k),
            _ => {
                if let Some(r) = self.builtin(name, &args, k) {
                    return r;
                }
                // eval(Goal,Signal) :- clause(Goal,Body), eval(Body,Signal).
                let f = Functor {
                    name,
                    arity: args.len(),
                };
                let db = self.db;
                let clauses = db.clauses(f).ok_or(EngineError::UnknownPredicate(f))?;
                for tpl in clauses {
                    let mark = self.subst.mark();
                    let base = Var::fresh_block(tpl.nvars);
                    let ok = tpl
                        .args
                        .iter()
                        .zip(&args)
                        .all(|(h, a)| self.subst.unify(&rename(h, base), a));
                    let flow = if ok {
                        self.eval(&rename(&tpl.body, base), k)
                    } else {
                        Ok(Flow::More)
                    };
                    self.subst.undo_to(mark);
                    match flow? {
                        Flow::More => {}
                        other => return Ok(other),
                    }
                }
                Ok(Flow::More)
            }
        }
    }

    // eval((C->G1;G2),Signal) :- !, (eval(C,Signal1) ->
    //     (Signal1 = ok -> eval(G1,Signal) ; fail) ; eval(G2,Signal)).
    fn ite(&mut self, c: &Term, t: &Term, e: &Term, k: K) -> Result<Flow, EngineError> {
        let id = self.next_cut;
        self.next_cut += 1;
        let mut found = false;
        let flow = self.eval(c, &mut |o: &mut Oracle, s1| {
            found = true;
            let r = match s1 {
                Signal::Ok => o.eval(t, k)?,
                Signal::Shift(..) => Flow::More,
            };
            Ok(match r {
                Flow::More => Flow::Cut(id),
                other => other,
            })
        })?;
        match flow {
            Flow::Cut(i) if i == id => Ok(Flow::More),
            Flow::More if !found => self.eval(e, k),
            other => Ok(other),
        }
    }
}

/// Runs `goal` through the meta-interpreter, collecting up to `max_answers`.
///
/// A shift that reaches the top level makes that branch fail, as in
/// `eval(G) :- eval(G,Signal), (Signal = shift(_,_) -> fail ; true)`.
pub fn eval_oracle(db: &Database, goal: &Term, max_answers: usize, max_steps: Option<u64>) -> RunResult {
    let (sink, buf) = Sink::buffer();
    let mut o = Oracle {
        db,
        subst: Substitution::new(),
        steps: 0,
        max_steps,
        next_cut: 0,
        sink,
    };
    let vars = goal.vars();
    let mut answers = Vec::new();
    let result = if max_answers == 0 {
        Ok(Flow::Stop)
    } else {
        o.eval(goal, &mut |o: &mut Oracle, s| {
            if let Signal::Ok = s {
                let bindings = vars.iter().map(|v| (*v, o.subst.resolve(&Term::Var(*v)))).collect();
                answers.push(Answer { bindings });
                if answers.len() >= max_answers {
                    return Ok(Flow::Stop);
                }
            }
            Ok(Flow::More)
        })
    };
    let output = buf.lock().unwrap().clone();
    RunResult {
        answers,
        error: result.err(),
        output,
    }
}
