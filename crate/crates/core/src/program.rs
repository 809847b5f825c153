//! Clauses, programs and the structured handler goal.

use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::term::{Functor, Renamer, Sym, Term, Var};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub head: Term,
    pub body: Term,
}

impl Clause {
    pub fn new(head: Term, body: Term) -> Self {
        Clause { head, body }
    }

    pub fn fact(head: Term) -> Self {
        Clause {
            head,
            body: Term::truth(),
        }
    }

    pub fn functor(&self) -> Functor {
        self.head.functor().expect("clause head must be callable")
    }

    /// `Head :- Body`, or just `Head` for facts.
    pub fn to_term(&self) -> Term {
        if self.body.is_atom(Sym::TRUE) {
            self.head.clone()
        } else {
            Term::app(Sym::NECK, vec![self.head.clone(), self.body.clone()])
        }
    }

    pub fn from_term(t: &Term) -> Self {
        match t.match_app(Sym::NECK, 2) {
            Some(args) => Clause::new(args[0].clone(), args[1].clone()),
            None => Clause::fact(t.clone()),
        }
    }

    pub fn renamed(&self) -> Clause {
        let mut r = Renamer::new();
        Clause::new(r.rename(&self.head), r.rename(&self.body))
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::reader::print_clause(self))
    }
}

/// A parsed program: effect declarations, clauses in source order, other directives.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SourceProgram {
    pub effects: Vec<Functor>,
    pub clauses: Vec<Clause>,
    pub directives: Vec<Term>,
}

impl SourceProgram {
    pub fn is_effect(&self, f: Functor) -> bool {
        self.effects.contains(&f)
    }

    /// Predicates in order of first definition.
    pub fn predicates(&self) -> Vec<Functor> {
        let mut seen = FxHashSet::default();
        self.clauses
            .iter()
            .map(Clause::functor)
            .filter(|f| seen.insert(*f))
            .collect()
    }

    pub fn clauses_of(&self, f: Functor) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(move |c| c.functor() == f)
    }

    pub fn defines(&self, f: Functor) -> bool {
        self.clauses.iter().any(|c| c.functor() == f)
    }

    pub fn clause_index(&self) -> FxHashMap<Functor, Vec<usize>> {
        let mut index: FxHashMap<Functor, Vec<usize>> = FxHashMap::default();
        for (i, c) in self.clauses.iter().enumerate() {
            index.entry(c.functor()).or_default().push(i);
        }
        index
    }
}

/// `Head -> Body` inside a handler's `with` part.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OpClause {
    pub head: Term,
    pub body: Term,
}

impl OpClause {
    pub fn op(&self) -> Functor {
        self.head.functor().expect("operation clause head must be callable")
    }
}

/// `handle Goal with Clauses finally Finally for (Formal = Actual, ...)`.
///
/// `shared` lists variables of the clause bodies and finally goal that belong to
/// the enclosing scope. Source handlers never have any; the optimizer introduces
/// them when it nests a handler inside another handler's operation clause.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HandlerSpec {
    pub goal: Term,
    pub clauses: Vec<OpClause>,
    pub finally: Term,
    pub params: Vec<(Term, Term)>,
    pub shared: Vec<Var>,
}

impl HandlerSpec {
    pub fn new(goal: Term, clauses: Vec<OpClause>) -> Self {
        HandlerSpec {
            goal,
            clauses,
            finally: Term::truth(),
            params: Vec::new(),
            shared: Vec::new(),
        }
    }

    pub fn formals(&self) -> Vec<Term> {
        self.params.iter().map(|(f, _)| f.clone()).collect()
    }

    pub fn actuals(&self) -> Vec<Term> {
        self.params.iter().map(|(_, a)| a.clone()).collect()
    }

    pub fn ops(&self) -> Vec<Functor> {
        self.clauses.iter().map(OpClause::op).collect()
    }

    pub fn clause_for(&self, op: Functor) -> Option<&OpClause> {
        self.clauses.iter().find(|c| c.op() == op)
    }

    pub fn to_term(&self) -> Term {
        let clauses = Term::list(
            self.clauses
                .iter()
                .map(|c| Term::app(Sym::ARROW, vec![c.head.clone(), c.body.clone()])),
            Term::nil(),
        );
        let params = Term::list(
            self.params.iter().map(|(f, a)| Term::eq(f.clone(), a.clone())),
            Term::nil(),
        );
        let shared = Term::list(self.shared.iter().map(|v| Term::Var(*v)), Term::nil());
        Term::app(
            Sym::HANDLE,
            vec![self.goal.clone(), clauses, self.finally.clone(), params, shared],
        )
    }

    pub fn from_term(t: &Term) -> Option<HandlerSpec> {
        let args = t.match_app(Sym::HANDLE, 5)?;
        let clauses = args[1]
            .list_items()?
            .into_iter()
            .map(|c| {
                c.match_app(Sym::ARROW, 2).map(|a| OpClause {
                    head: a[0].clone(),
                    body: a[1].clone(),
                })
            })
            .collect::<Option<Vec<_>>>()?;
        let params = args[3]
            .list_items()?
            .into_iter()
            .map(|p| p.match_app(Sym::EQ, 2).map(|a| (a[0].clone(), a[1].clone())))
            .collect::<Option<Vec<_>>>()?;
        let shared = args[4]
            .list_items()?
            .into_iter()
            .map(|v| v.as_var())
            .collect::<Option<Vec<_>>>()?;
        Some(HandlerSpec {
            goal: args[0].clone(),
            clauses,
            finally: args[2].clone(),
            params,
            shared,
        })
    }

    /// Variables that belong to this handler only: formals plus everything in the
    /// clause bodies and finally goal that is not shared with the enclosing scope.
    pub fn local_vars(&self) -> Vec<Var> {
        let shared: FxHashSet<Var> = self.shared.iter().copied().collect();
        let mut seen = FxHashSet::default();
        let mut out = Vec::new();
        let mut push = |t: &Term| {
            for v in t.vars() {
                if !shared.contains(&v) && seen.insert(v) {
                    out.push(v);
                }
            }
        };
        for (f, _) in &self.params {
            push(f);
        }
        for c in &self.clauses {
            push(&c.head);
            push(&c.body);
        }
        push(&self.finally);
        out
    }

    /// Copy with all local variables renamed apart. The handled goal, the actual
    /// parameters and shared variables are left untouched.
    pub fn freshen_locals(&self) -> HandlerSpec {
        let mut r = Renamer::new();
        for v in &self.shared {
            r.bind(*v, *v);
        }
        self.rename_locals_with(&mut r)
    }

    fn rename_locals_with(&self, r: &mut Renamer) -> HandlerSpec {
        HandlerSpec {
            goal: self.goal.clone(),
            clauses: self
                .clauses
                .iter()
                .map(|c| OpClause {
                    head: r.rename(&c.head),
                    body: r.rename(&c.body),
                })
                .collect(),
            finally: r.rename(&self.finally),
            params: self
                .params
                .iter()
                .map(|(f, a)| (r.rename(f), a.clone()))
                .collect(),
            shared: self.shared.clone(),
        }
    }
}

pub fn as_handler(t: &Term) -> Option<HandlerSpec> {
    HandlerSpec::from_term(t)
}

pub fn is_handler(t: &Term) -> bool {
    t.match_app(Sym::HANDLE, 5).is_some()
}

pub fn is_continue(t: &Term) -> bool {
    matches!(t.functor(), Some(f) if f.name == Sym::CONTINUE)
}

/// Built-in predicates with fixed meaning in the engine.
pub fn is_builtin(f: Functor) -> bool {
    let s = f.name;
    match f.arity {
        0 => s == Sym::TRUE || s == Sym::FAIL || s == Sym::FALSE,
        1 => s == Sym::WRITELN || s == Sym::CALL,
        2 => [
            Sym::EQ,
            Sym::EQEQ,
            Sym::NEQ,
            Sym::NUNIFY,
            Sym::IS,
            Sym::LT,
            Sym::GT,
            Sym::LE,
            Sym::GE,
            Sym::ARITH_EQ,
            Sym::ARITH_NE,
        ]
        .contains(&s),
        _ => false,
    }
}

/// Conjunction, disjunction and if-then-else.
pub fn is_control(f: Functor) -> bool {
    f.arity == 2 && (f.name == Sym::COMMA || f.name == Sym::SEMI || f.name == Sym::ARROW)
}

pub fn is_delimited_control(f: Functor) -> bool {
    (f.name == Sym::SHIFT && f.arity == 1) || (f.name == Sym::RESET && f.arity == 3)
}

/// Rewrites the `continue` goals owned by the innermost enclosing operation clause.
///
/// Handled goals and finally goals of nested handlers are transparent; their
/// operation clauses own their own `continue` goals and are left alone.
pub fn map_own_continues(goal: &Term, f: &mut dyn FnMut(&[Term]) -> Term) -> Term {
    map_own_continues_with(goal, f, &mut |_, _| {})
}

/// Like [`map_own_continues`], additionally reporting each nested handler whose
/// finally goal was rewritten so the caller can adjust it.
pub fn map_own_continues_with(
    goal: &Term,
    f: &mut dyn FnMut(&[Term]) -> Term,
    on_nested: &mut dyn FnMut(&mut HandlerSpec, bool),
) -> Term {
    if is_continue(goal) {
        return f(goal.args());
    }
    if let Some(mut spec) = as_handler(goal) {
        spec.goal = map_own_continues_with(&spec.goal, f, on_nested);
        let before = spec.finally.clone();
        spec.finally = map_own_continues_with(&spec.finally, f, on_nested);
        let changed = before != spec.finally;
        on_nested(&mut spec, changed);
        return spec.to_term();
    }
    match goal.functor() {
        Some(fun) if is_control(fun) => {
            let args = goal.args();
            Term::app(
                fun.name,
                vec![
                    map_own_continues_with(&args[0], f, on_nested),
                    map_own_continues_with(&args[1], f, on_nested),
                ],
            )
        }
        _ => goal.clone(),
    }
}

pub fn count_own_continues(goal: &Term) -> usize {
    let mut n = 0;
    map_own_continues(goal, &mut |args| {
        n += 1;
        Term::app(Sym::CONTINUE, args.to_vec())
    });
    n
}

/// Renames handler-local variables apart, recursively, so that variables in
/// operation clauses and finally goals are distinct from the enclosing scope.
/// Each operation clause gets its own scope; formals are shared by all clauses.
pub fn localize(goal: &Term) -> Term {
    if let Some(spec) = as_handler(goal) {
        let mut formals = Renamer::new();
        for v in &spec.shared {
            formals.bind(*v, *v);
        }
        let params: Vec<(Term, Term)> = spec
            .params
            .iter()
            .map(|(f, a)| (formals.rename(f), localize(a)))
            .collect();
        let formal_map: Vec<(Var, Var)> = spec
            .params
            .iter()
            .flat_map(|(f, _)| f.vars())
            .map(|v| {
                let renamed = formals.rename(&Term::Var(v)).as_var().unwrap();
                (v, renamed)
            })
            .collect();
        let scoped = || {
            let mut r = Renamer::new();
            for v in &spec.shared {
                r.bind(*v, *v);
            }
            for (from, to) in &formal_map {
                r.bind(*from, *to);
            }
            r
        };
        let clauses = spec
            .clauses
            .iter()
            .map(|c| {
                let mut r = scoped();
                OpClause {
                    head: r.rename(&c.head),
                    body: localize(&r.rename(&c.body)),
                }
            })
            .collect();
        let finally = localize(&scoped().rename(&spec.finally));
        return HandlerSpec {
            goal: localize(&spec.goal),
            clauses,
            finally,
            params,
            shared: spec.shared.clone(),
        }
        .to_term();
    }
    match goal.functor() {
        Some(fun) if is_control(fun) => {
            let args = goal.args();
            Term::app(fun.name, vec![localize(&args[0]), localize(&args[1])])
        }
        _ => goal.clone(),
    }
}

/// Calls `f` on every goal position of `goal` (including nested handler parts).
pub fn visit_goals(goal: &Term, f: &mut dyn FnMut(&Term)) {
    f(goal);
    if let Some(spec) = as_handler(goal) {
        visit_goals(&spec.goal, f);
        for c in &spec.clauses {
            visit_goals(&c.body, f);
        }
        visit_goals(&spec.finally, f);
        return;
    }
    if let Some(fun) = goal.functor() {
        if is_control(fun) {
            for a in goal.args() {
                visit_goals(a, f);
            }
        } else if fun.name == Sym::CALL && fun.arity == 1 {
            visit_goals(&goal.args()[0], f);
        }
    }
}
