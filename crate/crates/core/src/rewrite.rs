//! Handler rewrite rules and unification clean-up.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::effects::{EffectEnv, EffectSet};
use crate::program::{
    as_handler, count_own_continues, is_continue, is_control, map_own_continues_with, Clause, HandlerSpec,
    OpClause,
};
use crate::term::{Renamer, Substitution, Sym, Term, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Merge,
    Drop,
    Triv,
    Op,
    Conj,
    Disj,
    /// Partial evaluation: a handled call replaced by a specialized predicate.
    Fold,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Merge => "O-Merge",
            Rule::Drop => "O-Drop",
            Rule::Triv => "O-Triv",
            Rule::Op => "O-Op",
            Rule::Conj => "O-Conj",
            Rule::Disj => "O-Disj",
            Rule::Fold => "fold",
        }
    }
}

/// One rewrite step and the clause it produced.
#[derive(Clone, Debug)]
pub struct TraceEntry {
    pub rule: Rule,
    pub clause: Clause,
}

/// `((A, B), C)` to `(A, (B, C))` along the top-level conjunction.
pub fn reassoc(g: &Term) -> Term {
    match g.match_app(Sym::COMMA, 2) {
        Some(_) => {
            let parts = g.conjuncts();
            let mut it = parts.into_iter().rev();
            let last = it.next().unwrap();
            it.fold(last, |acc, x| Term::conj(x, acc))
        }
        None => g.clone(),
    }
}

/// Substitution that respects the handler encoding: shared-variable lists are
/// recomputed from the substituted values.
pub fn subst_goal(g: &Term, f: &dyn Fn(Var) -> Option<Term>) -> Term {
    if let Some(spec) = as_handler(g) {
        let mut shared = Vec::new();
        for v in &spec.shared {
            let t = f(*v).unwrap_or(Term::Var(*v));
            for w in t.vars() {
                if !shared.contains(&w) {
                    shared.push(w);
                }
            }
        }
        return HandlerSpec {
            goal: subst_goal(&spec.goal, f),
            clauses: spec
                .clauses
                .iter()
                .map(|c| OpClause {
                    head: subst_goal(&c.head, f),
                    body: subst_goal(&c.body, f),
                })
                .collect(),
            finally: subst_goal(&spec.finally, f),
            params: spec
                .params
                .iter()
                .map(|(p, a)| (subst_goal(p, f), subst_goal(a, f)))
                .collect(),
            shared,
        }
        .to_term();
    }
    match g {
        Term::Var(v) => f(*v).unwrap_or_else(|| g.clone()),
        Term::Compound(name, args) => Term::Compound(*name, args.iter().map(|a| subst_goal(a, f)).collect()),
        other => other.clone(),
    }
}

pub fn apply_map(g: &Term, map: &FxHashMap<Var, Term>) -> Term {
    if map.is_empty() {
        return g.clone();
    }
    subst_goal(g, &|v| map.get(&v).cloned())
}

fn apply_subst(g: &Term, s: &Substitution) -> Term {
    if s.is_empty() {
        return g.clone();
    }
    subst_goal(g, &|v| s.get(v).map(|_| s.resolve(&Term::Var(v))))
}

/// Binds variables of `pattern` in `bindable` so that it equals `term`.
fn match_into(
    pattern: &Term,
    term: &Term,
    bindable: &FxHashSet<Var>,
    map: &mut FxHashMap<Var, Term>,
) -> bool {
    match (pattern, term) {
        (Term::Var(v), _) if bindable.contains(v) => match map.get(v) {
            Some(bound) => bound == term,
            None => {
                map.insert(*v, term.clone());
                true
            }
        },
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| match_into(x, y, bindable, map))
        }
        _ => pattern == term,
    }
}

fn add_shared(spec: &mut HandlerSpec, vars: impl IntoIterator<Item = Var>) {
    for v in vars {
        if !spec.shared.contains(&v) {
            spec.shared.push(v);
        }
    }
}

fn fresh_handler_copy(spec: &HandlerSpec) -> HandlerSpec {
    spec.freshen_locals()
}

pub struct Rewriter<'a> {
    pub env: &'a EffectEnv,
}

impl Rewriter<'_> {
    fn effect(&self, g: &Term, ec: &EffectSet) -> EffectSet {
        self.env.infer(g, ec)
    }

    /// O-Merge: an outer handler whose goal is a handler.
    pub fn merge(&self, outer: &HandlerSpec) -> Option<Term> {
        let inner = as_handler(&outer.goal)?;
        enum Form {
            Tail(Term, Vec<Term>),
            NoContinue,
        }
        let mut forms = Vec::with_capacity(inner.clauses.len());
        for c in &inner.clauses {
            match count_own_continues(&c.body) {
                0 => forms.push(Form::NoContinue),
                1 => {
                    let mut goals = c.body.conjuncts();
                    let last = goals.pop().unwrap();
                    if !is_continue(&last) {
                        return None;
                    }
                    forms.push(Form::Tail(Term::conj_all(goals), last.args().to_vec()));
                }
                _ => return None,
            }
        }
        let inner_formals = inner.formals();
        let outer_formals = outer.formals();
        let wrap = |goal: Term, finally: Option<Term>, extra_shared: Vec<Var>| {
            let mut w = fresh_handler_copy(outer);
            let pw = w.formals();
            w.goal = goal;
            w.finally = match finally {
                Some(f) => {
                    let mut args = f.args().to_vec();
                    args.extend(pw.iter().cloned());
                    Term::app(Sym::CONTINUE, args)
                }
                None => w.finally,
            };
            w.params = pw.into_iter().zip(outer_formals.iter().cloned()).collect();
            add_shared(&mut w, extra_shared);
            w.to_term()
        };
        let mut clauses = Vec::new();
        for (c, form) in inner.clauses.iter().zip(forms) {
            let body = match form {
                Form::Tail(ga, v) => {
                    let mut shared = Vec::new();
                    for t in &v {
                        shared.extend(t.vars());
                    }
                    wrap(ga, Some(Term::app(Sym::CONTINUE, v)), shared)
                }
                Form::NoContinue => wrap(c.body.clone(), None, vec![]),
            };
            clauses.push(OpClause {
                head: c.head.clone(),
                body,
            });
        }
        let inner_ops = inner.ops();
        let inner_formal_vars: Vec<Var> = inner_formals.iter().flat_map(|t| t.vars()).collect();
        for c in &outer.clauses {
            if inner_ops.contains(&c.op()) {
                continue;
            }
            let body = map_own_continues_with(
                &c.body,
                &mut |u| {
                    let mut args = inner_formals.clone();
                    args.extend(u.iter().cloned());
                    Term::app(Sym::CONTINUE, args)
                },
                &mut |nested, changed| {
                    if changed {
                        add_shared(nested, inner_formal_vars.iter().copied());
                    }
                },
            );
            clauses.push(OpClause {
                head: c.head.clone(),
                body,
            });
        }
        let mut merged = HandlerSpec {
            goal: inner.goal.clone(),
            clauses,
            finally: wrap(inner.finally.clone(), None, vec![]),
            params: inner.params.iter().chain(outer.params.iter()).cloned().collect(),
            shared: inner.shared.clone(),
        };
        add_shared(&mut merged, outer.shared.iter().copied());
        Some(merged.to_term())
    }

    /// O-Drop: remove clauses for operations the goal cannot perform.
    pub fn drop(&self, spec: &HandlerSpec, ec: &EffectSet) -> Option<Term> {
        let e = self.effect(&spec.goal, ec);
        let kept: Vec<OpClause> = spec.clauses.iter().filter(|c| e.contains(c.op())).cloned().collect();
        if kept.len() == spec.clauses.len() {
            return None;
        }
        Some(HandlerSpec {
            clauses: kept,
            ..spec.clone()
        }
        .to_term())
    }

    /// O-Triv: an empty handler around an effect-free goal.
    pub fn triv(&self, spec: &HandlerSpec, ec: &EffectSet) -> Option<Term> {
        if !spec.clauses.is_empty() || !self.effect(&spec.goal, ec).is_empty() {
            return None;
        }
        let gs = Term::conj_all(spec.params.iter().map(|(f, a)| Term::eq(f.clone(), a.clone())));
        Some(Term::conj(spec.goal.clone(), Term::conj(gs, spec.finally.clone())))
    }

    /// O-Op: the goal starts with an operation this handler interprets.
    pub fn op(&self, spec: &HandlerSpec) -> Option<Term> {
        let (first, rest) = match spec.goal.match_app(Sym::COMMA, 2) {
            Some(a) => (a[0].clone(), a[1].clone()),
            None => (spec.goal.clone(), Term::truth()),
        };
        let f = first.functor()?;
        if !self.env.ops.contains(&f) {
            return None;
        }
        let clause = spec.clause_for(f)?;
        let mut r = Renamer::new();
        for v in &spec.shared {
            r.bind(*v, *v);
        }
        let formals = r.rename_all(&spec.formals());
        let head = r.rename(&clause.head);
        let body = r.rename(&clause.body);
        let head_vars: FxHashSet<Var> = head.vars().into_iter().collect();
        let mut map = FxHashMap::default();
        let matched = head
            .args()
            .iter()
            .zip(first.args())
            .all(|(s, t)| match_into(s, t, &head_vars, &mut map));
        let (eqs_op, body) = if matched {
            (vec![], apply_map(&body, &map))
        } else {
            let eqs = first
                .args()
                .iter()
                .zip(head.args())
                .map(|(t, s)| Term::eq(t.clone(), s.clone()))
                .collect();
            (eqs, body)
        };
        let mut rest_shared: Vec<Var> = rest.vars();
        rest_shared.extend(spec.shared.iter().copied());
        let spec_formals = spec.formals();
        let body = map_own_continues_with(
            &body,
            &mut |u| {
                let mut h = spec.clone();
                h.goal = rest.clone();
                h.params = spec_formals.iter().cloned().zip(u.iter().cloned()).collect();
                h.freshen_locals().to_term()
            },
            &mut |nested, changed| {
                if changed {
                    add_shared(nested, rest_shared.iter().copied());
                }
            },
        );
        let mut goals: Vec<Term> = formals
            .into_iter()
            .zip(spec.actuals())
            .map(|(f, a)| Term::eq(f, a))
            .collect();
        goals.extend(eqs_op);
        goals.push(body);
        Some(Term::conj_all(goals))
    }

    /// O-Conj: move a leading goal that performs none of the handled operations out.
    pub fn conj(&self, spec: &HandlerSpec, ec: &EffectSet) -> Option<Term> {
        let args = spec.goal.match_app(Sym::COMMA, 2)?;
        let e1 = self.effect(&args[0], ec);
        let ops = spec.ops();
        if e1.intersects(ops.iter()) {
            return None;
        }
        let h = HandlerSpec {
            goal: args[1].clone(),
            ..spec.clone()
        };
        Some(Term::conj(args[0].clone(), h.to_term()))
    }

    /// O-Disj: distribute the handler over a disjunction.
    pub fn disj(&self, spec: &HandlerSpec) -> Option<Term> {
        let args = spec.goal.match_app(Sym::SEMI, 2)?;
        if args[0].match_app(Sym::ARROW, 2).is_some() {
            return None;
        }
        let branch = |g: &Term| {
            let mut h = spec.freshen_locals();
            h.goal = g.clone();
            h.to_term()
        };
        Some(Term::disj(branch(&args[0]), branch(&args[1])))
    }

    fn apply_rules(&self, spec: &HandlerSpec, ec: &EffectSet) -> Option<(Term, Rule)> {
        if let Some(t) = self.merge(spec) {
            return Some((t, Rule::Merge));
        }
        if let Some(t) = self.drop(spec, ec) {
            return Some((t, Rule::Drop));
        }
        if let Some(t) = self.triv(spec, ec) {
            return Some((t, Rule::Triv));
        }
        if let Some(t) = self.op(spec) {
            return Some((t, Rule::Op));
        }
        if let Some(t) = self.conj(spec, ec) {
            return Some((t, Rule::Conj));
        }
        self.disj(spec).map(|t| (t, Rule::Disj))
    }

    /// Performs one rewrite somewhere in `g`: inside a handler's goal first,
    /// then at the handler itself, then in its clauses and finally goal.
    pub fn step(&self, g: &Term, ec: &EffectSet) -> Option<(Term, Rule)> {
        if let Some(mut spec) = as_handler(g) {
            if let Some((t, r)) = self.step(&spec.goal, ec) {
                spec.goal = t;
                return Some((spec.to_term(), r));
            }
            spec.goal = reassoc(&spec.goal);
            if let Some(hit) = self.apply_rules(&spec, ec) {
                return Some(hit);
            }
            for i in 0..spec.clauses.len() {
                if let Some((t, r)) = self.step(&spec.clauses[i].body, &EffectSet::all()) {
                    spec.clauses[i].body = t;
                    return Some((spec.to_term(), r));
                }
            }
            if let Some((t, r)) = self.step(&spec.finally, ec) {
                spec.finally = t;
                return Some((spec.to_term(), r));
            }
            return None;
        }
        let f = g.functor()?;
        if !is_control(f) {
            return None;
        }
        let args = g.args();
        for i in 0..args.len() {
            if let Some((t, r)) = self.step(&args[i], ec) {
                let mut new = args.to_vec();
                new[i] = t;
                return Some((Term::app(f.name, new), r));
            }
        }
        None
    }

    /// Rewrites a clause body to a fixpoint, recording each step.
    pub fn rewrite_clause(&self, c: &Clause, max_steps: usize, trace: Option<&mut Vec<TraceEntry>>) -> Clause {
        let mut body = c.body.clone();
        let mut local = Vec::new();
        for _ in 0..max_steps {
            match self.step(&body, &EffectSet::empty()) {
                Some((t, rule)) => {
                    body = t;
                    if trace.is_some() {
                        local.push(TraceEntry {
                            rule,
                            clause: Clause::new(c.head.clone(), body.clone()),
                        });
                    }
                }
                None => break,
            }
        }
        if let Some(t) = trace {
            t.extend(local);
        }
        Clause::new(c.head.clone(), body)
    }
}

/// Flattens a body into conjuncts, dropping `true`.
fn goals_of(body: &Term) -> Vec<Term> {
    body.conjuncts().into_iter().filter(|g| !g.is_atom(Sym::TRUE)).collect()
}

fn as_eq(g: &Term) -> Option<(&Term, &Term)> {
    g.match_app(Sym::EQ, 2).map(|a| (&a[0], &a[1]))
}

/// Substitutes away `X = T` goals whose `X` does not occur in `protected` or
/// any earlier goal. Returns the remaining goals.
fn eliminate_fresh(goals: Vec<Term>, protected: &FxHashSet<Var>) -> Vec<Term> {
    let mut seen = protected.clone();
    let mut out: Vec<Term> = Vec::new();
    let mut pending: std::collections::VecDeque<Term> = goals.into();
    while let Some(g) = pending.pop_front() {
        if let Some((a, b)) = as_eq(&g) {
            let pick = |x: &Term, t: &Term| match x {
                Term::Var(v) if !seen.contains(v) && !t.contains_var(*v) => Some((*v, t.clone())),
                _ => None,
            };
            if let Some((v, t)) = pick(a, b).or_else(|| pick(b, a)) {
                let map: FxHashMap<Var, Term> = [(v, t)].into_iter().collect();
                for p in pending.iter_mut() {
                    *p = apply_map(p, &map);
                }
                continue;
            }
        }
        if !g.is_atom(Sym::TRUE) {
            seen.extend(g.vars());
            out.push(g);
        }
    }
    out
}

/// Simplifies operation bodies and finally goals of every handler in `g`.
fn simplify_handlers(g: &Term) -> Term {
    if let Some(mut spec) = as_handler(g) {
        spec.goal = simplify_handlers(&spec.goal);
        let mut base: FxHashSet<Var> = spec.shared.iter().copied().collect();
        for f in spec.formals() {
            base.extend(f.vars());
        }
        for c in spec.clauses.iter_mut() {
            let mut protected = base.clone();
            protected.extend(c.head.vars());
            let goals: Vec<Term> = goals_of(&c.body).iter().map(simplify_handlers).collect();
            c.body = Term::conj_all(eliminate_fresh(goals, &protected));
        }
        let goals: Vec<Term> = goals_of(&spec.finally).iter().map(simplify_handlers).collect();
        spec.finally = Term::conj_all(eliminate_fresh(goals, &base));
        return spec.to_term();
    }
    match g.functor() {
        Some(f) if is_control(f) => Term::app(f.name, g.args().iter().map(simplify_handlers).collect()),
        _ => g.clone(),
    }
}

/// Solves leading unifications into the head, substitutes away unifications
/// with fresh variables and removes `true`. `None` if the clause can never succeed.
pub fn simplify_unifications(c: &Clause) -> Option<Clause> {
    let goals = goals_of(&c.body);
    let mut s = Substitution::with_occurs_check(true);
    let mut i = 0;
    while i < goals.len() {
        let Some((a, b)) = as_eq(&goals[i]) else { break };
        if s.unify(a, b) {
            i += 1;
            continue;
        }
        let mut plain = Substitution::new();
        for (v, t) in s.bindings() {
            plain.bind(v, t.clone());
        }
        let plain_ok = plain.unify(a, b);
        if plain_ok {
            break;
        }
        return None;
    }
    let head = apply_subst(&c.head, &s);
    let rest: Vec<Term> = goals[i..].iter().map(|g| apply_subst(g, &s)).collect();
    let protected: FxHashSet<Var> = head.vars().into_iter().collect();
    let rest = eliminate_fresh(rest, &protected);
    let body = Term::conj_all(rest.iter().map(simplify_handlers));
    Some(Clause::new(head, body))
}
