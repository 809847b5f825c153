//! Source-to-source optimization: handler rewriting plus partial evaluation of
//! handled predicate calls.

use std::collections::{BTreeSet, VecDeque};

use rustc_hash::{FxHashMap, FxHashSet};

use crate::effects::{analyze_program, EffectEnv};
use crate::pipeline::QUERY_PRED;
use crate::program::{as_handler, count_own_continues, is_control, Clause, HandlerSpec, SourceProgram};
use crate::rewrite::{reassoc, simplify_unifications, Rewriter, Rule, TraceEntry};
use crate::term::{canonical, Functor, Renamer, Sym, Term, Var};

#[derive(Clone, Debug)]
pub struct OptimizeOptions {
    /// Maximum number of specialized predicates.
    pub max_records: usize,
    /// Rewrite steps allowed per clause before giving up on it.
    pub max_steps: usize,
    /// Record every rewrite step.
    pub trace: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_records: 256,
            max_steps: 100_000,
            trace: false,
        }
    }
}

/// A specialized predicate: `name(Args, Actuals, Shared)` behaves like
/// `handle callee(Args) with ... for (Formals = Actuals)`.
#[derive(Clone, Debug)]
pub struct SpecRecord {
    pub name: Functor,
    pub callee: Functor,
    /// Canonical form of the handler with the call arguments and actuals abstracted.
    pub key: Term,
    template: HandlerSpec,
}

#[derive(Clone, Debug)]
pub struct Optimized {
    pub program: SourceProgram,
    pub trace: Vec<TraceEntry>,
    pub records: Vec<SpecRecord>,
    /// The record budget ran out; some handled calls were left in place.
    pub budget_exhausted: bool,
}

/// Rewrites every clause; with `pe`, also specializes handled calls to user
/// predicates and removes predicates that are no longer reachable.
pub fn optimize(program: &SourceProgram, pe: bool, opts: &OptimizeOptions) -> Optimized {
    let env = analyze_program(program);
    let mut opt = Optimizer {
        program,
        env: &env,
        opts,
        trace: Vec::new(),
        records: Vec::new(),
        keys: FxHashMap::default(),
        queue: VecDeque::new(),
        counters: FxHashMap::default(),
        taken: program.clauses.iter().map(|c| c.functor().name).chain(program.effects.iter().map(|f| f.name)).collect(),
        budget_exhausted: false,
    };
    let mut clauses: Vec<Clause> = Vec::new();
    let mut defined: Vec<Functor> = Vec::new();
    for c in &program.clauses {
        defined.push(c.functor());
        if let Some(c) = opt.process(c, pe) {
            clauses.push(c);
        }
    }
    if pe {
        while let Some(i) = opt.queue.pop_front() {
            for c in opt.record_clauses(i) {
                defined.push(c.functor());
                if let Some(c) = opt.process(&c, true) {
                    clauses.push(c);
                }
            }
        }
    }
    // A predicate whose clauses all failed statically still exists.
    let live: FxHashSet<Functor> = clauses.iter().map(|c| c.functor()).collect();
    let mut stubbed = FxHashSet::default();
    for f in defined {
        if !live.contains(&f) && stubbed.insert(f) {
            let head = Term::app(f.name, (0..f.arity).map(|_| Term::var()).collect());
            clauses.push(Clause::new(head, Term::atom("fail")));
        }
    }
    let mut out = SourceProgram {
        effects: program.effects.clone(),
        clauses,
        directives: program.directives.clone(),
    };
    if pe {
        let specialized: FxHashSet<Functor> = opt.records.iter().map(|r| r.callee).collect();
        out = dead_code(&out, program, &specialized);
    }
    Optimized {
        program: out,
        trace: opt.trace,
        records: opt.records,
        budget_exhausted: opt.budget_exhausted,
    }
}

struct Optimizer<'a> {
    program: &'a SourceProgram,
    env: &'a EffectEnv,
    opts: &'a OptimizeOptions,
    trace: Vec<TraceEntry>,
    records: Vec<SpecRecord>,
    keys: FxHashMap<Term, usize>,
    queue: VecDeque<usize>,
    counters: FxHashMap<String, usize>,
    taken: FxHashSet<Sym>,
    budget_exhausted: bool,
}

impl Optimizer<'_> {
    fn process(&mut self, c: &Clause, pe: bool) -> Option<Clause> {
        let rw = Rewriter { env: self.env };
        let trace = if self.opts.trace { Some(&mut self.trace) } else { None };
        let mut c = rw.rewrite_clause(c, self.opts.max_steps, trace);
        if pe {
            let body = self.abstract_goal(&c.body);
            if body != c.body {
                c = Clause::new(c.head, body);
                if self.opts.trace {
                    self.trace.push(TraceEntry {
                        rule: Rule::Fold,
                        clause: c.clone(),
                    });
                }
            }
        }
        simplify_unifications(&c)
    }

    fn fresh_name(&mut self, base: &str) -> Sym {
        let n = self.counters.entry(base.to_string()).or_insert(0);
        loop {
            let name = Sym::new(&format!("{base}{n}"));
            *n += 1;
            if self.taken.insert(name) {
                return name;
            }
        }
    }

    /// Replaces handled calls to user predicates by calls to specialized predicates.
    fn abstract_goal(&mut self, g: &Term) -> Term {
        if let Some(mut spec) = as_handler(g) {
            spec.goal = self.abstract_goal(&spec.goal);
            for c in spec.clauses.iter_mut() {
                c.body = self.abstract_goal(&c.body);
            }
            spec.finally = self.abstract_goal(&spec.finally);
            return self.fold(&spec).unwrap_or_else(|| spec.to_term());
        }
        match g.functor() {
            Some(f) if is_control(f) => Term::app(f.name, g.args().iter().map(|a| self.abstract_goal(a)).collect()),
            _ => g.clone(),
        }
    }

    fn fold(&mut self, spec: &HandlerSpec) -> Option<Term> {
        let goal = reassoc(&spec.goal);
        let callee = goal.functor()?;
        if is_control(callee) || self.program.is_effect(callee) || !self.program.defines(callee) {
            return None;
        }
        if count_own_continues(&spec.finally) > 0 {
            return None;
        }
        let key = canonical(&Term::compound(
            "$pe",
            vec![
                Term::Atom(callee.name),
                Term::Int(callee.arity as i64),
                HandlerSpec {
                    goal: Term::truth(),
                    params: spec.formals().into_iter().map(|f| (f, Term::truth())).collect(),
                    ..spec.clone()
                }
                .to_term(),
            ],
        ));
        let index = match self.keys.get(&key) {
            Some(&i) => i,
            None => {
                if self.records.len() >= self.opts.max_records {
                    self.budget_exhausted = true;
                    return None;
                }
                let name = self.fresh_name(&callee.name.name());
                let arity = callee.arity + spec.params.len() + spec.shared.len();
                self.records.push(SpecRecord {
                    name: Functor { name, arity },
                    callee,
                    key: key.clone(),
                    template: spec.clone(),
                });
                let i = self.records.len() - 1;
                self.keys.insert(key, i);
                self.queue.push_back(i);
                i
            }
        };
        let mut args = goal.args().to_vec();
        args.extend(spec.actuals());
        args.extend(spec.shared.iter().map(|v| Term::Var(*v)));
        Some(Term::app(self.records[index].name.name, args))
    }

    /// `name(H, Q, C) :- handle Body with ... for (F = Q) sharing C` for each
    /// clause `callee(H) :- Body`.
    fn record_clauses(&self, i: usize) -> Vec<Clause> {
        let rec = &self.records[i];
        let mut out = Vec::new();
        for src in self.program.clauses_of(rec.callee) {
            let src = src.renamed();
            let mut r = Renamer::new();
            let shared: Vec<Var> = rec.template.shared.iter().map(|_| Var::fresh()).collect();
            for (from, to) in rec.template.shared.iter().zip(&shared) {
                r.bind(*from, *to);
            }
            let actuals: Vec<Term> = rec.template.params.iter().map(|_| Term::var()).collect();
            let t = &rec.template;
            let spec = HandlerSpec {
                goal: src.body.clone(),
                clauses: t
                    .clauses
                    .iter()
                    .map(|c| crate::program::OpClause {
                        head: r.rename(&c.head),
                        body: r.rename(&c.body),
                    })
                    .collect(),
                finally: r.rename(&t.finally),
                params: t.params.iter().zip(&actuals).map(|((f, _), a)| (r.rename(f), a.clone())).collect(),
                shared: shared.clone(),
            };
            let mut args = src.head.args().to_vec();
            args.extend(actuals);
            args.extend(shared.into_iter().map(Term::Var));
            out.push(Clause::new(Term::app(rec.name.name, args), spec.to_term()));
        }
        out
    }
}

/// Every predicate or operation name occurring anywhere in `t`.
fn functors_in(t: &Term, out: &mut BTreeSet<Functor>) {
    if let Some(f) = t.functor() {
        out.insert(f);
    }
    if let Term::Compound(_, args) = t {
        for a in args.iter() {
            functors_in(a, out);
        }
    }
}

/// Keeps predicates reachable from the query (or from every source predicate
/// that was not specialized) and the operations they still mention.
fn dead_code(p: &SourceProgram, source: &SourceProgram, specialized: &FxHashSet<Functor>) -> SourceProgram {
    let index = p.clause_index();
    let query = Functor {
        name: Sym::new(QUERY_PRED),
        arity: 0,
    };
    let has_query = source.clauses.iter().any(|c| c.functor().name == query.name);
    let mut roots: Vec<Functor> = if has_query {
        source.predicates().into_iter().filter(|f| f.name == query.name).collect()
    } else {
        source.predicates().into_iter().filter(|f| !specialized.contains(f)).collect()
    };
    let mut live: FxHashSet<Functor> = roots.iter().copied().collect();
    let mut mentioned = BTreeSet::new();
    while let Some(f) = roots.pop() {
        for &i in index.get(&f).into_iter().flatten() {
            let mut found = BTreeSet::new();
            functors_in(&p.clauses[i].body, &mut found);
            for g in found {
                mentioned.insert(g);
                if index.contains_key(&g) && live.insert(g) {
                    roots.push(g);
                }
            }
        }
    }
    SourceProgram {
        effects: p.effects.iter().filter(|f| mentioned.contains(f)).copied().collect(),
        clauses: p.clauses.iter().filter(|c| live.contains(&c.functor())).cloned().collect(),
        directives: p.directives.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::{parse, print_program};

    const AB: &str = ":- effect c/1.\n\
        ab.\nab :- c(a), c(b), ab.\n\
        phrase_handler(L, O) :- handle ab with (c(X) -> Lin = [X|Lmid], continue(Lmid, Lout)) \
            finally (Lin = Lout) for (Lin = L, Lout = O).";

    #[test]
    fn specializes_phrase_handler() {
        let p = parse(AB).unwrap();
        let o = optimize(&p, true, &OptimizeOptions::default());
        assert_eq!(
            print_program(&o.program),
            "phrase_handler(A,B) :- ab0(A,B).\nab0(A,A).\nab0([a,b|A],B) :- ab0(A,B).\n"
        );
    }

    #[test]
    fn rewrite_only_keeps_handler() {
        let p = parse(AB).unwrap();
        let o = optimize(&p, false, &OptimizeOptions::default());
        assert_eq!(o.program.clauses.len(), 3);
        assert!(o.records.is_empty());
    }

    #[test]
    fn record_budget_is_respected() {
        let p = parse(AB).unwrap();
        let opts = OptimizeOptions {
            max_records: 0,
            ..Default::default()
        };
        let o = optimize(&p, true, &opts);
        assert!(o.budget_exhausted);
        assert!(o.records.is_empty());
    }
}
