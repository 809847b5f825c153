//! Effect sets and effect inference.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::program::{as_handler, is_builtin, is_continue, is_control, visit_goals, SourceProgram};
use crate::term::{Functor, Sym, Term};

/// Either a finite set of operations or all operations except a finite set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EffectSet {
    Fin(BTreeSet<Functor>),
    CoFin(BTreeSet<Functor>),
}

impl Default for EffectSet {
    fn default() -> Self {
        EffectSet::empty()
    }
}

impl EffectSet {
    pub fn empty() -> Self {
        EffectSet::Fin(BTreeSet::new())
    }

    pub fn all() -> Self {
        EffectSet::CoFin(BTreeSet::new())
    }

    pub fn single(op: Functor) -> Self {
        EffectSet::Fin([op].into_iter().collect())
    }

    pub fn fin(ops: impl IntoIterator<Item = Functor>) -> Self {
        EffectSet::Fin(ops.into_iter().collect())
    }

    pub fn all_but(ops: impl IntoIterator<Item = Functor>) -> Self {
        EffectSet::CoFin(ops.into_iter().collect())
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, EffectSet::Fin(s) if s.is_empty())
    }

    pub fn union(&self, other: &EffectSet) -> EffectSet {
        use EffectSet::*;
        match (self, other) {
            (Fin(a), Fin(b)) => Fin(a.union(b).copied().collect()),
            (Fin(a), CoFin(b)) | (CoFin(b), Fin(a)) => CoFin(b.difference(a).copied().collect()),
            (CoFin(a), CoFin(b)) => CoFin(a.intersection(b).copied().collect()),
        }
    }

    pub fn minus<'a>(&self, ops: impl IntoIterator<Item = &'a Functor>) -> EffectSet {
        let ops: BTreeSet<Functor> = ops.into_iter().copied().collect();
        match self {
            EffectSet::Fin(a) => EffectSet::Fin(a.difference(&ops).copied().collect()),
            EffectSet::CoFin(a) => EffectSet::CoFin(a.union(&ops).copied().collect()),
        }
    }

    pub fn contains(&self, op: Functor) -> bool {
        match self {
            EffectSet::Fin(a) => a.contains(&op),
            EffectSet::CoFin(a) => !a.contains(&op),
        }
    }

    pub fn intersects<'a>(&self, ops: impl IntoIterator<Item = &'a Functor>) -> bool {
        ops.into_iter().any(|op| self.contains(*op))
    }

    /// Lattice order.
    pub fn is_subset(&self, other: &EffectSet) -> bool {
        use EffectSet::*;
        match (self, other) {
            (Fin(a), Fin(b)) => a.is_subset(b),
            (Fin(a), CoFin(b)) => a.is_disjoint(b),
            (CoFin(_), Fin(_)) => false,
            (CoFin(a), CoFin(b)) => b.is_subset(a),
        }
    }
}

fn fmt_ops(f: &mut fmt::Formatter<'_>, ops: &BTreeSet<Functor>) -> fmt::Result {
    let mut names: Vec<String> = ops.iter().map(|o| o.to_string()).collect();
    names.sort();
    write!(f, "{{{}}}", names.join(", "))
}

impl fmt::Display for EffectSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectSet::Fin(ops) => fmt_ops(f, ops),
            EffectSet::CoFin(ops) => {
                f.write_str("All - ")?;
                fmt_ops(f, ops)
            }
        }
    }
}

/// Effects of every predicate in a program.
#[derive(Clone, Debug, Default)]
pub struct EffectEnv {
    pub preds: BTreeMap<Functor, EffectSet>,
    pub ops: BTreeSet<Functor>,
    /// Largest number of times any single predicate's effect grew.
    pub max_updates: usize,
    /// Lattice height over the operations mentioned in the program.
    pub bound: usize,
}

impl EffectEnv {
    /// Analysis context over this environment.
    pub fn infer(&self, goal: &Term, cont: &EffectSet) -> EffectSet {
        infer(&self.ops, &|f| self.preds.get(&f).cloned(), goal, cont)
    }

    pub fn of(&self, f: Functor) -> EffectSet {
        self.preds.get(&f).cloned().unwrap_or_else(EffectSet::all)
    }

    /// One line per predicate, sorted by name then arity.
    pub fn render(&self) -> String {
        let mut rows: Vec<(String, usize, String)> = self
            .preds
            .iter()
            .map(|(f, e)| (f.name.name().to_string(), f.arity, format!("{f} : {e}")))
            .collect();
        rows.sort();
        rows.into_iter().map(|(_, _, line)| line + "\n").collect()
    }
}

/// Infers the effect of `goal` given the effect of `continue` (`cont`).
///
/// `pred` returns the current assignment for user predicates; `None` means
/// the predicate is unknown.
pub fn infer(
    ops: &BTreeSet<Functor>,
    pred: &dyn Fn(Functor) -> Option<EffectSet>,
    goal: &Term,
    cont: &EffectSet,
) -> EffectSet {
    if goal.is_var() {
        return EffectSet::all();
    }
    if is_continue(goal) {
        return cont.clone();
    }
    if let Some(spec) = as_handler(goal) {
        let e0 = infer(ops, pred, &spec.goal, cont);
        let ef = infer(ops, pred, &spec.finally, cont);
        let handled = spec.ops();
        let base = e0.minus(handled.iter()).union(&ef);
        let mut star = EffectSet::empty();
        loop {
            let mut next = base.clone();
            for c in &spec.clauses {
                next = next.union(&infer(ops, pred, &c.body, &star));
            }
            if next == star {
                return star;
            }
            star = next;
        }
    }
    let Some(f) = goal.functor() else {
        return EffectSet::all();
    };
    if is_control(f) {
        return goal
            .args()
            .iter()
            .fold(EffectSet::empty(), |acc, g| acc.union(&infer(ops, pred, g, cont)));
    }
    if f.name == Sym::CALL && f.arity == 1 {
        return infer(ops, pred, &goal.args()[0], cont);
    }
    if f.name == Sym::SHIFT && f.arity == 1 {
        return EffectSet::all();
    }
    if f.name == Sym::RESET && f.arity == 3 {
        return EffectSet::empty();
    }
    if ops.contains(&f) {
        return EffectSet::single(f);
    }
    if is_builtin(f) {
        return EffectSet::empty();
    }
    pred(f).unwrap_or_else(EffectSet::all)
}

/// Operations the program declares or handles.
pub fn mentioned_ops(p: &SourceProgram) -> BTreeSet<Functor> {
    let mut ops: BTreeSet<Functor> = p.effects.iter().copied().collect();
    for c in &p.clauses {
        visit_goals(&c.body, &mut |g| {
            if let Some(spec) = as_handler(g) {
                ops.extend(spec.ops());
            }
        });
    }
    ops
}

/// Least fixpoint of the predicate equations, by worklist.
pub fn analyze_program(p: &SourceProgram) -> EffectEnv {
    let ops: BTreeSet<Functor> = p.effects.iter().copied().collect();
    let bound = 2 * mentioned_ops(p).len() + 2;
    let index = p.clause_index();
    let mut callers: FxHashMap<Functor, FxHashSet<Functor>> = FxHashMap::default();
    for c in &p.clauses {
        let caller = c.functor();
        visit_goals(&c.body, &mut |g| {
            if let Some(f) = g.functor() {
                if index.contains_key(&f) {
                    callers.entry(f).or_default().insert(caller);
                }
            }
        });
    }
    let mut env: FxHashMap<Functor, EffectSet> = index.keys().map(|f| (*f, EffectSet::empty())).collect();
    let mut updates: FxHashMap<Functor, usize> = FxHashMap::default();
    let mut order: Vec<Functor> = p.predicates();
    order.reverse();
    let mut queued: FxHashSet<Functor> = order.iter().copied().collect();
    let mut work = order;
    while let Some(f) = work.pop() {
        queued.remove(&f);
        let lookup = |g: Functor| env.get(&g).cloned();
        let e = index[&f].iter().fold(EffectSet::empty(), |acc, &i| {
            acc.union(&infer(&ops, &lookup, &p.clauses[i].body, &EffectSet::empty()))
        });
        if e != env[&f] {
            debug_assert!(env[&f].is_subset(&e), "effect analysis must be monotone");
            env.insert(f, e);
            *updates.entry(f).or_default() += 1;
            for caller in callers.get(&f).into_iter().flatten() {
                if queued.insert(*caller) {
                    work.push(*caller);
                }
            }
        }
    }
    let max_updates = updates.values().copied().max().unwrap_or(0);
    assert!(max_updates <= bound, "effect fixpoint exceeded the lattice height");
    EffectEnv {
        preds: env.into_iter().collect(),
        ops,
        max_updates,
        bound,
    }
}
