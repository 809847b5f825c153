//! Logic terms, substitutions with an undo trail, renaming and variant checks.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock, RwLock};

use rustc_hash::FxHashMap;

/// Interned symbol (atom text or functor name).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(u32);

macro_rules! well_known {
    ($($konst:ident = $idx:literal => $text:literal,)*) => {
        impl Sym {
            $(pub const $konst: Sym = Sym($idx);)*
        }
        const WELL_KNOWN: &[&str] = &[$($text,)*];
    };
}

well_known! {
    COMMA = 0 => ",",
    SEMI = 1 => ";",
    ARROW = 2 => "->",
    NECK = 3 => ":-",
    EQ = 4 => "=",
    EQEQ = 5 => "==",
    TRUE = 6 => "true",
    FAIL = 7 => "fail",
    NIL = 8 => "[]",
    DOT = 9 => ".",
    SHIFT = 10 => "shift",
    RESET = 11 => "reset",
    CONTINUE = 12 => "continue",
    HANDLE = 13 => "$handle",
    IS = 14 => "is",
    LT = 15 => "<",
    WRITELN = 16 => "writeln",
    PLUS = 17 => "+",
    MINUS = 18 => "-",
    STAR = 19 => "*",
    INTDIV = 20 => "//",
    CALL = 21 => "call",
    SLASH = 22 => "/",
    EFFECT = 23 => "effect",
    NEQ = 24 => "\\==",
    NUNIFY = 25 => "\\=",
    GT = 26 => ">",
    LE = 27 => "=<",
    GE = 28 => ">=",
    QUERY = 29 => "?-",
    MOD = 30 => "mod",
    FALSE = 31 => "false",
    ARITH_EQ = 32 => "=:=",
    ARITH_NE = 33 => "=\\=",
}

struct Interner {
    names: Vec<Arc<str>>,
    index: FxHashMap<Arc<str>, u32>,
}

fn interner() -> &'static RwLock<Interner> {
    static INTERNER: OnceLock<RwLock<Interner>> = OnceLock::new();
    INTERNER.get_or_init(|| {
        let mut interner = Interner {
            names: Vec::new(),
            index: FxHashMap::default(),
        };
        for name in WELL_KNOWN {
            let text: Arc<str> = Arc::from(*name);
            interner.index.insert(text.clone(), interner.names.len() as u32);
            interner.names.push(text);
        }
        RwLock::new(interner)
    })
}

impl Sym {
    pub fn new(name: &str) -> Sym {
        if let Some(&idx) = interner().read().unwrap().index.get(name) {
            return Sym(idx);
        }
        let mut guard = interner().write().unwrap();
        if let Some(&idx) = guard.index.get(name) {
            return Sym(idx);
        }
        let idx = guard.names.len() as u32;
        let text: Arc<str> = Arc::from(name);
        guard.index.insert(text.clone(), idx);
        guard.names.push(text);
        Sym(idx)
    }

    pub fn name(self) -> Arc<str> {
        interner().read().unwrap().names[self.0 as usize].clone()
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Logic variable. Identity is the numeric id; names only exist at print time.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Var(pub u64);

// Ids below this bound are reserved for clause templates and canonical forms.
const FIRST_FRESH: u64 = 1 << 40;
static NEXT_VAR: AtomicU64 = AtomicU64::new(FIRST_FRESH);

impl Var {
    pub fn fresh() -> Var {
        Var(NEXT_VAR.fetch_add(1, Ordering::Relaxed))
    }

    /// Reserves `n` consecutive fresh ids and returns the first one.
    pub fn fresh_block(n: usize) -> u64 {
        NEXT_VAR.fetch_add(n as u64, Ordering::Relaxed)
    }
}

/// Name and arity of a predicate, operation or compound term.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Functor {
    pub name: Sym,
    pub arity: usize,
}

impl Functor {
    pub fn new(name: &str, arity: usize) -> Functor {
        Functor {
            name: Sym::new(name),
            arity,
        }
    }
}

impl fmt::Debug for Functor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

impl fmt::Display for Functor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", crate::reader::quote_atom(&self.name.name()), self.arity)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Atom(Sym),
    Int(i64),
    /// Always has at least one argument; zero-arity terms are atoms.
    Compound(Sym, Arc<[Term]>),
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::reader::print_term(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::reader::print_term(self))
    }
}

impl Term {
    pub fn var() -> Term {
        Term::Var(Var::fresh())
    }

    pub fn atom(name: &str) -> Term {
        Term::Atom(Sym::new(name))
    }

    pub fn compound(name: &str, args: Vec<Term>) -> Term {
        Term::app(Sym::new(name), args)
    }

    /// Builds `name(args)`, collapsing to an atom when `args` is empty.
    pub fn app(name: Sym, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::Atom(name)
        } else {
            Term::Compound(name, args.into())
        }
    }

    pub fn nil() -> Term {
        Term::Atom(Sym::NIL)
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::Compound(Sym::DOT, Arc::from(vec![head, tail]))
    }

    pub fn list(items: impl IntoIterator<Item = Term>, tail: Term) -> Term {
        let items: Vec<Term> = items.into_iter().collect();
        items
            .into_iter()
            .rev()
            .fold(tail, |acc, item| Term::cons(item, acc))
    }

    pub fn truth() -> Term {
        Term::Atom(Sym::TRUE)
    }

    pub fn conj(a: Term, b: Term) -> Term {
        Term::Compound(Sym::COMMA, Arc::from(vec![a, b]))
    }

    pub fn disj(a: Term, b: Term) -> Term {
        Term::Compound(Sym::SEMI, Arc::from(vec![a, b]))
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::Compound(Sym::EQ, Arc::from(vec![a, b]))
    }

    /// Right-nested conjunction of `goals`; `true` when empty.
    pub fn conj_all(goals: impl IntoIterator<Item = Term>) -> Term {
        let goals: Vec<Term> = goals.into_iter().collect();
        let mut iter = goals.into_iter().rev();
        match iter.next() {
            None => Term::truth(),
            Some(last) => iter.fold(last, |acc, g| Term::conj(g, acc)),
        }
    }

    pub fn functor(&self) -> Option<Functor> {
        match self {
            Term::Atom(name) => Some(Functor {
                name: *name,
                arity: 0,
            }),
            Term::Compound(name, args) => Some(Functor {
                name: *name,
                arity: args.len(),
            }),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<Var> {
        match self {
            Term::Var(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_atom(&self, sym: Sym) -> bool {
        matches!(self, Term::Atom(s) if *s == sym)
    }

    /// Arguments of a compound with the given name and arity.
    pub fn match_app(&self, name: Sym, arity: usize) -> Option<&[Term]> {
        match self {
            Term::Compound(n, args) if *n == name && args.len() == arity => Some(args),
            Term::Atom(n) if *n == name && arity == 0 => Some(&[]),
            _ => None,
        }
    }

    /// Splits a right- or left-nested conjunction into its conjuncts.
    pub fn conjuncts(&self) -> Vec<Term> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            match t.match_app(Sym::COMMA, 2) {
                Some(args) => {
                    stack.push(&args[1]);
                    stack.push(&args[0]);
                }
                None => out.push(t.clone()),
            }
        }
        out
    }

    /// Items of a proper list, or `None` if the term is not one.
    pub fn list_items(&self) -> Option<Vec<Term>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Term::Atom(s) if *s == Sym::NIL => return Some(out),
                Term::Compound(s, args) if *s == Sym::DOT && args.len() == 2 => {
                    out.push(args[0].clone());
                    cur = &args[1];
                }
                _ => return None,
            }
        }
    }

    /// Rebuilds the term bottom-up, giving `f` the chance to replace each subterm
    /// before its children are visited.
    pub fn map_pre(&self, f: &mut impl FnMut(&Term) -> Option<Term>) -> Term {
        if let Some(t) = f(self) {
            return t;
        }
        match self {
            Term::Compound(name, args) => {
                let new: Vec<Term> = args.iter().map(|a| a.map_pre(f)).collect();
                Term::Compound(*name, new.into())
            }
            other => other.clone(),
        }
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            n += 1;
            stack.extend(t.args());
        }
        n
    }

    /// Variables in first-occurrence (left-to-right, depth-first) order.
    pub fn vars(&self) -> Vec<Var> {
        let mut seen = rustc_hash::FxHashSet::default();
        let mut out = Vec::new();
        collect_vars(self, &mut seen, &mut out);
        out
    }

    pub fn contains_var(&self, v: Var) -> bool {
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            match t {
                Term::Var(w) if *w == v => return true,
                Term::Compound(_, args) => stack.extend(args.iter()),
                _ => {}
            }
        }
        false
    }

    /// Applies a variable-to-term mapping (non-recursively on the images).
    pub fn substitute(&self, map: &FxHashMap<Var, Term>) -> Term {
        if map.is_empty() {
            return self.clone();
        }
        self.map_pre(&mut |t| match t {
            Term::Var(v) => Some(map.get(v).cloned().unwrap_or_else(|| t.clone())),
            Term::Atom(_) | Term::Int(_) => Some(t.clone()),
            Term::Compound(..) => None,
        })
    }
}

pub(crate) fn collect_vars(t: &Term, seen: &mut rustc_hash::FxHashSet<Var>, out: &mut Vec<Var>) {
    let mut stack = vec![t];
    while let Some(t) = stack.pop() {
        match t {
            Term::Var(v) => {
                if seen.insert(*v) {
                    out.push(*v);
                }
            }
            Term::Compound(_, args) => stack.extend(args.iter().rev()),
            _ => {}
        }
    }
}

/// Consistent variable renaming; each distinct input variable maps to one new variable.
#[derive(Default)]
pub struct Renamer {
    map: FxHashMap<Var, Var>,
}

impl Renamer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pre-seeds a mapping so that `from` is renamed to `to`.
    pub fn bind(&mut self, from: Var, to: Var) {
        self.map.insert(from, to);
    }

    pub fn rename(&mut self, t: &Term) -> Term {
        match t {
            Term::Var(v) => Term::Var(*self.map.entry(*v).or_insert_with(Var::fresh)),
            Term::Compound(name, args) => {
                let new: Vec<Term> = args.iter().map(|a| self.rename(a)).collect();
                Term::Compound(*name, new.into())
            }
            other => other.clone(),
        }
    }

    pub fn rename_all(&mut self, ts: &[Term]) -> Vec<Term> {
        ts.iter().map(|t| self.rename(t)).collect()
    }
}

/// Copies `t` with every variable replaced by a brand-new one.
pub fn freshen_term(t: &Term) -> Term {
    Renamer::new().rename(t)
}

/// Renames all variables of the formal parameters, operation arguments and
/// goal consistently, preserving sharing among the three inputs.
pub fn freshen(params: &[Term], args: &[Term], goal: &Term) -> (Vec<Term>, Vec<Term>, Term) {
    let mut r = Renamer::new();
    let p = r.rename_all(params);
    let a = r.rename_all(args);
    let g = r.rename(goal);
    (p, a, g)
}

/// True iff the two terms are equal up to a bijective renaming of variables.
pub fn is_variant(a: &Term, b: &Term) -> bool {
    let mut fwd: FxHashMap<Var, Var> = FxHashMap::default();
    let mut bwd: FxHashMap<Var, Var> = FxHashMap::default();
    let mut stack = vec![(a, b)];
    while let Some((x, y)) = stack.pop() {
        match (x, y) {
            (Term::Var(v), Term::Var(w)) => {
                let f = *fwd.entry(*v).or_insert(*w);
                let g = *bwd.entry(*w).or_insert(*v);
                if f != *w || g != *v {
                    return false;
                }
            }
            (Term::Atom(p), Term::Atom(q)) if p == q => {}
            (Term::Int(p), Term::Int(q)) if p == q => {}
            (Term::Compound(f, xs), Term::Compound(g, ys)) if f == g && xs.len() == ys.len() => {
                stack.extend(xs.iter().zip(ys.iter()).rev());
            }
            _ => return false,
        }
    }
    true
}

/// Canonical representative of the variant class: variables renumbered from zero
/// in first-occurrence order. The numbering uses reserved ids, so results must
/// not be mixed with live terms.
pub fn canonical(t: &Term) -> Term {
    let mut map: FxHashMap<Var, Var> = FxHashMap::default();
    t.map_pre(&mut |s| match s {
        Term::Var(v) => {
            let n = map.len() as u64;
            Some(Term::Var(*map.entry(*v).or_insert(Var(n))))
        }
        Term::Atom(_) | Term::Int(_) => Some(s.clone()),
        Term::Compound(..) => None,
    })
}

/// Copy of `t` with every variable id increased by `base`. Ground
/// subterms are shared, not copied.
pub fn rename_offset(t: &Term, base: u64) -> Term {
    rename_changed(t, base).unwrap_or_else(|| t.clone())
}

fn rename_changed(t: &Term, base: u64) -> Option<Term> {
    match t {
        Term::Var(v) => Some(Term::Var(Var(v.0 + base))),
        Term::Compound(f, args) => {
            let (i, first) = args.iter().enumerate().find_map(|(i, a)| rename_changed(a, base).map(|r| (i, r)))?;
            let mut first = Some(first);
            let new: Arc<[Term]> = args
                .iter()
                .enumerate()
                .map(|(j, a)| match j.cmp(&i) {
                    std::cmp::Ordering::Less => a.clone(),
                    std::cmp::Ordering::Equal => first.take().unwrap(),
                    std::cmp::Ordering::Greater => rename_offset(a, base),
                })
                .collect();
            Some(Term::Compound(*f, new))
        }
        _ => None,
    }
}

/// Variable bindings plus an undo log.
///
/// Variables created after the substitution are stored in a vector indexed
/// from `base`; older ones (query and template variables) go to a map.
#[derive(Clone)]
pub struct Substitution {
    base: u64,
    dense: Vec<Option<Term>>,
    sparse: FxHashMap<Var, Term>,
    count: usize,
    trail: Vec<Var>,
    scratch: Vec<(Term, Term)>,
    occurs_check: bool,
}

// Beyond this many slots the dense store falls back to the map.
const DENSE_LIMIT: u64 = 1 << 27;

impl Default for Substitution {
    fn default() -> Self {
        Substitution {
            base: NEXT_VAR.load(Ordering::Relaxed),
            dense: Vec::new(),
            sparse: FxHashMap::default(),
            count: 0,
            trail: Vec::new(),
            scratch: Vec::new(),
            occurs_check: false,
        }
    }
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_occurs_check(occurs_check: bool) -> Self {
        Substitution {
            occurs_check,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn slot(&self, v: Var) -> Option<usize> {
        let i = v.0.checked_sub(self.base)?;
        (i < DENSE_LIMIT).then_some(i as usize)
    }

    #[inline]
    pub fn get(&self, v: Var) -> Option<&Term> {
        match self.slot(v) {
            Some(i) => self.dense.get(i).and_then(|t| t.as_ref()),
            None => self.sparse.get(&v),
        }
    }

    /// Every current binding, in no particular order.
    pub fn bindings(&self) -> impl Iterator<Item = (Var, &Term)> + '_ {
        self.trail.iter().filter_map(move |v| self.get(*v).map(|t| (*v, t)))
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            match self.slot(v) {
                Some(i) => self.dense[i] = None,
                None => {
                    self.sparse.remove(&v);
                }
            }
            self.count -= 1;
        }
    }

    pub fn bind(&mut self, v: Var, t: Term) {
        match self.slot(v) {
            Some(i) => {
                if i >= self.dense.len() {
                    self.dense.resize(i + 1 + i / 2, None);
                }
                self.dense[i] = Some(t);
            }
            None => {
                self.sparse.insert(v, t);
            }
        }
        self.count += 1;
        self.trail.push(v);
    }

    /// Follows variable bindings until reaching a non-variable or an unbound variable.
    #[inline]
    pub fn walk<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        while let Term::Var(v) = t {
            match self.get(*v) {
                Some(next) => t = next,
                None => break,
            }
        }
        t
    }

    /// Fully applies the substitution.
    pub fn resolve(&self, t: &Term) -> Term {
        let t = self.walk(t);
        match t {
            Term::Compound(name, args) => {
                let new: Vec<Term> = args.iter().map(|a| self.resolve(a)).collect();
                Term::Compound(*name, new.into())
            }
            other => other.clone(),
        }
    }

    fn occurs(&self, v: Var, t: &Term) -> bool {
        let mut stack = vec![t.clone()];
        while let Some(t) = stack.pop() {
            match self.walk(&t) {
                Term::Var(w) => {
                    if *w == v {
                        return true;
                    }
                }
                Term::Compound(_, args) => stack.extend(args.iter().cloned()),
                _ => {}
            }
        }
        false
    }

    /// Unifies two terms. On failure every binding made by this call is undone.
    pub fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let mark = self.mark();
        let mut stack = std::mem::take(&mut self.scratch);
        stack.clear();
        let mut ok = self.unify_pair(a, b, &mut stack);
        while ok {
            let Some((x, y)) = stack.pop() else { break };
            ok = self.unify_pair(&x, &y, &mut stack);
        }
        stack.clear();
        self.scratch = stack;
        if !ok {
            self.undo_to(mark);
        }
        ok
    }

    /// Binds `v` to `t` unless the occurs check forbids it.
    fn bind_checked(&mut self, v: Var, t: &Term) -> bool {
        if self.occurs_check && self.occurs(v, t) {
            return false;
        }
        self.bind(v, t.clone());
        true
    }

    /// One unification step; argument pairs of compounds go on `stack`.
    fn unify_pair(&mut self, a: &Term, b: &Term, stack: &mut Vec<(Term, Term)>) -> bool {
        let x = self.walk(a);
        let y = self.walk(b);
        match (x, y) {
            (Term::Var(v), Term::Var(w)) if v == w => true,
            (Term::Var(v), _) => {
                let (v, y) = (*v, y.clone());
                self.bind_checked(v, &y)
            }
            (_, Term::Var(w)) => {
                let (w, x) = (*w, x.clone());
                self.bind_checked(w, &x)
            }
            (Term::Atom(p), Term::Atom(q)) => p == q,
            (Term::Int(p), Term::Int(q)) => p == q,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return false;
                }
                if Arc::ptr_eq(xs, ys) {
                    return true;
                }
                for pair in xs.iter().cloned().zip(ys.iter().cloned()).rev() {
                    stack.push(pair);
                }
                true
            }
            _ => false,
        }
    }

    /// Unifies `tpl` with variables offset by `base` against `t`, building
    /// renamed copies only where a variable of `t` gets bound.
    pub fn unify_template(&mut self, tpl: &Term, base: u64, t: &Term) -> bool {
        let mark = self.mark();
        let ok = self.unify_template_rec(tpl, base, t);
        if !ok {
            self.undo_to(mark);
        }
        ok
    }

    fn unify_template_rec(&mut self, tpl: &Term, base: u64, t: &Term) -> bool {
        match tpl {
            Term::Var(v) => {
                let v = Var(v.0 + base);
                if self.get(v).is_some() {
                    return self.unify(&Term::Var(v), t);
                }
                let t = self.walk(t).clone();
                if t != Term::Var(v) {
                    self.bind(v, t);
                }
                true
            }
            Term::Atom(_) | Term::Int(_) => match self.walk(t) {
                Term::Var(w) => {
                    let w = *w;
                    self.bind(w, tpl.clone());
                    true
                }
                other => other == tpl,
            },
            Term::Compound(f, targs) => match self.walk(t) {
                Term::Var(w) => {
                    let w = *w;
                    let copy = rename_offset(tpl, base);
                    self.bind_checked(w, &copy)
                }
                Term::Compound(g, args) if f == g && args.len() == targs.len() => {
                    let args = args.clone();
                    targs.iter().zip(args.iter()).all(|(x, y)| self.unify_template_rec(x, base, y))
                }
                _ => false,
            },
        }
    }

    /// Structural identity under the current bindings (`==/2`).
    pub fn identical(&self, a: &Term, b: &Term) -> bool {
        let mut stack = vec![(a.clone(), b.clone())];
        while let Some((x, y)) = stack.pop() {
            let x = self.walk(&x);
            let y = self.walk(&y);
            match (x, y) {
                (Term::Var(v), Term::Var(w)) if v == w => {}
                (Term::Atom(p), Term::Atom(q)) if p == q => {}
                (Term::Int(p), Term::Int(q)) if p == q => {}
                (Term::Compound(f, xs), Term::Compound(g, ys))
                    if f == g && xs.len() == ys.len() =>
                {
                    stack.extend(xs.iter().cloned().zip(ys.iter().cloned()));
                }
                _ => return false,
            }
        }
        true
    }
}

/// One-shot unification returning the resulting substitution.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut s = s.clone();
    if s.unify(a, b) {
        Some(s)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unify_binds_single_variable() {
        let x = Term::var();
        let s = unify(&x, &Term::atom("hello"), &Substitution::new()).unwrap();
        assert_eq!(s.resolve(&x), Term::atom("hello"));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn unify_decomposes_structures() {
        let (x, y) = (Term::var(), Term::var());
        let l = Term::compound("f", vec![x.clone(), Term::atom("b")]);
        let r = Term::compound("f", vec![Term::atom("a"), y.clone()]);
        let s = unify(&l, &r, &Substitution::new()).unwrap();
        assert_eq!(s.resolve(&x), Term::atom("a"));
        assert_eq!(s.resolve(&y), Term::atom("b"));
    }

    #[test]
    fn functor_clash_fails_and_leaves_substitution_untouched() {
        let mut s = Substitution::new();
        let f = Term::compound("f", vec![Term::atom("a")]);
        let g = Term::compound("g", vec![Term::atom("a")]);
        assert!(!s.unify(&f, &g));
        assert!(s.is_empty());
        // partial progress is rolled back too
        let x = Term::var();
        let l = Term::compound("h", vec![x.clone(), Term::atom("a")]);
        let r = Term::compound("h", vec![Term::atom("b"), Term::atom("c")]);
        assert!(!s.unify(&l, &r));
        assert!(s.is_empty());
    }

    #[test]
    fn occurs_check_is_optional() {
        let x = Term::var();
        let fx = Term::compound("f", vec![x.clone()]);
        assert!(Substitution::new().unify(&x, &fx));
        assert!(!Substitution::with_occurs_check(true).unify(&x, &fx));
    }

    #[test]
    fn freshen_without_variables_is_identity() {
        let (p, a, g) = freshen(&[], &[], &Term::truth());
        assert!(p.is_empty() && a.is_empty());
        assert_eq!(g, Term::truth());
    }

    #[test]
    fn freshen_preserves_sharing() {
        let a = Term::var();
        let goal = Term::compound("p", vec![a.clone()]);
        let (p, args, g) = freshen(&[a.clone()], &[a.clone()], &goal);
        assert_eq!(p[0], args[0]);
        assert_ne!(p[0], a);
        assert_eq!(g, Term::compound("p", vec![p[0].clone()]));
    }

    #[test]
    fn variant_examples() {
        let (x, y, a, b) = (Term::var(), Term::var(), Term::var(), Term::var());
        let pxy = Term::compound("p", vec![x.clone(), y.clone()]);
        let pab = Term::compound("p", vec![a.clone(), b.clone()]);
        let pxx = Term::compound("p", vec![x.clone(), x.clone()]);
        assert!(is_variant(&pxy, &pab));
        assert!(!is_variant(&pxx, &pab));
        assert!(!is_variant(&pab, &pxx));
    }

    #[test]
    fn conjuncts_flatten_both_nestings() {
        let (a, b, c) = (Term::atom("a"), Term::atom("b"), Term::atom("c"));
        let left = Term::conj(Term::conj(a.clone(), b.clone()), c.clone());
        let right = Term::conj_all(vec![a.clone(), b.clone(), c.clone()]);
        assert_eq!(left.conjuncts(), vec![a.clone(), b.clone(), c.clone()]);
        assert_eq!(right.conjuncts(), vec![a, b, c]);
    }
}
