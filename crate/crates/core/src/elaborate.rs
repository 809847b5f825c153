//! Translation of effect declarations and handlers into shift/reset.

use rustc_hash::FxHashSet;

use crate::program::{as_handler, is_control, map_own_continues_with, Clause, HandlerSpec, SourceProgram};
use crate::term::{Functor, Sym, Term, Var};

/// Result of elaborating a program.
#[derive(Clone, Debug)]
pub struct Elaborated {
    /// Rewritten source clauses, operation predicates and auxiliary handler
    /// predicates, in that order. No effect declarations remain.
    pub program: SourceProgram,
    /// Auxiliary predicate for each handler occurrence, outermost first.
    pub handlers: Vec<(Functor, HandlerSpec)>,
    pub operations: Vec<Functor>,
}

/// `op(X1,...,Xn) :- shift(op(X1,...,Xn)).`
pub fn elaborate_effect_decl(op: Functor) -> Clause {
    let head = Term::app(op.name, (0..op.arity).map(|_| Term::var()).collect());
    Clause::new(head.clone(), Term::app(Sym::SHIFT, vec![head]))
}

/// Generates `'$handler'<n>` names that do not clash with existing predicates.
pub struct NameSupply {
    next: usize,
    taken: FxHashSet<Sym>,
}

impl NameSupply {
    pub fn new(program: &SourceProgram) -> Self {
        let mut taken = FxHashSet::default();
        for c in &program.clauses {
            taken.insert(c.functor().name);
        }
        for f in &program.effects {
            taken.insert(f.name);
        }
        NameSupply { next: 0, taken }
    }

    pub fn fresh(&mut self, prefix: &str) -> Sym {
        loop {
            let name = Sym::new(&format!("{prefix}{}", self.next));
            self.next += 1;
            if self.taken.insert(name) {
                return name;
            }
        }
    }

    pub fn reserve(&mut self, name: Sym) {
        self.taken.insert(name);
    }
}

/// Builds the call and the auxiliary clause for one handler. The handled goal,
/// operation bodies and finally goal are used as given (already elaborated).
///
/// ```text
/// h(Goal, P1..Pn, Sh..) :- reset(Goal, Cont, Signal),
///     ( Signal == 0 -> Finally
///     ; Signal = op1(..) -> Body1
///     ; ...
///     ; shift(Signal), h(Cont, P1..Pn, Sh..) ).
/// ```
pub fn elaborate_handler(name: Sym, spec: &HandlerSpec, cont: &Term) -> (Term, Clause) {
    let shared: Vec<Term> = spec.shared.iter().map(|v| Term::Var(*v)).collect();
    let call_args = |g: Term, params: Vec<Term>| {
        let mut args = vec![g];
        args.extend(params);
        args.extend(shared.iter().cloned());
        Term::app(name, args)
    };
    let goal_var = Term::var();
    let signal = Term::var();
    let call = call_args(spec.goal.clone(), spec.actuals());
    let head = call_args(goal_var.clone(), spec.formals());
    let forward = Term::conj(
        Term::app(Sym::SHIFT, vec![signal.clone()]),
        call_args(cont.clone(), spec.formals()),
    );
    let mut ladder = forward;
    for c in spec.clauses.iter().rev() {
        ladder = Term::disj(
            Term::app(Sym::ARROW, vec![Term::eq(signal.clone(), c.head.clone()), c.body.clone()]),
            ladder,
        );
    }
    ladder = Term::disj(
        Term::app(
            Sym::ARROW,
            vec![Term::app(Sym::EQEQ, vec![signal.clone(), Term::Int(0)]), spec.finally.clone()],
        ),
        ladder,
    );
    let body = Term::conj(
        Term::app(Sym::RESET, vec![goal_var, cont.clone(), signal]),
        ladder,
    );
    (call, Clause::new(head, body))
}

struct Elaborator {
    names: NameSupply,
    aux: Vec<Clause>,
    handlers: Vec<(Functor, HandlerSpec)>,
}

impl Elaborator {
    fn goal(&mut self, g: &Term) -> Term {
        if let Some(spec) = as_handler(g) {
            return self.handler(spec);
        }
        match g.functor() {
            Some(f) if is_control(f) => {
                Term::app(f.name, g.args().iter().map(|a| self.goal(a)).collect())
            }
            Some(f) if f.name == Sym::CALL && f.arity == 1 => Term::app(Sym::CALL, vec![self.goal(&g.args()[0])]),
            _ => g.clone(),
        }
    }

    fn handler(&mut self, spec: HandlerSpec) -> Term {
        let name = self.names.fresh("$handler");
        let arity = 1 + spec.params.len() + spec.shared.len();
        self.handlers.push((Functor { name, arity }, spec.clone()));
        let cont = Term::var();
        let cont_var = cont.as_var().unwrap();
        let shared: Vec<Term> = spec.shared.iter().map(|v| Term::Var(*v)).collect();
        let mut lowered = spec.clone();
        lowered.goal = self.goal(&spec.goal);
        let mut clauses = Vec::with_capacity(spec.clauses.len());
        for c in &spec.clauses {
            let body = map_own_continues_with(
                &c.body,
                &mut |args| {
                    let mut a = vec![cont.clone()];
                    a.extend(args.iter().cloned());
                    a.extend(shared.iter().cloned());
                    Term::app(name, a)
                },
                &mut |nested, finally_changed| {
                    if finally_changed {
                        add_shared(nested, std::iter::once(cont_var).chain(spec.shared.iter().copied()));
                    }
                },
            );
            clauses.push(crate::program::OpClause {
                head: c.head.clone(),
                body: self.goal(&body),
            });
        }
        lowered.clauses = clauses;
        lowered.finally = self.goal(&spec.finally);
        let (call, clause) = elaborate_handler(name, &lowered, &cont);
        self.aux.push(clause);
        call
    }
}

fn add_shared(spec: &mut HandlerSpec, vars: impl Iterator<Item = Var>) {
    for v in vars {
        if !spec.shared.contains(&v) {
            spec.shared.push(v);
        }
    }
}

/// Elaborates every handler occurrence and effect declaration.
pub fn elaborate_program(p: &SourceProgram) -> Elaborated {
    let mut e = Elaborator {
        names: NameSupply::new(p),
        aux: Vec::new(),
        handlers: Vec::new(),
    };
    let mut clauses: Vec<Clause> = p
        .clauses
        .iter()
        .map(|c| Clause::new(c.head.clone(), e.goal(&c.body)))
        .collect();
    clauses.extend(p.effects.iter().map(|f| elaborate_effect_decl(*f)));
    clauses.extend(e.aux);
    Elaborated {
        program: SourceProgram {
            effects: Vec::new(),
            clauses,
            directives: p.directives.clone(),
        },
        handlers: e.handlers,
        operations: p.effects.clone(),
    }
}

/// Elaborates a goal against an existing name supply (for queries).
pub fn elaborate_goal(goal: &Term, names: &mut NameSupply) -> (Term, Vec<Clause>) {
    let mut e = Elaborator {
        names: NameSupply {
            next: names.next,
            taken: std::mem::take(&mut names.taken),
        },
        aux: Vec::new(),
        handlers: Vec::new(),
    };
    let g = e.goal(goal);
    names.next = e.names.next;
    names.taken = e.names.taken;
    (g, e.aux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::{parse, print_clause};

    #[test]
    fn effect_declaration_shifts_itself() {
        let c = elaborate_effect_decl(Functor::new("out", 1));
        assert_eq!(print_clause(&c), "out(A) :- shift(out(A)).");
    }

    #[test]
    fn collector_handler_shape() {
        let p = parse(
            ":- effect out/1.\n\
             q(List) :- handle hw with (out(X) -> Lin = [X|Lmid], continue(Lmid, Lout)) \
                finally (Lin = Lout) for (Lin = List, Lout = []).",
        )
        .unwrap();
        let e = elaborate_program(&p);
        let text: Vec<String> = e.program.clauses.iter().map(print_clause).collect();
        assert_eq!(text[0], "q(A) :- '$handler0'(hw,A,[]).");
        assert_eq!(text[1], "out(A) :- shift(out(A)).");
        assert_eq!(
            text[2],
            "'$handler0'(A,B,C) :- reset(A,D,E), (E == 0 -> B = C ; E = out(F) -> B = [F|G], '$handler0'(D,G,C) ; shift(E), '$handler0'(D,B,C))."
        );
    }

    #[test]
    fn nested_handlers_number_outer_first() {
        let p = parse(
            ":- effect a/0.\n:- effect b/0.\n\
             p :- handle (handle g with (a -> continue)) with (b -> continue).\ng.",
        )
        .unwrap();
        let e = elaborate_program(&p);
        assert_eq!(print_clause(&e.program.clauses[0]), "p :- '$handler0'('$handler1'(g)).");
        assert_eq!(e.handlers.len(), 2);
    }

    #[test]
    fn handler_free_program_unchanged() {
        let p = parse("p(X) :- q(X), (X = 1 ; true).\nq(1).").unwrap();
        let e = elaborate_program(&p);
        assert_eq!(e.program.clauses, p.clauses);
    }
}
