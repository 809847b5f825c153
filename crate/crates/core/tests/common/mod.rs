#![allow(dead_code)]

use effect_handlers::{Clause, Sym, Term, Var};
use rustc_hash::FxHashMap;

/// Variable bijection built up while matching.
#[derive(Clone, Default)]
pub struct Bijection {
    fwd: FxHashMap<Var, Var>,
    back: FxHashMap<Var, Var>,
}

impl Bijection {
    fn pair(&mut self, a: Var, b: Var) -> bool {
        match (self.fwd.get(&a), self.back.get(&b)) {
            (None, None) => {
                self.fwd.insert(a, b);
                self.back.insert(b, a);
                true
            }
            (Some(x), Some(y)) => *x == b && *y == a,
            _ => false,
        }
    }
}

pub fn alpha(a: &Term, b: &Term, m: &mut Bijection) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => m.pair(*x, *y),
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| alpha(x, y, m))
        }
        _ => a == b,
    }
}

fn is_unification(g: &Term) -> bool {
    g.match_app(Sym::EQ, 2).is_some()
}

/// Splits a goal list into maximal runs of unifications and single other goals.
fn runs(goals: &[Term]) -> Vec<Vec<Term>> {
    let mut out: Vec<Vec<Term>> = Vec::new();
    for g in goals {
        match out.last_mut() {
            Some(run) if is_unification(g) && is_unification(&run[0]) => run.push(g.clone()),
            _ => out.push(vec![g.clone()]),
        }
    }
    out
}

fn match_run(a: &[Term], b: &mut Vec<Term>, m: &mut Bijection, rest: &mut dyn FnMut(&mut Bijection) -> bool) -> bool {
    let Some((first, tail)) = a.split_first() else {
        return rest(m);
    };
    for i in 0..b.len() {
        let mut trial = m.clone();
        if alpha(first, &b[i], &mut trial) {
            let g = b.remove(i);
            if match_run(tail, b, &mut trial, rest) {
                *m = trial;
                return true;
            }
            b.insert(i, g);
        }
    }
    false
}

fn match_runs(a: &[Vec<Term>], b: &[Vec<Term>], m: &mut Bijection) -> bool {
    match (a.split_first(), b.split_first()) {
        (None, None) => true,
        (Some((ra, ta)), Some((rb, tb))) if ra.len() == rb.len() => {
            let mut pool = rb.clone();
            match_run(ra, &mut pool, m, &mut |m| match_runs(ta, tb, m))
        }
        _ => false,
    }
}

/// Clauses equal up to variable renaming and reordering within contiguous
/// runs of `=` goals (`true` goals are ignored).
pub fn clause_matches(a: &Clause, b: &Clause) -> bool {
    let goals = |c: &Clause| -> Vec<Term> {
        c.body.conjuncts().into_iter().filter(|g| !g.is_atom(Sym::TRUE)).collect()
    };
    let mut m = Bijection::default();
    if !alpha(&a.head, &b.head, &mut m) {
        return false;
    }
    match_runs(&runs(&goals(a)), &runs(&goals(b)), &mut m)
}

pub fn program_alpha_eq(a: &[Clause], b: &[Clause]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            let mut m = Bijection::default();
            alpha(&x.to_term(), &y.to_term(), &mut m)
        })
}

pub fn bench_file(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../bench/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub mod checks;
pub mod golden;
pub mod gen;

use effect_handlers::engine::{run_collect, EngineError, RunResult};
use effect_handlers::oracle::eval_oracle;
use effect_handlers::pipeline::Compiled;
use effect_handlers::term::canonical;

/// Comparable view of a run: answers up to variable renaming, output, error.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub answers: Vec<String>,
    pub output: String,
    pub error: Option<String>,
}

impl Outcome {
    pub fn hit_step_limit(r: &RunResult) -> bool {
        matches!(r.error, Some(EngineError::StepLimit(_)))
    }

    pub fn of(r: &RunResult) -> Outcome {
        Outcome {
            answers: r
                .answers
                .iter()
                .map(|a| effect_handlers::print_term(&canonical(&a.as_term())))
                .collect(),
            output: r.output.clone(),
            error: r.error.as_ref().map(|e| e.to_string()),
        }
    }
}

pub const MAX_ANSWERS: usize = 10;
pub const MAX_STEPS: u64 = 100_000;

pub fn engine_run(c: &Compiled) -> RunResult {
    run_collect(&c.db, &c.goal, MAX_ANSWERS, Some(MAX_STEPS))
}

pub fn oracle_run(c: &Compiled) -> RunResult {
    eval_oracle(&c.db, &c.goal, MAX_ANSWERS, Some(MAX_STEPS))
}
