//! Exact-output checks for the paper's worked examples.

use super::{bench_file, clause_matches, program_alpha_eq};
use effect_handlers::elaborate::elaborate_program;
use effect_handlers::optimize::{optimize, OptimizeOptions, Optimized};
use effect_handlers::pipeline::{compile_text, OptLevel};
use effect_handlers::reader::{parse_with, ParseOptions};
use effect_handlers::rewrite::Rule;
use effect_handlers::{parse, print_program, Clause, Functor, Sym};

pub const HW: &str = include_str!("../../../../bench/hw.pl");

/// Queries against `hw.pl` and their exact toplevel transcripts.
pub const TRANSCRIPTS: &[(&str, &str)] = &[
    ("handle hw with (out(X) -> true)", "true.\n"),
    ("handle hw with (out(X) -> writeln(X))", "hello\ntrue.\n"),
    ("handle hw with (out(X) -> writeln(X), continue)", "hello\nworld\ntrue.\n"),
    ("handle hw with (out(X) -> continue, writeln(X), continue)", "world\nhello\nworld\ntrue.\n"),
    (
        "handle hw with (out(X) -> writeln(X), continue) finally (writeln(done))",
        "hello\nworld\ndone\ntrue.\n",
    ),
    ("handle hw with (out(X) -> writeln(X)) finally (writeln(done))", "hello\ntrue.\n"),
    (
        "handle hw with (out(X) -> Lin = [X|Lmid], continue(Lmid,Lout)) finally (Lin=Lout) for (Lin = List, Lout=[])",
        "List = [hello,world].\n",
    ),
    ("chooseAny(or(X = 1, X = 2))", "X = 1;\nX = 2.\n"),
    ("chooseAny(flip(or(X = 1, X = 2)))", "X = 2;\nX = 1.\n"),
    ("chooseAny(writeOut(or(out(hello), out(world)))), fail", "hello\nworld\nfalse.\n"),
];

pub fn transcript(program: &str, query: &str, level: OptLevel) -> Result<String, String> {
    let c = compile_text(program, query, level).map_err(|e| e.to_string())?;
    c.transcript(10, Some(1_000_000)).map_err(|e| e.to_string())
}

pub fn transcripts() -> Result<String, String> {
    for level in OptLevel::ALL {
        for (query, expected) in TRANSCRIPTS {
            let got = transcript(HW, query, level)?;
            if got != *expected {
                return Err(format!("{query} at {level}: got {got:?}, expected {expected:?}"));
            }
        }
    }
    Ok(format!("{} queries x {} levels", TRANSCRIPTS.len(), OptLevel::ALL.len()))
}

pub const AB_QUERY: &str = ":- effect c/1.\n\
    ab.\n\
    ab :- c(a), c(b), ab.\n\
    query(Lin) :- handle ab with (c(X) -> Lin1=[X|Lmid], continue(Lmid,Lout1)) \
        finally (Lin1 = Lout1) for (Lin1=Lin,Lout1=[]).";

pub fn internal(src: &str) -> Vec<Clause> {
    parse_with(src, ParseOptions { internal: true }).unwrap().clauses
}

pub fn traced(src: &str, pe: bool) -> Optimized {
    let opts = OptimizeOptions {
        trace: true,
        ..Default::default()
    };
    optimize(&parse(src).unwrap(), pe, &opts)
}

pub fn ab_final_program() -> Result<String, String> {
    let o = traced(AB_QUERY, true);
    let expected = internal("query(Lin) :- ab0(Lin,[]).\nab0(L,L).\nab0([a,b|M],O) :- ab0(M,O).");
    if !program_alpha_eq(&o.program.clauses, &expected) {
        return Err(format!("got\n{}", print_program(&o.program)));
    }
    Ok("ab0(L,L). ab0([a,b|M],O) :- ab0(M,O).".into())
}

/// The rewrite trace visits states matching the worked example's steps in order.
pub fn ab_trace_steps() -> Result<String, String> {
    let o = traced(AB_QUERY, true);
    let steps = internal(
        "ab0(Lin,Lout) :- handle true with () finally (Lin1 = Lout1) for (Lin1=Lin,Lout1=Lout).\n\
         ab0(Lin,Lout) :- true, Lin1 = Lout1, Lin1 = Lin, Lout1 = Lout.\n\
         ab0(Lin,Lout) :- Lin1 = [a|Lmid], Lin1 = Lin, Lout1 = Lout, \
            handle (c(b), ab) with (c(X1) -> Lin11=[X1|Lmid1], continue(Lmid1,Lout11)) \
            finally (Lin11 = Lout11) for (Lin11=Lmid,Lout11=Lout1).\n\
         ab0(Lin,Lout) :- Lin1 = [a|Lmid], Lin1 = Lin, Lout1 = Lout, \
            Lin11 = [b|Lmid1], Lin11 = Lmid, Lout11 = Lout1, \
            handle ab with (c(X2) -> Lin12=[X2|Lmid2], continue(Lmid2,Lout12)) \
            finally (Lin12 = Lout12) for (Lin12=Lmid1,Lout12=Lout11).",
    );
    let rules = [Rule::Drop, Rule::Triv, Rule::Op, Rule::Op];
    let names = ["2", "3", "5", "6"];
    let mut at = 0;
    for ((step, rule), name) in steps.iter().zip(rules).zip(names) {
        match o.trace[at..].iter().position(|e| e.rule == rule && clause_matches(&e.clause, step)) {
            Some(found) => at += found + 1,
            None => return Err(format!("no trace state after position {at} matches step {name}")),
        }
    }
    Ok(format!("steps 2, 3, 5, 6 found in a {}-step trace", o.trace.len()))
}

/// Branch labels of the single aux handler of the rewrite-only state_dcg program.
pub fn state_dcg_ladder() -> Result<Vec<String>, String> {
    let o = traced(&bench_file("state_dcg.pl"), false);
    let e = elaborate_program(&o.program);
    if e.handlers.len() != 1 {
        return Err(format!("{} aux handlers", e.handlers.len()));
    }
    let (name, _) = e.handlers[0];
    let aux = e.program.clauses.iter().find(|c| c.functor() == name).ok_or("aux clause missing")?;
    // reset(G, Cont, Sig), (Sig == 0 -> ... ; Sig = op -> ... ; ... ; forward)
    let mut rest = aux.body.args()[1].clone();
    let mut branches = Vec::new();
    while let Some(args) = rest.match_app(Sym::SEMI, 2) {
        let test = &args[0].args()[0];
        branches.push(if test.match_app(Sym::EQEQ, 2).is_some() {
            "done".to_string()
        } else {
            test.args()[1].functor().ok_or("malformed branch")?.to_string()
        });
        rest = args[1].clone();
    }
    if rest.args().first().and_then(|g| g.functor()).map(|f| f.name) == Some(Sym::SHIFT) {
        branches.push("forward".into());
    }
    Ok(branches)
}

pub fn state_dcg_rewrite_only() -> Result<String, String> {
    let branches = state_dcg_ladder()?;
    if branches != ["done", "get_state/1", "put_state/1", "c/1", "forward"] {
        return Err(format!("ladder {branches:?}"));
    }
    Ok(format!("one aux handler: {}", branches.join("/")))
}

pub fn state_dcg_full() -> Result<String, String> {
    let o = traced(&bench_file("state_dcg.pl"), true);
    let e = elaborate_program(&o.program);
    let expected = internal(
        "state_phrase_handler(A, B, C, D) :- abinc0(A, B, C, D).\n\
         abinc0(A, A, B, B).\n\
         abinc0(A, B, [a,b|C], D) :- E is A+1, abinc0(E, B, C, D).",
    );
    let text = print_program(&e.program);
    if !program_alpha_eq(&e.program.clauses, &expected) {
        return Err(format!("got\n{text}"));
    }
    if text.contains("shift") || text.contains("reset") {
        return Err("shift/reset remain".into());
    }
    Ok("abinc0/4 listing, no shift or reset".into())
}

pub fn state_dcg_foo_drops_unused_clause() -> Result<String, String> {
    let o = traced(&bench_file("state_dcg_foo.pl"), false);
    let e = elaborate_program(&o.program);
    if e.handlers.len() != 1 {
        return Err(format!("{} aux handlers", e.handlers.len()));
    }
    if e.handlers[0].1.clause_for(Functor::new("foo", 0)).is_some() {
        return Err("foo/0 clause kept".into());
    }
    Ok("one handler without foo/0".into())
}
