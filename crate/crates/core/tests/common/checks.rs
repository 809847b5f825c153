//! Generated-program checks shared by the individual tests and the
//! acceptance run. Each returns `Ok(None)` when a step budget ran out.

use super::gen::{generate, GenConfig};
use super::{engine_run, oracle_run, Outcome, MAX_STEPS};
use effect_handlers::effects::{analyze_program, EffectSet};
use effect_handlers::elaborate::elaborate_program;
use effect_handlers::engine::{solve, Database, EngineError, Sink, SolveOptions, UnhandledShift};
use effect_handlers::optimize::OptimizeOptions;
use effect_handlers::pipeline::{compile, compile_with, OptLevel};
use effect_handlers::program::{as_handler, count_own_continues, visit_goals};
use effect_handlers::reader::parse_term;
use effect_handlers::rewrite::{reassoc, Rewriter, Rule};
use effect_handlers::{parse, parse_query, Functor};

#[derive(Default, Debug)]
pub struct Stats {
    pub with_answers: usize,
    pub with_output: usize,
    pub merged: usize,
    pub specialized: usize,
}

/// Runs generated program `seed` at every level; `None` when a step budget ran out.
pub fn differential(seed: u64, cfg: GenConfig, stats: &mut Stats) -> Result<Option<()>, String> {
    let g = generate(seed, cfg);
    let p = parse(&g.source).map_err(|e| format!("seed {seed}: {e}\n{}", g.source))?;
    let q = parse_query(&g.query).map_err(|e| format!("seed {seed}: {e}"))?;
    let mut outcomes = Vec::new();
    for level in OptLevel::ALL {
        let opts = OptimizeOptions {
            trace: true,
            ..Default::default()
        };
        let c = compile_with(&p, &q, level, &opts);
        if let Some(o) = &c.optimized {
            if o.trace.iter().any(|e| e.rule == Rule::Merge) && level == OptLevel::Rewrite {
                stats.merged += 1;
            }
            if !o.records.is_empty() {
                stats.specialized += 1;
            }
        }
        let r = engine_run(&c);
        if Outcome::hit_step_limit(&r) {
            return Ok(None);
        }
        if level == OptLevel::None {
            let o = oracle_run(&c);
            if Outcome::hit_step_limit(&o) {
                return Ok(None);
            }
            if Outcome::of(&o) != Outcome::of(&r) {
                return Err(format!(
                    "seed {seed}: engine and oracle disagree\n{}\nengine {:?}\noracle {:?}",
                    g.source,
                    Outcome::of(&r),
                    Outcome::of(&o)
                ));
            }
        }
        outcomes.push((level, Outcome::of(&r)));
    }
    for (level, o) in &outcomes[1..] {
        if *o != outcomes[0].1 {
            return Err(format!(
                "seed {seed}: {level} differs from elaborated\n{}\nquery {}\nelaborated {:?}\n{level} {:?}",
                g.source, g.query, outcomes[0].1, o
            ));
        }
    }
    stats.with_answers += usize::from(!outcomes[0].1.answers.is_empty());
    stats.with_output += usize::from(!outcomes[0].1.output.is_empty());
    Ok(Some(()))
}

const MULTISHOT: GenConfig = GenConfig {
    max_effects: 2,
    max_preds: 3,
    max_nesting: 2,
    max_continues: 2,
    depth: 3,
};

#[derive(Default)]
pub struct Coverage {
    pub by_continues: [usize; 3],
    pub refused_merges: usize,
}

/// Checks program `seed`; `None` when a step budget ran out.
pub fn multishot(seed: u64, cov: &mut Coverage) -> Result<Option<()>, String> {
    let g = generate(seed, MULTISHOT);
    let p = parse(&g.source).map_err(|e| format!("seed {seed}: {e}\n{}", g.source))?;
    let q = parse_query(&g.query).map_err(|e| format!("seed {seed}: {e}"))?;

    let env = analyze_program(&p);
    let rw = Rewriter { env: &env };
    let mut problem = None;
    for c in &p.clauses {
        visit_goals(&c.body, &mut |goal| {
            let Some(outer) = as_handler(goal) else { return };
            for oc in &outer.clauses {
                cov.by_continues[count_own_continues(&oc.body).min(2)] += 1;
            }
            let Some(inner) = as_handler(&reassoc(&outer.goal)) else { return };
            if inner.clauses.iter().any(|c| count_own_continues(&c.body) >= 2) {
                cov.refused_merges += 1;
                if rw.merge(&outer).is_some() {
                    problem = Some(format!("seed {seed}: merged a multi-shot inner handler\n{}", g.source));
                }
            }
        });
    }
    if let Some(e) = problem {
        return Err(e);
    }

    let mut first: Option<Outcome> = None;
    for level in OptLevel::ALL {
        let c = compile(&p, &q, level);
        let (r, o) = (engine_run(&c), oracle_run(&c));
        if Outcome::hit_step_limit(&r) || Outcome::hit_step_limit(&o) {
            return Ok(None);
        }
        if Outcome::of(&r) != Outcome::of(&o) {
            return Err(format!(
                "seed {seed} at {level}: engine and oracle disagree\n{}\nengine {:?}\noracle {:?}",
                g.source,
                Outcome::of(&r),
                Outcome::of(&o)
            ));
        }
        match &first {
            None => first = Some(Outcome::of(&r)),
            Some(f) if *f != Outcome::of(&r) => {
                return Err(format!("seed {seed}: {level} differs from elaborated\n{}", g.source));
            }
            Some(_) => {}
        }
    }
    Ok(Some(()))
}

/// Operations that escaped each predicate of program `seed` but are not in
/// its inferred effect set, plus the number of escapes observed.
pub fn effect_violations(seed: u64) -> Result<(Vec<String>, usize), String> {
    let g = generate(seed, GenConfig::default());
    let p = parse(&g.source).map_err(|e| format!("seed {seed}: {e}"))?;
    let env = analyze_program(&p);
    let db = Database::new(&elaborate_program(&p).program);
    let mut bad = Vec::new();
    let mut seen = 0;
    for pred in &g.preds {
        let goal = parse_term(&format!("{pred}(2, R)")).unwrap();
        let opts = SolveOptions {
            sink: Sink::Null,
            max_steps: Some(MAX_STEPS),
            unhandled: UnhandledShift::Record,
        };
        let mut m = solve(&db, &goal, opts);
        for r in m.by_ref().take(10) {
            if let Err(e) = r {
                if !matches!(e, EngineError::StepLimit(_)) {
                    return Err(format!("seed {seed}: {e}"));
                }
            }
        }
        let inferred = env.of(Functor::new(pred, 2));
        if !inferred.is_subset(&EffectSet::fin(env.ops.iter().copied())) {
            return Err(format!("seed {seed}: {pred}/2 inferred {inferred}, wider than the declared operations"));
        }
        for signal in m.escaped() {
            seen += 1;
            let op = signal.functor().expect("signal is callable");
            if !inferred.contains(op) {
                bad.push(format!("seed {seed}: {pred}/2 shifted {op} outside {inferred}\n{}", g.source));
            }
        }
    }
    Ok((bad, seen))
}

/// Checks `n` differential programs that ran to completion.
pub fn run_differential(n: usize) -> Result<String, String> {
    let mut stats = Stats::default();
    let (mut checked, mut seed) = (0, 0);
    while checked < n {
        if seed >= 4 * n as u64 {
            return Err(format!("only {checked} of {seed} programs finished within the step budget"));
        }
        if differential(seed, GenConfig::default(), &mut stats)?.is_some() {
            checked += 1;
        }
        seed += 1;
    }
    Ok(format!(
        "{checked} programs ({} with answers, {} with output, {} merged, {} specialized)",
        stats.with_answers, stats.with_output, stats.merged, stats.specialized
    ))
}

/// Checks `n` multi-shot programs that ran to completion.
pub fn run_multishot(n: usize) -> Result<String, String> {
    let mut cov = Coverage::default();
    let (mut checked, mut seed) = (0, 0);
    while checked < n {
        if seed >= 10 * n as u64 {
            return Err(format!("only {checked} of {seed} programs finished within the step budget"));
        }
        if multishot(seed, &mut cov)?.is_some() {
            checked += 1;
        }
        seed += 1;
    }
    if cov.by_continues.iter().any(|&c| c == 0) || cov.refused_merges == 0 {
        return Err(format!("weak coverage: clauses by continue count {:?}", cov.by_continues));
    }
    Ok(format!(
        "{checked} programs; op clauses with 0/1/2 continues: {:?}; {} multi-shot merges refused",
        cov.by_continues, cov.refused_merges
    ))
}

/// Runs every predicate of `n` programs with unhandled operations recorded.
pub fn run_effect_soundness(n: usize) -> Result<String, String> {
    let mut escapes = 0;
    for seed in 0..n as u64 {
        let (bad, seen) = effect_violations(seed)?;
        if let Some(first) = bad.first() {
            return Err(first.clone());
        }
        escapes += seen;
    }
    if escapes < n / 2 {
        return Err(format!("only {escapes} escaped operations observed"));
    }
    Ok(format!("{n} programs, {escapes} escaped operations, all inside the inferred set"))
}
