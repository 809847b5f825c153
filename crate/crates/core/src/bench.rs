//! Benchmark suite: generated inputs, variants per optimization level,
//! median timings and checksums.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{solve, Sink, SolveOptions};
use crate::pipeline::{compile, format_answer, Compiled, OptLevel};
use crate::reader::{parse, parse_query, ParseError};
use crate::term::{Term, Var};

pub const PROGRAMS: [&str; 4] = ["ab", "state_dcg", "state_dcg_foo", "calculator"];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown benchmark `{0}` (expected one of ab, state_dcg, state_dcg_foo, calculator, all)")]
    UnknownProgram(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{program}: {source}")]
    Parse { program: String, source: ParseError },
    #[error("{program} at size {size}: variant {variant} failed: {message}")]
    Run {
        program: String,
        size: usize,
        variant: String,
        message: String,
    },
    #[error("{program} at size {size}: checksum of {variant} differs from {reference}")]
    Checksum {
        program: String,
        size: usize,
        variant: String,
        reference: String,
    },
}

/// One timed variant of one program at one size.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub program: String,
    pub size: usize,
    pub variant: String,
    pub median_ns: u128,
    pub reps: usize,
    pub checksum: String,
}

/// All variants of one program at one size, with derived speedups.
#[derive(Clone, Debug)]
pub struct BenchReport {
    pub program: String,
    pub size: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn median(&self, variant: &str) -> Option<u128> {
        self.rows.iter().find(|r| r.variant == variant).map(|r| r.median_ns)
    }

    /// `a / b`, or 1 when either time is below timer resolution.
    pub fn ratio(&self, a: &str, b: &str) -> Option<f64> {
        let (x, y) = (self.median(a)?, self.median(b)?);
        if x == 0 || y == 0 {
            return Some(1.0);
        }
        Some(x as f64 / y as f64)
    }

    pub fn ratios(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (a, b) in [
            ("elaborated", "rewritten"),
            ("elaborated", "rewritten_pe"),
            ("rewritten_pe", "handwritten"),
        ] {
            if let Some(r) = self.ratio(a, b) {
                out.push((format!("{a}/{b}"), r));
            }
        }
        out
    }
}

/// Deterministic input of size `n`.
pub fn gen_input(program: &str, n: usize) -> Result<Term, BenchError> {
    match program {
        "ab" | "state_dcg" | "state_dcg_foo" => Ok(Term::list(
            (0..n / 2).flat_map(|_| [Term::atom("a"), Term::atom("b")]),
            Term::nil(),
        )),
        "calculator" => Ok(Term::list(
            (0..n).map(|i| match i % 4 {
                0 => Term::compound("push", vec![Term::Int((i / 4) as i64)]),
                1 => Term::atom("load"),
                2 => Term::atom("add"),
                _ => Term::atom("store"),
            }),
            Term::nil(),
        )),
        other => Err(BenchError::UnknownProgram(other.into())),
    }
}

/// Source text of a benchmark program from the corpus directory.
pub fn load_source(dir: &std::path::Path, program: &str) -> Result<String, BenchError> {
    if !PROGRAMS.contains(&program) {
        return Err(BenchError::UnknownProgram(program.into()));
    }
    let path = dir.join(format!("{program}.pl"));
    std::fs::read_to_string(&path).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn query_of(program: &str) -> &'static str {
    match program {
        "ab" => "phrase_handler(Input, [])",
        "calculator" => "calc(Input, 0, Reg, Stack)",
        _ => "state_phrase_handler(0, State, Input, [])",
    }
}

struct Variant {
    name: &'static str,
    compiled: Compiled,
    input: Var,
}

impl Variant {
    fn goal(&self, input: &Term) -> Term {
        let map = [(self.input, input.clone())].into_iter().collect();
        self.compiled.goal.substitute(&map)
    }

    /// First answer without the input variable, or `false`.
    fn first_answer(&self, goal: &Term) -> Result<String, String> {
        let opts = SolveOptions {
            sink: Sink::Null,
            ..Default::default()
        };
        match solve(&self.compiled.db, goal, opts).next() {
            None => Ok("false".into()),
            Some(Err(e)) => Err(e.to_string()),
            Some(Ok(a)) => {
                let mut vars = self.compiled.vars.clone();
                vars.retain(|(name, _)| name != "Input");
                Ok(format_answer(&vars, &a))
            }
        }
    }
}

fn checksum(text: &str) -> String {
    let mut h = DefaultHasher::new();
    text.hash(&mut h);
    format!("{:016x}", h.finish())
}

fn variants(program: &str, source: &str) -> Result<Vec<Variant>, BenchError> {
    let parse_err = |source| BenchError::Parse {
        program: program.into(),
        source,
    };
    let p = parse(source).map_err(parse_err)?;
    let mut out = Vec::new();
    let mut add = |name, query: &str, level| -> Result<(), BenchError> {
        let q = parse_query(query).map_err(parse_err)?;
        let input = q.vars.iter().find(|(n, _)| n == "Input").map(|(_, v)| *v).unwrap();
        out.push(Variant {
            name,
            compiled: compile(&p, &q, level),
            input,
        });
        Ok(())
    };
    let q = query_of(program);
    add("elaborated", q, OptLevel::None)?;
    add("rewritten", q, OptLevel::Rewrite)?;
    add("rewritten_pe", q, OptLevel::Full)?;
    if program == "ab" {
        add("handwritten", "ab_trad(Input, [])", OptLevel::None)?;
    }
    Ok(out)
}

/// Times every variant of `program` at each size; fails on checksum divergence.
pub fn run_program(program: &str, source: &str, sizes: &[usize], reps: usize) -> Result<Vec<BenchReport>, BenchError> {
    let vs = variants(program, source)?;
    let reps = reps.max(1);
    let mut reports = Vec::new();
    for &size in sizes {
        let input = gen_input(program, size)?;
        let mut rows: Vec<BenchRow> = Vec::new();
        for v in &vs {
            let goal = v.goal(&input);
            let mut times = Vec::with_capacity(reps);
            let mut answer = String::new();
            for _ in 0..reps {
                let start = Instant::now();
                answer = v.first_answer(&goal).map_err(|message| BenchError::Run {
                    program: program.into(),
                    size,
                    variant: v.name.into(),
                    message,
                })?;
                times.push(start.elapsed().as_nanos());
            }
            times.sort_unstable();
            let row = BenchRow {
                program: program.into(),
                size,
                variant: v.name.into(),
                median_ns: times[times.len() / 2],
                reps,
                checksum: checksum(&answer),
            };
            if let Some(first) = rows.first() {
                if first.checksum != row.checksum {
                    return Err(BenchError::Checksum {
                        program: program.into(),
                        size,
                        variant: row.variant,
                        reference: first.variant.clone(),
                    });
                }
            }
            rows.push(row);
        }
        reports.push(BenchReport {
            program: program.into(),
            size,
            rows,
        });
    }
    Ok(reports)
}

/// Variants whose median time drops as the size grows by more than timer noise
/// (one inversion below 1 ms is tolerated).
pub fn scaling_violations(reports: &[BenchReport]) -> Vec<String> {
    let mut out = Vec::new();
    let variants: Vec<String> = reports.iter().flat_map(|r| r.rows.iter().map(|x| x.variant.clone())).collect();
    let mut seen = std::collections::BTreeSet::new();
    for variant in variants {
        if !seen.insert(variant.clone()) {
            continue;
        }
        let series: Vec<(usize, u128)> = reports
            .iter()
            .filter_map(|r| r.median(&variant).map(|t| (r.size, t)))
            .collect();
        let mut small = 0;
        for w in series.windows(2) {
            if w[1].1 < w[0].1 {
                if w[0].1 < 1_000_000 && small == 0 {
                    small += 1;
                } else {
                    out.push(format!("{variant}: {} ns at {} > {} ns at {}", w[0].1, w[0].0, w[1].1, w[1].0));
                }
            }
        }
    }
    out
}

/// Runs `f` on a thread with a large stack (deep recursion on long inputs).
pub fn with_big_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new()
        .stack_size(1 << 30)
        .spawn(f)
        .expect("spawn benchmark thread")
        .join()
        .expect("benchmark thread panicked")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::print_term;

    #[test]
    fn inputs() {
        assert_eq!(print_term(&gen_input("ab", 6).unwrap()), "[a,b,a,b,a,b]");
        assert_eq!(
            print_term(&gen_input("calculator", 5).unwrap()),
            "[push(0),load,add,store,push(1)]"
        );
        assert!(gen_input("nope", 1).is_err());
    }

    #[test]
    fn state_dcg_counts_pairs() {
        let src = include_str!("../../../bench/state_dcg.pl");
        let vs = variants("state_dcg", src).unwrap();
        for v in &vs {
            let goal = v.goal(&gen_input("state_dcg", 4).unwrap());
            assert_eq!(v.first_answer(&goal).unwrap(), "State = 2", "{}", v.name);
        }
    }

    #[test]
    fn size_zero_agrees() {
        for p in PROGRAMS {
            let src = load_source(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bench"), p).unwrap();
            let r = run_program(p, &src, &[0, 8], 1).unwrap();
            assert_eq!(r.len(), 2);
        }
    }
}
