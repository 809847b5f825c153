use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use effect_handlers::bench::{run_program, scaling_violations, with_big_stack, BenchReport, PROGRAMS};
use effect_handlers::effects::analyze_program;
use effect_handlers::elaborate::elaborate_program;
use effect_handlers::optimize::{optimize, OptimizeOptions, Optimized};
use effect_handlers::pipeline::{compile_with, OptLevel};
use effect_handlers::{parse, parse_query, print_clause, print_program, SourceProgram};

#[derive(Parser)]
#[command(name = "ehp", version, about = "Prolog with algebraic effect handlers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a query against a program and print a toplevel transcript.
    Run {
        file: PathBuf,
        #[arg(short, long)]
        query: String,
        #[arg(long, default_value = "none", value_parser = parse_level)]
        opt: OptLevel,
        /// Stop after this many answers.
        #[arg(long, default_value_t = 20)]
        max_answers: usize,
        #[arg(long)]
        max_steps: Option<u64>,
        /// Print every optimizer rewrite step to stderr.
        #[arg(long)]
        trace_rewrites: bool,
    },
    /// Print the program at one stage of the pipeline.
    Emit {
        file: PathBuf,
        #[arg(long, value_enum)]
        stage: Stage,
        #[arg(long)]
        trace_rewrites: bool,
    },
    /// Time elaborated, rewritten and fully optimized variants.
    Bench {
        /// ab, state_dcg, state_dcg_foo, calculator or all.
        suite: String,
        /// Comma-separated input sizes, e.g. 1000,1e4,100000.
        #[arg(long, default_value = "1000,10000,100000", value_parser = parse_sizes)]
        sizes: Sizes,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Write rows as a JSON array to this file.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Directory holding the benchmark programs.
        #[arg(long, default_value = "bench")]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Source,
    Elaborated,
    Effects,
    Rewritten,
    Optimized,
}

#[derive(Clone)]
struct Sizes(Vec<usize>);

fn parse_level(s: &str) -> Result<OptLevel, String> {
    s.parse()
}

fn parse_size(s: &str) -> Result<usize, String> {
    let s = s.trim();
    if let Some((m, e)) = s.split_once(['e', 'E']) {
        let m: usize = m.parse().map_err(|_| format!("bad size `{s}`"))?;
        let e: u32 = e.parse().map_err(|_| format!("bad size `{s}`"))?;
        return 10usize
            .checked_pow(e)
            .and_then(|p| p.checked_mul(m))
            .ok_or_else(|| format!("size `{s}` too large"));
    }
    s.parse().map_err(|_| format!("bad size `{s}`"))
}

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    s.split(',').map(parse_size).collect::<Result<_, _>>().map(Sizes)
}

/// A failure with its exit status.
struct Failure(u8, String);

fn program_error(msg: impl ToString) -> Failure {
    Failure(1, msg.to_string())
}

fn load(file: &PathBuf) -> Result<SourceProgram, Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| program_error(format!("{}: {e}", file.display())))?;
    parse(&text).map_err(|e| program_error(format!("{}:{e}", file.display())))
}

fn print_trace(o: &Optimized) {
    for (i, e) in o.trace.iter().enumerate() {
        eprintln!("{:>4} {:<7} {}", i + 1, e.rule.name(), print_clause(&e.clause));
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            file,
            query,
            opt,
            max_answers,
            max_steps,
            trace_rewrites,
        } => {
            let program = load(&file)?;
            let q = parse_query(&query).map_err(|e| program_error(format!("query:{e}")))?;
            let opts = OptimizeOptions {
                trace: trace_rewrites,
                ..Default::default()
            };
            let compiled = compile_with(&program, &q, opt, &opts);
            if let Some(o) = &compiled.optimized {
                print_trace(o);
            }
            let text = compiled.transcript(max_answers, max_steps).map_err(program_error)?;
            print!("{text}");
        }
        Command::Emit {
            file,
            stage,
            trace_rewrites,
        } => {
            let program = load(&file)?;
            let opts = OptimizeOptions {
                trace: trace_rewrites,
                ..Default::default()
            };
            let text = match stage {
                Stage::Source => print_program(&program),
                Stage::Elaborated => print_program(&elaborate_program(&program).program),
                Stage::Effects => analyze_program(&program).render(),
                Stage::Rewritten | Stage::Optimized => {
                    let o = optimize(&program, matches!(stage, Stage::Optimized), &opts);
                    print_trace(&o);
                    print_program(&o.program)
                }
            };
            print!("{text}");
        }
        Command::Bench {
            suite,
            sizes,
            reps,
            json,
            dir,
        } => {
            let programs: Vec<String> = if suite == "all" {
                PROGRAMS.iter().map(|s| s.to_string()).collect()
            } else if PROGRAMS.contains(&suite.as_str()) {
                vec![suite]
            } else {
                return Err(Failure(2, format!("unknown suite `{suite}` (expected {} or all)", PROGRAMS.join(", "))));
            };
            let mut all: Vec<BenchReport> = Vec::new();
            for p in programs {
                let source = effect_handlers::bench::load_source(&dir, &p).map_err(program_error)?;
                let sizes = sizes.0.clone();
                let reports =
                    with_big_stack(move || run_program(&p, &source, &sizes, reps)).map_err(program_error)?;
                for r in &reports {
                    let times: Vec<String> =
                        r.rows.iter().map(|x| format!("{}={:.3}ms", x.variant, x.median_ns as f64 / 1e6)).collect();
                    let ratios: Vec<String> = r.ratios().iter().map(|(k, v)| format!("{k}={v:.2}")).collect();
                    println!("{} n={} {} | {}", r.program, r.size, times.join(" "), ratios.join(" "));
                }
                for v in scaling_violations(&reports) {
                    eprintln!("warning: non-monotone timing: {v}");
                }
                all.extend(reports);
            }
            if let Some(path) = json {
                let rows: Vec<_> = all.iter().flat_map(|r| r.rows.iter()).collect();
                let text = serde_json::to_string_pretty(&rows).map_err(program_error)?;
                std::fs::write(&path, text + "\n").map_err(|e| program_error(format!("{}: {e}", path.display())))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
