use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use choicelog::bench::{self, BenchConfig};
use choicelog::corpus::{self, Version};
use choicelog::eval::{ChoicePolicy, EvalOptions};
use choicelog::frontend::pretty_print;

#[derive(Parser)]
#[command(name = "choicelog", version, about = "Datalog with choice constraints")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a program.
    Run(RunArgs),
    /// Benchmark the corpus.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    First,
    Shuffled,
}

#[derive(clap::Args)]
struct RunArgs {
    program: PathBuf,
    /// Directory holding `<relation>.facts` for every input relation.
    #[arg(long, default_value = ".")]
    facts: PathBuf,
    /// Directory receiving `<relation>.tsv` for every output relation.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Print the guarded RAM program and exit.
    #[arg(long)]
    emit_ram: bool,
    /// Print the program after the rule-choice rewrite and exit.
    #[arg(long)]
    emit_desugared: bool,
    #[arg(long, value_enum, default_value = "first")]
    choice_policy: Policy,
    /// Seed for the shuffled policy.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_iterations: Option<u64>,
    /// Write the per-iteration log of merged tuples here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write evaluation counters as JSON here.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Run benchmarks and write a report.
    Run {
        /// `all` or a comma-separated list of benchmark names.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, value_delimiter = ',', default_value = "100,500,1000")]
        scales: Vec<usize>,
        /// Per-run timeout in seconds.
        #[arg(long, default_value_t = 120)]
        timeout: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "report.tsv")]
        out: PathBuf,
        /// Repetitions per cell; the minimum time is reported.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Comma-separated subset of choice, rulechoice, native.
        #[arg(long, value_delimiter = ',')]
        versions: Vec<Version>,
    },
    /// Generate benchmark inputs.
    Gen {
        name: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        scale: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn user(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::user(format!("{e:#}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = std::panic::catch_unwind(|| match cli.command {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Bench(b) => cmd_bench(b),
    });
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("{}", f.message.trim_end());
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(2),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let source = fs::read_to_string(&args.program)
        .with_context(|| format!("cannot read {}", args.program.display()))?;
    let file = args.program.display().to_string();
    let render = |diags: Vec<choicelog::Diagnostic>| Failure::user(choicelog::diag::render_all(&diags, &file));

    if args.emit_desugared {
        let p = choicelog::desugar(&source).map_err(render)?;
        print!("{}", pretty_print(&p));
        return Ok(());
    }
    let program = choicelog::compile(&source).map_err(render)?;
    if args.emit_ram {
        print!("{}", program.emit_ram());
        return Ok(());
    }

    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let opts = EvalOptions {
        policy: match args.choice_policy {
            Policy::First => ChoicePolicy::First,
            Policy::Shuffled => ChoicePolicy::Shuffled(args.seed),
        },
        max_iterations: args.max_iterations,
        trace: args.trace.is_some(),
        facts_dir: Some(args.facts.clone()),
        out_dir: Some(args.out.clone()),
    };
    let outcome = program.run(&opts).map_err(|e| {
        if e.is_user_error() {
            Failure::user(format!("error: {e}"))
        } else {
            Failure::internal(format!("internal error: {e}"))
        }
    })?;
    if let (Some(path), Some(trace)) = (&args.trace, &outcome.trace) {
        write(path, &trace.to_string())?;
    }
    if let Some(path) = &args.stats {
        let mut json = serde_json::to_value(outcome.stats).map_err(|e| Failure::internal(e.to_string()))?;
        if let Some(kib) = peak_rss_kib() {
            json["peak_rss_kib"] = kib.into();
        }
        write(path, &json.to_string())?;
    }
    Ok(())
}

/// High-water resident set size of this process, where `/proc` exposes it.
fn peak_rss_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::user(format!("{}: {e}", path.display())))
}

fn cmd_bench(cmd: BenchCmd) -> Result<(), Failure> {
    match cmd {
        BenchCmd::Gen {
            name,
            seed,
            scale,
            out,
        } => {
            let facts = corpus::generate(&name, seed, scale)
                .ok_or_else(|| Failure::user(format!("unknown benchmark `{name}`")))?;
            corpus::write_facts(&out, &facts).map_err(|e| Failure::user(e.to_string()))?;
            fs::write(out.join(format!("{name}.dl")), corpus::source(&name, Version::Choice))
                .map_err(|e| Failure::user(e.to_string()))?;
            Ok(())
        }
        BenchCmd::Run {
            suite,
            scales,
            timeout,
            seed,
            out,
            reps,
            versions,
        } => {
            let engine = std::env::current_exe().map_err(|e| Failure::internal(e.to_string()))?;
            let work_dir = std::env::temp_dir().join(format!("choicelog-bench-{}", std::process::id()));
            let mut config = BenchConfig::new(engine, work_dir.clone());
            if suite != "all" {
                config.benchmarks = suite
                    .split(',')
                    .map(|n| corpus::benchmark(n.trim()).ok_or_else(|| Failure::user(format!("unknown benchmark `{n}`"))))
                    .collect::<Result<_, _>>()?;
            }
            if !versions.is_empty() {
                config.versions = versions;
            }
            config.scales = scales;
            config.timeout = Duration::from_secs(timeout);
            config.seed = seed;
            config.reps = reps;
            let report = bench::run(&config);
            let _ = fs::remove_dir_all(&work_dir);
            let report = report.map_err(|e| Failure::internal(format!("bench: {e}")))?;
            write(&out, &report.to_tsv())?;
            print!("{}", report.to_table());
            Ok(())
        }
    }
}
