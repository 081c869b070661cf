use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anota::harness::bench::{bench, Mode};
use anota::harness::fuzz::{fuzz, FuzzConfig};
use anota::harness::replay::{parse_policy_file, parse_trace, replay};
use anota::harness::run::{read_file, read_script, run_files};
use anota::harness::timecheck::{timecheck, TimecheckConfig};
use anota::harness::{ERROR_EXIT_CODE, USAGE_EXIT_CODE};
use anota::syscall::trace::write_trace;
use anota::timing::Verdict;
use anota::vm::{compile, escalate, Escalation, ExecConfig, ExecStatus, Program, Vfs, VIOLATION_EXIT_CODE};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "anota", version, about = "Annotation-driven policy sanitizer for AnotaScript")]
struct Cli {
    /// What to do when a policy is violated.
    #[arg(long, global = true, value_enum, default_value = "exit")]
    escalation: EscalationArg,
    /// Instruction budget per execution.
    #[arg(long, global = true, default_value_t = anota::vm::DEFAULT_COST_LIMIT)]
    cost_limit: u64,
    /// Write every pseudo-syscall event of a `run` as JSONL.
    #[arg(long, global = true)]
    emit_trace: Option<PathBuf>,
    /// TOML manifest of `"path" = "content"` pairs for the virtual filesystem.
    #[arg(long, global = true)]
    vfs: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EscalationArg {
    Trap,
    Exit,
    Collect,
}

impl From<EscalationArg> for Escalation {
    fn from(e: EscalationArg) -> Self {
        match e {
            EscalationArg::Trap => Escalation::Trap,
            EscalationArg::Exit => Escalation::Exit,
            EscalationArg::Collect => Escalation::Collect,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute a script once.
    Run {
        script: PathBuf,
        /// File whose bytes `input()` returns. Empty input when omitted.
        input: Option<PathBuf>,
    },
    /// Coverage-guided fuzzing; violations count as crashes.
    Fuzz {
        script: PathBuf,
        /// Directory of seed inputs.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Seed input given inline. Repeatable.
        #[arg(long = "seed-input")]
        seed_inputs: Vec<String>,
        /// Dictionary file: one JSON string literal per line.
        #[arg(long)]
        dict: Option<PathBuf>,
        /// Dictionary entry given inline. Repeatable.
        #[arg(long = "token")]
        tokens: Vec<String>,
        #[arg(long, default_value_t = 100_000)]
        iterations: u64,
        #[arg(long)]
        seconds: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Stop after this many distinct findings.
        #[arg(long)]
        max_findings: Option<usize>,
        /// Write each finding's input here, named by its digest.
        #[arg(long)]
        findings: Option<PathBuf>,
    },
    /// Check a recorded syscall trace against a policy file.
    Replay { trace: PathBuf, policy: PathBuf },
    /// Fixed-vs-random timing test of one function.
    Timecheck {
        script: PathBuf,
        #[arg(long = "fn")]
        function: String,
        /// Class 0 input, hex encoded.
        #[arg(long)]
        fixed: String,
        /// Samples per class.
        #[arg(long, default_value_t = 2000)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Measure monitor overhead on the built-in suite.
    Bench {
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

/// A failure that ends the command with the given exit status.
struct Fail(i32, String);

impl Fail {
    fn usage(msg: impl std::fmt::Display) -> Self {
        Fail(USAGE_EXIT_CODE, msg.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Fail(code, msg)) => {
            eprintln!("anota: {msg}");
            ExitCode::from(code as u8)
        }
    }
}

fn exec_config(cli: &Cli) -> Result<ExecConfig, Fail> {
    let vfs = match &cli.vfs {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Fail::usage(format!("{}: {e}", p.display())))?;
            Vfs::from_manifest(&text).map_err(|e| Fail::usage(format!("{}: {e}", p.display())))?
        }
        None => Vfs::default(),
    };
    Ok(ExecConfig {
        cost_limit: cli.cost_limit,
        escalation: cli.escalation.into(),
        record_trace: cli.emit_trace.is_some(),
        vfs,
        ..ExecConfig::default()
    })
}

fn load_program(path: &Path) -> Result<Program, Fail> {
    let src = read_script(path).map_err(|e| Fail(e.exit_code(), e.to_string()))?;
    compile(&src).map_err(|e| Fail(ERROR_EXIT_CODE, e.to_string()))
}

fn dispatch(cli: &Cli) -> Result<i32, Fail> {
    let config = exec_config(cli)?;
    match &cli.command {
        Command::Run { script, input } => cmd_run(cli, &config, script, input.as_deref()),
        Command::Fuzz {
            script,
            corpus,
            seed_inputs,
            dict,
            tokens,
            iterations,
            seconds,
            seed,
            jobs,
            max_findings,
            findings,
        } => {
            let program = load_program(script)?;
            let mut seeds: Vec<Vec<u8>> = seed_inputs.iter().map(|s| s.as_bytes().to_vec()).collect();
            if let Some(dir) = corpus {
                seeds.extend(read_corpus(dir)?);
            }
            let mut dictionary: Vec<Vec<u8>> = tokens.iter().map(|s| s.as_bytes().to_vec()).collect();
            if let Some(path) = dict {
                dictionary.extend(read_dictionary(path)?);
            }
            let fc = FuzzConfig {
                seeds,
                dictionary,
                max_iterations: *iterations,
                max_time: seconds.map(Duration::from_secs_f64),
                rng_seed: *seed,
                max_findings: if config.escalation == Escalation::Trap {
                    Some(1)
                } else {
                    *max_findings
                },
                jobs: *jobs,
                findings_dir: findings.clone(),
                exec: ExecConfig {
                    escalation: Escalation::Exit,
                    record_trace: false,
                    ..config.clone()
                },
            };
            let summary = fuzz(&program, &fc).map_err(|e| match e {
                anota::harness::fuzz::FuzzError::EmptyCorpus => Fail::usage(e),
                other => Fail(ERROR_EXIT_CODE, other.to_string()),
            })?;
            for f in &summary.findings {
                println!("finding exec={} {}", f.execution, f.violation.to_json_line());
            }
            println!(
                "summary findings={} executions={} edges={} corpus={} execs_per_sec={:.0}",
                summary.findings.len(),
                summary.executions,
                summary.edges,
                summary.corpus_size,
                summary.execs_per_second()
            );
            match summary.findings.first() {
                Some(f) if config.escalation == Escalation::Trap => {
                    escalate(&f.violation, Escalation::Trap);
                    unreachable!("trap escalation aborts")
                }
                Some(_) => Ok(VIOLATION_EXIT_CODE),
                None => Ok(0),
            }
        }
        Command::Replay { trace, policy } => {
            let policy_text = std::fs::read_to_string(policy).map_err(|e| Fail::usage(format!("{}: {e}", policy.display())))?;
            let specs = parse_policy_file(&policy_text).map_err(|e| Fail(e.exit_code(), e.to_string()))?;
            let bytes = read_file(trace).map_err(|e| Fail(e.exit_code(), e.to_string()))?;
            let text = String::from_utf8(bytes.clone()).map_err(|_| Fail(ERROR_EXIT_CODE, "trace is not valid UTF-8".into()))?;
            let events = parse_trace(&text).map_err(|e| Fail(e.exit_code(), e.to_string()))?;
            let out = replay(&specs, &events, &bytes);
            for d in &out.diagnostics {
                eprintln!("anota: {d}");
            }
            for v in &out.violations {
                println!("{}", v.to_json_line());
            }
            Ok(if out.violations.is_empty() { 0 } else { VIOLATION_EXIT_CODE })
        }
        Command::Timecheck {
            script,
            function,
            fixed,
            n,
            seed,
        } => {
            let program = load_program(script)?;
            let fixed = hex::decode(fixed).map_err(|e| Fail::usage(format!("--fixed: {e}")))?;
            let report = timecheck(
                &program,
                &TimecheckConfig {
                    function: function.clone(),
                    fixed,
                    n: *n,
                    seed: *seed,
                    exec: config,
                },
            );
            println!("{}", report.line());
            if let Some(v) = &report.violation {
                eprintln!("{}", v.to_json_line());
            }
            Ok(if report.verdict == Verdict::TimingLeak { VIOLATION_EXIT_CODE } else { 0 })
        }
        Command::Bench { reps } => {
            let report = bench(*reps);
            print!("{}", report.table());
            for m in &Mode::ALL[1..] {
                println!("{} geomean ratio {:.3}", m.name(), report.geomean(*m));
            }
            Ok(0)
        }
    }
}

fn cmd_run(cli: &Cli, config: &ExecConfig, script: &Path, input: Option<&Path>) -> Result<i32, Fail> {
    let result = run_files(script, input, config).map_err(|e| Fail(e.exit_code(), e.to_string()))?;
    for line in &result.output {
        println!("{line}");
    }
    if let Some(path) = &cli.emit_trace {
        std::fs::File::create(path)
            .and_then(|f| write_trace(std::io::BufWriter::new(f), &result.trace))
            .map_err(|e| Fail(ERROR_EXIT_CODE, format!("{}: {e}", path.display())))?;
    }
    match result.status {
        ExecStatus::Clean => Ok(0),
        ExecStatus::Violation => {
            for v in &result.violations {
                escalate(v, config.escalation);
                eprintln!("{}", v.to_json_line());
            }
            Ok(VIOLATION_EXIT_CODE)
        }
        ExecStatus::ScriptError => {
            let e = result.error.expect("script error carries its cause");
            Err(Fail(ERROR_EXIT_CODE, format!("script error: {e}")))
        }
        ExecStatus::Timeout => Err(Fail(ERROR_EXIT_CODE, format!("cost limit of {} exceeded", config.cost_limit))),
    }
}

fn read_corpus(dir: &Path) -> Result<Vec<Vec<u8>>, Fail> {
    let entries = std::fs::read_dir(dir).map_err(|e| Fail::usage(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
    paths.sort();
    paths
        .iter()
        .map(|p| std::fs::read(p).map_err(|e| Fail::usage(format!("{}: {e}", p.display()))))
        .collect()
}

fn read_dictionary(path: &Path) -> Result<Vec<Vec<u8>>, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str::<String>(l.trim())
                .map(String::into_bytes)
                .map_err(|e| Fail::usage(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}
