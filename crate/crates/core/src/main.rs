use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vcstat::benchmark::{format_seed_table, format_table, run_once, summarize, BenchmarkConfig};
use vcstat::event_stream::{parse_records, write_records, Format};
use vcstat::gradcheck::{run_gradcheck, GradcheckOptions};
use vcstat::pattern_gen::{generate_pattern, PatternKind, PatternSpec};
use vcstat::report::{build_report, emit_density_svg, write_density_csv, VcsBlock};
use vcstat::toy_trainer::write_history_csv;
use vcstat::vcs::VcsConfig;
use vcstat::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_UNDEFINED: u8 = 3;

#[derive(Parser)]
#[command(name = "vcstat", version, about = "Temporal error-clustering statistics for binary prediction logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a prediction log: AP, AU-ROC, VCS and error density.
    Evaluate(EvaluateArgs),
    /// Write a synthetic prediction log with a planted error pattern.
    Synth(SynthArgs),
    /// Compare analytic gradients of the soft statistics with finite differences.
    Gradcheck(GradcheckArgs),
    /// Train the toy model with and without the penalty and compare.
    TrainDemo(TrainDemoArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "jsonl")]
    format: Format,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 5)]
    tau: usize,
    #[arg(long, default_value_t = 0.5)]
    subsample: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = vcstat::report::DEFAULT_DENSITY_BINS)]
    density_bins: usize,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    density_csv: Option<PathBuf>,
    /// Reorder records by timestamp instead of rejecting unsorted input.
    #[arg(long)]
    sort: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    pattern: PatternKind,
    #[arg(long)]
    events: usize,
    #[arg(long)]
    errors: usize,
    /// Time span as `start,end`.
    #[arg(long, default_value = "0,1000", value_parser = parse_period)]
    period: (f64, f64),
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    format: Format,
    #[arg(long, default_value_t = 0.9)]
    cluster_center: f64,
    #[arg(long, default_value_t = 0.02)]
    cluster_width: f64,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 5.0)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw timestamps from a coarse integer grid so that ties occur.
    #[arg(long)]
    ties: bool,
}

#[derive(Args)]
struct TrainDemoArgs {
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// Seeds as an inclusive range `a..b` or a comma list.
    #[arg(long, default_value = "0..4", value_parser = parse_seeds)]
    seeds: Seeds,
    #[arg(long)]
    epochs: Option<usize>,
    /// Directory for per-run loss histories.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_period(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `start,end`, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let parse = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("`{v}`: {e}"));
    let seeds = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse(a)?, parse(b)?);
        if a > b {
            return Err(format!("empty seed range `{s}`"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(parse).collect::<Result<Vec<_>, _>>()?
    };
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(Seeds(seeds))
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::MalformedRecord { .. }
            | Error::EmptyInput
            | Error::UnsortedInput { .. }
            | Error::InvalidLabel(_)
            | Error::InvalidConfig(_)
            | Error::SpecViolation(_)
            | Error::Io(_) => EXIT_INPUT,
            _ => EXIT_FAILURE,
        };
        Self { code, message: e.to_string() }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn evaluate(args: &EvaluateArgs) -> Result<u8, Failure> {
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(Failure::input(format!("threshold {} outside (0, 1)", args.threshold)));
    }
    let file = File::open(&args.input).map_err(|e| Failure::input(format!("{}: {e}", args.input.display())))?;
    let stream = parse_records(BufReader::new(file), args.format, args.sort)?;
    let config = VcsConfig { tau: args.tau, subsample_fraction: args.subsample, seed: args.seed };
    let report = build_report(&stream, args.threshold, &config, args.density_bins)?;

    let json = report.to_json();
    match &args.report {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{json}").and_then(|_| w.flush()).map_err(Error::from)?;
        }
        None => println!("{json}"),
    }
    if let Some(path) = &args.density_csv {
        write_density_csv(&report.density, create(path)?)?;
    }
    if let Some(path) = &args.svg {
        emit_density_svg(&report, path)?;
    }
    Ok(match report.vcs {
        VcsBlock::Defined(_) => 0,
        VcsBlock::Undefined(u) => {
            eprintln!("vcstat: VCS undefined: {}", u.reason);
            EXIT_UNDEFINED
        }
    })
}

fn synth(args: &SynthArgs) -> Result<u8, Failure> {
    let spec = PatternSpec {
        cluster_center: args.cluster_center,
        cluster_width: args.cluster_width,
        ..PatternSpec::new(args.pattern, args.events, args.errors, args.period, args.seed)
    };
    let stream = generate_pattern(&spec)?;
    match &args.out {
        Some(path) => write_records(stream.records(), args.format, create(path)?)?,
        None => write_records(stream.records(), args.format, io::stdout().lock())?,
    }
    Ok(0)
}

fn gradcheck(args: &GradcheckArgs) -> Result<u8, Failure> {
    if !(args.beta.is_finite() && args.beta > 0.0) {
        return Err(Failure::input(format!("beta {} must be positive", args.beta)));
    }
    if !(args.step.is_finite() && args.step > 0.0) {
        return Err(Failure::input(format!("step {} must be positive", args.step)));
    }
    let opts = GradcheckOptions { beta: args.beta, trials: args.trials, step: args.step, seed: args.seed, tie_heavy: args.ties };
    let summary = run_gradcheck(&opts);
    for c in &summary.checks {
        println!(
            "{:<32} {} max_rel_error={:.3e} tolerance={:.0e} checked={} skipped={}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.max_rel_error,
            c.tolerance,
            c.checked,
            c.skipped
        );
        if !c.passed {
            if let Some((trial, coord)) = c.worst {
                println!("  worst: trial {trial}, coordinate {coord}");
            }
        }
    }
    Ok(if summary.passed() { 0 } else { EXIT_FAILURE })
}

fn train_demo(args: &TrainDemoArgs) -> Result<u8, Failure> {
    let mut config = BenchmarkConfig::default();
    if let Some(epochs) = args.epochs {
        config.train.epochs = epochs;
    }
    config.train.validate()?;
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }
    let mut rows = Vec::new();
    let mut all_runs = Vec::new();
    for (label, gamma) in [("baseline", 0.0), ("vca", args.gamma)] {
        let mut runs = Vec::with_capacity(args.seeds.0.len());
        for &seed in &args.seeds.0 {
            let run = run_once(&config, seed, gamma)?;
            if let Some(dir) = &args.out_dir {
                let path = dir.join(format!("history_{label}_seed{seed}.csv"));
                write_history_csv(&run.history, create(&path)?)?;
            }
            runs.push(run);
        }
        rows.push(summarize(label, gamma, &runs));
        all_runs.push(runs);
    }
    print!("{}", format_table(&rows));
    println!();
    print!("{}", format_seed_table(&all_runs[0], &all_runs[1]));
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::TrainDemo(a) => train_demo(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("vcstat: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
