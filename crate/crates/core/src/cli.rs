//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::experiments::{self, ExperimentConfig, ExperimentError, ExperimentKind, ExperimentResult, OutputFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "phaselab", version, about = "Phase distinguishing and phase estimation verification sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Success probability of optimal and Haar-random algorithms against (q+1)/n.
    VerifyBound(Flags),
    /// Counter-register leakage under forward and mixed query schedules.
    VerifyCounter(Flags),
    /// Local search for high-success algorithms.
    Stress(Flags),
    /// Exact phase-estimation outcome statistics on a grid of phases.
    Cemm(Flags),
    /// EPR basis identity.
    EprCheck(Flags),
    /// Rounding reduction from phase estimation to phase distinguishing.
    ReductionCheck(Flags),
    /// Any experiment described by a JSON config file.
    Sweep(Flags),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
struct UsizeList(Vec<usize>);

#[derive(Debug, Clone)]
struct FloatList(Vec<f64>);

#[derive(Debug, Args)]
struct Flags {
    /// Sizes: `8`, `2,4,8` or `2..16`.
    #[arg(long, value_parser = |s: &str| parse_usize_list(s).map(UsizeList))]
    n: Option<UsizeList>,
    /// Query counts, same grammar as --n.
    #[arg(long, value_parser = |s: &str| parse_usize_list(s).map(UsizeList))]
    q: Option<UsizeList>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, env = "PHASELAB_SEED")]
    seed: Option<u64>,
    /// Output file; CSV on stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Phases for `cemm`, comma separated.
    #[arg(long, value_parser = |s: &str| parse_f64_list(s).map(FloatList))]
    theta: Option<FloatList>,
    /// Target success probabilities for `reduction-check`, comma separated.
    #[arg(long, value_parser = |s: &str| parse_f64_list(s).map(FloatList))]
    p: Option<FloatList>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

/// Parses `a`, `a,b,c`, `a..b` and mixtures such as `1,4..6`.
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| format!("bad range start in `{part}`"))?;
            let b: usize = b.trim().parse().map_err(|_| format!("bad range end in `{part}`"))?;
            if a > b {
                return Err(format!("empty range `{part}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| format!("not a non-negative integer: `{part}`"))?);
        }
    }
    Ok(out)
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(str::trim).map(|p| p.parse::<f64>().map_err(|_| format!("not a number: `{p}`"))).collect()
}

impl Command {
    fn parts(&self) -> (Option<ExperimentKind>, &Flags) {
        match self {
            Self::VerifyBound(f) => (Some(ExperimentKind::BoundSweep), f),
            Self::VerifyCounter(f) => (Some(ExperimentKind::CounterScan), f),
            Self::Stress(f) => (Some(ExperimentKind::RandomStress), f),
            Self::Cemm(f) => (Some(ExperimentKind::CemmCurve), f),
            Self::EprCheck(f) => (Some(ExperimentKind::EprCheck), f),
            Self::ReductionCheck(f) => (Some(ExperimentKind::ReductionCheck), f),
            Self::Sweep(f) => (None, f),
        }
    }
}

fn default_trials(kind: ExperimentKind) -> usize {
    match kind {
        ExperimentKind::BoundSweep | ExperimentKind::CounterScan => 10,
        ExperimentKind::RandomStress => 200,
        ExperimentKind::ReductionCheck => 1000,
        ExperimentKind::CemmCurve | ExperimentKind::EprCheck => 1,
    }
}

/// On-grid and mid-grid phases for the largest `n`.
fn default_theta_grid(n_values: &[usize]) -> Vec<f64> {
    let m = 2 * n_values.iter().copied().max().unwrap_or(1);
    (0..m).map(|j| j as f64 / m as f64).collect()
}

fn build_config(command: &Command) -> Result<ExperimentConfig, ExperimentError> {
    let (kind, flags) = command.parts();
    let mut cfg = match (&flags.config, kind) {
        (Some(path), _) => {
            let mut cfg = ExperimentConfig::from_path(path)?;
            if let Some(k) = kind {
                cfg.kind = k;
            }
            cfg
        }
        (None, Some(k)) => {
            let mut cfg = ExperimentConfig::new(k, Vec::new());
            cfg.trials = default_trials(k);
            cfg
        }
        (None, None) => return Err(ExperimentError::Config("sweep requires --config".into())),
    };
    if let Some(n) = &flags.n {
        cfg.n_values = n.0.clone();
    }
    if let Some(q) = &flags.q {
        cfg.q_values = q.0.clone();
    }
    if let Some(t) = flags.trials {
        cfg.trials = t;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(t) = &flags.theta {
        cfg.theta_grid = Some(t.0.clone());
    }
    if let Some(p) = &flags.p {
        cfg.p_values = Some(p.0.clone());
    }
    if let Some(out) = &flags.out {
        cfg.output_path = Some(out.display().to_string());
    }
    if let Some(f) = flags.format {
        cfg.format = match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    if cfg.n_values.is_empty() {
        return Err(ExperimentError::Config("no sizes given; pass --n or set n_values".into()));
    }
    if cfg.kind == ExperimentKind::CemmCurve && cfg.theta_grid.is_none() {
        cfg.theta_grid = Some(default_theta_grid(&cfg.n_values));
    }
    if cfg.kind == ExperimentKind::ReductionCheck && cfg.p_values.is_none() {
        cfg.p_values = Some(vec![0.3, 0.6, 0.9]);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_result(result: &ExperimentResult, cfg: &ExperimentConfig) -> Result<bool, ExperimentError> {
    let to_file = cfg.output_path.is_some();
    let sink: Box<dyn Write> = match &cfg.output_path {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match cfg.format {
        OutputFormat::Csv => result.write_csv(sink)?,
        OutputFormat::Json => {
            let mut sink = sink;
            result.write_json(&mut sink)?;
            writeln!(sink)?;
            sink.flush()?;
        }
    }
    Ok(to_file)
}

fn execute(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentResult, ExperimentError> {
    match jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
            pool.install(|| experiments::run(cfg))
        }
        None => experiments::run(cfg),
    }
}

fn exit_code(err: &ExperimentError) -> i32 {
    match err {
        ExperimentError::Config(_) => EXIT_USAGE,
        _ => EXIT_VIOLATION,
    }
}

/// Parses `argv` (program name first), runs the experiment and returns the exit code.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cfg = match build_config(&cli.command) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("run `phaselab --help` for usage");
            return exit_code(&e);
        }
    };
    let (_, flags) = cli.command.parts();
    let result = match execute(&cfg, flags.jobs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}: {e}", cfg.kind);
            return exit_code(&e);
        }
    };
    match write_result(&result, &cfg) {
        Ok(true) => println!("{}", experiments::summarize(&result)),
        Ok(false) => eprintln!("{}", experiments::summarize(&result)),
        Err(e) => {
            eprintln!("error writing results: {e}");
            return EXIT_VIOLATION;
        }
    }
    EXIT_OK
}
