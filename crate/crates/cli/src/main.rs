//! `potp`: synthesize or ingest sessions, extract features, label, train,
//! evaluate and explain, all inside one run directory.

mod commands;
mod config;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use potp_core::ml::{Algorithm, Task};
use potp_core::synth::Scenario;

use config::RunConfig;
use run::RunDir;

/// Usage errors exit with 1, data errors with 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Box<dyn std::error::Error + Send + Sync>),
}

impl CliError {
    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into().into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => {
                write!(f, "{e}")?;
                let mut src = e.source();
                while let Some(s) = src {
                    write!(f, ": {s}")?;
                    src = s.source();
                }
                Ok(())
            }
        }
    }
}

impl<E: std::error::Error + Send + Sync + 'static> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Data(Box::new(e))
    }
}

#[derive(Debug, Parser)]
#[command(name = "potp", version, about = "Passage-of-time perception from wearable biosignals")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArg {
    /// Run directory.
    #[arg(long = "in", alias = "out", value_name = "DIR")]
    run: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Run directory to create or update.
    #[arg(long = "out", alias = "in", value_name = "DIR")]
    run: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// Fixed upper threshold instead of the fitted one.
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<f64>,
    /// Fixed lower threshold instead of the fitted one.
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<f64>,
    /// Count rest segments as neutral.
    #[arg(long)]
    rest_as_neutral: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort.
    Synth {
        #[command(flatten)]
        out: OutArg,
        /// paper_like, separable or null.
        #[arg(long)]
        scenario: Option<Scenario>,
        #[arg(long)]
        subjects: Option<usize>,
    },
    /// Copy recorded sessions into a run directory.
    Ingest {
        #[command(flatten)]
        out: OutArg,
        /// Directory holding `<subject>/manifest.json` sessions.
        #[arg(long, value_name = "DIR")]
        sessions: Option<PathBuf>,
    },
    /// Extract window features.
    Features {
        #[command(flatten)]
        run: RunArg,
        /// Print the feature catalog and exit.
        #[arg(long)]
        list: bool,
        #[arg(long, value_name = "SECONDS")]
        window_len: Option<f64>,
        /// Leave out a feature group (SKT, EDA, RSP, ECG, PPG). Repeatable.
        #[arg(long, value_name = "GROUP")]
        disable: Vec<String>,
    },
    /// Fit POTP thresholds on training subjects and label every window.
    Label {
        #[command(flatten)]
        run: RunArg,
        #[command(flatten)]
        label: LabelArgs,
    },
    /// One-tailed t-tests of t_rel per state class.
    Stats {
        #[command(flatten)]
        run: RunArg,
        #[arg(long)]
        rest_as_neutral: bool,
    },
    /// Run the model pipeline and save the final model.
    Train {
        #[command(flatten)]
        run: RunArg,
        /// state3 or potp2.
        #[arg(long)]
        task: Option<Task>,
        #[arg(long, value_name = "TRIALS")]
        tpe_budget: Option<usize>,
        /// Comma-separated candidate families, e.g. RF,SVM.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
        /// Skip recursive feature elimination.
        #[arg(long)]
        no_rfecv: bool,
        #[command(flatten)]
        label: LabelArgs,
    },
    /// Score a saved model on the held-out subjects.
    Evaluate {
        #[command(flatten)]
        run: RunArg,
        #[arg(long)]
        task: Option<Task>,
        /// Model file instead of the run's own.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
    },
    /// Shapley attributions of a saved model on held-out rows.
    Explain {
        #[command(flatten)]
        run: RunArg,
        #[arg(long)]
        task: Option<Task>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        background: Option<usize>,
    },
    /// Write plot-ready CSVs from earlier outputs.
    Report {
        #[command(flatten)]
        run: RunArg,
    },
}

fn apply_label(cfg: &mut RunConfig, a: &LabelArgs) {
    if a.upper.is_some() {
        cfg.thresholds.upper = a.upper;
    }
    if a.lower.is_some() {
        cfg.thresholds.lower = a.lower;
    }
    cfg.rest_as_neutral |= a.rest_as_neutral;
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn run_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    flag.or_else(|| cfg.run_dir.clone())
        .ok_or_else(|| CliError::Usage("no run directory: pass --in/--out or set \"run_dir\" in the config".into()))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    set(&mut cfg.seed, cli.seed.map(Some));
    match cli.command {
        Command::Synth { out, scenario, subjects } => {
            set(&mut cfg.scenario, scenario);
            set(&mut cfg.subjects, subjects);
            let dir = run_dir(&cfg, out.run)?;
            cfg.validate()?;
            commands::synth(&RunDir::create(&dir)?, &cfg)
        }
        Command::Ingest { out, sessions } => {
            set(&mut cfg.sessions_dir, sessions.map(Some));
            let dir = run_dir(&cfg, out.run)?;
            cfg.validate()?;
            commands::ingest(&RunDir::create(&dir)?, &cfg)
        }
        Command::Features {
            run,
            list,
            window_len,
            disable,
        } => {
            if list {
                return commands::list_features();
            }
            set(&mut cfg.window_len_s, window_len);
            cfg.disabled_groups.extend(disable);
            let dir = run_dir(&cfg, run.run)?;
            cfg.validate()?;
            commands::features(&RunDir::open(&dir)?, &cfg)
        }
        Command::Label { run, label } => {
            apply_label(&mut cfg, &label);
            let dir = run_dir(&cfg, run.run)?;
            cfg.validate()?;
            commands::label(&RunDir::open(&dir)?, &cfg)
        }
        Command::Stats { run, rest_as_neutral } => {
            cfg.rest_as_neutral |= rest_as_neutral;
            let dir = run_dir(&cfg, run.run)?;
            cfg.validate()?;
            commands::stats(&RunDir::open(&dir)?, &cfg)
        }
        Command::Train {
            run,
            task,
            tpe_budget,
            algorithms,
            no_rfecv,
            label,
        } => {
            set(&mut cfg.task, task);
            set(&mut cfg.tpe_budget, tpe_budget.map(Some));
            set(&mut cfg.algorithms, algorithms);
            cfg.rfecv &= !no_rfecv;
            apply_label(&mut cfg, &label);
            let dir = run_dir(&cfg, run.run)?;
            cfg.validate()?;
            commands::train(&RunDir::open(&dir)?, &cfg)
        }
        Command::Evaluate { run, task, model } => {
            set(&mut cfg.task, task);
            let dir = run_dir(&cfg, run.run)?;
            cfg.validate()?;
            commands::evaluate_cmd(&RunDir::open(&dir)?, &cfg, model.as_deref())
        }
        Command::Explain {
            run,
            task,
            rows,
            samples,
            background,
        } => {
            set(&mut cfg.task, task);
            set(&mut cfg.explain.rows, rows);
            set(&mut cfg.explain.samples, samples);
            set(&mut cfg.explain.background, background);
            let dir = run_dir(&cfg, run.run)?;
            cfg.validate()?;
            commands::explain(&RunDir::open(&dir)?, &cfg)
        }
        Command::Report { run } => {
            let dir = run_dir(&cfg, run.run)?;
            cfg.validate()?;
            commands::report(&RunDir::open(&dir)?, &cfg)
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn with_threads(n: Option<usize>, f: impl FnOnce() -> Result<(), CliError> + Send) -> Result<(), CliError> {
    match n {
        None => f(),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    init_logging(cli.verbose);
    let threads = cli.threads;
    match with_threads(threads, || execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
