use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scoutcast::evaluation::EvaluationReport;
use scoutcast::experiment::{Experiment, ExperimentConfig};
use scoutcast::Error;

#[derive(Parser)]
#[command(name = "scoutcast", version, about = "Forecast one-year player development on simulated league data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML, or JSON with a .json extension).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print errors as one JSON object on stderr.
    #[arg(long)]
    json_errors: bool,
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args, Clone)]
struct ModelFilter {
    /// Restrict to these model names (repeatable); all configured models by default.
    #[arg(long = "model")]
    models: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the league and build both datasets.
    Simulate(Common),
    /// Rebuild the datasets from stored match histories.
    Features(Common),
    /// Tune hyperparameters with expanding-window cross-validation.
    Tune {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        filter: ModelFilter,
    },
    /// Fit the configured models on the full training set.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        filter: ModelFilter,
    },
    /// Predict the test set, compute intervals and write the report.
    Evaluate(Common),
    /// Rebuild the report from stored predictions and print a summary.
    Report(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c) | Command::Features(c) | Command::Evaluate(c) | Command::Report(c) => c,
            Command::Tune { common, .. } | Command::Train { common, .. } => common,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        2
    } else {
        3
    }
}

fn experiment(c: &Common) -> Result<Experiment, Error> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    Experiment::new(cfg, c.out.clone())
}

fn filter(f: &ModelFilter) -> Option<&[String]> {
    (!f.models.is_empty()).then_some(f.models.as_slice())
}

fn run(cmd: &Command) -> Result<(), Error> {
    let exp = experiment(cmd.common())?;
    match cmd {
        Command::Simulate(_) => exp.simulate()?,
        Command::Features(_) => exp.features()?,
        Command::Tune { filter: f, .. } => {
            for (name, trace) in exp.tune(filter(f))? {
                println!("{name}\tbest cv rmse {:.4}\t{}", trace.best_loss, serde_json::to_string(&trace.best_config)?);
            }
        }
        Command::Train { filter: f, .. } => exp.train(filter(f))?,
        Command::Evaluate(_) => print_summary(&exp.evaluate()?),
        Command::Report(_) => print_summary(&exp.report()?),
    }
    Ok(())
}

fn print_summary(r: &EvaluationReport) {
    print!("{}", r.global_tsv());
    for m in &r.models {
        let groups: Vec<String> = m
            .subgroups
            .iter()
            .map(|s| match s.rmse {
                Some(v) => format!("{} {v:.3} (n={})", s.name, s.n),
                None => format!("{} - (n=0)", s.name),
            })
            .collect();
        println!("{}\t{}", m.model, groups.join("\t"));
    }
    for c in &r.uncertainty {
        println!(
            "{}\t{}\tcoverage {:.3}\tmean width {:.3}\tn={}",
            c.model, c.method, c.coverage, c.mean_width, c.n
        );
    }
}

fn report_error(e: &Error, json: bool) {
    if json {
        let (field, message) = match e {
            Error::Config { field, message } => (Some(field.clone()), message.clone()),
            other => (None, other.to_string()),
        };
        let body = serde_json::json!({
            "error": {
                "kind": if e.is_config_error() { "config" } else { "data" },
                "field": field,
                "message": message,
                "exit_code": exit_code(e),
            }
        });
        eprintln!("{body}");
    } else {
        eprintln!("error: {e}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.command.common();
    let level = match common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e, common.json_errors);
            ExitCode::from(exit_code(&e))
        }
    }
}
