use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use riskfuse::cohort::Task;
use riskfuse_cli::{CliError, RunConfig, Workspace};

#[derive(Parser)]
#[command(name = "riskfuse", version, about = "Readmission and mortality risk from claims sequences")]
struct Cli {
    /// JSON run configuration; the bundled demo when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Root seed; overrides the seeds inside the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_task)]
    task: Option<Task>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic claims population.
    Generate,
    /// Select index events and apply exclusions.
    Cohort,
    /// Build sequences and domain vectors.
    Featurize,
    /// Split patients and grid-search every model variant.
    Train,
    /// Fit calibrators on the calibration fold.
    Calibrate,
    /// Score the test fold.
    Evaluate,
    /// Comparison table and subgroup breakdown.
    Report,
    /// Surrogate feature importance for the primary model.
    Importance,
    /// Run every stage that is not up to date.
    Pipeline,
    /// Print the effective configuration.
    ShowConfig,
}

fn parse_task(s: &str) -> Result<Task, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown task `{s}` (expected readmission or mortality)"))
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p).map_err(|e| CliError::Invalid(vec![e]))?,
        None => RunConfig::demo(),
    };
    if let Some(d) = &cli.output_dir {
        cfg.paths.output_dir = d.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.task {
        cfg.task = t;
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    if let Some(n) = cfg.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already set up: {e}");
        }
    }
    let stage = match cli.command {
        Command::ShowConfig => {
            let mut cfg = cfg;
            cfg.resolve_seeds();
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
            return Ok(());
        }
        Command::Pipeline => {
            let ws = Workspace::new(cfg)?;
            let ran = ws.pipeline()?;
            if ran.is_empty() {
                println!("everything up to date in {}", ws.out.display());
            } else {
                println!("ran {} in {}", ran.join(", "), ws.out.display());
            }
            return Ok(());
        }
        Command::Generate => "generate",
        Command::Cohort => "cohort",
        Command::Featurize => "featurize",
        Command::Train => "train",
        Command::Calibrate => "calibrate",
        Command::Evaluate => "evaluate",
        Command::Report => "report",
        Command::Importance => "importance",
    };
    let ws = Workspace::new(cfg)?;
    ws.run(stage)?;
    println!("{stage}: wrote {}", ws.stage_dir(stage).display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
