use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sdmimo::channel::write_channel_csv;
use sdmimo::harness::{
    emit_results, run_convergence, run_experiment_with, run_steering_scan, trial_rng, Execution, ExperimentConfig,
    Scenario, SerCurve,
};
use sdmimo::validation::{oracle_names, run_suite, ValidationSettings};

#[derive(Parser)]
#[command(name = "sdmimo", version, about = "Sigma-delta massive MIMO detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SER of every configured detector along the sweep grid.
    SerSweep(RunArgs),
    /// SER after each detector iteration at a single operating point.
    Convergence(RunArgs),
    /// SER against the Σ∆ steering angle (`sweep = "steering_deg"`).
    SteeringScan(RunArgs),
    /// Run the numerical oracle suite and print a pass/fail table.
    Validate(ValidateArgs),
    /// Write one channel realization as CSV.
    ChannelDump(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration, or a JSON sidecar from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set snr_db=[0,6,12]`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Run only the named oracle. Repeatable.
    #[arg(long)]
    only: Vec<String>,
    /// `seed=N` or `quantizer_step=X`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// List the oracles and exit.
    #[arg(long)]
    list: bool,
}

/// Problems with the command line or configuration; these exit with status 2.
#[derive(Debug)]
struct ConfigProblem(String);

impl std::fmt::Display for ConfigProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigProblem {}

fn config_problem(e: sdmimo::Error) -> anyhow::Error {
    match e {
        sdmimo::Error::Config(_) | sdmimo::Error::Io { .. } => ConfigProblem(e.to_string()).into(),
        other => other.into(),
    }
}

fn load_config(args: &RunArgs, command: &str) -> Result<ExperimentConfig> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path, &overrides),
        None => ExperimentConfig::from_overrides(&overrides),
    }
    .map_err(config_problem)?;
    if config.experiment == ExperimentConfig::default().experiment {
        config.experiment = command.to_string();
    }
    Ok(config)
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(ConfigProblem("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting the worker pool")?;
    }
    Ok(())
}

fn print_curve(curve: &SerCurve) {
    println!(
        "{:>12}  {:<18} {:>10} {:>10} {:>11}  95% interval",
        curve.sweep.name(),
        "detector",
        "errors",
        "symbols",
        "SER"
    );
    for p in &curve.points {
        println!(
            "{:>12}  {:<18} {:>10} {:>10} {:>11.4e}  [{:.3e}, {:.3e}]",
            p.sweep_value,
            p.detector.name(),
            p.errors,
            p.symbols,
            p.ser,
            p.ci_low,
            p.ci_high
        );
    }
    let failures: u64 = curve.points.iter().map(|p| p.failures).sum();
    if failures > 0 {
        eprintln!("warning: {failures} detector failures were counted as errors");
    }
}

fn run(args: &RunArgs, command: &str) -> Result<()> {
    let config = load_config(args, command)?;
    set_threads(args.threads)?;
    let exec = Execution::Parallel;
    let curve = match command {
        "convergence" => run_convergence(&config, exec),
        "steering-scan" => run_steering_scan(&config, exec),
        _ => run_experiment_with(&config, exec),
    }
    .map_err(config_or_runtime)?;
    print_curve(&curve);
    let files = emit_results(&curve, &config, &args.out)?;
    println!("wrote {} and {}", files.csv.display(), files.json.display());
    Ok(())
}

/// Configuration errors found while resolving sweep points still exit with 2.
fn config_or_runtime(e: sdmimo::Error) -> anyhow::Error {
    match e {
        sdmimo::Error::Config(_) => ConfigProblem(e.to_string()).into(),
        other => other.into(),
    }
}

fn channel_dump(args: &RunArgs) -> Result<()> {
    let config = load_config(args, "channel")?;
    let scenario = Scenario::first(&config).map_err(config_or_runtime)?;
    let channel = scenario.draw_channel(&mut trial_rng(config.seed, 0))?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join(format!("{}-{}.csv", config.experiment, config.seed));
    write_channel_csv(&path, &channel.matrix)?;
    println!(
        "wrote {} ({}x{} channel)",
        path.display(),
        channel.matrix.nrows(),
        channel.matrix.ncols()
    );
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<bool> {
    if args.list {
        for (name, description) in oracle_names() {
            println!("{name:<22} {description}");
        }
        return Ok(true);
    }
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let settings = ValidationSettings::from_overrides(&overrides).map_err(config_problem)?;
    let reports = run_suite(&args.only, &settings).map_err(config_problem)?;
    println!("{:<22} {:<6} {:>9}  detail", "oracle", "result", "time");
    for r in &reports {
        println!(
            "{:<22} {:<6} {:>8.2}s  {}",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.elapsed.as_secs_f64(),
            r.detail
        );
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} of {} oracles passed", reports.len() - failed, reports.len());
    Ok(failed == 0)
}

fn exit_code(err: &anyhow::Error) -> ExitCode {
    if err.downcast_ref::<ConfigProblem>().is_some() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::SerSweep(a) => run(a, "ser-sweep").map(|_| true),
        Command::Convergence(a) => run(a, "convergence").map(|_| true),
        Command::SteeringScan(a) => run(a, "steering-scan").map(|_| true),
        Command::ChannelDump(a) => channel_dump(a).map(|_| true),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
