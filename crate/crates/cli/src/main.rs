use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rapf_core::config::{AvoidanceMode, ScenarioConfig};
use rapf_core::sim::{compute_metrics, plan_for, run, Metrics, SimTrace};
use rapf_core::{plot, trace, Error};

/// Process exit codes. The numbering is stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Exit {
    Ok = 0,
    /// The run finished without reaching the goal within the time budget.
    GoalNotReached = 1,
    /// Bad command line, or an input file could not be read.
    Usage = 2,
    /// The scenario file is not valid TOML.
    Parse = 3,
    /// A field is missing, mistyped or out of range.
    Schema = 4,
    /// Fields are individually valid but inconsistent.
    Physical = 5,
    /// An output file could not be written.
    Write = 6,
}

struct Failure {
    exit: Exit,
    error: anyhow::Error,
}

impl Failure {
    fn new(exit: Exit, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            exit,
            error: error.into(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "rapf", version, about = "Run rotational-APF obstacle avoidance scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and report the first problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate one scenario.
    Run {
        #[command(flatten)]
        common: RunArgs,
        /// Overrides the mode given in the scenario file.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Simulate a scenario in both modes and print the metrics side by side.
    Compare {
        #[command(flatten)]
        common: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "RAPF_OUT_DIR", default_value = "rapf-out")]
    out: PathBuf,
    /// Files to write.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Emit::Trace, Emit::Metrics])]
    emit: Vec<Emit>,
    /// Overrides the sensor noise seed of the scenario file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Conventional,
    Modified,
}

impl From<ModeArg> for AvoidanceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Conventional => AvoidanceMode::Conventional,
            ModeArg::Modified => AvoidanceMode::Modified,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Trace,
    Metrics,
    Plot,
}

fn load(path: &Path) -> CliResult<ScenarioConfig> {
    ScenarioConfig::load(path).map_err(|e| {
        let exit = match e {
            Error::Parse(_) => Exit::Parse,
            Error::Schema { .. } => Exit::Schema,
            Error::Physical { .. } => Exit::Physical,
            _ => Exit::Usage,
        };
        Failure::new(exit, anyhow!(e).context(format!("cannot load {}", path.display())))
    })
}

fn simulate(config: &ScenarioConfig) -> CliResult<(SimTrace, Metrics)> {
    let sim_failed = |e: Error| Failure::new(Exit::Physical, anyhow!(e).context("simulation failed"));
    let trace = run(config).map_err(sim_failed)?;
    let metrics = compute_metrics(&trace, config).map_err(sim_failed)?;
    Ok((trace, metrics))
}

fn write_outputs(config: &ScenarioConfig, out: &Path, emit: &[Emit], trace: &SimTrace, metrics: &Metrics) -> CliResult<()> {
    let write_failed = |e: anyhow::Error| Failure::new(Exit::Write, e);
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(write_failed)?;
    let stem = format!("{}_{}", config.name, config.mode);
    for kind in [Emit::Trace, Emit::Metrics, Emit::Plot] {
        if !emit.contains(&kind) {
            continue;
        }
        let (path, result) = match kind {
            Emit::Trace => {
                let path = out.join(format!("{stem}.trace.csv"));
                let result = fs::File::create(&path)
                    .map_err(Error::from)
                    .and_then(|f| trace::write_trace(std::io::BufWriter::new(f), trace))
                    .map_err(anyhow::Error::from);
                (path, result)
            }
            Emit::Metrics => {
                let path = out.join(format!("{stem}.metrics.toml"));
                let result = trace::metrics_to_toml(metrics)
                    .map_err(anyhow::Error::from)
                    .and_then(|text| fs::write(&path, text).map_err(anyhow::Error::from));
                (path, result)
            }
            Emit::Plot => {
                let path = out.join(format!("{stem}.svg"));
                let result = plan_for(config)
                    .map_err(anyhow::Error::from)
                    .and_then(|plan| {
                        let svg = plot::render_svg(&config.name, &config.scene, &plan, trace);
                        fs::write(&path, svg).map_err(anyhow::Error::from)
                    });
                (path, result)
            }
        };
        result
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(write_failed)?;
    }
    Ok(())
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "-".into(), |t| format!("{t:.2}"))
}

fn summary(config: &ScenarioConfig, m: &Metrics) -> String {
    format!(
        "{} [{}] goal_reached={} time_to_goal={} path_length={:.2} min_clearance={:.2} oscillations={} stuck={} activations={}",
        config.name,
        config.mode,
        m.goal_reached,
        fmt_time(m.time_to_goal),
        m.path_length,
        m.min_clearance,
        m.oscillation_count,
        m.stuck,
        m.activations
    )
}

fn with_seed(config: ScenarioConfig, seed: Option<u64>) -> ScenarioConfig {
    match seed {
        Some(s) => config.with_seed(s),
        None => config,
    }
}

fn cmd_validate(path: &Path) -> CliResult<Exit> {
    let config = load(path)?;
    println!("{}: valid ({} waypoints, {} obstacles)", path.display(), config.waypoints.len(), config.scene.obstacles.len());
    Ok(Exit::Ok)
}

fn cmd_run(args: &RunArgs, mode: Option<ModeArg>) -> CliResult<Exit> {
    let mut config = with_seed(load(&args.config)?, args.seed);
    if let Some(m) = mode {
        config = config.with_mode(m.into());
    }
    let (trace, metrics) = simulate(&config)?;
    write_outputs(&config, &args.out, &args.emit, &trace, &metrics)?;
    println!("{}", summary(&config, &metrics));
    Ok(if metrics.goal_reached { Exit::Ok } else { Exit::GoalNotReached })
}

fn cmd_compare(args: &RunArgs) -> CliResult<Exit> {
    let base = with_seed(load(&args.config)?, args.seed);
    let configs = [AvoidanceMode::Modified, AvoidanceMode::Conventional].map(|m| base.clone().with_mode(m));
    let results: Vec<CliResult<(SimTrace, Metrics)>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || simulate(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    // written one after the other so the directory sees a single writer
    for (config, result) in configs.iter().zip(results) {
        let (trace, metrics) = result?;
        write_outputs(config, &args.out, &args.emit, &trace, &metrics)?;
        rows.push((config.mode, metrics));
    }
    println!(
        "{:<13} {:>12} {:>12} {:>12} {:>14} {:>12} {:>17}",
        "mode", "goal_reached", "time_to_goal", "path_length", "min_clearance", "oscillations", "returned_to_plan"
    );
    for (mode, m) in &rows {
        println!(
            "{:<13} {:>12} {:>12} {:>12.2} {:>14.2} {:>12} {:>17}",
            mode.to_string(),
            m.goal_reached,
            fmt_time(m.time_to_goal),
            m.path_length,
            m.min_clearance,
            m.oscillation_count,
            m.returned_to_plan
        );
    }
    Ok(Exit::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { config } => cmd_validate(config),
        Command::Run { common, mode } => cmd_run(common, *mode),
        Command::Compare { common } => cmd_compare(common),
    };
    match result {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.exit as u8)
        }
    }
}
