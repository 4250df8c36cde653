use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use belief_bound::explorer::export_dot;
use belief_bound::model::parse_pomdp;
use belief_bound::numeric::parse_rational;
use belief_bound::report::{
    run_analyze, run_sweep, AnalysisError, AnalyzeOptions, Direction, Objective,
};
use belief_bound::{PomdpModel, Rational};

const THREADS_ENV: &str = "BELIEF_BOUND_THREADS";

#[derive(Parser)]
#[command(
    name = "belief-bound",
    version,
    about = "Sound bounds for partially observable MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a bound for one model and optionally check a threshold.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Threshold to refute, e.g. 3/4.
        #[arg(long, value_parser = parse_threshold)]
        lambda: Option<Rational>,
        /// Write the explored abstraction as GraphViz.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Bound as a function of the number of explored beliefs, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        budgets: Vec<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = DirectionArg::Max)]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Reward)]
    objective: ObjectiveArg,
    /// Goal observation; overrides the goals declared in the model. Repeatable.
    #[arg(long = "goal-obs")]
    goal_obs: Vec<String>,
    #[arg(long)]
    clipping: bool,
    #[arg(long, default_value_t = 2)]
    eta: u32,
    #[arg(long, default_value_t = 1.0)]
    size_factor: f64,
    #[arg(long, default_value_t = 1e-6)]
    precision: f64,
    /// Report zero timings for reproducible output.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Max,
    Min,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Reward,
    Reachability,
}

fn parse_threshold(text: &str) -> Result<Rational, String> {
    parse_rational(text).ok_or_else(|| format!("not a rational number: {text}"))
}

fn threads() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(cap) if cap > 0 => cap.min(available),
        _ => available,
    }
}

fn options(common: &Common, threshold: Option<Rational>) -> AnalyzeOptions {
    AnalyzeOptions {
        direction: match common.direction {
            DirectionArg::Max => Direction::Max,
            DirectionArg::Min => Direction::Min,
        },
        objective: match common.objective {
            ObjectiveArg::Reward => Objective::Reward,
            ObjectiveArg::Reachability => Objective::Reachability,
        },
        goal_observations: common.goal_obs.clone(),
        threshold,
        clipping: common.clipping,
        eta: common.eta,
        size_factor: common.size_factor,
        precision: common.precision,
        threads: threads(),
        omit_timing: common.omit_timing,
    }
}

fn load(path: &Path) -> Result<PomdpModel, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_pomdp(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn model_id(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn failure(err: AnalysisError) -> (u8, String) {
    let code = match err {
        AnalysisError::Config(_) | AnalysisError::Model(_) => 2,
        _ => 3,
    };
    (code, err.to_string())
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    match cli.command {
        Command::Analyze {
            common,
            lambda,
            dot,
            report,
        } => {
            let model = load(&common.model).map_err(|e| (2, e))?;
            let out = run_analyze(&model, &model_id(&common.model), &options(&common, lambda))
                .map_err(failure)?;
            if let Some(path) = dot {
                std::fs::write(&path, export_dot(&out.abstraction))
                    .map_err(|e| (3, format!("{}: {e}", path.display())))?;
            }
            write_or_print(report.as_deref(), &out.report.to_json_string()).map_err(|e| (3, e))
        }
        Command::Sweep {
            common,
            budgets,
            output,
        } => {
            let model = load(&common.model).map_err(|e| (2, e))?;
            let csv = run_sweep(&model, &options(&common, None), &budgets).map_err(failure)?;
            write_or_print(output.as_deref(), &csv).map_err(|e| (3, e))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
