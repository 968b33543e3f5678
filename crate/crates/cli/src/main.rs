//! `tripbench` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 domain error (bad input files,
//! infeasible requests, failed agents).

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser, Serialize)]
#[command(name = "tripbench", version, about = "Travel-planning benchmark and task-decomposition runner")]
pub struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, global = true, env = "TRIPBENCH_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for per-task work over suites.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Sidecar log receiving the configuration and a timestamp of each run
    /// (default: <out-dir>/tripbench.log).
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Generate worlds, tasks, suites and faults.
    #[command(subcommand)]
    Gen(Gen),
    /// Plan an itinerary with the exact or heuristic solver.
    Solve(SolveArgs),
    /// Execute an itinerary and write the trace.
    Simulate(SimulateArgs),
    /// Score an itinerary against a calibration.
    Score(ScoreArgs),
    /// Derive the efficiency band from sampled valid itineraries.
    Calibrate(CalibrateArgs),
    /// Run the decomposition loop or the direct baseline on tasks.
    Run(RunArgs),
    /// Aggregate run results into report files.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Gen {
    /// A random world.
    World {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// One task with a witness itinerary, optionally calibrated.
    Task {
        #[arg(long)]
        world: PathBuf,
        /// 1 inter-city, 2 intra-city, 3 combined.
        #[arg(long = "type", value_parser = clap::value_parser!(u8).range(1..=3))]
        task_type: u8,
        #[command(flatten)]
        mix: MixArgs,
        /// Also write `<out stem>.calib.json` from this many samples.
        #[arg(long, default_value_t = 0)]
        calibrate: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// A suite directory sharing one world.
    Suite {
        #[command(flatten)]
        world: WorldArgs,
        #[command(flatten)]
        mix: MixArgs,
        /// Total tasks, split across types in the ratio 96:95:173.
        #[arg(long, conflicts_with = "counts")]
        size: Option<usize>,
        /// Tasks per type, as `t1,t2,t3`.
        #[arg(long, value_parser = parse_counts)]
        counts: Option<[usize; 3]>,
        #[arg(long, default_value = "suite")]
        name: String,
        /// Calibrate every task from this many samples.
        #[arg(long, default_value_t = 0)]
        calibrate: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// A suite of combined tasks whose planned ticket is sold out.
    FaultSuite {
        #[command(flatten)]
        world: WorldArgs,
        #[command(flatten)]
        mix: MixArgs,
        #[arg(long, default_value_t = 10)]
        size: usize,
        #[arg(long, default_value = "faults")]
        name: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// A faulted copy of a world that breaks the task's witness.
    Fault {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[arg(long, value_enum)]
        kind: FaultKind,
        /// Which eligible witness element to target.
        #[arg(long, default_value_t = 0)]
        which: usize,
        /// Shift for `shift-window`.
        #[arg(long, default_value_t = 120)]
        minutes: u32,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn parse_counts(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s.split(',').map(|x| x.trim().parse().map_err(|e| format!("`{x}`: {e}"))).collect::<Result<_, _>>()?;
    <[usize; 3]>::try_from(v).map_err(|v| format!("expected three counts, got {}", v.len()))
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum FaultKind {
    RemoveTrip,
    Sellout,
    ShiftWindow,
}

#[derive(Debug, Args, Serialize)]
pub struct WorldArgs {
    #[arg(long, default_value_t = 4)]
    pub cities: usize,
    #[arg(long, default_value_t = 3)]
    pub attractions: usize,
    #[arg(long, default_value_t = 1)]
    pub hotels: usize,
    #[arg(long, default_value_t = 3)]
    pub trips: usize,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 3)]
    pub days: u32,
    #[arg(long, default_value = "07-01")]
    pub start_date: String,
}

#[derive(Debug, Args, Serialize)]
pub struct MixArgs {
    /// JSON file with constraint probabilities; defaults otherwise.
    #[arg(long)]
    pub mix: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: SolveMethod,
    /// Node budget for the exact search.
    #[arg(long, default_value_t = tripbench::solver::DEFAULT_NODE_BUDGET)]
    pub node_budget: u64,
    /// Decode evaluations for the heuristic.
    #[arg(long, default_value_t = tripbench::solver::HEURISTIC_EVALS)]
    pub evals: u64,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum SolveMethod {
    Exact,
    Heuristic,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long)]
    pub task: PathBuf,
    /// Itinerary in the text grammar or as a JSON action list.
    #[arg(long)]
    pub itinerary: PathBuf,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long)]
    pub itinerary: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    /// Also write the score here.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long)]
    pub task: PathBuf,
    /// Number of valid itineraries to sample.
    #[arg(short = 'n', long = "samples", default_value_t = 50)]
    pub n: usize,
    /// Calibration file; the samples go next to it as `<stem>.samples.json`.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    /// Suite manifest; alternatively give --world and --task.
    #[arg(long, conflicts_with_all = ["world", "task"], required_unless_present_all = ["world", "task"])]
    pub suite: Option<PathBuf>,
    #[arg(long, requires = "task")]
    pub world: Option<PathBuf>,
    #[arg(long, requires = "world")]
    pub task: Option<PathBuf>,
    /// Calibration for a single task run.
    #[arg(long, requires = "task")]
    pub calib: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dynamic")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "solver")]
    pub agent: AgentKind,
    /// Program for `--agent external`, spoken to over stdin/stdout.
    #[arg(long, required_if_eq("agent", "external"))]
    pub agent_cmd: Option<String>,
    /// Argument for the external agent; repeatable.
    #[arg(long = "agent-arg", allow_hyphen_values = true)]
    pub agent_args: Vec<String>,
    /// Skill library to start every task from.
    #[arg(long)]
    pub skills: Option<PathBuf>,
    /// Samples used to calibrate tasks that come without a calibration.
    #[arg(long, default_value_t = 50)]
    pub calib_n: usize,
    /// Method name recorded in the results (default: mode, plus agent when
    /// not the solver).
    #[arg(long)]
    pub label: Option<String>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Dynamic,
    Static,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Solver,
    /// The solver agent with the last action of every answer dropped.
    Impaired,
    External,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// `results.json` files written by `run`; all from the same suite.
    #[arg(long = "results", required = true, num_args = 1..)]
    pub results: Vec<PathBuf>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

impl Cli {
    pub fn output(&self, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_dir.join(default_name))
    }
}

fn write_sidecar(cli: &Cli) -> std::io::Result<()> {
    use std::io::Write;
    let path = cli.log.clone().unwrap_or_else(|| cli.out_dir.join("tripbench.log"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let line = serde_json::json!({
        "unix_time": secs,
        "version": env!("CARGO_PKG_VERSION"),
        "argv": std::env::args().collect::<Vec<_>>(),
        "config": cli,
    });
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")
}

pub fn ensure_parent(p: &Path) -> std::io::Result<()> {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => std::fs::create_dir_all(d),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(1);
    }
    if let Err(e) = write_sidecar(&cli) {
        eprintln!("error: cannot write the run log: {e}");
        return ExitCode::from(2);
    }
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
