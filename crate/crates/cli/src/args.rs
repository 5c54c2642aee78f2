use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pla",
    version,
    about = "Delivery ratio, latency and jitter of reliable pub/sub over lossy links"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the analytic model for one scenario or a scenario file.
    Analyze(AnalyzeArgs),
    /// Run the discrete-event simulator.
    Simulate(SimulateArgs),
    /// Evaluate every point of a parameter grid.
    Sweep(SweepArgs),
    /// Compare against the 270-row reference table.
    Validate(ValidateArgs),
    /// Summarize the reference table's published error columns.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Analytic,
    Simulate,
    Both,
}

impl Mode {
    pub fn analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }

    pub fn simulate(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Timeline {
    Nominal,
    Drifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Jitter {
    PerMessage,
    PhaseMeans,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Message size over MTU.
    #[arg(long)]
    pub m: Option<f64>,
    /// Publish period in ms.
    #[arg(long)]
    pub r: Option<f64>,
    /// Heartbeat period in ms.
    #[arg(long)]
    pub h: Option<f64>,
    /// Per-packet delivery probability.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 1500)]
    pub mtu: u32,
    /// Extra heartbeat period on top of h, in ms.
    #[arg(long, default_value_t = 0.2)]
    pub hb_extra: f64,
    /// JSON file with a `scenario` or `grid` object and optional `solver`.
    #[arg(long, conflicts_with_all = ["m", "r", "h", "p"])]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Convergence tolerance of the steady-state iteration.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Initial truncation bound for the unacked count.
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long, value_enum)]
    pub timeline: Option<Timeline>,
    #[arg(long, value_enum)]
    pub jitter: Option<Jitter>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Messages per run.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Stop at the last publish instead of draining the backlog.
    #[arg(long)]
    pub no_drain: bool,
    /// Delays up to this many ms count as on time.
    #[arg(long, default_value_t = 0.0)]
    pub zero_threshold: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Write per-message delays here, one per line.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON grid file.
    pub grid: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Analytic)]
    pub mode: Mode,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Long-format (scenario, metric, value) CSV for plotting.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Reference CSV; defaults to $PLA_DATA_DIR/appendix_b.csv, then the
    /// bundled copy.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Analytic)]
    pub mode: Mode,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}
