use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use harq_core::{IrThreshold, ProtocolKind};

#[derive(Debug, Parser)]
#[command(
    name = "harq",
    version,
    about = "Optimal HARQ power allocation at ultra-reliable targets"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Flat TOML file whose keys mirror the long flag names; flags given on
    /// the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for sweeps, simulations and suites.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal per-round powers for one configuration.
    Allocate(AllocateArgs),
    /// Allocation or outage data over a grid, as CSV or JSON.
    Sweep(SweepArgs),
    /// Monte Carlo packet-drop estimate for a schedule.
    Simulate(SimulateArgs),
    /// Numeric certification suites.
    Verify(VerifyArgs),
}

/// `--rate R`, or `--blocklength n --nats K` with `R = K / n`.
#[derive(Debug, Clone, Args)]
pub struct RateArgs {
    #[arg(long, conflicts_with_all = ["blocklength", "nats"], required_unless_present = "blocklength")]
    pub rate: Option<f64>,
    #[arg(long, requires = "nats")]
    pub blocklength: Option<u32>,
    #[arg(long, requires = "blocklength")]
    pub nats: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    Arq,
    Cc,
    Ir,
}

impl From<Protocol> for ProtocolKind {
    fn from(p: Protocol) -> Self {
        match p {
            Protocol::Arq => ProtocolKind::Arq,
            Protocol::Cc => ProtocolKind::Cc,
            Protocol::Ir => ProtocolKind::Ir,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Threshold {
    #[default]
    PerRound,
    Parent,
}

impl From<Threshold> for IrThreshold {
    fn from(t: Threshold) -> Self {
        match t {
            Threshold::PerRound => IrThreshold::PerRoundRate,
            Threshold::Parent => IrThreshold::ParentRate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecordFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[arg(long)]
    pub protocol: Protocol,
    #[arg(long)]
    pub rounds: usize,
    #[command(flatten)]
    pub rate: RateArgs,
    /// Packet-drop target in (0, 1).
    #[arg(long)]
    pub target: f64,
    #[arg(long, value_enum, default_value_t)]
    pub ir_threshold: Threshold,
    /// Report the average power divided by the number of rounds.
    #[arg(long)]
    pub normalize_per_transmission: bool,
    /// Exit with status 3 when a power falls outside the high-SNR region.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: RecordFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig3,
    Fig4,
    Fig6,
    Fig8,
    Custom,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub figure: Figure,
    /// Overrides the preset's protocols.
    #[arg(long, value_delimiter = ',')]
    pub protocols: Vec<Protocol>,
    #[arg(long, value_delimiter = ',')]
    pub rounds: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub rate: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub blocklength: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    pub nats: Vec<f64>,
    /// Explicit targets; otherwise the preset's decade grid.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub ir_threshold: Threshold,
    #[arg(long)]
    pub normalize_per_transmission: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Decision {
    Exact,
    Asymptotic,
    Fbl,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub protocol: Protocol,
    /// Linear per-round SNRs.
    #[arg(
        long,
        value_delimiter = ',',
        required_unless_present = "from_allocation",
        conflicts_with = "from_allocation"
    )]
    pub powers: Vec<f64>,
    /// Simulate the optimal schedule for `--rounds` and `--target`.
    #[arg(long, requires_all = ["rounds", "target"])]
    pub from_allocation: bool,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub target: Option<f64>,
    #[command(flatten)]
    pub rate: RateArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    pub decision: Decision,
    #[arg(long, value_enum, default_value_t)]
    pub ir_threshold: Threshold,
    #[arg(long, value_enum, default_value = "text")]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Kkt,
    Convexity,
    Psi,
    Oracle,
    Monotonic,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Coords {
    Linear,
    Log,
    Both,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Chord coordinates for the convexity probe.
    #[arg(long, value_enum, default_value = "linear")]
    pub convexity_coords: Coords,
    /// Chords per protocol and round count.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
