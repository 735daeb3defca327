//! `blockca` — simulate the block automaton, check its operator and
//! lowering identities, and run the learning experiments.
//!
//! Exit status: 0 success, 1 a check failed, 2 unreadable input or bad
//! flags, 3 invalid configuration, 4 non-finite loss.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use blockca::ca::{Direction, EdgeMode, Phase};
use blockca::nn::Algorithm;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "blockca", version, about = "Reversible 2×2 block cellular automaton experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve a grid and write the trajectory.
    Simulate(SimulateArgs),
    /// Evolve a grid backwards in time.
    Invert(InvertArgs),
    /// Compare the GF(2) full-step operator with direct simulation.
    OperatorCheck(OperatorCheckArgs),
    /// Compare dense lowerings of random kernels with the direct layers.
    LowerCheck(LowerCheckArgs),
    /// Train a half-step model.
    Train(TrainArgs),
    /// Score a checkpoint on fresh or stored pairs.
    Eval(EvalArgs),
    /// Iterate an Aligned/Offset model pair against the exact evolution.
    Rollout(RolloutArgs),
    /// Search for a network commuting with the block step.
    Commute(CommuteArgs),
    /// Check backprop against central differences.
    Gradcheck(GradcheckArgs),
    /// Write a dataset of exact input/target pairs.
    GenData(GenDataArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EdgeArg {
    Torus,
    Pad,
}

impl From<EdgeArg> for EdgeMode {
    fn from(e: EdgeArg) -> Self {
        match e {
            EdgeArg::Torus => EdgeMode::TorusWrap,
            EdgeArg::Pad => EdgeMode::ZeroPadCrop,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    Fwd,
    Bwd,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Fwd => Direction::Forward,
            DirectionArg::Bwd => Direction::Backward,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PhaseArg {
    Aligned,
    Offset,
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Aligned => Phase::Aligned,
            PhaseArg::Offset => Phase::Offset,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

impl From<OptimizerArg> for Algorithm {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Adam => Algorithm::Adam,
            OptimizerArg::Sgd => Algorithm::Sgd,
        }
    }
}

/// `n,density,seed`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct RandomSpec {
    n: usize,
    density: f64,
    seed: u64,
}

fn parse_random_spec(s: &str) -> Result<RandomSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [n, density, seed] = parts[..] else {
        return Err(format!("expected n,density,seed, got {s:?}"));
    };
    Ok(RandomSpec {
        n: n.parse().map_err(|_| format!("bad grid side {n:?}"))?,
        density: density.parse().map_err(|_| format!("bad density {density:?}"))?,
        seed: seed.parse().map_err(|_| format!("bad seed {seed:?}"))?,
    })
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct GridSource {
    /// Grid file: side length, then rows of 0/1.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Random grid as `n,density,seed`.
    #[arg(long, value_parser = parse_random_spec)]
    random: Option<RandomSpec>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: GridSource,
    #[arg(long, default_value_t = 1)]
    steps: usize,
    #[arg(long, value_enum, default_value = "torus")]
    edge: EdgeArg,
    #[arg(long, value_enum, default_value = "fwd")]
    direction: DirectionArg,
    /// Trajectory file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InvertArgs {
    #[command(flatten)]
    source: GridSource,
    #[arg(long, default_value_t = 1)]
    steps: usize,
    #[arg(long, value_enum, default_value = "torus")]
    edge: EdgeArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OperatorCheckArgs {
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the first trial's operator as a text dump.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LowerCheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

#[derive(Args, Debug, Clone)]
struct OptimArgs {
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
}

#[derive(Args, Debug)]
struct TaskArgs {
    #[arg(long, value_enum, default_value = "fwd")]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value = "aligned")]
    phase: PhaseArg,
    #[arg(long, value_enum, default_value = "torus")]
    edge: EdgeArg,
    #[arg(long, default_value_t = 16)]
    n: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value_t = 8000)]
    train_pairs: usize,
    #[arg(long, default_value_t = 1000)]
    test_pairs: usize,
    /// Use a stored dataset (from gen-data) instead of generating one; the
    /// last `test-pairs` pairs are held out.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Shuffle seed; also the data and init seed unless those are given.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    init_seed: Option<u64>,
    /// Identity activations around the hidden block map.
    #[arg(long)]
    bypass: bool,
    /// History CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Summary file; stdout only if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RolloutArgs {
    #[arg(long)]
    aligned: PathBuf,
    #[arg(long)]
    offset: PathBuf,
    #[arg(long, value_enum, default_value = "torus")]
    edge: EdgeArg,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    grids: usize,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Divergence-step histogram CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CommuteArgs {
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 8000)]
    train_grids: usize,
    #[arg(long, default_value_t = 1000)]
    test_grids: usize,
    /// Frozen Aligned-phase model to commute with; the exact step if omitted.
    #[arg(long)]
    step_checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    init_seed: Option<u64>,
    /// Random grids for the exact-commuter certificate.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Check this network instead of a fresh random one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "aligned")]
    phase: PhaseArg,
    #[arg(long, value_enum, default_value = "torus")]
    edge: EdgeArg,
    #[arg(long)]
    bypass: bool,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = 9000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(commands::Status::Pass) => ExitCode::SUCCESS,
        Ok(commands::Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("blockca: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
