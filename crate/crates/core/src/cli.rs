//! `mdplab` command line.
//!
//! Exit codes: 0 on success, 1 for bad input or a failed check, 2 when a
//! numerical solver gives up.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::agents::AgentKind;
use crate::bench::{self, BenchConfig};
use crate::error::{Error, Result};
use crate::estimation::CountTable;
use crate::mdp::{solve_optimality_all, Mdp};
use crate::sim::{self, rig_counts, Scenario};
use crate::verify::run_verify;

#[derive(Debug, Parser)]
#[command(
    name = "mdplab",
    version,
    about = "Index policies for average-reward MDPs with unknown transitions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the optimality equations of a model and print them as JSON.
    Solve {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Simulate an agent and write per-replication and summary regret CSVs.
    Simulate(SimulateArgs),
    /// Time the index formulations on random instances.
    Bench(BenchArgs),
    /// Run the built-in correctness checks.
    Verify {
        #[command(flatten)]
        seed: SeedArg,
    },
}

#[derive(Debug, Args)]
struct ModelArg {
    /// Model JSON file; defaults to the built-in 3-state example.
    #[arg(long)]
    mdp: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SeedArg {
    /// Master seed.
    #[arg(long, env = "MDPLAB_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArg,
    /// One of mdp-ucb, mdp-dmed, olp, mdp-ps.
    #[arg(long, value_parser = parse_agent)]
    algorithm: AgentKind,
    #[arg(long, default_value_t = 10_000)]
    horizon: usize,
    #[arg(long, default_value_t = 100)]
    replications: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Output directory for regret_raw.csv and regret_summary.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Start from the biased counts of the robustness experiment
    /// (3-state, 2-action models only).
    #[arg(long)]
    rigged: bool,
    /// Initial state index.
    #[arg(long, default_value_t = 0)]
    initial_state: usize,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated state-space sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 100, 1000, 10_000])]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 15)]
    trials: usize,
    /// Largest size on which the full-vector solvers run.
    #[arg(long, default_value_t = 1000)]
    reference_cap: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Output directory for bench_records.csv and bench_summary.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_agent(s: &str) -> std::result::Result<AgentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Serialize)]
struct SolveOutput {
    gain: f64,
    bias: Vec<f64>,
    /// Zero-based action indices per state.
    optimal_actions: Vec<Vec<usize>>,
    /// First optimal action per state as a one-based label.
    policy: Vec<String>,
}

fn load_model(arg: &ModelArg) -> Result<Mdp> {
    match &arg.mdp {
        None => Ok(Mdp::example()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            Mdp::from_json_str(&text)
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn solve(model: &ModelArg, out: &mut dyn Write) -> Result<()> {
    let mdp = load_model(model)?;
    let gb = solve_optimality_all(&mdp)?;
    let output = SolveOutput {
        gain: gb.gain,
        bias: gb.bias,
        policy: gb.optimal_actions.iter().map(|o| format!("a{}", o[0] + 1)).collect(),
        optimal_actions: gb.optimal_actions,
    };
    let json = serde_json::to_string_pretty(&output).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{json}").map_err(|e| Error::Io(e.to_string()))
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mdp = load_model(&args.model)?;
    let rigged = if args.rigged {
        Some(rig_counts(CountTable::new(&mdp))?)
    } else {
        None
    };
    if args.threads == Some(0) {
        return Err(Error::InvalidArgument("--threads must be at least 1".into()));
    }
    let mut scenario = Scenario::new(mdp, args.algorithm, args.horizon, args.replications, args.seed.seed);
    scenario.initial_state = args.initial_state;
    scenario.rigged_counts = rigged;
    let series = sim::run_all(&scenario, args.threads)?;
    let summary = sim::summarize(&series)?;
    sim::write_raw_csv(&series, create(&args.out, "regret_raw.csv")?)?;
    sim::write_summary_csv(&summary, create(&args.out, "regret_summary.csv")?)?;
    let last = summary.mean.len() - 1;
    writeln!(
        out,
        "{}: mean regret at t = {} is {:.4} ± {:.4}",
        args.algorithm,
        last + 1,
        summary.mean[last],
        summary.ci_half_width[last]
    )
    .map_err(|e| Error::Io(e.to_string()))
}

fn run_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    if args.dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidArgument("--dims entries must be at least 2".into()));
    }
    let cfg = BenchConfig {
        dims: args.dims.clone(),
        trials: args.trials,
        reference_dim_cap: args.reference_cap,
        seed: args.seed.seed,
        ..BenchConfig::default()
    };
    let records = bench::time_formulations(&cfg)?;
    let summary = bench::summarize(&records);
    bench::write_records_csv(&records, create(&args.out, "bench_records.csv")?)?;
    bench::write_summary_csv(&summary, create(&args.out, "bench_summary.csv")?)?;
    for s in &summary {
        writeln!(
            out,
            "{:<10} |S| = {:>6}: {:.3e} s ± {:.1e}",
            s.formulation.label(),
            s.n_states,
            s.mean_wall_time_s,
            s.ci_half_width_s
        )
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    let worst = bench::cross_check(&records).iter().map(|c| c.3).fold(0.0, f64::max);
    writeln!(out, "max |fast - reference| = {worst:.2e}").map_err(|e| Error::Io(e.to_string()))
}

/// Returns whether every check passed.
fn verify(seed: u64, out: &mut dyn Write) -> Result<bool> {
    let checks = run_verify(seed);
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{tag}  {}: {}", c.name, c.detail).map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 1;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    let result = match &cli.command {
        Command::Solve { model } => solve(model, out),
        Command::Simulate(args) => simulate(args, out),
        Command::Bench(args) => run_bench(args, out),
        Command::Verify { seed } => match verify(seed.seed, out) {
            Ok(true) => Ok(()),
            Ok(false) => return 1,
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_solver_failure() {
                2
            } else {
                1
            }
        }
    }
}

/// [`run_cli_with`] on the process's stdout and stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
