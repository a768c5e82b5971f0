use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use stopkit::checks::{run_suite, CheckOptions, Suite};
use stopkit::exact::{solve_exact_capped, SubsetKey, DEFAULT_EXACT_CAP};
use stopkit::generate::{generate, Family, GenParams};
use stopkit::grouped::DEFAULT_STATE_CAP;
use stopkit::model::{read_instance, write_instance};
use stopkit::ptas::solve_ptas;
use stopkit::qptas::{solve_qptas_with, QptasOptions};
use stopkit::simulate::{exact_strategy, run_sim, AcceptFirst, FixedThreshold, SimResult, Strategy};
use stopkit::{Instance, Profile, SchemeConfig};

#[derive(Parser, Debug)]
#[command(name = "stopkit", version, about = "Prophet secretary solvers, simulator and property checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded instance from one of the built-in families.
    Gen(GenArgs),
    /// Exact subset DP.
    SolveExact(SolveExactArgs),
    /// Discretize, bundle and solve the grouped DP.
    SolveQptas(SolveQptasArgs),
    /// Frontloading reduction and the outside-option DP.
    SolvePtas(SolvePtasArgs),
    /// Monte-Carlo value of a strategy under random arrival order.
    Simulate(SimulateArgs),
    /// Play the G5 strategy through every game of the reduction chain.
    CheckChain(CheckChainArgs),
    /// Run a property battery; exits 1 when any case fails.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long, short = 'n', default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Support bound for const-support-c.
    #[arg(long, default_value_t = 3)]
    c: usize,
    /// Shared values for small-prob-swarm.
    #[arg(long, default_value_t = 3)]
    shared_values: usize,
    /// Fraction of swarm variables carrying a large atom.
    #[arg(long, default_value_t = 0.1)]
    special_fraction: f64,
    /// Instance file to write; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Io {
    #[arg(long, short)]
    input: PathBuf,
    /// Report file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
struct Scheme {
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
    profile: ProfileArg,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ProfileArg {
    Desk,
    Theoretical,
}

impl Scheme {
    fn config(self) -> stopkit::Result<SchemeConfig> {
        let profile = match self.profile {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Theoretical => Profile::Theoretical,
        };
        SchemeConfig::with_profile(self.epsilon, profile)
    }
}

#[derive(Args, Debug)]
struct SolveExactArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    cap: usize,
    /// Include the continuation value of every subset.
    #[arg(long)]
    dump_dp: bool,
}

#[derive(Args, Debug)]
struct SolveQptasArgs {
    #[command(flatten)]
    io: Io,
    #[command(flatten)]
    scheme: Scheme,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    state_cap: usize,
    /// Exact values before and after each transform (n <= 12).
    #[arg(long)]
    explain: bool,
}

#[derive(Args, Debug)]
struct SolvePtasArgs {
    #[command(flatten)]
    io: Io,
    #[command(flatten)]
    scheme: Scheme,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    io: Io,
    /// exact | qptas | ptas | accept-first | threshold:V
    #[arg(long, default_value = "exact")]
    strategy: String,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    scheme: Scheme,
}

#[derive(Args, Debug)]
struct CheckChainArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
    profile: ProfileArg,
    #[arg(long, default_value_t = 20_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(value_parser = parse_suite)]
    suite: Suite,
    /// Seed range `A..B` (end exclusive); suite default when absent.
    #[arg(long, value_parser = parse_range)]
    seeds: Option<std::ops::Range<u64>>,
    /// Comma-separated epsilons; suite default when absent.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: stopkit::Error| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: stopkit::Error| e.to_string())
}

fn parse_range(s: &str) -> Result<std::ops::Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a >= b {
        return Err(format!("empty range {s:?}"));
    }
    Ok(a..b)
}

fn emit<T: Serialize>(value: &T, output: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<Instance> {
    read_instance(path).with_context(|| format!("reading {}", path.display()))
}

/// Ok(true) when every property held.
fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Gen(a) => {
            let params = GenParams { c: a.c, shared_values: a.shared_values, special_fraction: a.special_fraction };
            let inst = generate(a.family, a.n, a.seed, &params)?;
            match a.output {
                Some(path) => write_instance(&inst, &path)?,
                None => println!("{}", inst.to_json_string()),
            }
            Ok(true)
        }
        Command::SolveExact(a) => {
            let inst = load(&a.io.input)?;
            let dp = solve_exact_capped(&inst, a.cap)?;
            let mut report = json!({ "n": dp.n, "value": dp.value });
            if a.dump_dp {
                let states: Vec<_> = (0..dp.thresholds.len() as u64)
                    .map(|m| json!({ "remaining": SubsetKey(m).indices().collect::<Vec<_>>(), "threshold": dp.thresholds[m as usize] }))
                    .collect();
                report["states"] = states.into();
            }
            emit(&report, a.io.output.as_deref())?;
            Ok(true)
        }
        Command::SolveQptas(a) => {
            let inst = load(&a.io.input)?;
            let config = a.scheme.config()?;
            let opts = QptasOptions { state_cap: a.state_cap, annotate: a.explain };
            let sol = solve_qptas_with(&inst, &config, &opts)?;
            let mut report = serde_json::to_value(sol.report(config.epsilon))?;
            report["config"] = serde_json::to_value(config)?;
            if !a.explain {
                report.as_object_mut().unwrap().remove("log");
            }
            emit(&report, a.io.output.as_deref())?;
            Ok(true)
        }
        Command::SolvePtas(a) => {
            let inst = load(&a.io.input)?;
            let sol = solve_ptas(&inst, &a.scheme.config()?)?;
            emit(&sol.report(), a.io.output.as_deref())?;
            Ok(true)
        }
        Command::Simulate(a) => {
            let inst = load(&a.io.input)?;
            let config = a.scheme.config()?;
            let result = simulate(&inst, &a.strategy, &config, a.trials, a.seed)?;
            let report = json!({
                "strategy": a.strategy,
                "config": config,
                "result": result,
            });
            emit(&report, a.io.output.as_deref())?;
            Ok(true)
        }
        Command::CheckChain(a) => {
            let inst = load(&a.io.input)?;
            let config = Scheme { epsilon: a.epsilon, profile: a.profile }.config()?;
            let report = solve_ptas(&inst, &config)?.game_chain(a.trials, a.seed)?;
            emit(&report, a.io.output.as_deref())?;
            Ok(report.pass)
        }
        Command::Check(a) => {
            let mut opts = CheckOptions::for_suite(a.suite);
            if let Some(seeds) = a.seeds {
                opts.seeds = seeds;
            }
            if let Some(eps) = a.epsilon {
                opts.epsilons = eps;
            }
            if let Some(t) = a.trials {
                opts.trials = t;
            }
            let report = run_suite(a.suite, &opts)?;
            emit(&report, a.output.as_deref())?;
            Ok(report.pass)
        }
    }
}

fn simulate(
    inst: &Instance,
    strategy: &str,
    config: &SchemeConfig,
    trials: u64,
    seed: u64,
) -> anyhow::Result<SimResult> {
    let play = |s: &dyn Strategy| run_sim(inst, s, trials, seed);
    Ok(match strategy {
        "exact" => play(&exact_strategy(&stopkit::exact::solve_exact(inst)?))?,
        "qptas" => play(&stopkit::qptas::solve_qptas(inst, config)?.strategy())?,
        "ptas" => play(&solve_ptas(inst, config)?.strategy())?,
        "accept-first" => play(&AcceptFirst)?,
        other => match other.strip_prefix("threshold:") {
            Some(v) => {
                let threshold: f64 = v.parse().with_context(|| format!("bad threshold {v:?}"))?;
                play(&FixedThreshold { threshold, n: inst.n() })?
            }
            None => bail!("unknown strategy {other:?}"),
        },
    })
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("STOPKIT_THREADS") {
        let n: usize = v.parse().with_context(|| format!("STOPKIT_THREADS={v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
