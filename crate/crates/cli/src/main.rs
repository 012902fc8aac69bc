use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sasl_core::harness::output::{
    run_summary_json, to_json_pretty, write_comparison_csv, write_trajectory_csv,
};
use sasl_core::harness::{
    analyze, generate_section5_scenario, monte_carlo, run_scenario, BeliefKind, GeneratorParams,
    HarnessError, RunOptions, ThinPolicy, Topology, Variant,
};
use sasl_core::{presets, ScenarioConfig};

#[derive(Parser)]
#[command(name = "sasl", version, about = "Adaptive social learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all enabled algorithms; writes trajectory.csv and summary.json.
    Run(RunArgs),
    /// Closed-form steady state: limiting weights, blocks, confidences, consistency verdict.
    Analyze(ScenarioArgs),
    /// Paired comparison of the three algorithms as CSV.
    Compare(RunArgs),
    /// Aggregate statistics over consecutive seeds.
    Montecarlo(MonteCarloArgs),
    /// Write one of the ten-agent experiment scenarios.
    Gen(GenArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file, or a bundled name (example1, example2, distinct-states, two-groups, unidentifiable).
    scenario: String,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Directory for output files; stdout when omitted (except `run`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Keep every k-th step after the dense prefix of 2000 steps.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    thin: u64,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
}

#[derive(Args)]
struct GenArgs {
    /// distinct-states, two-groups or unidentifiable
    #[arg(long)]
    variant: Variant,
    #[arg(long, default_value_t = 10)]
    agents: usize,
    #[arg(long, default_value_t = 10)]
    hypotheses: usize,
    #[arg(long, default_value_t = 10)]
    observations: usize,
    #[arg(long, default_value_t = 0.28)]
    q: f64,
    /// two-clusters, complete, ring or line
    #[arg(long, default_value = "two-clusters")]
    topology: Topology,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<HarnessError>() {
            Some(HarnessError::NumericFault { .. }) => 2,
            _ => 1,
        };
        Self { code, error }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        anyhow::Error::new(e).into()
    }
}

fn load(args: &ScenarioArgs) -> anyhow::Result<ScenarioConfig> {
    let path = Path::new(&args.scenario);
    let mut cfg = if path.exists() {
        ScenarioConfig::load(path)?
    } else if let Some(cfg) = presets::by_name(&args.scenario) {
        cfg
    } else {
        anyhow::bail!("no scenario file or bundled scenario named {:?}", args.scenario);
    };
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    Ok(cfg)
}

fn output(dir: Option<&Path>, name: &str) -> anyhow::Result<Box<dyn Write>> {
    match dir {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(d) => {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            let path = d.join(name);
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn write_text(dir: Option<&Path>, name: &str, text: &str) -> anyhow::Result<()> {
    let mut w = output(dir, name)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn run_options(thin: u64) -> RunOptions {
    RunOptions { thin: ThinPolicy { stride: thin as usize, ..ThinPolicy::default() }, ..RunOptions::default() }
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load(&args.scenario)?;
    let result = run_scenario(&cfg, &run_options(args.thin))?;
    let dir = args.scenario.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let csv = output(Some(&dir), "trajectory.csv")?;
    write_trajectory_csv(csv, &cfg, &result.trajectory, &BeliefKind::enabled(&cfg)).context("writing trajectory.csv")?;
    let summary = serde_json::to_string_pretty(&run_summary_json(&cfg, &result)).context("encoding summary")?;
    write_text(Some(&dir), "summary.json", &summary)?;
    eprintln!("{cfg}: wrote trajectory.csv and summary.json to {}", dir.display());
    Ok(())
}

fn cmd_analyze(args: &ScenarioArgs) -> Result<(), Failure> {
    let cfg = load(args)?;
    let analysis = analyze(&cfg)?;
    write_text(args.out_dir.as_deref(), "analysis.json", &to_json_pretty(&analysis))?;
    Ok(())
}

fn cmd_compare(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load(&args.scenario)?;
    let result = run_scenario(&cfg, &run_options(args.thin))?;
    let w = output(args.scenario.out_dir.as_deref(), "compare.csv")?;
    write_comparison_csv(w, &cfg, &result.trajectory).context("writing comparison")?;
    Ok(())
}

fn cmd_montecarlo(args: &MonteCarloArgs) -> Result<(), Failure> {
    let cfg = load(&args.scenario)?;
    let opts = RunOptions { record: false, ..RunOptions::default() };
    let summary = monte_carlo(&cfg, args.seeds as usize, &opts)?;
    write_text(args.scenario.out_dir.as_deref(), "montecarlo.json", &to_json_pretty(&summary))?;
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let mut cfg = generate_section5_scenario(&GeneratorParams {
        variant: args.variant,
        n_agents: args.agents,
        n_hypotheses: args.hypotheses,
        n_obs: args.observations,
        q: args.q,
        topology: args.topology.clone(),
        horizon: args.horizon,
        seed: args.seed,
    })?;
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    let violations = sasl_core::validate_scenario(&cfg);
    if !violations.is_empty() {
        return Err(HarnessError::Invalid(violations).into());
    }
    let text = cfg.to_json_pretty();
    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
