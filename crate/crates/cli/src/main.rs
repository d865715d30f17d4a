//! `ltopo`: run scenario suites or single tasks and report the verdicts.
//!
//! Exit status: 0 when nothing failed, 1 when a task failed or errored,
//! 2 for usage, scenario or name-resolution errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use lorentz_topology_cli::report::{summary_csv, to_json, write_outputs};
use lorentz_topology_cli::scenario::{load_scenario, parse_scenario, Scenario, TaskSpec};
use lorentz_topology_cli::suite::{run_suite_with, Overrides, SuiteReport};
use lorentz_topology_cli::{geroch_scenario, GEROCH_SCENARIO};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ltopo", version, about = "Topologies on spaces of Lorentz metrics: norms, balls, convergence")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario whose metric and family names the subcommands may use
    /// (default: the built-in Geroch scenario).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Derivative order k for every task.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Number of exhaustion levels beyond level 0.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Grid points per axis on level 0.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Half-width of the level-0 box.
    #[arg(long, global = true)]
    r0: Option<f64>,
    /// Absolute tolerance for numeric expectations.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report.json, summary.csv and trace CSVs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Uniform norm of A, or of A - B, under a Riemannian reference.
    Norm {
        a: String,
        b: Option<String>,
        #[arg(long)]
        reference: Option<String>,
        /// Restrict the sup to one level box.
        #[arg(long)]
        level: Option<usize>,
    },
    /// Whether CANDIDATE lies in the ball of the given radius about CENTER.
    Ball {
        center: String,
        candidate: String,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        reference: Option<String>,
        /// compact_open, open or global.
        #[arg(long, default_value = "global")]
        topology: String,
        #[arg(long)]
        level: Option<usize>,
    },
    /// Whether FAMILY converges to LIMIT in a topology.
    Converge {
        family: String,
        limit: String,
        #[arg(long, default_value = "global")]
        topology: String,
        /// Reference metrics; repeat for several.
        #[arg(long)]
        reference: Vec<String>,
    },
    /// Whether A and B give equivalent fiber norms.
    Equiv {
        a: String,
        b: String,
        #[arg(long)]
        level: Option<usize>,
    },
    /// A chain of balls from A to B.
    Chain {
        a: String,
        b: String,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        reference: String,
    },
    /// Run every task of a scenario: `geroch` or a path to a TOML file.
    Suite {
        #[arg(value_name = "SCENARIO")]
        target: String,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

fn overrides(g: &Global) -> Overrides {
    Overrides {
        order: g.k,
        levels: g.levels,
        grid: g.grid,
        r0: g.r0,
        tol: g.tol,
        seed: g.seed,
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map_err(|e| Failure::Usage(e.to_string()))
}

fn context(g: &Global) -> Result<Scenario, Failure> {
    match &g.scenario {
        Some(p) => load(p),
        None => Ok(geroch_scenario()),
    }
}

fn single(g: &Global, spec: TaskSpec) -> Result<Scenario, Failure> {
    let mut scenario = context(g)?;
    let name = spec.name.clone();
    let task = scenario
        .resolve_task(spec)
        .map_err(|e| Failure::Usage(format!("task '{name}': {e}")))?;
    scenario.tasks = vec![task];
    Ok(scenario)
}

fn build(cli: &Cli) -> Result<Scenario, Failure> {
    let g = &cli.global;
    let spec = |name: &str, op: &str| TaskSpec {
        name: name.into(),
        op: op.into(),
        ..TaskSpec::default()
    };
    match &cli.command {
        Command::Suite { target } => {
            if target == "geroch" {
                parse_scenario(GEROCH_SCENARIO).map_err(|e| Failure::Usage(e.to_string()))
            } else {
                load(Path::new(target))
            }
        }
        Command::Norm { a, b, reference, level } => single(
            g,
            TaskSpec {
                a: Some(a.clone()),
                b: b.clone(),
                reference: reference.clone(),
                level: *level,
                ..spec("norm", "norm")
            },
        ),
        Command::Ball {
            center,
            candidate,
            radius,
            reference,
            topology,
            level,
        } => single(
            g,
            TaskSpec {
                center: Some(center.clone()),
                candidate: Some(candidate.clone()),
                radius: Some(*radius),
                reference: reference.clone(),
                topology: Some(topology.clone()),
                level: *level,
                ..spec("ball", "ball")
            },
        ),
        Command::Converge {
            family,
            limit,
            topology,
            reference,
        } => single(
            g,
            TaskSpec {
                family: Some(family.clone()),
                limit: Some(limit.clone()),
                topology: Some(topology.clone()),
                references: (!reference.is_empty()).then(|| reference.clone()),
                ..spec("converge", "converge")
            },
        ),
        Command::Equiv { a, b, level } => single(
            g,
            TaskSpec {
                a: Some(a.clone()),
                b: Some(b.clone()),
                level: *level,
                ..spec("equiv", "equiv")
            },
        ),
        Command::Chain { a, b, radius, reference } => single(
            g,
            TaskSpec {
                a: Some(a.clone()),
                b: Some(b.clone()),
                radius: Some(*radius),
                reference: Some(reference.clone()),
                ..spec("chain", "chain")
            },
        ),
    }
}

fn run(cli: &Cli) -> Result<SuiteReport, Failure> {
    let scenario = build(cli)?;
    let report = run_suite_with(&scenario, &overrides(&cli.global), |t, elapsed| {
        eprintln!(
            "{:>4} {:<28} {:<12} {:>8.2}s {}",
            t.outcome.label(),
            t.name,
            t.op,
            elapsed.as_secs_f64(),
            t.message.as_deref().unwrap_or("")
        );
    })
    .map_err(|e| Failure::Usage(format!("exhaustion: {e}")))?;
    if let Some(dir) = &cli.global.out {
        write_outputs(&report, dir).map_err(|e| Failure::Run(format!("writing {}: {e}", dir.display())))?;
    }
    match cli.global.format {
        Format::Json => println!("{}", to_json(&report)),
        Format::Csv => print!("{}", summary_csv(&report)),
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let s = &report.summary;
            eprintln!("{} passed, {} failed, {} skipped, {} done", s.pass, s.fail, s.skip, s.done);
            ExitCode::from(u8::from(report.failed()))
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
