//! `teleo`: evaluate policies against teleo-environments, plan, check
//! optimality and run the built-in demos.

mod demos;
mod report;
mod scenario;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use teleo_core::Probability;

use report::{render_structured, render_text, TaskReport};
use scenario::{ClassDef, Scenario, TaskDef, World};
use tasks::Settings;

#[derive(Parser)]
#[command(name = "teleo", version, about = "Exact success probabilities for policies in teleo-environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Clone)]
struct Flags {
    /// Planner horizon.
    #[arg(long, global = true, default_value_t = 8)]
    horizon: usize,
    /// Depth for behavioral equality and exploration.
    #[arg(long, global = true, default_value_t = 6)]
    depth: usize,
    /// Steps per unit of the i.i.d. grid.
    #[arg(long, global = true, default_value_t = 100)]
    grid: u32,
    /// Give-up probability of the alpha mimic policy, as "p/q".
    #[arg(long, global = true, default_value = "1/100")]
    alpha: Probability,
    /// Size of the UFS counterexample (default: 2 and 3).
    #[arg(long, global = true)]
    n: Option<u32>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Print the scenario with machine definitions written out, then exit.
    #[arg(long, global = true)]
    dump: bool,
    /// Run independent tasks concurrently. Report order is unchanged.
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a scenario file, or `demo:NAME`.
    Run { scenario: String },
    /// Success probability of one policy in one environment.
    Eval {
        scenario: PathBuf,
        #[arg(long)]
        policy: String,
        #[arg(long)]
        env: String,
    },
    /// Optimal value and plan for an environment.
    Plan {
        scenario: PathBuf,
        #[arg(long)]
        env: String,
    },
    /// Optimality, Bellman or specifiability check.
    Check {
        scenario: PathBuf,
        #[arg(long)]
        policy: String,
        #[arg(long)]
        env: String,
        #[arg(long, value_enum, default_value_t = CheckKind::Optimal)]
        kind: CheckKind,
        #[arg(long, value_enum, default_value_t = ClassArg::All)]
        class: ClassArg,
        /// Steps `state:action`, separated by commas.
        #[arg(long, default_value = "")]
        trajectory: String,
    },
    /// Built-in demo by name, `all`, or `list`.
    Demo { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Optimal,
    Bellman,
    Sensorimotor,
    Specifiable,
    Preconditions,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    All,
    Deterministic,
    Iid,
    DetUfs,
}

fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Scenario::parse(&text).with_context(|| format!("in {}", path.display()))
}

fn parse_trajectory(text: &str) -> Result<Vec<(String, String)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|step| match step.split_once(':') {
            Some((s, a)) => Ok((s.to_string(), a.to_string())),
            None => bail!("trajectory step {step:?} is not state:action"),
        })
        .collect()
}

fn run_tasks(world: &World, list: &[TaskDef], settings: &Settings, parallel: bool) -> Vec<TaskReport> {
    if !parallel {
        return list.iter().map(|t| tasks::run(world, t, settings)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = list.iter().map(|t| scope.spawn(move || tasks::run(world, t, settings))).collect();
        handles.into_iter().map(|h| h.join().expect("task threads catch panics")).collect()
    })
}

fn scenario_reports(s: &Scenario, list: &[TaskDef], flags: &Flags, settings: &Settings) -> Result<Option<Vec<TaskReport>>> {
    let world = World::build(s)?;
    if flags.dump {
        print!("{}", world.dump(s)?.to_toml()?);
        return Ok(None);
    }
    Ok(Some(run_tasks(&world, list, settings, flags.parallel)))
}

fn execute(cli: &Cli) -> Result<Option<Vec<TaskReport>>> {
    let f = &cli.flags;
    let settings = Settings { horizon: f.horizon, depth: f.depth, grid: f.grid, alpha: f.alpha.clone(), n: f.n };
    match &cli.command {
        Command::Run { scenario } => {
            if let Some(name) = scenario.strip_prefix("demo:") {
                return Ok(Some(demos::run(name, &settings)?));
            }
            let s = load(Path::new(scenario))?;
            scenario_reports(&s, &s.tasks, f, &settings)
        }
        Command::Eval { scenario, policy, env } => {
            let s = load(scenario)?;
            let task = TaskDef::Eval { policy: policy.clone(), env: env.clone(), horizon: None, expect: None };
            scenario_reports(&s, &[task], f, &settings)
        }
        Command::Plan { scenario, env } => {
            let s = load(scenario)?;
            scenario_reports(&s, &[TaskDef::Plan { env: env.clone(), horizon: None, expect: None }], f, &settings)
        }
        Command::Check { scenario, policy, env, kind, class, trajectory } => {
            let s = load(scenario)?;
            let (policy, env) = (policy.clone(), env.clone());
            let task = match kind {
                CheckKind::Optimal => TaskDef::CheckOptimal {
                    policy,
                    env,
                    class: match class {
                        ClassArg::All => ClassDef::All,
                        ClassArg::Deterministic => ClassDef::Deterministic,
                        ClassArg::Iid => ClassDef::Iid,
                        ClassArg::DetUfs => ClassDef::DetUfs,
                    },
                    horizon: None,
                    grid: None,
                    n: None,
                    expect: None,
                },
                CheckKind::Bellman => TaskDef::CheckBellman { policy, env, trajectory: parse_trajectory(trajectory)?, horizon: None, expect: None },
                CheckKind::Sensorimotor => {
                    TaskDef::CheckSensorimotor { policy, env, trajectory: parse_trajectory(trajectory)?, horizon: None, expect: None }
                }
                CheckKind::Specifiable => TaskDef::CheckSpecifiable { policy, env, horizon: None, expect: None },
                CheckKind::Preconditions => TaskDef::Preconditions { policy, env, depth: None, expect: None },
            };
            scenario_reports(&s, &[task], f, &settings)
        }
        Command::Demo { name } => {
            if name == "list" {
                for d in demos::DEMOS {
                    println!("{d}");
                }
                return Ok(None);
            }
            Ok(Some(demos::run(name, &settings)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(reports)) => {
            let out = match cli.flags.format {
                Format::Text => render_text(&reports),
                Format::Structured => render_structured(&reports),
            };
            print!("{out}");
            if tasks::any_failed(&reports) {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
