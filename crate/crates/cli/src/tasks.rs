use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};

use anyhow::{anyhow, bail, Result};

use teleo_core::planner::{
    bellman_check, check_optimal, check_specifiable, extract_optimal_policy, iid_sweep, optimal_value, pointwise_decompose,
    sensorimotor_bellman_check, specifiability_preconditions, upper_bound, BellmanReport, ConstraintClass, OptimalityVerdict, PolicyTree,
    Witness,
};
use teleo_core::teleo::{success_interval, Action, State};
use teleo_core::transducer::behaviorally_equal;
use teleo_core::{FiniteDist, Probability, Trajectory};

use crate::demos;
use crate::report::TaskReport;
use crate::scenario::{ClassDef, TaskDef, World};

/// Flag values used when a task leaves a parameter out.
#[derive(Clone, Debug)]
pub struct Settings {
    pub horizon: usize,
    pub depth: usize,
    pub grid: u32,
    pub alpha: Probability,
    pub n: Option<u32>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { horizon: 8, depth: 6, grid: 100, alpha: Probability::frac(1, 100), n: None }
    }
}

pub fn kind(task: &TaskDef) -> &'static str {
    match task {
        TaskDef::Eval { .. } => "eval",
        TaskDef::Plan { .. } => "plan",
        TaskDef::CheckOptimal { .. } => "check-optimal",
        TaskDef::CheckBellman { .. } => "check-bellman",
        TaskDef::CheckSensorimotor { .. } => "check-sensorimotor",
        TaskDef::CheckSpecifiable { .. } => "check-specifiable",
        TaskDef::Preconditions { .. } => "preconditions",
        TaskDef::Decompose { .. } => "decompose",
        TaskDef::Sweep { .. } => "sweep",
        TaskDef::Equivalent { .. } => "equivalent",
        TaskDef::Demo { .. } => "demo",
    }
}

fn label(task: &TaskDef) -> String {
    match task {
        TaskDef::Eval { policy, env, .. }
        | TaskDef::CheckOptimal { policy, env, .. }
        | TaskDef::CheckBellman { policy, env, .. }
        | TaskDef::CheckSensorimotor { policy, env, .. }
        | TaskDef::CheckSpecifiable { policy, env, .. }
        | TaskDef::Preconditions { policy, env, .. } => format!("{policy} @ {env}"),
        TaskDef::Plan { env, .. } | TaskDef::Sweep { env, .. } => env.clone(),
        TaskDef::Decompose { policy, .. } => policy.clone(),
        TaskDef::Equivalent { left, right, .. } => format!("{left} ~ {right}"),
        TaskDef::Demo { name } => name.clone(),
    }
}

/// Runs one task; errors and panics become an error report.
pub fn run(world: &World, task: &TaskDef, settings: &Settings) -> TaskReport {
    let (k, l) = (kind(task), label(task));
    match panic::catch_unwind(AssertUnwindSafe(|| execute(world, task, settings))) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => TaskReport::error(k, l, &e),
        Err(p) => {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            TaskReport::error(k, l, &anyhow!("internal error: {msg}"))
        }
    }
}

pub fn action_dist(world: &World, d: &FiniteDist<Action>) -> BTreeMap<String, String> {
    d.iter().map(|(a, p)| (world.action_name(*a).to_string(), p.to_string())).collect()
}

pub fn trajectory_text(world: &World, t: &Trajectory<State, Action>) -> String {
    if t.is_empty() {
        return "(empty)".into();
    }
    t.pairs().iter().map(|(s, a)| format!("{}:{}", world.state_name(*s), world.action_name(*a))).collect::<Vec<_>>().join(" ")
}

fn plan_text(world: &World, tree: &PolicyTree) -> Vec<String> {
    tree.leftmost_actions().into_iter().take(tree.horizon.max(1)).map(|a| world.action_name(a).to_string()).collect()
}

pub fn describe_verdict(world: &World, r: &mut TaskReport, v: &OptimalityVerdict) {
    r.field("verdict", v.label());
    match v {
        OptimalityVerdict::Optimal => {}
        OptimalityVerdict::Suboptimal { witness, margin } => {
            r.field("margin", teleo_core::prob::format_rational(margin));
            match witness {
                Witness::Tree(t) => r.field("witness", format!("plan {} (value {})", plan_text(world, t).join(" "), teleo_core::prob::format_rational(&t.value))),
                Witness::Iid(w) => r.field("witness", format!("i.i.d. {}", w.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "))),
                Witness::Machine(p) => {
                    let m = p.t.machine().map(|(m, _)| m.len()).unwrap_or(0);
                    r.field("witness", format!("deterministic machine with {m} states"))
                }
            };
        }
        OptimalityVerdict::Inconclusive { lo, hi, optimum_lo, optimum_hi } => {
            r.field("policy_bounds", [lo.to_string(), hi.to_string()]);
            r.field("optimum_bounds", [optimum_lo.to_string(), optimum_hi.to_string()]);
        }
    }
}

fn bellman_fields(r: &mut TaskReport, world: &World, rep: &BellmanReport, expect: &Option<String>) -> Result<()> {
    r.field("before", rep.before.label());
    r.field("after", rep.after.label());
    r.field("evolved_value", rep.evolved_value.as_ref().map(|p| p.to_string()));
    describe_verdict(world, r, &rep.after);
    let outcome = if rep.passed() { "pass" } else { "fail" };
    r.field("outcome", outcome);
    let want = expect.clone().unwrap_or_else(|| "pass".into());
    if want != "pass" && want != "fail" {
        bail!("expect must be \"pass\" or \"fail\"");
    }
    r.verdict(outcome == want);
    Ok(())
}

fn execute(world: &World, task: &TaskDef, settings: &Settings) -> Result<TaskReport> {
    let mut r = TaskReport::new(kind(task), label(task));
    match task {
        TaskDef::Eval { policy, env, horizon, expect } => {
            let h = horizon.unwrap_or(settings.horizon);
            let iv = success_interval(world.policy(policy)?, world.env(env)?, h)?;
            r.field("exact", iv.exact.as_ref().map(|p| p.to_string()));
            r.field("bounds", [iv.lo.to_string(), iv.hi.to_string()]);
            r.field("horizon", h);
            if let Some(x) = expect {
                r.field("expected", x.to_string());
                let hit = iv.exact.as_ref() == Some(x) || (iv.exact.is_none() && iv.lo == *x && iv.hi == *x);
                r.verdict(hit);
            }
        }
        TaskDef::Plan { env, horizon, expect } => {
            let h = horizon.unwrap_or(settings.horizon);
            let e = world.env(env)?;
            let v = optimal_value(e, h);
            let tree = extract_optimal_policy(e, h);
            r.field("optimal_value", v.to_string());
            r.field("upper_bound", upper_bound(e, h).to_string());
            r.field("plan", plan_text(world, &tree));
            r.field("unique_at_root", tree.unique_argmax);
            r.field("tree_nodes", tree.node_count());
            r.field("horizon", h);
            if let Some(x) = expect {
                r.field("expected", x.to_string());
                r.verdict(v == *x);
            }
        }
        TaskDef::CheckOptimal { policy, env, class, horizon, grid, n, expect } => {
            let h = horizon.unwrap_or(settings.horizon);
            let class = match class {
                ClassDef::All => ConstraintClass::All,
                ClassDef::Deterministic => ConstraintClass::Deterministic,
                ClassDef::Iid => ConstraintClass::Iid(grid.unwrap_or(settings.grid)),
                ClassDef::DetUfs => ConstraintClass::DetUfs(n.or(settings.n.map(|x| x as usize)).unwrap_or(2)),
            };
            let v = check_optimal(world.policy(policy)?, world.env(env)?, h, class)?;
            r.field("class", class.to_string());
            describe_verdict(world, &mut r, &v);
            let want = expect.clone().unwrap_or_else(|| "optimal".into());
            r.verdict(v.label() == want);
        }
        TaskDef::CheckBellman { policy, env, trajectory, horizon, expect } => {
            let t = world.trajectory(trajectory)?;
            let rep = bellman_check(world.policy(policy)?, world.env(env)?, &t, horizon.unwrap_or(settings.horizon))?;
            r.field("trajectory", trajectory_text(world, &t));
            bellman_fields(&mut r, world, &rep, expect)?;
        }
        TaskDef::CheckSensorimotor { policy, env, trajectory, horizon, expect } => {
            let t = world.trajectory(trajectory)?;
            let rep = sensorimotor_bellman_check(world.policy(policy)?, world.env(env)?, &t, horizon.unwrap_or(settings.horizon))?;
            r.field("trajectory", trajectory_text(world, &t));
            bellman_fields(&mut r, world, &rep, expect)?;
        }
        TaskDef::CheckSpecifiable { policy, env, horizon, expect } => {
            let rep = check_specifiable(world.policy(policy)?, world.env(env)?, horizon.unwrap_or(settings.horizon))?;
            r.field("specifiable", rep.specifiable);
            r.field("optimal", rep.verdict.label());
            r.field("unique_everywhere", rep.unique_everywhere);
            r.field("plays_plan", rep.agrees);
            r.field("min_margin", rep.min_margin.as_ref().map(teleo_core::prob::format_rational));
            r.verdict(rep.specifiable == expect.unwrap_or(true));
        }
        TaskDef::Preconditions { policy, env, depth, expect } => {
            let d = depth.unwrap_or(settings.depth);
            let rep = specifiability_preconditions(world.policy(policy)?, world.env(env)?, d);
            r.field("clean", rep.clean());
            r.field("explored", rep.explored);
            r.field("nothing_unsupported", rep.nothing_unsupported.iter().take(5).map(|t| trajectory_text(world, t)).collect::<Vec<_>>());
            r.field(
                "zero_mass_states",
                rep.zero_mass_states.iter().take(5).map(|(t, s)| format!("{} after {}", world.state_name(*s), trajectory_text(world, t))).collect::<Vec<_>>(),
            );
            r.verdict(rep.clean() == expect.unwrap_or(true));
        }
        TaskDef::Decompose { policy, depth } => {
            let d = depth.unwrap_or(settings.depth);
            let p = world.policy(policy)?;
            match pointwise_decompose(p, d) {
                None => {
                    r.field("found", false);
                }
                Some(dec) => {
                    let verified = dec.verify(p, d);
                    r.field("found", true);
                    r.field("alpha", dec.alpha.to_string());
                    r.field("at", trajectory_text(world, &dec.at));
                    r.field("first", action_dist(world, &dec.split.0));
                    r.field("second", action_dist(world, &dec.split.1));
                    r.field("verified_depth", d);
                    r.verdict(verified);
                }
            }
        }
        TaskDef::Sweep { env, grid, expect } => {
            let g = grid.unwrap_or(settings.grid);
            let rep = iid_sweep(world.env(env)?, g)?;
            let best: BTreeMap<String, String> =
                rep.best.iter().enumerate().map(|(k, p)| (world.action_name(Action(k as u32)).to_string(), p.to_string())).collect();
            r.field("best", best);
            r.field("value", rep.value.to_string());
            r.field("unique", rep.unique);
            r.field("grid", g);
            r.field("evaluated", rep.evaluated);
            if let Some(x) = expect {
                r.field("expected", x.to_string());
                r.verdict(rep.value == *x);
            }
        }
        TaskDef::Equivalent { left, right, depth, expect } => {
            let d = depth.unwrap_or(settings.depth);
            let (a, b) = (world.env(left)?, world.env(right)?);
            let eq = behaviorally_equal(&a.t, &b.t, d, &a.action_alphabet());
            r.field("equal", eq);
            r.field("depth", d);
            r.verdict(eq == expect.unwrap_or(true));
        }
        TaskDef::Demo { name } => {
            let mut reports = demos::run(name, settings)?;
            if reports.len() != 1 {
                bail!("demo {name:?} expands to several reports; run it from the command line");
            }
            return Ok(reports.remove(0));
        }
    }
    Ok(r)
}

/// Whether a status counts towards the exit code.
pub fn any_failed(reports: &[TaskReport]) -> bool {
    reports.iter().any(|r| r.status.failed())
}
