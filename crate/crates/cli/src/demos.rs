//! Compiled-in demos. Each one recomputes a known value and reports PASS
//! when every expectation holds.

use anyhow::{bail, Result};

use teleo_core::planner::{
    bellman_check, check_optimal, check_specifiable, det_ufs_search, extract_optimal_policy, iid_policy, iid_sweep, optimal_value,
    sensorimotor_bellman_check, specifiability_preconditions, ufs_counterexample_report, ufs_expected_value, ConstraintClass,
};
use teleo_core::teleo::{ambivalent_evolve, doomify, success_exact, truncate_single_success, zoo, Action, Policy, State};
use teleo_core::transducer::behaviorally_equal;
use teleo_core::{Probability, Trajectory};

use crate::report::TaskReport;
use crate::tasks::Settings;

pub const DEMOS: [&str; 6] = [
    "doom-despair",
    "testing-specifiable",
    "absent-minded-driver",
    "ufs-counterexample",
    "tricky-testing",
    "truncation-equivalence",
];

fn p(n: i64, d: i64) -> Probability {
    Probability::frac(n, d)
}

/// Collects named expectations into one report.
struct Checks {
    report: TaskReport,
    ok: bool,
}

impl Checks {
    fn new(name: &str) -> Self {
        Checks { report: TaskReport::new("demo", name), ok: true }
    }

    fn value(&mut self, key: &str, got: impl ToString, want: impl ToString) -> &mut Self {
        let (g, w) = (got.to_string(), want.to_string());
        self.ok &= g == w;
        self.report.field(key, if g == w { g } else { format!("{g} (expected {w})") });
        self
    }

    fn info(&mut self, key: &str, v: impl serde::Serialize) -> &mut Self {
        self.report.field(key, v);
        self
    }

    fn finish(mut self) -> TaskReport {
        self.report.verdict(self.ok);
        self.report
    }
}

pub fn run(name: &str, settings: &Settings) -> Result<Vec<TaskReport>> {
    Ok(match name {
        "all" => {
            let mut out = Vec::new();
            for d in DEMOS {
                out.extend(run(d, settings)?);
            }
            out
        }
        "doom-despair" => vec![doom_despair(settings)?],
        "testing-specifiable" => vec![testing_specifiable(settings)?],
        "absent-minded-driver" => vec![absent_minded(settings)?],
        "ufs-counterexample" => vec![ufs_counterexample(settings)?],
        "tricky-testing" => vec![tricky_testing(settings)?],
        "truncation-equivalence" => vec![truncation(settings)?],
        other => bail!("unknown demo {other:?}; available: {}", DEMOS.join(", ")),
    })
}

fn doom_despair(s: &Settings) -> Result<TaskReport> {
    let mut c = Checks::new("doom-despair");
    let (doom, despair) = (zoo::doom(1, 2), zoo::despair(1, 2));
    c.value("doom_optimal_value", optimal_value(&doom, s.horizon), 0);
    let sweep = iid_sweep(&doom, s.grid)?;
    c.value("doom_sweep", format!("{} unique={}", sweep.value, sweep.unique), "0 unique=false");
    let sweep = iid_sweep(&despair, s.grid)?;
    c.value("despair_sweep", format!("{} unique={}", sweep.value, sweep.unique), "1/2 unique=false");
    c.value("despair_constant", success_exact(&Policy::constant(1, 1, 2), &despair)?, "1/2");
    c.value("doom_specifiable", check_specifiable(&Policy::constant(0, 1, 2), &doom, 3)?.specifiable, false);
    c.value("doomify_despair_is_doom", behaviorally_equal(&doomify(&despair).t, &doom.t, s.depth, &doom.action_alphabet()), true);
    Ok(c.finish())
}

fn testing_specifiable(s: &Settings) -> Result<TaskReport> {
    let mut c = Checks::new("testing-specifiable");
    let pi = zoo::imperfect_mimic_policy(2);
    let env = zoo::uniform_testing(&pi)?;
    let h = s.horizon.min(6);
    c.value("success", success_exact(&pi, &env)?, 1);
    let spec = check_specifiable(&pi, &env, h)?;
    c.value("specifiable", spec.specifiable, true);
    c.info("min_margin", spec.min_margin.as_ref().map(teleo_core::prob::format_rational));
    c.value("preconditions_clean", specifiability_preconditions(&pi, &env, 3).clean(), true);
    let step = Trajectory::empty().then(State(0), pi.point_action().expect("deterministic"));
    c.value("bellman_after_one_step", bellman_check(&pi, &env, &step, h)?.passed(), true);
    let (c0, c1) = (Policy::constant(0, 2, 3), Policy::constant(1, 2, 3));
    c.value("constant_mismatch", success_exact(&c0, &zoo::uniform_testing(&c1)?)?, "3/4");
    c.value("optimal_value", optimal_value(&env, 3), "255/256");
    Ok(c.finish())
}

fn absent_minded(s: &Settings) -> Result<TaskReport> {
    let mut c = Checks::new("absent-minded-driver");
    let env = zoo::absent_minded_env();
    let sweep = iid_sweep(&env, s.grid)?;
    c.value("argmax", format!("({})", sweep.best.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")), "(1/2, 1/2)");
    c.value("value", &sweep.value, "1/4");
    c.value("unique", sweep.unique, true);
    c.info("grid", s.grid);
    let half = iid_policy(&[p(1, 2), p(1, 2)], 1);
    c.value("iid_class_verdict", check_optimal(&half, &env, s.horizon, ConstraintClass::Iid(s.grid))?.label(), "optimal");
    let tree = extract_optimal_policy(&env, s.horizon.max(2));
    let plan: Vec<&str> = tree.leftmost_actions().iter().take(2).map(|a| if *a == zoo::CONTINUE { "continue" } else { "exit" }).collect();
    c.value("deterministic_plan", plan.join(" "), "continue exit");
    c.value("deterministic_value", success_exact(&tree.to_policy(1, 2), &env)?, 1);
    Ok(c.finish())
}

fn ufs_counterexample(s: &Settings) -> Result<TaskReport> {
    let mut c = Checks::new("ufs-counterexample");
    let ns = match s.n {
        Some(n) if n >= 2 => vec![n],
        Some(n) => bail!("--n must be at least 2, got {n}"),
        None => vec![2, 3],
    };
    c.info("alpha", s.alpha.to_string());
    for n in ns {
        let env = zoo::counterexample_env(n);
        let pi = zoo::imperfect_mimic_policy(n);
        let report = ufs_counterexample_report(n, &s.alpha)?;
        c.value(&format!("n{n}_policy_value"), &report.policy_value, ufs_expected_value(n));
        if n <= 3 {
            let search = det_ufs_search(&env, n as usize)?;
            c.value(&format!("n{n}_best_deterministic_ufs"), &search.best_value, &report.policy_value);
            c.info(&format!("n{n}_machines_enumerated"), search.enumerated);
            c.info(&format!("n{n}_optimal_machines"), search.optimal_count);
        }
        c.value(&format!("n{n}_unconstrained_verdict"), check_optimal(&pi, &env, s.horizon, ConstraintClass::All)?.label(), "suboptimal");
        c.info(&format!("n{n}_alpha_policy_value"), report.alpha_policy_value.to_string());
        let evolved: Vec<String> = report.evolved.iter().map(|e| format!("s{}: {} -> {}", e.state.0 + 1, e.imperfect, e.alpha)).collect();
        c.info(&format!("n{n}_after_give_up"), evolved);
        c.value(&format!("n{n}_strict_improvement"), report.strict_improvement, true);
    }
    Ok(c.finish())
}

fn tricky_testing(s: &Settings) -> Result<TaskReport> {
    let mut c = Checks::new("tricky-testing");
    let pi = Policy::constant(0, 1, 2);
    let other = Policy::constant(1, 1, 2);
    let tricky = zoo::tricky_testing(&pi, &other)?;
    let evolved = ambivalent_evolve(&tricky, Action(0), State(0))?;
    c.value("policy_after_step", success_exact(&pi, &evolved)?, "13/16");
    c.value("other_after_step", success_exact(&other, &evolved)?, "15/16");
    let step = Trajectory::empty().then(State(0), Action(0));
    let sm = sensorimotor_bellman_check(&pi, &tricky, &step, s.horizon)?;
    c.value("sensorimotor_check", if sm.passed() { "pass" } else { "fail" }, "fail");
    c.value("value_laden_check", if bellman_check(&pi, &tricky, &step, s.horizon)?.passed() { "pass" } else { "fail" }, "pass");
    let z = truncate_single_success(&tricky);
    c.value("truncated_sensorimotor_check", if sensorimotor_bellman_check(&pi, &z, &step, s.horizon)?.passed() { "pass" } else { "fail" }, "pass");
    c.value("specifiable", check_specifiable(&pi, &tricky, s.horizon.min(6))?.specifiable, true);
    Ok(c.finish())
}

fn truncation(s: &Settings) -> Result<TaskReport> {
    let mut c = Checks::new("truncation-equivalence");
    let pi = Policy::constant(0, 2, 2);
    let other = Policy::constant(1, 2, 2);
    let tricky = zoo::tricky_testing(&pi, &other)?;
    let zt = truncate_single_success(&tricky);
    let zu = truncate_single_success(&zoo::uniform_testing(&pi)?);
    let acts = tricky.action_alphabet();
    c.info("depth", s.depth);
    c.value("z_tricky_equals_z_testing", behaviorally_equal(&zt.t, &zu.t, s.depth, &acts), true);
    c.value("tricky_differs_from_testing", behaviorally_equal(&tricky.t, &zoo::uniform_testing(&pi)?.t, s.depth, &acts), false);
    for (name, q) in [("policy", &pi), ("other", &other)] {
        c.value(&format!("{name}_success_preserved"), success_exact(q, &zt)?, success_exact(q, &tricky)?);
    }
    let single = zoo::success_env(2, 2);
    c.value("single_success_fixed", behaviorally_equal(&truncate_single_success(&single).t, &single.t, s.depth, &acts), true);
    Ok(c.finish())
}
