use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::prob::{Probability, Rational, Trajectory};
use crate::teleo::{ambivalent_evolve, success_interval, Action, Obs, Policy, State, TeleoEnvironment, Telos};
use crate::transducer::StateKey;

use super::classes::{det_ufs_search, iid_sweep, iid_weights};
use super::value::{extract_optimal_policy, ValueCache};
use super::{ConstraintClass, OptimalityVerdict, PolicyTree, Witness};

/// Exact success if the pair is finite-state, else the horizon bounds.
fn policy_bounds(policy: &Policy, env: &TeleoEnvironment, horizon: usize) -> Result<(Probability, Probability)> {
    let iv = success_interval(policy, env, horizon)?;
    Ok(match iv.exact {
        Some(x) => (x.clone(), x),
        None => (iv.lo, iv.hi),
    })
}

pub fn check_optimal(policy: &Policy, env: &TeleoEnvironment, horizon: usize, class: ConstraintClass) -> Result<OptimalityVerdict> {
    match class {
        ConstraintClass::All | ConstraintClass::Deterministic => {
            let (lo, hi) = policy_bounds(policy, env, horizon)?;
            let mut cache = ValueCache::new(env.actions);
            let ub = cache.upper_bound(&env.t, horizon);
            if lo.value() >= &ub {
                return Ok(OptimalityVerdict::Optimal);
            }
            let v = cache.value(&env.t, horizon);
            if hi.value() < &v {
                let tree = cache.extract(&env.t, horizon);
                return Ok(OptimalityVerdict::Suboptimal { witness: Witness::Tree(tree), margin: v - hi.value() });
            }
            Ok(OptimalityVerdict::Inconclusive {
                lo,
                hi,
                optimum_lo: Probability::new(v).expect("probability"),
                optimum_hi: Probability::new(ub).expect("probability"),
            })
        }
        ConstraintClass::Iid(grid) => {
            if iid_weights(policy).is_none() {
                return Err(Error::ClassUnsupported("policy is not i.i.d.".into()));
            }
            let own = crate::teleo::success_exact(policy, env)?;
            let sweep = iid_sweep(env, grid)?;
            Ok(compare(own, sweep.value, || Witness::Iid(sweep.best.clone())))
        }
        ConstraintClass::DetUfs(n) => {
            if n == 0 {
                return Err(Error::ClassUnsupported("det_ufs needs at least one state".into()));
            }
            let own = crate::teleo::success_exact(policy, env)?;
            let report = det_ufs_search(env, n)?;
            Ok(compare(own, report.best_value.clone(), || Witness::Machine(report.best.clone())))
        }
    }
}

fn compare(own: Probability, best: Probability, witness: impl FnOnce() -> Witness) -> OptimalityVerdict {
    if own >= best {
        OptimalityVerdict::Optimal
    } else {
        OptimalityVerdict::Suboptimal { witness: witness(), margin: best.value() - own.value() }
    }
}

/// Outcome of a Bellman check: the verdict before and after evolution.
#[derive(Clone, Debug)]
pub struct BellmanReport {
    pub before: OptimalityVerdict,
    pub after: OptimalityVerdict,
    /// Success of the evolved policy in the evolved environment, when exact.
    pub evolved_value: Option<Probability>,
}

impl BellmanReport {
    pub fn passed(&self) -> bool {
        self.after.is_optimal()
    }
}

fn evolve_policy(policy: &Policy, traj: &Trajectory<State, Action>) -> Result<Policy> {
    policy.evolve(traj).ok_or(Error::InvalidTrajectory)
}

fn run_bellman(policy: &Policy, env: &TeleoEnvironment, evolved_env: TeleoEnvironment, traj: &Trajectory<State, Action>, horizon: usize) -> Result<BellmanReport> {
    let evolved = evolve_policy(policy, traj)?;
    let before = check_optimal(policy, env, horizon, ConstraintClass::All)?;
    let after = check_optimal(&evolved, &evolved_env, horizon, ConstraintClass::All)?;
    let evolved_value = success_interval(&evolved, &evolved_env, horizon)?.exact;
    Ok(BellmanReport { before, after, evolved_value })
}

/// Value-laden: the environment is evolved along `traj` with every telos
/// set to nothing.
pub fn bellman_check(policy: &Policy, env: &TeleoEnvironment, traj: &Trajectory<State, Action>, horizon: usize) -> Result<BellmanReport> {
    let mut e = env.clone();
    for (s, a) in traj.pairs() {
        e = e.step_nothing(*a, *s).ok_or(Error::InvalidTrajectory)?;
    }
    run_bellman(policy, env, e, traj, horizon)
}

/// Sensorimotor-only: the environment is evolved ambivalently.
pub fn sensorimotor_bellman_check(policy: &Policy, env: &TeleoEnvironment, traj: &Trajectory<State, Action>, horizon: usize) -> Result<BellmanReport> {
    let mut e = env.clone();
    for (s, a) in traj.pairs() {
        e = ambivalent_evolve(&e, *a, *s).map_err(|_| Error::InvalidTrajectory)?;
    }
    run_bellman(policy, env, e, traj, horizon)
}

#[derive(Clone, Debug)]
pub struct SpecifiabilityReport {
    pub specifiable: bool,
    pub verdict: OptimalityVerdict,
    /// Every choice node of the extracted plan has a unique maximizer.
    pub unique_everywhere: bool,
    /// The policy plays the extracted plan.
    pub agrees: bool,
    /// Smallest loss from deviating at one node, weighted by the
    /// probability of reaching it.
    pub min_margin: Option<Rational>,
    pub tree: Arc<PolicyTree>,
}

pub fn check_specifiable(policy: &Policy, env: &TeleoEnvironment, horizon: usize) -> Result<SpecifiabilityReport> {
    let verdict = check_optimal(policy, env, horizon, ConstraintClass::All)?;
    let tree = extract_optimal_policy(env, horizon);
    let mut unique = true;
    let mut agrees = true;
    let mut min_margin: Option<Rational> = None;
    let mut stack = vec![(tree.clone(), Some(policy.clone()), Some(env.clone()), Rational::one())];
    while let Some((node, p, e, reach)) = stack.pop() {
        if node.horizon == 0 {
            continue;
        }
        unique &= node.unique_argmax;
        if let Some(m) = &node.margin {
            let weighted = &reach * m;
            if min_margin.as_ref().is_none_or(|x| weighted < *x) {
                min_margin = Some(weighted);
            }
        }
        if let Some(p) = &p {
            agrees &= p.point_action() == Some(node.action);
        }
        let e = e.expect("environment along the plan");
        for (s, child) in &node.children {
            let (nothing, _) = e.masses(*s);
            let p2 = p.as_ref().and_then(|p| p.step(*s, node.action));
            let e2 = e.step_nothing(node.action, *s).expect("child state has nothing-mass");
            stack.push((child.clone(), p2, Some(e2), &reach * nothing.value()));
        }
    }
    let specifiable = verdict.is_optimal() && unique && agrees && min_margin.as_ref().is_some_and(|m| *m > Rational::zero());
    Ok(SpecifiabilityReport { specifiable, verdict, unique_everywhere: unique, agrees, min_margin, tree })
}

/// Violations of the two necessary conditions for specifiability.
#[derive(Clone, Debug, Default)]
pub struct PreconditionReport {
    /// Sensorimotor histories that are possible, but impossible with no
    /// success at the last step.
    pub nothing_unsupported: Vec<Trajectory<State, Action>>,
    /// Histories after which some state has zero probability.
    pub zero_mass_states: Vec<(Trajectory<State, Action>, State)>,
    pub explored: usize,
}

impl PreconditionReport {
    pub fn clean(&self) -> bool {
        self.nothing_unsupported.is_empty() && self.zero_mass_states.is_empty()
    }
}

/// Walks every sensorimotor history up to `depth` steps, evolving the
/// environment with nothing-telos throughout.
pub fn specifiability_preconditions(policy: &Policy, env: &TeleoEnvironment, depth: usize) -> PreconditionReport {
    let mut report = PreconditionReport::default();
    let mut seen: HashSet<(StateKey, StateKey, usize)> = HashSet::new();
    let mut queue = VecDeque::from([(Trajectory::empty(), policy.clone(), env.clone())]);
    while let Some((traj, p, e)) = queue.pop_front() {
        if let (Some(pk), Some(ek)) = (p.t.key(), e.key()) {
            if !seen.insert((pk, ek, traj.len())) {
                continue;
            }
        }
        report.explored += 1;
        for s in e.state_alphabet() {
            let (n, t) = e.masses(s);
            if n.is_zero() && t.is_zero() {
                report.zero_mass_states.push((traj.clone(), s));
            }
        }
        if traj.len() == depth {
            continue;
        }
        for a in p.t.emit().support() {
            for s in e.state_alphabet() {
                let (n, t) = e.masses(s);
                let longer = traj.then(s, *a);
                if n.is_zero() {
                    if !t.is_zero() {
                        report.nothing_unsupported.push(longer);
                    }
                    continue;
                }
                let p2 = p.step(s, *a).expect("supported action");
                let e2 = e.step(*a, Obs { state: s, telos: Telos::Nothing }).expect("supported observation");
                queue.push_back((longer, p2, e2));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::FiniteDist;
    use crate::teleo::{truncate_single_success, zoo};

    fn step(s: u32, a: u32) -> Trajectory<State, Action> {
        Trajectory::empty().then(State(s), Action(a))
    }

    #[test]
    fn testing_is_optimal() {
        let pi = Policy::constant(1, 2, 2);
        let env = zoo::uniform_testing(&pi).unwrap();
        assert!(check_optimal(&pi, &env, 4, ConstraintClass::All).unwrap().is_optimal());
        let other = Policy::constant(0, 2, 2);
        assert!(check_optimal(&other, &env, 4, ConstraintClass::All).unwrap().is_suboptimal());
    }

    #[test]
    fn testing_bellman_passes() {
        let pi = Policy::constant(1, 2, 2);
        let env = zoo::uniform_testing(&pi).unwrap();
        let r = bellman_check(&pi, &env, &step(0, 1), 4).unwrap();
        assert!(r.before.is_optimal() && r.passed());
        assert_eq!(r.evolved_value, Some(Probability::one()));
        assert_eq!(bellman_check(&pi, &env, &step(0, 0), 4).unwrap_err(), Error::InvalidTrajectory);
    }

    #[test]
    fn doom_bellman_trivial() {
        let pi = Policy::constant(0, 2, 2);
        let r = bellman_check(&pi, &zoo::doom(2, 2), &step(1, 0), 3).unwrap();
        assert!(r.before.is_optimal() && r.passed());
    }

    #[test]
    fn tricky_sensorimotor_failure() {
        let pi = Policy::constant(0, 1, 2);
        let other = Policy::constant(1, 1, 2);
        let tricky = zoo::tricky_testing(&pi, &other).unwrap();
        let sm = sensorimotor_bellman_check(&pi, &tricky, &step(0, 0), 8).unwrap();
        assert!(sm.before.is_optimal());
        assert!(sm.after.is_suboptimal());
        assert_eq!(sm.evolved_value, Some(Probability::frac(13, 16)));
        assert!(bellman_check(&pi, &tricky, &step(0, 0), 8).unwrap().passed());
        let z = truncate_single_success(&tricky);
        let zr = sensorimotor_bellman_check(&pi, &z, &step(0, 0), 8).unwrap();
        assert!(zr.passed());
        assert_eq!(zr.evolved_value, Some(Probability::frac(1, 4)));
    }

    #[test]
    fn specifiability() {
        let pi = Policy::constant(1, 2, 3);
        let env = zoo::uniform_testing(&pi).unwrap();
        let r = check_specifiable(&pi, &env, 3).unwrap();
        assert!(r.specifiable, "{r:?}");
        assert!(!check_specifiable(&pi, &zoo::doom(2, 3), 3).unwrap().specifiable);
        let other = Policy::constant(0, 2, 3);
        let tricky = zoo::tricky_testing(&pi, &other).unwrap();
        assert!(check_specifiable(&pi, &tricky, 3).unwrap().specifiable);
        assert!(!check_specifiable(&other, &env, 3).unwrap().specifiable);
    }

    #[test]
    fn preconditions() {
        let pi = Policy::constant(0, 2, 2);
        assert!(specifiability_preconditions(&pi, &zoo::uniform_testing(&pi).unwrap(), 3).clean());
        let r = specifiability_preconditions(&pi, &zoo::success_env(2, 2), 2);
        assert_eq!(r.nothing_unsupported.len(), 2);
        assert!(r.nothing_unsupported.iter().all(|t| t.len() == 1));
        let lonely = TeleoEnvironment::from_fn(vec!["x".into()], vec![FiniteDist::point(Obs::nothing(0))], 0, 2, 2, |_, _, _| 0).unwrap();
        let r = specifiability_preconditions(&pi, &lonely, 1);
        assert_eq!(r.zero_mass_states.first().map(|(t, s)| (t.len(), *s)), Some((0, State(1))));
    }

    #[test]
    fn iid_class_requires_iid() {
        let env = zoo::absent_minded_env();
        let det = zoo::imperfect_mimic_policy(2);
        assert!(matches!(check_optimal(&det, &env, 2, ConstraintClass::Iid(10)), Err(Error::ClassUnsupported(_)) | Err(Error::AlphabetMismatch(_))));
        let half = Policy::iid(FiniteDist::uniform([Action(0), Action(1)]).unwrap(), 1, 2);
        assert!(check_optimal(&half, &env, 2, ConstraintClass::Iid(10)).unwrap().is_optimal());
        assert!(check_optimal(&half, &env, 4, ConstraintClass::All).unwrap().is_suboptimal());
    }
}
