use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::machines::UnifilarMachine;
use crate::prob::{FiniteDist, Probability, Rational};
use crate::teleo::{solve_reachability, success_exact, zoo, Action, Obs, Policy, State, TeleoEnvironment, Telos};
use crate::transducer::StateKey;

/// Action weights of a one-state policy.
pub(crate) fn iid_weights(policy: &Policy) -> Option<Vec<Probability>> {
    let (m, state) = policy.t.machine()?;
    if m.len() != 1 {
        return None;
    }
    let d = m.output(state);
    Some(policy.action_alphabet().iter().map(|a| d.prob(a)).collect())
}

/// The i.i.d. policy playing action `k` with probability `weights[k]`.
pub fn iid_policy(weights: &[Probability], states: u32) -> Policy {
    let dist = FiniteDist::new(weights.iter().enumerate().map(|(k, w)| (Action(k as u32), w.clone()))).expect("weights sum to one");
    Policy::iid(dist, states, weights.len() as u32)
}

/// Best grid point of an i.i.d. sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub best: Vec<Probability>,
    pub value: Probability,
    /// No other grid point reaches `value`.
    pub unique: bool,
    pub evaluated: usize,
}

/// All ways to write `total` as an ordered sum of `parts` naturals.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Exact success of every i.i.d. policy whose action probabilities are
/// multiples of `1/resolution`. Ties keep the first grid point, in order of
/// decreasing weight on the least action.
pub fn iid_sweep(env: &TeleoEnvironment, resolution: u32) -> Result<SweepReport> {
    if resolution < 2 {
        return Err(Error::ClassUnsupported("grid resolution must be at least 2".into()));
    }
    let grid = compositions(resolution, env.actions as usize);
    let eval = |c: &Vec<u32>| -> Result<(Vec<Probability>, Probability)> {
        let w: Vec<Probability> = c.iter().map(|&k| Probability::frac(k as i64, resolution as i64)).collect();
        let v = success_exact(&iid_policy(&w, env.states), env)?;
        Ok((w, v))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        grid.par_iter().map(eval).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = grid.iter().map(eval).collect::<Result<_>>()?;
    let value = results.iter().map(|(_, v)| v).max().expect("nonempty grid").clone();
    let mut hits = results.iter().filter(|(_, v)| *v == value);
    let best = hits.next().expect("maximum is attained").0.clone();
    let unique = hits.next().is_none();
    Ok(SweepReport { best, value, unique, evaluated: results.len() })
}

/// Result of enumerating deterministic unifilar policies.
#[derive(Clone, Debug)]
pub struct DetUfsReport {
    pub n: usize,
    pub best_value: Probability,
    pub best: Policy,
    /// Number of enumerated machines reaching `best_value`.
    pub optimal_count: usize,
    pub enumerated: usize,
}

/// Environment nodes reachable on nothing-steps, interned by key.
struct EnvGraph {
    nodes: Vec<TeleoEnvironment>,
    index: HashMap<StateKey, usize>,
    success: Vec<Rational>,
    nothing: Vec<Vec<(State, Rational)>>,
    next: HashMap<(usize, Action, State), Option<usize>>,
}

impl EnvGraph {
    fn new(root: &TeleoEnvironment) -> Result<Self> {
        let mut g = EnvGraph { nodes: Vec::new(), index: HashMap::new(), success: Vec::new(), nothing: Vec::new(), next: HashMap::new() };
        g.intern(root.clone())?;
        Ok(g)
    }

    fn intern(&mut self, e: TeleoEnvironment) -> Result<usize> {
        let key = e.key().ok_or_else(|| Error::NotFiniteState("environment node has no state key".into()))?;
        if let Some(&k) = self.index.get(&key) {
            return Ok(k);
        }
        if self.nodes.len() >= crate::teleo::EXACT_STATE_CAP {
            return Err(Error::NotFiniteState("environment graph too large".into()));
        }
        let k = self.nodes.len();
        self.index.insert(key, k);
        self.success.push(e.success_mass().into_rational());
        self.nothing.push(e.emit().iter().filter(|(o, _)| o.telos == Telos::Nothing).map(|(o, p)| (o.state, p.value().clone())).collect());
        self.nodes.push(e);
        Ok(k)
    }

    /// Successor after `(a, (s, ⊥))`, or `None` if certified.
    fn step(&mut self, e: usize, a: Action, s: State) -> Result<Option<usize>> {
        if let Some(r) = self.next.get(&(e, a, s)) {
            return Ok(*r);
        }
        let child = self.nodes[e].step(a, Obs { state: s, telos: Telos::Nothing }).expect("supported observation");
        let r = if child.certified() { None } else { Some(self.intern(child)?) };
        self.next.insert((e, a, s), r);
        Ok(r)
    }
}

/// Partially specified deterministic machine; unset entries are never
/// reached with a live environment.
#[derive(Clone)]
struct Partial {
    output: Vec<Option<Action>>,
    next: Vec<Vec<Option<usize>>>,
}

enum Hole {
    Output(usize),
    Next(usize, State),
}

enum Closure {
    Hole(Hole),
    Complete { nodes: Vec<(usize, usize)>, rows: Vec<Vec<(usize, Rational)>> },
}

struct Search<'a> {
    env: &'a mut EnvGraph,
    n: usize,
    states: u32,
    actions: u32,
    best: Option<(Rational, Partial)>,
    optimal_count: usize,
    enumerated: usize,
}

impl Search<'_> {
    /// Product nodes reachable from `(0, root)` under `m`, or the first
    /// unset entry met in breadth-first order.
    fn closure(&mut self, m: &Partial) -> Result<Closure> {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut nodes = vec![(0usize, 0usize)];
        index.insert((0, 0), 0);
        let mut rows = Vec::new();
        let mut at = 0;
        while at < nodes.len() {
            let (x, e) = nodes[at];
            let Some(a) = m.output[x] else { return Ok(Closure::Hole(Hole::Output(x))) };
            let mut row = Vec::new();
            for (s, w) in self.env.nothing[e].clone() {
                let Some(e2) = self.env.step(e, a, s)? else { continue };
                let Some(x2) = m.next[x][s.0 as usize] else { return Ok(Closure::Hole(Hole::Next(x, s))) };
                let k = *index.entry((x2, e2)).or_insert_with(|| {
                    nodes.push((x2, e2));
                    nodes.len() - 1
                });
                row.push((k, w));
            }
            rows.push(row);
            at += 1;
        }
        Ok(Closure::Complete { nodes, rows })
    }

    fn run(&mut self, m: &mut Partial) -> Result<()> {
        match self.closure(m)? {
            Closure::Complete { nodes, rows } => {
                let b: Vec<Rational> = nodes.iter().map(|&(_, e)| self.env.success[e].clone()).collect();
                let v = solve_reachability(&b, &rows).swap_remove(0);
                self.enumerated += 1;
                match &self.best {
                    Some((bv, _)) if *bv > v => {}
                    Some((bv, _)) if *bv == v => self.optimal_count += 1,
                    _ => {
                        self.best = Some((v, m.clone()));
                        self.optimal_count = 1;
                    }
                }
            }
            Closure::Hole(Hole::Output(x)) => {
                for a in 0..self.actions {
                    m.output[x] = Some(Action(a));
                    self.run(m)?;
                }
                m.output[x] = None;
            }
            Closure::Hole(Hole::Next(x, s)) => {
                let used = m.output.len();
                for y in 0..=used.min(self.n - 1) {
                    if y == used {
                        m.output.push(None);
                        m.next.push(vec![None; self.states as usize]);
                    }
                    m.next[x][s.0 as usize] = Some(y);
                    self.run(m)?;
                    if y == used {
                        m.output.pop();
                        m.next.pop();
                    }
                }
                m.next[x][s.0 as usize] = None;
            }
        }
        Ok(())
    }

    fn policy(&self, m: &Partial) -> Policy {
        let k = m.output.len();
        let outputs = (0..self.n).map(|x| FiniteDist::point(if x < k { m.output[x].unwrap_or(Action(0)) } else { Action(0) })).collect();
        let names = (0..self.n).map(|x| format!("x{}", x + 1)).collect();
        let next = m.next.clone();
        let machine = UnifilarMachine::from_fn((0..self.states).map(State).collect(), names, outputs, |x, s, _| {
            next.get(x).and_then(|row| row[s.0 as usize]).unwrap_or(0)
        })
        .expect("well-formed");
        Policy::from_machine(Arc::new(machine), 0, self.states, self.actions).expect("state exists")
    }
}

/// Exhaustive search over deterministic unifilar policies with at most `n`
/// memory states. Machines are built lazily in breadth-first canonical
/// order, and only entries that matter while the environment is live are
/// branched on, so each enumerated machine is a distinct behavior up to
/// renaming of memory states.
pub fn det_ufs_search(env: &TeleoEnvironment, n: usize) -> Result<DetUfsReport> {
    if n == 0 {
        return Err(Error::ClassUnsupported("det_ufs needs at least one state".into()));
    }
    let mut graph = EnvGraph::new(env)?;
    if env.certified() {
        let policy = Policy::constant(0, env.states, env.actions);
        return Ok(DetUfsReport { n, best_value: Probability::zero(), best: policy, optimal_count: 1, enumerated: 1 });
    }
    let mut search = Search { env: &mut graph, n, states: env.states, actions: env.actions, best: None, optimal_count: 0, enumerated: 0 };
    let mut m = Partial { output: vec![None], next: vec![vec![None; env.states as usize]] };
    search.run(&mut m)?;
    let (v, best) = search.best.clone().expect("at least one machine");
    Ok(DetUfsReport {
        n,
        best_value: Probability::new(v).expect("probability"),
        best: search.policy(&best),
        optimal_count: search.optimal_count,
        enumerated: search.enumerated,
    })
}

/// Both policies after the same first step, in the same evolved
/// environment.
#[derive(Clone, Debug, Serialize)]
pub struct EvolvedComparison {
    pub state: State,
    pub imperfect: Probability,
    pub alpha: Probability,
}

#[derive(Clone, Debug, Serialize)]
pub struct UfsReport {
    pub n: u32,
    pub alpha: Probability,
    pub policy_value: Probability,
    /// `(2^{n-1} + 2^{n-2} - 1) / (2^n - 1)`.
    pub expected_value: Probability,
    pub alpha_policy_value: Probability,
    pub evolved: Vec<EvolvedComparison>,
    /// The alpha policy does strictly better after every first step.
    pub strict_improvement: bool,
}

pub fn ufs_expected_value(n: u32) -> Probability {
    let two = |k: u32| 1i64 << k;
    Probability::frac(two(n - 1) + two(n - 2) - 1, two(n) - 1)
}

/// The imperfect mimic and the alpha mimic, before and after the first
/// give-up step.
pub fn ufs_counterexample_report(n: u32, alpha: &Probability) -> Result<UfsReport> {
    let env = zoo::counterexample_env(n);
    let pi = zoo::imperfect_mimic_policy(n);
    let alt = zoo::alpha_mimic_policy(n, alpha);
    let give_up = Action(n);
    let mut evolved = Vec::new();
    for s in env.state_alphabet() {
        let e = env.step_nothing(give_up, s).ok_or(Error::InvalidTrajectory)?;
        let p = pi.step(s, give_up).ok_or(Error::InvalidTrajectory)?;
        let q = alt.step(s, give_up).ok_or(Error::InvalidTrajectory)?;
        evolved.push(EvolvedComparison { state: s, imperfect: success_exact(&p, &e)?, alpha: success_exact(&q, &e)? });
    }
    let strict_improvement = evolved.iter().all(|c| c.alpha > c.imperfect);
    Ok(UfsReport {
        n,
        alpha: alpha.clone(),
        policy_value: success_exact(&pi, &env)?,
        expected_value: ufs_expected_value(n),
        alpha_policy_value: success_exact(&alt, &env)?,
        evolved,
        strict_improvement,
    })
}
