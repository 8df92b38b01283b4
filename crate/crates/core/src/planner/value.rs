use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::prob::{FiniteDist, Probability, Rational};
use crate::teleo::{Action, Obs, Policy, State, TeleoEnvironment, Telos};
use crate::transducer::{fresh_id, Behavior, StateKey, Transducer};

type E = Transducer<Action, Obs>;
type P = Transducer<State, Action>;

/// Finite-horizon deterministic plan. Children are keyed by every state
/// with positive nothing-mass after the chosen action.
#[derive(Debug)]
pub struct PolicyTree {
    id: u64,
    pub horizon: usize,
    pub action: Action,
    /// Whether the chosen action is the only maximizer.
    pub unique_argmax: bool,
    /// Best minus second-best backed-up value, when there is a choice.
    pub margin: Option<Rational>,
    /// Value of this node: success probability within `horizon` more steps.
    pub value: Rational,
    pub children: BTreeMap<State, Arc<PolicyTree>>,
}

impl PolicyTree {
    /// Actions along every root-to-leaf path, for equality checks.
    pub fn same_plan(&self, other: &PolicyTree) -> bool {
        self.horizon == other.horizon
            && self.action == other.action
            && self.children.len() == other.children.len()
            && self.children.iter().zip(&other.children).all(|((s, a), (t, b))| s == t && a.same_plan(b))
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.values().map(|c| c.node_count()).sum::<usize>()
    }

    /// Root action sequence following the least state at each level.
    pub fn leftmost_actions(&self) -> Vec<Action> {
        let mut out = vec![self.action];
        let mut cur = self;
        while let Some((_, c)) = cur.children.iter().next() {
            out.push(c.action);
            cur = c;
        }
        out
    }

    /// Runs the plan as a policy; past the leaves it plays the least
    /// action forever.
    pub fn to_policy(self: &Arc<Self>, states: u32, actions: u32) -> Policy {
        let filler = Transducer::iid((0..states).map(State).collect(), FiniteDist::point(Action(0)));
        Policy::new(Transducer::custom(TreeNode { tree: self.clone(), filler }), states, actions)
    }
}

struct TreeNode {
    tree: Arc<PolicyTree>,
    filler: P,
}

impl Behavior<State, Action> for TreeNode {
    fn emit(&self) -> FiniteDist<Action> {
        FiniteDist::point(self.tree.action)
    }

    fn step(&self, s: &State, _: &Action) -> P {
        match self.tree.children.get(s) {
            Some(c) => Transducer::custom(TreeNode { tree: c.clone(), filler: self.filler.clone() }),
            None => self.filler.clone(),
        }
    }

    fn key(&self) -> Option<StateKey> {
        Some(StateKey::Node(self.tree.id))
    }
}

fn success_mass(e: &E) -> Rational {
    e.emit().iter().filter(|(o, _)| o.telos == Telos::Success).map(|(_, p)| p.value()).sum()
}

fn nothing_masses(e: &E) -> Vec<(State, Rational)> {
    e.emit().iter().filter(|(o, _)| o.telos == Telos::Nothing).map(|(o, p)| (o.state, p.value().clone())).collect()
}

/// Memoized optimal values, upper bounds and plans for one environment
/// family (all nodes share the action alphabet).
pub struct ValueCache {
    actions: u32,
    values: HashMap<(StateKey, usize), Rational>,
    bounds: HashMap<(StateKey, usize), Rational>,
    trees: HashMap<(StateKey, usize), Arc<PolicyTree>>,
}

impl ValueCache {
    pub fn new(actions: u32) -> Self {
        ValueCache { actions, values: HashMap::new(), bounds: HashMap::new(), trees: HashMap::new() }
    }

    /// Backed-up values `Σ_s P(s,⊥) V_{h-1}(ε•(a,(s,⊥)))` per action.
    fn backups(&mut self, e: &E, h: usize) -> Vec<Rational> {
        let masses = nothing_masses(e);
        (0..self.actions)
            .map(|a| {
                let mut q = Rational::zero();
                for (s, m) in &masses {
                    let next = e.step(&Action(a), &Obs { state: *s, telos: Telos::Nothing }).expect("supported");
                    q += m * &self.value(&next, h - 1);
                }
                q
            })
            .collect()
    }

    /// `V_0 = Σ P⊤`, `V_{h+1} = Σ P⊤ + max_a Σ_s P(s,⊥) V_h(ε•(a,(s,⊥)))`.
    pub fn value(&mut self, e: &E, h: usize) -> Rational {
        if e.certified() {
            return Rational::zero();
        }
        let key = e.key().map(|k| (k, h));
        if let Some(k) = &key {
            if let Some(v) = self.values.get(k) {
                return v.clone();
            }
        }
        let mut v = success_mass(e);
        if h > 0 {
            v += self.backups(e, h).into_iter().max().expect("nonempty action alphabet");
        }
        if let Some(k) = key {
            self.values.insert(k, v.clone());
        }
        v
    }

    /// Upper bound on the success probability of any policy: 0 when
    /// certified, 1 at horizon 0, the same backup otherwise; mixtures are
    /// bounded component-wise.
    pub fn upper_bound(&mut self, e: &E, h: usize) -> Rational {
        if e.certified() {
            return Rational::zero();
        }
        if h == 0 {
            return Rational::one();
        }
        let key = e.key().map(|k| (k, h));
        if let Some(k) = &key {
            if let Some(v) = self.bounds.get(k) {
                return v.clone();
            }
        }
        let v = if let Some(parts) = e.components() {
            parts.iter().map(|(w, c)| w.value() * self.upper_bound(c, h)).sum()
        } else {
            let masses = nothing_masses(e);
            let best = (0..self.actions)
                .map(|a| {
                    let mut q = Rational::zero();
                    for (s, m) in &masses {
                        let next = e.step(&Action(a), &Obs { state: *s, telos: Telos::Nothing }).expect("supported");
                        q += m * &self.upper_bound(&next, h - 1);
                    }
                    q
                })
                .max()
                .expect("nonempty action alphabet");
            success_mass(e) + best
        };
        if let Some(k) = key {
            self.bounds.insert(k, v.clone());
        }
        v
    }

    /// Plan choosing the least maximizing action at every node.
    pub fn extract(&mut self, e: &E, h: usize) -> Arc<PolicyTree> {
        let key = e.key().map(|k| (k, h));
        if let Some(k) = &key {
            if let Some(t) = self.trees.get(k) {
                return t.clone();
            }
        }
        let value = self.value(e, h);
        let tree = if h == 0 {
            Arc::new(PolicyTree {
                id: fresh_id(),
                horizon: 0,
                action: Action(0),
                unique_argmax: self.actions == 1,
                margin: None,
                value,
                children: BTreeMap::new(),
            })
        } else {
            let q = self.backups(e, h);
            let (action, unique_argmax, margin) = choose(&q, &(0..self.actions).map(Action).collect::<Vec<_>>());
            let mut children = BTreeMap::new();
            for (s, _) in nothing_masses(e) {
                let next = e.step(&action, &Obs { state: s, telos: Telos::Nothing }).expect("supported");
                children.insert(s, self.extract(&next, h - 1));
            }
            Arc::new(PolicyTree { id: fresh_id(), horizon: h, action, unique_argmax, margin, value, children })
        };
        if let Some(k) = key {
            self.trees.insert(k, tree.clone());
        }
        tree
    }
}

/// Least maximizer, whether it is unique, and the gap to the runner-up.
fn choose(q: &[Rational], actions: &[Action]) -> (Action, bool, Option<Rational>) {
    let best = q.iter().max().expect("nonempty").clone();
    let at = q.iter().position(|v| *v == best).unwrap();
    let ties = q.iter().filter(|v| **v == best).count();
    let runner_up = q.iter().filter(|v| **v != best).max();
    let margin = if q.len() < 2 {
        None
    } else if ties > 1 {
        Some(Rational::zero())
    } else {
        Some(&best - runner_up.expect("another action"))
    };
    (actions[at], ties == 1, margin)
}

pub fn optimal_value(env: &TeleoEnvironment, horizon: usize) -> Probability {
    Probability::new(ValueCache::new(env.actions).value(&env.t, horizon)).expect("value is a probability")
}

pub fn upper_bound(env: &TeleoEnvironment, horizon: usize) -> Probability {
    Probability::new(ValueCache::new(env.actions).upper_bound(&env.t, horizon)).expect("bound is a probability")
}

pub fn extract_optimal_policy(env: &TeleoEnvironment, horizon: usize) -> Arc<PolicyTree> {
    ValueCache::new(env.actions).extract(&env.t, horizon)
}

/// Finite-horizon deterministification: at each node keep only the least
/// supported action of `policy` that maximizes the deterministified
/// continuation. `value` is the success probability within `horizon` steps.
pub fn deterministify(policy: &Policy, env: &TeleoEnvironment, horizon: usize) -> Arc<PolicyTree> {
    let mut memo = HashMap::new();
    determinize_node(&policy.t, &env.t, horizon, &mut memo)
}

fn determinize_node(p: &P, e: &E, h: usize, memo: &mut HashMap<(StateKey, StateKey, usize), Arc<PolicyTree>>) -> Arc<PolicyTree> {
    let key = match (p.key(), e.key()) {
        (Some(a), Some(b)) => Some((a, b, h)),
        _ => None,
    };
    if let Some(k) = &key {
        if let Some(t) = memo.get(k) {
            return t.clone();
        }
    }
    let supported: Vec<Action> = p.emit().support().copied().collect();
    let succ = if e.certified() { Rational::zero() } else { success_mass(e) };
    let tree = if h == 0 || e.certified() {
        let mut children = BTreeMap::new();
        if h > 0 {
            for (s, _) in nothing_masses(e) {
                let p2 = p.step(&s, &supported[0]).expect("supported");
                let e2 = e.step(&supported[0], &Obs { state: s, telos: Telos::Nothing }).expect("supported");
                children.insert(s, determinize_node(&p2, &e2, h - 1, memo));
            }
        }
        Arc::new(PolicyTree {
            id: fresh_id(),
            horizon: h,
            action: supported[0],
            unique_argmax: supported.len() == 1,
            margin: None,
            value: succ,
            children,
        })
    } else {
        let masses = nothing_masses(e);
        let mut per_action = Vec::new();
        for a in &supported {
            let mut q = Rational::zero();
            let mut kids = BTreeMap::new();
            for (s, m) in &masses {
                let p2 = p.step(s, a).expect("supported");
                let e2 = e.step(a, &Obs { state: *s, telos: Telos::Nothing }).expect("supported");
                let child = determinize_node(&p2, &e2, h - 1, memo);
                q += m * &child.value;
                kids.insert(*s, child);
            }
            per_action.push((q, kids));
        }
        let q: Vec<Rational> = per_action.iter().map(|(q, _)| q.clone()).collect();
        let (action, unique_argmax, margin) = choose(&q, &supported);
        let at = supported.iter().position(|a| *a == action).unwrap();
        let (best, children) = per_action.swap_remove(at);
        Arc::new(PolicyTree { id: fresh_id(), horizon: h, action, unique_argmax, margin, value: succ + best, children })
    };
    if let Some(k) = key {
        memo.insert(k, tree.clone());
    }
    tree
}
