//! Policies, teleo-environments, coupling and success probability.
//!
//! States and actions are small integer ids `0..n`. An environment maps
//! actions to observations `(state, telos)`; the telos channel carries
//! either nothing (`⊥`) or success (`⊤`).

mod chain;
mod couple;
mod success;
mod truncate;
pub mod zoo;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machines::UnifilarMachine;
use crate::prob::{FiniteDist, Probability, Trajectory};
use crate::transducer::{StateKey, Transducer};

pub use chain::solve_reachability;
pub use couple::{couple, CoupledSystem};
pub use success::{success_exact, success_interval, success_prefix, BssPrefix, SuccessInterval, EXACT_STATE_CAP};
pub use truncate::{ambivalent_evolve, doomify, truncate_single_success};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct State(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Action(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Telos {
    Nothing,
    Success,
}

/// Environment output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Obs {
    pub state: State,
    pub telos: Telos,
}

impl Obs {
    pub fn nothing(s: u32) -> Self {
        Obs { state: State(s), telos: Telos::Nothing }
    }

    pub fn success(s: u32) -> Self {
        Obs { state: State(s), telos: Telos::Success }
    }

    pub fn is_success(&self) -> bool {
        self.telos == Telos::Success
    }
}

/// Output of a coupled system.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Joint {
    pub state: State,
    pub telos: Telos,
    pub action: Action,
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// `U_⊥` over `n` states.
pub fn uniform_nothing(n: u32) -> FiniteDist<Obs> {
    FiniteDist::uniform((0..n).map(Obs::nothing)).expect("at least one state")
}

/// `U_⊤` over `n` states.
pub fn uniform_success(n: u32) -> FiniteDist<Obs> {
    FiniteDist::uniform((0..n).map(Obs::success)).expect("at least one state")
}

/// `(1 - p) U_⊥ + p U_⊤`.
pub fn telos_mix(p: &Probability, n: u32) -> FiniteDist<Obs> {
    FiniteDist::mix(&[p.complement(), p.clone()], &[uniform_nothing(n), uniform_success(n)]).expect("normalized")
}

/// Policy: a transducer from states to actions, with alphabet sizes.
#[derive(Clone, Debug)]
pub struct Policy {
    pub t: Transducer<State, Action>,
    pub states: u32,
    pub actions: u32,
}

impl Policy {
    pub fn new(t: Transducer<State, Action>, states: u32, actions: u32) -> Self {
        Policy { t, states, actions }
    }

    pub fn state_alphabet(&self) -> Vec<State> {
        (0..self.states).map(State).collect()
    }

    pub fn action_alphabet(&self) -> Vec<Action> {
        (0..self.actions).map(Action).collect()
    }

    /// Always plays `a`.
    pub fn constant(a: u32, states: u32, actions: u32) -> Self {
        Self::iid(FiniteDist::point(Action(a)), states, actions)
    }

    pub fn iid(dist: FiniteDist<Action>, states: u32, actions: u32) -> Self {
        Policy::new(Transducer::iid((0..states).map(State).collect(), dist), states, actions)
    }

    /// Pointed machine over the policy alphabets.
    pub fn from_machine(machine: Arc<UnifilarMachine<State, Action>>, initial: usize, states: u32, actions: u32) -> Result<Self> {
        Ok(Policy::new(machine.transducer(initial)?, states, actions))
    }

    pub fn step(&self, s: State, a: Action) -> Option<Policy> {
        Some(Policy::new(self.t.step(&s, &a)?, self.states, self.actions))
    }

    pub fn evolve(&self, traj: &Trajectory<State, Action>) -> Option<Policy> {
        Some(Policy::new(self.t.evolve(traj)?, self.states, self.actions))
    }

    /// The single action, if this node is deterministic.
    pub fn point_action(&self) -> Option<Action> {
        self.t.emit().as_point().copied()
    }
}

/// Teleo-environment: a transducer from actions to observations.
#[derive(Clone, Debug)]
pub struct TeleoEnvironment {
    pub t: Transducer<Action, Obs>,
    pub states: u32,
    pub actions: u32,
}

impl TeleoEnvironment {
    pub fn new(t: Transducer<Action, Obs>, states: u32, actions: u32) -> Self {
        TeleoEnvironment { t, states, actions }
    }

    pub fn state_alphabet(&self) -> Vec<State> {
        (0..self.states).map(State).collect()
    }

    pub fn action_alphabet(&self) -> Vec<Action> {
        (0..self.actions).map(Action).collect()
    }

    pub fn emit(&self) -> &FiniteDist<Obs> {
        self.t.emit()
    }

    /// `P(s, ⊥)` and `P(s, ⊤)`.
    pub fn masses(&self, s: State) -> (Probability, Probability) {
        let d = self.t.emit();
        (d.prob(&Obs { state: s, telos: Telos::Nothing }), d.prob(&Obs { state: s, telos: Telos::Success }))
    }

    /// One-step success mass `Σ_s P(s, ⊤)`.
    pub fn success_mass(&self) -> Probability {
        self.t.emit().mass(Obs::is_success)
    }

    pub fn step(&self, a: Action, o: Obs) -> Option<TeleoEnvironment> {
        Some(TeleoEnvironment::new(self.t.step(&a, &o)?, self.states, self.actions))
    }

    /// Value-laden step: evolve by `(a, (s, ⊥))`.
    pub fn step_nothing(&self, a: Action, s: State) -> Option<TeleoEnvironment> {
        self.step(a, Obs { state: s, telos: Telos::Nothing })
    }

    pub fn evolve(&self, traj: &Trajectory<Action, Obs>) -> Option<TeleoEnvironment> {
        Some(TeleoEnvironment::new(self.t.evolve(traj)?, self.states, self.actions))
    }

    pub fn certified(&self) -> bool {
        self.t.certified()
    }

    pub fn key(&self) -> Option<StateKey> {
        self.t.key()
    }

    /// Builds a machine-backed environment from a transition function and
    /// attaches the zero-success certificate.
    pub fn from_fn(
        names: Vec<String>,
        outputs: Vec<FiniteDist<Obs>>,
        initial: usize,
        states: u32,
        actions: u32,
        f: impl FnMut(usize, &Action, &Obs) -> usize,
    ) -> Result<Self> {
        let m = UnifilarMachine::from_fn((0..actions).map(Action).collect(), names, outputs, f)?;
        Self::from_machine(m, initial, states, actions)
    }

    pub fn from_machine(m: UnifilarMachine<Action, Obs>, initial: usize, states: u32, actions: u32) -> Result<Self> {
        let m = Arc::new(m.with_certificate(Obs::is_success));
        Ok(TeleoEnvironment::new(m.transducer(initial)?, states, actions))
    }
}

/// Reachable nodes of a deterministic keyed policy, in discovery order,
/// with the action and successor indices of each. Fails on stochastic
/// nodes, on nodes without keys, or past `cap` nodes.
#[derive(Debug)]
pub(crate) struct DetGraph {
    pub nodes: Vec<Policy>,
    pub action: Vec<Action>,
    pub next: Vec<Vec<usize>>,
}

pub(crate) fn explore_deterministic(policy: &Policy, cap: usize) -> Result<DetGraph> {
    let mut index: HashMap<StateKey, usize> = HashMap::new();
    let mut graph = DetGraph { nodes: Vec::new(), action: Vec::new(), next: Vec::new() };
    let mut queue = VecDeque::new();
    let intern = |p: Policy, graph: &mut DetGraph, index: &mut HashMap<StateKey, usize>, queue: &mut VecDeque<usize>| -> Result<usize> {
        let key = p.t.key().ok_or_else(|| Error::NotFiniteState("policy node without a state key".into()))?;
        if let Some(&k) = index.get(&key) {
            return Ok(k);
        }
        let a = p.point_action().ok_or(Error::NonDeterministicPolicy)?;
        if graph.nodes.len() >= cap {
            return Err(Error::NotFiniteState(format!("more than {cap} reachable policy nodes")));
        }
        let k = graph.nodes.len();
        index.insert(key, k);
        graph.nodes.push(p);
        graph.action.push(a);
        graph.next.push(Vec::new());
        queue.push_back(k);
        Ok(k)
    };
    intern(policy.clone(), &mut graph, &mut index, &mut queue)?;
    while let Some(k) = queue.pop_front() {
        let node = graph.nodes[k].clone();
        let a = graph.action[k];
        let mut row = Vec::new();
        for s in node.state_alphabet() {
            let child = node.step(s, a).expect("point action is supported");
            row.push(intern(child, &mut graph, &mut index, &mut queue)?);
        }
        graph.next[k] = row;
    }
    Ok(graph)
}
